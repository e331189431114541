#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "pgn/rng.hpp"

using namespace pgn;

TEST_CASE("splitmix64 reproduces the reference output stream") {
  SplitMix64 sm(0);
  CHECK(sm.next() == 0xe220a8397b1dcdafULL);
  CHECK(sm.next() == 0x6e789e6aa1b965f4ULL);
  CHECK(sm.next() == 0x06c45d188009454fULL);

  SplitMix64 sm42(42);
  CHECK(sm42.next() == 0xbdd732262feb6e95ULL);
  CHECK(sm42.next() == 0x28efe333b266f103ULL);
}

TEST_CASE("xoshiro256** seeded through splitmix64 reproduces reference outputs") {
  Rng rng(0);
  CHECK(rng.next_u64() == 0x99ec5f36cb75f2b4ULL);
  CHECK(rng.next_u64() == 0xbf6e1f784956452aULL);
  CHECK(rng.next_u64() == 0x1a5f849d4933e6e0ULL);
  CHECK(rng.next_u64() == 0x6aa594f1262d2d2cULL);
}

TEST_CASE("uniform stays in range and below() is unbiased enough to cover all bins") {
  Rng rng(7);
  std::map<uint64_t, int> counts;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    ++counts[rng.below(7)];
  }
  CHECK(counts.size() == 7);
  for (auto& [_, c] : counts) CHECK(c > 1000);
}

TEST_CASE("truncated normal rejects beyond two standard deviations") {
  Rng rng(9);
  for (int i = 0; i < 5000; ++i) CHECK(std::fabs(rng.trunc_normal(0.02)) <= 0.04);
}

TEST_CASE("same seed, same stream") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}
