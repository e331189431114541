#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pgn/kernels.hpp"
#include "pgn/rng.hpp"
#include "test_util.hpp"

using namespace pgn;
using testutil::rand_vec;
using testutil::ThreadGuard;

namespace {

// independent transposed-operand references built on the plain ref gemm
std::vector<float> transpose_copy(const std::vector<float>& a, int64_t rows, int64_t cols) {
  std::vector<float> t(a.size());
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

}  // namespace

TEST_CASE("gemm matches the serial reference bit for bit") {
  Rng rng(7);
  for (auto [m, k, n] : {std::tuple<int64_t, int64_t, int64_t>{3, 5, 4},
                         {17, 48, 33},
                         {128, 48, 144},
                         {1, 1, 1}}) {
    auto a = rand_vec(static_cast<size_t>(m * k), rng);
    auto b = rand_vec(static_cast<size_t>(k * n), rng);
    std::vector<float> expect(static_cast<size_t>(m * n)), got(static_cast<size_t>(m * n));
    kernels::ref::gemm(a.data(), b.data(), expect.data(), m, k, n);

    ThreadGuard serial(1);
    kernels::gemm(a.data(), b.data(), got.data(), m, k, n);
    CHECK(got == expect);

    ThreadGuard parallel(4);
    kernels::gemm(a.data(), b.data(), got.data(), m, k, n);
    CHECK(got == expect);
  }
}

TEST_CASE("gemm_nt and gemm_tn agree with explicit transposes") {
  Rng rng(11);
  const int64_t m = 21, k = 13, n = 17;
  auto a = rand_vec(static_cast<size_t>(m * k), rng);
  auto bt = rand_vec(static_cast<size_t>(n * k), rng);  // stored [n, k]
  std::vector<float> expect(static_cast<size_t>(m * n)), got(static_cast<size_t>(m * n));
  auto b = transpose_copy(bt, n, k);  // [k, n]
  kernels::ref::gemm(a.data(), b.data(), expect.data(), m, k, n);
  kernels::gemm_nt(a.data(), bt.data(), got.data(), m, k, n);
  CHECK(got == expect);

  // tn: c[k,n] = a^T b with a [m,k]
  auto b2 = rand_vec(static_cast<size_t>(m * n), rng);
  std::vector<float> expect2(static_cast<size_t>(k * n)), got2(static_cast<size_t>(k * n));
  auto at = transpose_copy(a, m, k);  // [k, m]
  kernels::ref::gemm(at.data(), b2.data(), expect2.data(), k, m, n);
  kernels::gemm_tn(a.data(), b2.data(), got2.data(), m, k, n);
  // same sums in the same order (ascending m)
  CHECK(got2 == expect2);
}

TEST_CASE("bmm runs each group like a standalone gemm") {
  Rng rng(3);
  const int64_t g = 5, m = 7, k = 6, n = 8;
  auto a = rand_vec(static_cast<size_t>(g * m * k), rng);
  auto b = rand_vec(static_cast<size_t>(g * k * n), rng);
  std::vector<float> got(static_cast<size_t>(g * m * n));
  kernels::bmm(a.data(), b.data(), got.data(), g, m, k, n, false);
  for (int64_t gi = 0; gi < g; ++gi) {
    std::vector<float> expect(static_cast<size_t>(m * n));
    kernels::ref::gemm(a.data() + gi * m * k, b.data() + gi * k * n, expect.data(), m, k, n);
    for (int64_t i = 0; i < m * n; ++i)
      CHECK(got[static_cast<size_t>(gi * m * n + i)] == expect[static_cast<size_t>(i)]);
  }

  // transposed-b variant against per-group transpose
  auto bt = rand_vec(static_cast<size_t>(g * n * k), rng);
  std::vector<float> got_t(static_cast<size_t>(g * m * n));
  kernels::bmm(a.data(), bt.data(), got_t.data(), g, m, k, n, true);
  for (int64_t gi = 0; gi < g; ++gi) {
    std::vector<float> bslice(bt.begin() + gi * n * k, bt.begin() + (gi + 1) * n * k);
    auto b_full = transpose_copy(bslice, n, k);
    std::vector<float> expect(static_cast<size_t>(m * n));
    kernels::ref::gemm(a.data() + gi * m * k, b_full.data(), expect.data(), m, k, n);
    for (int64_t i = 0; i < m * n; ++i)
      CHECK(got_t[static_cast<size_t>(gi * m * n + i)] ==
            doctest::Approx(expect[static_cast<size_t>(i)]).epsilon(1e-6));
  }
}

TEST_CASE("bmm_tn matches group-wise gemm_tn") {
  Rng rng(13);
  const int64_t g = 4, m = 9, k = 5, n = 6;
  auto a = rand_vec(static_cast<size_t>(g * m * k), rng);
  auto b = rand_vec(static_cast<size_t>(g * m * n), rng);
  std::vector<float> got(static_cast<size_t>(g * k * n));
  kernels::bmm_tn(a.data(), b.data(), got.data(), g, m, k, n);
  for (int64_t gi = 0; gi < g; ++gi) {
    std::vector<float> expect(static_cast<size_t>(k * n));
    kernels::gemm_tn(a.data() + gi * m * k, b.data() + gi * m * n, expect.data(), m, k, n);
    for (int64_t i = 0; i < k * n; ++i)
      CHECK(got[static_cast<size_t>(gi * k * n + i)] == expect[static_cast<size_t>(i)]);
  }
}

TEST_CASE("conv2d matches the serial reference bit for bit") {
  Rng rng(23);
  for (int64_t stride : {1, 2})
    for (int64_t pad : {0, 1, 3}) {
      kernels::ConvShape s{2, 3, 11, 9, 4, 3, 3, stride, pad};
      auto x = rand_vec(static_cast<size_t>(s.batch * s.in_ch * s.in_h * s.in_w), rng);
      auto w = rand_vec(static_cast<size_t>(s.out_ch * s.in_ch * s.kh * s.kw), rng);
      auto bias = rand_vec(static_cast<size_t>(s.out_ch), rng);
      const size_t out_n = static_cast<size_t>(s.batch * s.out_ch * s.out_h() * s.out_w());
      std::vector<float> expect(out_n), got(out_n);
      kernels::ref::conv2d(x.data(), w.data(), bias.data(), expect.data(), s);

      ThreadGuard serial(1);
      kernels::conv2d(x.data(), w.data(), bias.data(), got.data(), s);
      CHECK(got == expect);

      ThreadGuard parallel(3);
      kernels::conv2d(x.data(), w.data(), bias.data(), got.data(), s);
      CHECK(got == expect);
    }
}

TEST_CASE("softmax rows match the serial reference and are thread-count invariant") {
  Rng rng(5);
  const int64_t rows = 400, n = 23;
  auto x = rand_vec(static_cast<size_t>(rows * n), rng, -8.0, 8.0);
  std::vector<float> expect(x.size()), got(x.size());
  kernels::ref::softmax_rows(x.data(), expect.data(), rows, n);
  {
    ThreadGuard serial(1);
    kernels::softmax_rows(x.data(), got.data(), rows, n);
    CHECK(got == expect);
  }
  {
    ThreadGuard parallel(2);
    kernels::softmax_rows(x.data(), got.data(), rows, n);
    CHECK(got == expect);
  }
}

TEST_CASE("layer norm and backward are thread-count invariant") {
  Rng rng(29);
  const int64_t rows = 300, n = 48;
  auto x = rand_vec(static_cast<size_t>(rows * n), rng);
  auto gamma = rand_vec(static_cast<size_t>(n), rng, 0.5, 1.5);
  auto beta = rand_vec(static_cast<size_t>(n), rng);
  auto dy = rand_vec(static_cast<size_t>(rows * n), rng);
  std::vector<float> y1(x.size()), y2(x.size()), m1(rows), r1(rows), m2(rows), r2(rows);
  std::vector<float> dx1(x.size(), 0.0f), dx2(x.size(), 0.0f);
  {
    ThreadGuard serial(1);
    kernels::layer_norm_rows(x.data(), gamma.data(), beta.data(), y1.data(), m1.data(), r1.data(),
                             rows, n, 1e-5f);
    kernels::layer_norm_rows_backward(x.data(), gamma.data(), m1.data(), r1.data(), dy.data(),
                                      dx1.data(), rows, n);
  }
  {
    ThreadGuard parallel(2);
    kernels::layer_norm_rows(x.data(), gamma.data(), beta.data(), y2.data(), m2.data(), r2.data(),
                             rows, n, 1e-5f);
    kernels::layer_norm_rows_backward(x.data(), gamma.data(), m2.data(), r2.data(), dy.data(),
                                      dx2.data(), rows, n);
  }
  CHECK(y1 == y2);
  CHECK(dx1 == dx2);
}

TEST_CASE("max pool picks the first of tied maxima and routes gradients back") {
  // 1x1x4x4 plane, 2x2 window stride 2
  std::vector<float> x = {1, 1, 2, 0,  //
                          1, 1, 0, 2,  //
                          3, 0, 5, 5,  //
                          0, 3, 5, 5};
  std::vector<float> y(4);
  std::vector<int64_t> am(4);
  kernels::max_pool(x.data(), y.data(), am.data(), 1, 1, 4, 4, 2, 2, 0);
  CHECK(y == std::vector<float>{1, 2, 3, 5});
  CHECK(am[0] == 0);   // tie: first scanned
  CHECK(am[1] == 2);   // row 0 col 2
  CHECK(am[3] == 10);  // four-way tie resolves to the first element
  std::vector<float> dy = {1, 1, 1, 1}, dx(16, 0.0f);
  kernels::max_pool_backward(dy.data(), am.data(), dx.data(), 1, 1, 16, 4);
  CHECK(dx[0] == 1.0f);
  CHECK(dx[2] == 1.0f);
  CHECK(dx[8] == 1.0f);
  CHECK(dx[10] == 1.0f);
}
