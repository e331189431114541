#pragma once

#include <functional>
#include <vector>

#include "pgn/errors.hpp"
#include "pgn/kernels.hpp"
#include "pgn/rng.hpp"

namespace testutil {

inline std::vector<float> rand_vec(size_t n, pgn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

inline std::vector<double> rand_vec_d(size_t n, pgn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// runs f and reports which error code it threw (Internal if none)
inline pgn::ErrorCode thrown_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const pgn::Error& e) {
    return e.code();
  }
  return pgn::ErrorCode::Internal;
}

struct ThreadGuard {
  int prev;
  explicit ThreadGuard(int n) : prev(pgn::kernels::threads()) { pgn::kernels::set_threads(n); }
  ~ThreadGuard() { pgn::kernels::set_threads(prev); }
};

}  // namespace testutil
