#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pgn/ops.hpp"
#include "pgn/rng.hpp"
#include "pgn/tensor.hpp"

// Central finite-difference gradient checking. The finite-difference side is
// the independent oracle: it only calls the forward path.

namespace pgn {

template <typename T>
double rel_err(double analytic, double fd) {
  return std::fabs(analytic - fd) / (std::fabs(analytic) + std::fabs(fd) + 1e-8);
}

// f is scalar-valued; returns max over coordinates of the relative error
template <typename T, class F>
double grad_check(F f, Tensor<T> x, T h) {
  x.set_requires_grad(true);
  x.zero_grad();
  Tensor<T> loss = f(x);
  backward(loss);
  std::vector<T> analytic = x.grad();
  double worst = 0.0;
  {
    NoGradGuard ng;
    for (size_t i = 0; i < x.data().size(); ++i) {
      const T keep = x.data()[i];
      x.data()[i] = keep + h;
      const double up = static_cast<double>(f(x).item());
      x.data()[i] = keep - h;
      const double dn = static_cast<double>(f(x).item());
      x.data()[i] = keep;
      const double fd = (up - dn) / (2.0 * static_cast<double>(h));
      worst = std::max(worst, rel_err<T>(static_cast<double>(analytic[i]), fd));
    }
  }
  return worst;
}

struct GradCheckStats {
  double max_rel = 0.0;
  double median_rel = 0.0;
  int64_t coords = 0;
};

// Checks a model's parameters against finite differences, sampling
// coords_per_param coordinates of each parameter (all of them when <= 0).
template <typename T, class LossFn>
GradCheckStats grad_check_params(LossFn loss_fn, const std::vector<Parameter<T>*>& params, T h,
                                 int64_t coords_per_param, Rng& rng) {
  for (auto* p : params) p->tensor.zero_grad();
  Tensor<T> loss = loss_fn();
  backward(loss);

  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) {
    require(p->tensor.has_grad(), ErrorCode::MissingGrad, "no gradient for " + p->name);
    analytic.push_back(p->tensor.grad());
  }

  std::vector<double> errs;
  NoGradGuard ng;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& data = params[pi]->tensor.data();
    const int64_t n = static_cast<int64_t>(data.size());
    std::vector<int64_t> coords;
    if (coords_per_param <= 0 || coords_per_param >= n) {
      coords.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      for (int64_t i = 0; i < coords_per_param; ++i)
        coords.push_back(static_cast<int64_t>(rng.below(static_cast<uint64_t>(n))));
    }
    for (int64_t c : coords) {
      const T keep = data[static_cast<size_t>(c)];
      data[static_cast<size_t>(c)] = keep + h;
      const double up = static_cast<double>(loss_fn().item());
      data[static_cast<size_t>(c)] = keep - h;
      const double dn = static_cast<double>(loss_fn().item());
      data[static_cast<size_t>(c)] = keep;
      const double fd = (up - dn) / (2.0 * static_cast<double>(h));
      errs.push_back(rel_err<T>(static_cast<double>(analytic[pi][static_cast<size_t>(c)]), fd));
    }
  }

  GradCheckStats st;
  st.coords = static_cast<int64_t>(errs.size());
  if (errs.empty()) return st;
  st.max_rel = *std::max_element(errs.begin(), errs.end());
  std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
  st.median_rel = errs[errs.size() / 2];
  return st;
}

}  // namespace pgn
