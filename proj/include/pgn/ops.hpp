#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "pgn/kernels.hpp"
#include "pgn/rng.hpp"
#include "pgn/tensor.hpp"

namespace pgn::ops {

template <typename T>
Tensor<T> make_node(const char* op, std::vector<int64_t> shape, std::vector<T> data,
                    std::vector<Tensor<T>> inputs, std::function<void(TensorImpl<T>&)> bwd) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  if (nan_check_ref())
    for (T v : impl->data)
      require(std::isfinite(static_cast<double>(v)), ErrorCode::Internal,
              std::string("non-finite value out of ") + op);
  bool need = grad_mode_ref();
  if (need) {
    need = false;
    for (const auto& in : inputs) need = need || in.requires_grad();
  }
  if (need) {
    impl->requires_grad = true;
    impl->op = op;
    for (auto& in : inputs) impl->parents.push_back(in.impl());
    impl->backward_fn = std::move(bwd);
  }
  return Tensor<T>(impl);
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), ErrorCode::ShapeMismatch,
          std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// ---------------------------------------------------------------------------
// initialisation helpers
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> randn(std::vector<int64_t> shape, double stddev, Rng& rng, bool truncated = true) {
  std::vector<T> d(static_cast<size_t>(shape_numel(shape)));
  for (auto& v : d)
    v = static_cast<T>(truncated ? rng.trunc_normal(stddev) : rng.normal() * stddev);
  return Tensor<T>::from(std::move(shape), std::move(d));
}

// ---------------------------------------------------------------------------
// matmul family
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b) {
  require(a.rank() == 2 && b.rank() == 2, ErrorCode::ShapeMismatch, "matmul expects rank-2");
  const int64_t m = a.size(0), k = a.size(1), n = b.size(1);
  require(b.size(0) == k, ErrorCode::ShapeMismatch,
          "matmul inner extents " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(static_cast<size_t>(m * n));
  kernels::gemm(a.data().data(), b.data().data(), out.data(), m, k, n);
  auto ai = a.impl(), bi = b.impl();
  return make_node<T>(
      "matmul", {m, n}, std::move(out), {a, b}, [ai, bi, m, k, n](TensorImpl<T>& o) {
        if (ai->requires_grad) {
          std::vector<T> da(static_cast<size_t>(m * k));
          kernels::gemm_nt(o.grad.data(), bi->data.data(), da.data(), m, n, k);
          ai->accumulate(da.data(), m * k);
        }
        if (bi->requires_grad) {
          std::vector<T> db(static_cast<size_t>(k * n));
          kernels::gemm_tn(ai->data.data(), o.grad.data(), db.data(), m, k, n);
          bi->accumulate(db.data(), k * n);
        }
      });
}

// a[m,k] * w[n,k]^T -> [m,n] (linear layer with [out,in] weights)
template <typename T>
Tensor<T> matmul_nt(Tensor<T> a, Tensor<T> w) {
  require(a.rank() == 2 && w.rank() == 2, ErrorCode::ShapeMismatch, "matmul_nt expects rank-2");
  const int64_t m = a.size(0), k = a.size(1), n = w.size(0);
  require(w.size(1) == k, ErrorCode::ShapeMismatch,
          "matmul_nt inner extents " + shape_str(a.shape()) + " vs " + shape_str(w.shape()));
  std::vector<T> out(static_cast<size_t>(m * n));
  kernels::gemm_nt(a.data().data(), w.data().data(), out.data(), m, k, n);
  auto ai = a.impl(), wi = w.impl();
  return make_node<T>(
      "matmul_nt", {m, n}, std::move(out), {a, w}, [ai, wi, m, k, n](TensorImpl<T>& o) {
        if (ai->requires_grad) {
          std::vector<T> da(static_cast<size_t>(m * k));
          kernels::gemm(o.grad.data(), wi->data.data(), da.data(), m, n, k);
          ai->accumulate(da.data(), m * k);
        }
        if (wi->requires_grad) {
          std::vector<T> dw(static_cast<size_t>(n * k));
          kernels::gemm_tn(o.grad.data(), ai->data.data(), dw.data(), m, n, k);
          wi->accumulate(dw.data(), n * k);
        }
      });
}

// batched matmul, a[g,m,k] with b[g,k,n] (or b[g,n,k] when transpose_b)
template <typename T>
Tensor<T> bmm(Tensor<T> a, Tensor<T> b, bool transpose_b = false) {
  require(a.rank() == 3 && b.rank() == 3 && a.size(0) == b.size(0), ErrorCode::ShapeMismatch,
          "bmm expects matching rank-3 groups");
  const int64_t g = a.size(0), m = a.size(1), k = a.size(2);
  const int64_t n = transpose_b ? b.size(1) : b.size(2);
  require((transpose_b ? b.size(2) : b.size(1)) == k, ErrorCode::ShapeMismatch,
          "bmm inner extents " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(static_cast<size_t>(g * m * n));
  kernels::bmm(a.data().data(), b.data().data(), out.data(), g, m, k, n, transpose_b);
  auto ai = a.impl(), bi = b.impl();
  return make_node<T>(
      "bmm", {g, m, n}, std::move(out), {a, b},
      [ai, bi, g, m, k, n, transpose_b](TensorImpl<T>& o) {
        if (ai->requires_grad) {
          std::vector<T> da(static_cast<size_t>(g * m * k));
          // dA = dC * B^T (plain) or dC * B (already [n,k])
          kernels::bmm(o.grad.data(), bi->data.data(), da.data(), g, m, n, k, !transpose_b);
          ai->accumulate(da.data(), g * m * k);
        }
        if (bi->requires_grad) {
          if (!transpose_b) {
            std::vector<T> db(static_cast<size_t>(g * k * n));
            kernels::bmm_tn(ai->data.data(), o.grad.data(), db.data(), g, m, k, n);
            bi->accumulate(db.data(), g * k * n);
          } else {
            // dB[g,n,k] = dC^T * A
            std::vector<T> db(static_cast<size_t>(g * n * k));
            kernels::bmm_tn(o.grad.data(), ai->data.data(), db.data(), g, m, n, k);
            bi->accumulate(db.data(), g * n * k);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
  check_same_shape(a, b, "add");
  const int64_t n = a.numel();
  std::vector<T> out(static_cast<size_t>(n));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  kernels::for_n(n, [&](int64_t i) { out[static_cast<size_t>(i)] = pa[i] + pb[i]; });
  auto ai = a.impl(), bi = b.impl();
  return make_node<T>("add", a.shape(), std::move(out), {a, b}, [ai, bi, n](TensorImpl<T>& o) {
    if (ai->requires_grad) ai->accumulate(o.grad.data(), n);
    if (bi->requires_grad) bi->accumulate(o.grad.data(), n);
  });
}

template <typename T>
Tensor<T> sub(Tensor<T> a, Tensor<T> b) {
  check_same_shape(a, b, "sub");
  const int64_t n = a.numel();
  std::vector<T> out(static_cast<size_t>(n));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  kernels::for_n(n, [&](int64_t i) { out[static_cast<size_t>(i)] = pa[i] - pb[i]; });
  auto ai = a.impl(), bi = b.impl();
  return make_node<T>("sub", a.shape(), std::move(out), {a, b}, [ai, bi, n](TensorImpl<T>& o) {
    if (ai->requires_grad) ai->accumulate(o.grad.data(), n);
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (int64_t i = 0; i < n; ++i) bi->grad[static_cast<size_t>(i)] -= o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
  check_same_shape(a, b, "mul");
  const int64_t n = a.numel();
  std::vector<T> out(static_cast<size_t>(n));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  kernels::for_n(n, [&](int64_t i) { out[static_cast<size_t>(i)] = pa[i] * pb[i]; });
  auto ai = a.impl(), bi = b.impl();
  return make_node<T>("mul", a.shape(), std::move(out), {a, b}, [ai, bi, n](TensorImpl<T>& o) {
    if (ai->requires_grad) {
      ai->ensure_grad();
      for (int64_t i = 0; i < n; ++i) ai->grad[static_cast<size_t>(i)] += o.grad[i] * bi->data[i];
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      for (int64_t i = 0; i < n; ++i) bi->grad[static_cast<size_t>(i)] += o.grad[i] * ai->data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(Tensor<T> x, T c) {
  const int64_t n = x.numel();
  std::vector<T> out(static_cast<size_t>(n));
  const T* px = x.data().data();
  kernels::for_n(n, [&](int64_t i) { out[static_cast<size_t>(i)] = px[i] * c; });
  auto xi = x.impl();
  return make_node<T>("scale", x.shape(), std::move(out), {x}, [xi, c, n](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (int64_t i = 0; i < n; ++i) xi->grad[static_cast<size_t>(i)] += o.grad[i] * c;
  });
}

// broadcast a length-n vector across the last axis
template <typename T>
Tensor<T> add_bias(Tensor<T> x, Tensor<T> bias) {
  require(bias.rank() == 1 && x.rank() >= 1 && x.size(x.rank() - 1) == bias.size(0),
          ErrorCode::ShapeMismatch,
          "add_bias " + shape_str(x.shape()) + " vs " + shape_str(bias.shape()));
  const int64_t n = bias.size(0), rows = x.numel() / n;
  std::vector<T> out(static_cast<size_t>(x.numel()));
  const T* px = x.data().data();
  const T* pb = bias.data().data();
  kernels::for_n(x.numel(),
                 [&](int64_t i) { out[static_cast<size_t>(i)] = px[i] + pb[i % n]; });
  auto xi = x.impl(), bi = bias.impl();
  return make_node<T>("add_bias", x.shape(), std::move(out), {x, bias},
                      [xi, bi, rows, n](TensorImpl<T>& o) {
                        if (xi->requires_grad) xi->accumulate(o.grad.data(), rows * n);
                        if (bi->requires_grad) {
                          bi->ensure_grad();
                          kernels::column_sums(o.grad.data(), bi->grad.data(), rows, n);
                        }
                      });
}

template <typename T>
Tensor<T> relu(Tensor<T> x) {
  const int64_t n = x.numel();
  std::vector<T> out(static_cast<size_t>(n));
  const T* px = x.data().data();
  kernels::for_n(n, [&](int64_t i) { out[static_cast<size_t>(i)] = px[i] > T(0) ? px[i] : T(0); });
  auto xi = x.impl();
  return make_node<T>("relu", x.shape(), std::move(out), {x}, [xi, n](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    // subgradient 0 at the kink
    for (int64_t i = 0; i < n; ++i)
      if (xi->data[static_cast<size_t>(i)] > T(0)) xi->grad[static_cast<size_t>(i)] += o.grad[i];
  });
}

template <typename T>
Tensor<T> gelu(Tensor<T> x) {
  const int64_t n = x.numel();
  std::vector<T> out(static_cast<size_t>(n));
  const T* px = x.data().data();
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  kernels::for_n(n, [&](int64_t i) {
    const double v = static_cast<double>(px[i]);
    out[static_cast<size_t>(i)] = static_cast<T>(v * 0.5 * (1.0 + std::erf(v * inv_sqrt2)));
  });
  auto xi = x.impl();
  return make_node<T>("gelu", x.shape(), std::move(out), {x}, [xi, n](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    for (int64_t i = 0; i < n; ++i) {
      const double v = static_cast<double>(xi->data[static_cast<size_t>(i)]);
      const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      xi->grad[static_cast<size_t>(i)] += o.grad[i] * static_cast<T>(cdf + v * pdf);
    }
  });
}

// ---------------------------------------------------------------------------
// softmax / layer norm (last axis)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> softmax(Tensor<T> x) {
  require(x.rank() >= 1, ErrorCode::ShapeMismatch, "softmax on rank-0");
  const int64_t n = x.size(x.rank() - 1), rows = x.numel() / n;
  std::vector<T> out(static_cast<size_t>(x.numel()));
  kernels::softmax_rows(x.data().data(), out.data(), rows, n);
  auto xi = x.impl();
  return make_node<T>("softmax", x.shape(), std::move(out), {x}, [xi, rows, n](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    kernels::softmax_rows_backward(o.data.data(), o.grad.data(), xi->grad.data(), rows, n);
  });
}

template <typename T>
Tensor<T> layer_norm(Tensor<T> x, Tensor<T> gamma, Tensor<T> beta, T eps = T(1e-5)) {
  require(x.rank() >= 1, ErrorCode::ShapeMismatch, "layer_norm on rank-0");
  const int64_t n = x.size(x.rank() - 1), rows = x.numel() / n;
  require(gamma.rank() == 1 && gamma.size(0) == n && beta.rank() == 1 && beta.size(0) == n,
          ErrorCode::ShapeMismatch, "layer_norm affine shape");
  std::vector<T> out(static_cast<size_t>(x.numel()));
  auto mean = std::make_shared<std::vector<T>>(static_cast<size_t>(rows));
  auto rstd = std::make_shared<std::vector<T>>(static_cast<size_t>(rows));
  kernels::layer_norm_rows(x.data().data(), gamma.data().data(), beta.data().data(), out.data(),
                           mean->data(), rstd->data(), rows, n, eps);
  auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
  return make_node<T>("layer_norm", x.shape(), std::move(out), {x, gamma, beta},
                      [xi, gi, bi, mean, rstd, rows, n](TensorImpl<T>& o) {
                        if (xi->requires_grad) {
                          xi->ensure_grad();
                          kernels::layer_norm_rows_backward(xi->data.data(), gi->data.data(),
                                                            mean->data(), rstd->data(),
                                                            o.grad.data(), xi->grad.data(), rows,
                                                            n);
                        }
                        if (gi->requires_grad) {
                          gi->ensure_grad();
                          kernels::column_dot_norm(xi->data.data(), mean->data(), rstd->data(),
                                                   o.grad.data(), gi->grad.data(), rows, n);
                        }
                        if (bi->requires_grad) {
                          bi->ensure_grad();
                          kernels::column_sums(o.grad.data(), bi->grad.data(), rows, n);
                        }
                      });
}

// ---------------------------------------------------------------------------
// convolution / pooling
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv2d(Tensor<T> x, Tensor<T> w, Tensor<T> bias, int64_t stride, int64_t pad) {
  require(x.rank() == 4 && w.rank() == 4, ErrorCode::ShapeMismatch, "conv2d expects NCHW x OIHW");
  require(x.size(1) == w.size(1), ErrorCode::ShapeMismatch,
          "conv2d channels " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
  require(bias.rank() == 1 && bias.size(0) == w.size(0), ErrorCode::ShapeMismatch, "conv2d bias");
  kernels::ConvShape s{x.size(0), x.size(1), x.size(2), x.size(3),
                       w.size(0), w.size(2), w.size(3), stride,   pad};
  const int64_t oh = s.out_h(), ow = s.out_w();
  require(oh > 0 && ow > 0, ErrorCode::ShapeMismatch, "conv2d output would be empty");
  std::vector<T> out(static_cast<size_t>(s.batch * s.out_ch * oh * ow));
  kernels::conv2d(x.data().data(), w.data().data(), bias.data().data(), out.data(), s);
  auto xi = x.impl(), wi = w.impl(), bi = bias.impl();
  return make_node<T>(
      "conv2d", {s.batch, s.out_ch, oh, ow}, std::move(out), {x, w, bias},
      [xi, wi, bi, s, oh, ow](TensorImpl<T>& o) {
        if (xi->requires_grad) {
          xi->ensure_grad();
          kernels::conv2d_backward_input(o.grad.data(), wi->data.data(), xi->grad.data(), s);
        }
        if (wi->requires_grad) {
          wi->ensure_grad();
          kernels::conv2d_backward_weight(xi->data.data(), o.grad.data(), wi->grad.data(), s);
        }
        if (bi->requires_grad) {
          bi->ensure_grad();
          kernels::conv2d_backward_bias(o.grad.data(), bi->grad.data(), s.batch, s.out_ch,
                                        oh * ow);
        }
      });
}

template <typename T>
Tensor<T> max_pool(Tensor<T> x, int64_t k, int64_t stride, int64_t pad) {
  require(x.rank() == 4, ErrorCode::ShapeMismatch, "max_pool expects NCHW");
  const int64_t b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  const int64_t oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
  require(oh > 0 && ow > 0, ErrorCode::ShapeMismatch, "max_pool output would be empty");
  std::vector<T> out(static_cast<size_t>(b * c * oh * ow));
  auto argmax = std::make_shared<std::vector<int64_t>>(out.size());
  kernels::max_pool(x.data().data(), out.data(), argmax->data(), b, c, h, w, k, stride, pad);
  auto xi = x.impl();
  return make_node<T>("max_pool", {b, c, oh, ow}, std::move(out), {x},
                      [xi, argmax, b, c, h, w, oh, ow](TensorImpl<T>& o) {
                        if (!xi->requires_grad) return;
                        xi->ensure_grad();
                        kernels::max_pool_backward(o.grad.data(), argmax->data(), xi->grad.data(),
                                                   b, c, h * w, oh * ow);
                      });
}

// global average pool NCHW -> [N, C]
template <typename T>
Tensor<T> mean_pool(Tensor<T> x) {
  require(x.rank() == 4, ErrorCode::ShapeMismatch, "mean_pool expects NCHW");
  const int64_t b = x.size(0), c = x.size(1), plane = x.size(2) * x.size(3);
  std::vector<T> out(static_cast<size_t>(b * c));
  const T* px = x.data().data();
  kernels::for_n(b * c, [&](int64_t i) {
    T acc = T(0);
    const T* p = px + i * plane;
    for (int64_t j = 0; j < plane; ++j) acc += p[j];
    out[static_cast<size_t>(i)] = acc / static_cast<T>(plane);
  });
  auto xi = x.impl();
  return make_node<T>("mean_pool", {b, c}, std::move(out), {x},
                      [xi, b, c, plane](TensorImpl<T>& o) {
                        if (!xi->requires_grad) return;
                        xi->ensure_grad();
                        for (int64_t i = 0; i < b * c; ++i) {
                          const T g = o.grad[static_cast<size_t>(i)] / static_cast<T>(plane);
                          T* p = xi->grad.data() + i * plane;
                          for (int64_t j = 0; j < plane; ++j) p[j] += g;
                        }
                      });
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

// mean softmax cross-entropy over rows; labels are class indices
template <typename T>
Tensor<T> cross_entropy_with_logits(Tensor<T> logits, const std::vector<int>& labels) {
  require(logits.rank() == 2, ErrorCode::ShapeMismatch, "cross_entropy expects [batch, classes]");
  const int64_t b = logits.size(0), nc = logits.size(1);
  require(static_cast<int64_t>(labels.size()) == b, ErrorCode::LengthMismatch,
          "labels length " + std::to_string(labels.size()) + " vs batch " + std::to_string(b));
  for (int y : labels)
    require(y >= 0 && y < nc, ErrorCode::IndexOutOfRange, "label " + std::to_string(y));
  auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(b * nc));
  kernels::softmax_rows(logits.data().data(), probs->data(), b, nc);
  const T* pl = logits.data().data();
  double loss = 0.0;
  for (int64_t r = 0; r < b; ++r) {
    const T* row = pl + r * nc;
    T mx = row[0];
    for (int64_t j = 1; j < nc; ++j) mx = std::max(mx, row[j]);
    T lse = T(0);
    for (int64_t j = 0; j < nc; ++j) lse += std::exp(row[j] - mx);
    loss += static_cast<double>(mx) + std::log(static_cast<double>(lse)) -
            static_cast<double>(row[labels[static_cast<size_t>(r)]]);
  }
  auto li = logits.impl();
  auto labels_copy = std::make_shared<std::vector<int>>(labels);
  return make_node<T>("cross_entropy", {}, {static_cast<T>(loss / static_cast<double>(b))},
                      {logits}, [li, probs, labels_copy, b, nc](TensorImpl<T>& o) {
                        if (!li->requires_grad) return;
                        li->ensure_grad();
                        const T g = o.grad[0] / static_cast<T>(b);
                        for (int64_t r = 0; r < b; ++r) {
                          const int y = (*labels_copy)[static_cast<size_t>(r)];
                          for (int64_t j = 0; j < nc; ++j) {
                            T p = (*probs)[static_cast<size_t>(r * nc + j)];
                            if (j == y) p -= T(1);
                            li->grad[static_cast<size_t>(r * nc + j)] += g * p;
                          }
                        }
                      });
}

template <typename T>
Tensor<T> sum_all(Tensor<T> x) {
  double acc = 0.0;
  for (T v : x.data()) acc += static_cast<double>(v);
  auto xi = x.impl();
  const int64_t n = x.numel();
  return make_node<T>("sum", {}, {static_cast<T>(acc)}, {x}, [xi, n](TensorImpl<T>& o) {
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (int64_t i = 0; i < n; ++i) xi->grad[static_cast<size_t>(i)] += o.grad[0];
  });
}

// ---------------------------------------------------------------------------
// layout ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(Tensor<T> x, std::vector<int64_t> shape) {
  require(shape_numel(shape) == x.numel(), ErrorCode::ShapeMismatch,
          "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<T> out = x.data();
  auto xi = x.impl();
  const int64_t n = x.numel();
  return make_node<T>("reshape", std::move(shape), std::move(out), {x},
                      [xi, n](TensorImpl<T>& o) {
                        if (xi->requires_grad) xi->accumulate(o.grad.data(), n);
                      });
}

template <typename T>
Tensor<T> permute(Tensor<T> x, std::vector<int> perm) {
  const int r = x.rank();
  require(static_cast<int>(perm.size()) == r, ErrorCode::ShapeMismatch, "permute rank");
  std::vector<int64_t> oshape(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) oshape[static_cast<size_t>(i)] = x.size(perm[static_cast<size_t>(i)]);
  const auto istr = shape_strides(x.shape());
  const auto ostr = shape_strides(oshape);
  const int64_t n = x.numel();
  std::vector<T> out(static_cast<size_t>(n));
  const T* px = x.data().data();
  // out[o] = in[i]: decompose o in output coords, map through perm
  auto in_index = [&](int64_t o) {
    int64_t rem = o, idx = 0;
    for (int d = 0; d < r; ++d) {
      const int64_t c = rem / ostr[static_cast<size_t>(d)];
      rem %= ostr[static_cast<size_t>(d)];
      idx += c * istr[static_cast<size_t>(perm[static_cast<size_t>(d)])];
    }
    return idx;
  };
  kernels::for_n(n, [&](int64_t o) { out[static_cast<size_t>(o)] = px[in_index(o)]; });
  auto xi = x.impl();
  auto perm_copy = std::make_shared<std::vector<int>>(std::move(perm));
  auto ostr_copy = std::make_shared<std::vector<int64_t>>(ostr);
  auto istr_copy = std::make_shared<std::vector<int64_t>>(istr);
  return make_node<T>("permute", std::move(oshape), std::move(out), {x},
                      [xi, perm_copy, ostr_copy, istr_copy, n, r](TensorImpl<T>& o) {
                        if (!xi->requires_grad) return;
                        xi->ensure_grad();
                        for (int64_t oi = 0; oi < n; ++oi) {
                          int64_t rem = oi, idx = 0;
                          for (int d = 0; d < r; ++d) {
                            const int64_t c = rem / (*ostr_copy)[static_cast<size_t>(d)];
                            rem %= (*ostr_copy)[static_cast<size_t>(d)];
                            idx += c * (*istr_copy)[static_cast<size_t>(
                                           (*perm_copy)[static_cast<size_t>(d)])];
                          }
                          xi->grad[static_cast<size_t>(idx)] += o.grad[static_cast<size_t>(oi)];
                        }
                      });
}

template <typename T>
Tensor<T> transpose(Tensor<T> x) {
  require(x.rank() == 2, ErrorCode::ShapeMismatch, "transpose expects rank-2");
  return permute(x, {1, 0});
}

// concatenate along an axis; inputs agree on every other extent
template <typename T>
Tensor<T> concat(std::vector<Tensor<T>> xs, int axis) {
  require(!xs.empty(), ErrorCode::ShapeMismatch, "concat of nothing");
  const int r = xs[0].rank();
  require(axis >= 0 && axis < r, ErrorCode::ShapeMismatch, "concat axis");
  std::vector<int64_t> oshape = xs[0].shape();
  int64_t axis_total = 0;
  for (auto& x : xs) {
    require(x.rank() == r, ErrorCode::ShapeMismatch, "concat rank");
    for (int d = 0; d < r; ++d)
      require(d == axis || x.size(d) == oshape[static_cast<size_t>(d)], ErrorCode::ShapeMismatch,
              "concat extent at dim " + std::to_string(d));
    axis_total += x.size(axis);
  }
  oshape[static_cast<size_t>(axis)] = axis_total;
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= oshape[static_cast<size_t>(d)];
  for (int d = axis + 1; d < r; ++d) inner *= oshape[static_cast<size_t>(d)];
  std::vector<T> out(static_cast<size_t>(outer * axis_total * inner));
  int64_t off = 0;
  for (auto& x : xs) {
    const int64_t ax = x.size(axis);
    const T* px = x.data().data();
    for (int64_t ou = 0; ou < outer; ++ou)
      std::copy(px + ou * ax * inner, px + (ou + 1) * ax * inner,
                out.data() + (ou * axis_total + off) * inner);
    off += ax;
  }
  std::vector<std::shared_ptr<TensorImpl<T>>> impls;
  for (auto& x : xs) impls.push_back(x.impl());
  return make_node<T>(
      "concat", std::move(oshape), std::move(out), xs,
      [impls, outer, inner, axis_total](TensorImpl<T>& o) {
        int64_t off = 0;
        for (auto& pi : impls) {
          const int64_t ax = pi->numel() / (outer * inner);
          if (pi->requires_grad) {
            pi->ensure_grad();
            for (int64_t ou = 0; ou < outer; ++ou) {
              const T* g = o.grad.data() + (ou * axis_total + off) * inner;
              T* dst = pi->grad.data() + ou * ax * inner;
              for (int64_t i = 0; i < ax * inner; ++i) dst[i] += g[i];
            }
          }
          off += ax;
        }
      });
}

// slice along the last axis
template <typename T>
Tensor<T> slice_last(Tensor<T> x, int64_t start, int64_t len) {
  const int64_t n = x.size(x.rank() - 1);
  require(start >= 0 && len > 0 && start + len <= n, ErrorCode::IndexOutOfRange, "slice_last");
  const int64_t rows = x.numel() / n;
  std::vector<int64_t> oshape = x.shape();
  oshape.back() = len;
  std::vector<T> out(static_cast<size_t>(rows * len));
  const T* px = x.data().data();
  kernels::for_n(rows, [&](int64_t r) {
    std::copy(px + r * n + start, px + r * n + start + len, out.data() + r * len);
  });
  auto xi = x.impl();
  return make_node<T>("slice_last", std::move(oshape), std::move(out), {x},
                      [xi, rows, n, start, len](TensorImpl<T>& o) {
                        if (!xi->requires_grad) return;
                        xi->ensure_grad();
                        for (int64_t r = 0; r < rows; ++r)
                          for (int64_t j = 0; j < len; ++j)
                            xi->grad[static_cast<size_t>(r * n + start + j)] +=
                                o.grad[static_cast<size_t>(r * len + j)];
                      });
}

// pick one middle-axis entry of a rank-3 tensor: [B, S, C], pos -> [B, C]
template <typename T>
Tensor<T> select_mid(Tensor<T> x, int64_t pos) {
  require(x.rank() == 3, ErrorCode::ShapeMismatch, "select_mid expects rank-3");
  const int64_t b = x.size(0), s = x.size(1), c = x.size(2);
  require(pos >= 0 && pos < s, ErrorCode::IndexOutOfRange, "select_mid position");
  std::vector<T> out(static_cast<size_t>(b * c));
  const T* px = x.data().data();
  kernels::for_n(b, [&](int64_t i) {
    std::copy(px + (i * s + pos) * c, px + (i * s + pos + 1) * c, out.data() + i * c);
  });
  auto xi = x.impl();
  return make_node<T>("select_mid", {b, c}, std::move(out), {x},
                      [xi, b, s, c, pos](TensorImpl<T>& o) {
                        if (!xi->requires_grad) return;
                        xi->ensure_grad();
                        for (int64_t i = 0; i < b; ++i)
                          for (int64_t j = 0; j < c; ++j)
                            xi->grad[static_cast<size_t>((i * s + pos) * c + j)] +=
                                o.grad[static_cast<size_t>(i * c + j)];
                      });
}

// gather rows of a [V, C] table; gradients accumulate into repeated rows
template <typename T>
Tensor<T> embedding_lookup(Tensor<T> table, std::vector<int64_t> ids) {
  require(table.rank() == 2, ErrorCode::ShapeMismatch, "embedding_lookup expects [rows, dim]");
  const int64_t v = table.size(0), c = table.size(1);
  for (int64_t id : ids)
    require(id >= 0 && id < v, ErrorCode::IndexOutOfRange, "row id " + std::to_string(id));
  const int64_t m = static_cast<int64_t>(ids.size());
  std::vector<T> out(static_cast<size_t>(m * c));
  const T* pt = table.data().data();
  kernels::for_n(m, [&](int64_t i) {
    std::copy(pt + ids[static_cast<size_t>(i)] * c, pt + (ids[static_cast<size_t>(i)] + 1) * c,
              out.data() + i * c);
  });
  auto ti = table.impl();
  auto ids_copy = std::make_shared<std::vector<int64_t>>(std::move(ids));
  return make_node<T>("embedding_lookup", {m, c}, std::move(out), {table},
                      [ti, ids_copy, m, c](TensorImpl<T>& o) {
                        if (!ti->requires_grad) return;
                        ti->ensure_grad();
                        // serial: repeated ids collide
                        for (int64_t i = 0; i < m; ++i) {
                          T* dst = ti->grad.data() + (*ids_copy)[static_cast<size_t>(i)] * c;
                          const T* g = o.grad.data() + i * c;
                          for (int64_t j = 0; j < c; ++j) dst[j] += g[j];
                        }
                      });
}

// repeat a [K, C] block b times -> [b*K, C] (input-independent prompts)
template <typename T>
Tensor<T> tile_block(Tensor<T> x, int64_t times) {
  require(x.rank() == 2 && times >= 1, ErrorCode::ShapeMismatch, "tile_block");
  const int64_t k = x.size(0), c = x.size(1);
  std::vector<T> out(static_cast<size_t>(times * k * c));
  const T* px = x.data().data();
  kernels::for_n(times, [&](int64_t t) { std::copy(px, px + k * c, out.data() + t * k * c); });
  auto xi = x.impl();
  return make_node<T>("tile_block", {times * k, c}, std::move(out), {x},
                      [xi, times, k, c](TensorImpl<T>& o) {
                        if (!xi->requires_grad) return;
                        xi->ensure_grad();
                        for (int64_t t = 0; t < times; ++t) {
                          const T* g = o.grad.data() + t * k * c;
                          for (int64_t i = 0; i < k * c; ++i) xi->grad[static_cast<size_t>(i)] += g[i];
                        }
                      });
}

// [B, 3, H, W] -> [B*P, 3*s*s] patch rows, row-major patches, channel-major
// within a row
template <typename T>
Tensor<T> patchify(Tensor<T> img, int64_t s) {
  require(img.rank() == 4, ErrorCode::ShapeMismatch, "patchify expects [B,3,H,W]");
  const int64_t b = img.size(0), ch = img.size(1), h = img.size(2), w = img.size(3);
  require(h % s == 0 && w % s == 0, ErrorCode::NotDivisible,
          "image " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by patch " +
              std::to_string(s));
  const int64_t gh = h / s, gw = w / s, p = gh * gw, d = ch * s * s;
  std::vector<T> out(static_cast<size_t>(b * p * d));
  const T* px = img.data().data();
  kernels::for_n(b * p, [&](int64_t bp) {
    const int64_t bi = bp / p, pi = bp % p;
    const int64_t py = pi / gw, pxx = pi % gw;
    T* row = out.data() + bp * d;
    for (int64_t c = 0; c < ch; ++c)
      for (int64_t dy = 0; dy < s; ++dy)
        for (int64_t dx = 0; dx < s; ++dx)
          *row++ = px[((bi * ch + c) * h + py * s + dy) * w + pxx * s + dx];
  });
  auto xi = img.impl();
  return make_node<T>("patchify", {b * p, d}, std::move(out), {img},
                      [xi, b, ch, h, w, s, gh, gw, p, d](TensorImpl<T>& o) {
                        if (!xi->requires_grad) return;
                        xi->ensure_grad();
                        for (int64_t bp = 0; bp < b * p; ++bp) {
                          const int64_t bi = bp / p, pi = bp % p;
                          const int64_t py = pi / gw, pxx = pi % gw;
                          const T* row = o.grad.data() + bp * d;
                          for (int64_t c = 0; c < ch; ++c)
                            for (int64_t dy = 0; dy < s; ++dy)
                              for (int64_t dx = 0; dx < s; ++dx)
                                xi->grad[static_cast<size_t>(
                                    ((bi * ch + c) * h + py * s + dy) * w + pxx * s + dx)] +=
                                    *row++;
                        }
                      });
}

// argmax per row, ties to the lowest index (no gradient)
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& x) {
  require(x.rank() == 2, ErrorCode::ShapeMismatch, "argmax_rows expects rank-2");
  const int64_t rows = x.size(0), n = x.size(1);
  std::vector<int> out(static_cast<size_t>(rows));
  const T* px = x.data().data();
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = px + r * n;
    int best = 0;
    for (int64_t j = 1; j < n; ++j)
      if (row[j] > row[best]) best = static_cast<int>(j);
    out[static_cast<size_t>(r)] = best;
  }
  return out;
}

}  // namespace pgn::ops
