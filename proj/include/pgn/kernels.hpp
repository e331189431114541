#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pgn/errors.hpp"

// Compute kernels. Every kernel is written so that each output element is
// accumulated in a fixed serial order (inner index ascending); OpenMP only
// distributes whole output elements/rows across threads. Results are
// therefore bit-identical for any thread count, which the tests assert
// against the plain serial references in kernels::ref.

namespace pgn::kernels {

inline int& thread_count_ref() {
  static int n = 1;
  return n;
}

inline void set_threads(int n) { thread_count_ref() = n < 1 ? 1 : n; }
inline int threads() { return thread_count_ref(); }

// minimum number of scalar ops before a kernel goes parallel
constexpr int64_t kParallelGrain = 16384;

inline bool go_parallel(int64_t work) { return threads() > 1 && work >= kParallelGrain; }

// ---------------------------------------------------------------------------
// GEMM family. C[m,n] = A[m,k] * B[k,n]; accumulation over k ascending via a
// saxpy inner loop (vectorizes over n, no reduction reassociation).
// ---------------------------------------------------------------------------

template <typename T>
void gemm(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  const int64_t work = m * k * n;
  const int tc = threads();
#pragma omp parallel for schedule(static) num_threads(tc) if (go_parallel(work))
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
    const T* arow = a + i * k;
    for (int64_t kk = 0; kk < k; ++kk) {
      const T av = arow[kk];
      const T* brow = b + kk * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void transpose(const T* a, T* at, int64_t rows, int64_t cols) {
  const int tc = threads();
#pragma omp parallel for schedule(static) num_threads(tc) if (go_parallel(rows* cols))
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) at[j * rows + i] = a[i * cols + j];
}

// C[m,n] = A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  std::vector<T> bt(static_cast<size_t>(k) * n);
  transpose(b, bt.data(), n, k);
  gemm(a, bt.data(), c, m, k, n);
}

// C[k,n] = A[m,k]^T * B[m,n]; accumulation over m ascending.
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  const int64_t work = m * k * n;
  const int tc = threads();
#pragma omp parallel for schedule(static) num_threads(tc) if (go_parallel(work))
  for (int64_t kk = 0; kk < k; ++kk) {
    T* crow = c + kk * n;
    for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
    for (int64_t i = 0; i < m; ++i) {
      const T av = a[i * k + kk];
      const T* brow = b + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Batched GEMM over g independent problems (attention heads).
template <typename T>
void bmm(const T* a, const T* b, T* c, int64_t g, int64_t m, int64_t k, int64_t n,
         bool transpose_b) {
  const int64_t work = g * m * k * n;
  const int tc = threads();
  if (!transpose_b) {
#pragma omp parallel for collapse(2) schedule(static) num_threads(tc) if (go_parallel(work))
    for (int64_t gi = 0; gi < g; ++gi)
      for (int64_t i = 0; i < m; ++i) {
        const T* ag = a + gi * m * k + i * k;
        const T* bg = b + gi * k * n;
        T* crow = c + gi * m * n + i * n;
        for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
        for (int64_t kk = 0; kk < k; ++kk) {
          const T av = ag[kk];
          const T* brow = bg + kk * n;
          for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
      }
  } else {
    // B is [g, n, k]; dot products over k ascending
#pragma omp parallel for collapse(2) schedule(static) num_threads(tc) if (go_parallel(work))
    for (int64_t gi = 0; gi < g; ++gi)
      for (int64_t i = 0; i < m; ++i) {
        const T* ag = a + gi * m * k + i * k;
        const T* bg = b + gi * n * k;
        T* crow = c + gi * m * n + i * n;
        for (int64_t j = 0; j < n; ++j) {
          T acc = T(0);
          const T* brow = bg + j * k;
          for (int64_t kk = 0; kk < k; ++kk) acc += ag[kk] * brow[kk];
          crow[j] = acc;
        }
      }
  }
}

// C[g,k,n] = A[g,m,k]^T * B[g,m,n] per group; accumulation over m ascending.
template <typename T>
void bmm_tn(const T* a, const T* b, T* c, int64_t g, int64_t m, int64_t k, int64_t n) {
  const int64_t work = g * m * k * n;
  const int tc = threads();
#pragma omp parallel for collapse(2) schedule(static) num_threads(tc) if (go_parallel(work))
  for (int64_t gi = 0; gi < g; ++gi)
    for (int64_t kk = 0; kk < k; ++kk) {
      const T* ag = a + gi * m * k;
      const T* bg = b + gi * m * n;
      T* crow = c + gi * k * n + kk * n;
      for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
      for (int64_t i = 0; i < m; ++i) {
        const T av = ag[i * k + kk];
        const T* brow = bg + i * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
}

// generic element-parallel loop (elementwise forward/backward bodies)
template <class F>
void for_n(int64_t n, F f) {
  const int tc = threads();
#pragma omp parallel for schedule(static) num_threads(tc) if (go_parallel(n * 8))
  for (int64_t i = 0; i < n; ++i) f(i);
}

// ---------------------------------------------------------------------------
// Row-wise softmax / layer norm
// ---------------------------------------------------------------------------

template <typename T>
void softmax_rows(const T* x, T* y, int64_t rows, int64_t n) {
  const int tc = threads();
#pragma omp parallel for schedule(static) num_threads(tc) if (go_parallel(rows* n * 4))
  for (int64_t r = 0; r < rows; ++r) {
    const T* xi = x + r * n;
    T* yi = y + r * n;
    T mx = xi[0];
    for (int64_t j = 1; j < n; ++j) mx = xi[j] > mx ? xi[j] : mx;
    T sum = T(0);
    for (int64_t j = 0; j < n; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      sum += yi[j];
    }
    const T inv = T(1) / sum;
    for (int64_t j = 0; j < n; ++j) yi[j] *= inv;
  }
}

// dx = y * (dy - sum(dy * y)) per row
template <typename T>
void softmax_rows_backward(const T* y, const T* dy, T* dx, int64_t rows, int64_t n) {
  const int tc = threads();
#pragma omp parallel for schedule(static) num_threads(tc) if (go_parallel(rows* n * 4))
  for (int64_t r = 0; r < rows; ++r) {
    const T* yi = y + r * n;
    const T* di = dy + r * n;
    T* xi = dx + r * n;
    T dot = T(0);
    for (int64_t j = 0; j < n; ++j) dot += di[j] * yi[j];
    for (int64_t j = 0; j < n; ++j) xi[j] += yi[j] * (di[j] - dot);
  }
}

template <typename T>
void layer_norm_rows(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd,
                     int64_t rows, int64_t n, T eps) {
  const int tc = threads();
#pragma omp parallel for schedule(static) num_threads(tc) if (go_parallel(rows* n * 6))
  for (int64_t r = 0; r < rows; ++r) {
    const T* xi = x + r * n;
    T* yi = y + r * n;
    T mu = T(0);
    for (int64_t j = 0; j < n; ++j) mu += xi[j];
    mu /= static_cast<T>(n);
    T var = T(0);
    for (int64_t j = 0; j < n; ++j) {
      const T d = xi[j] - mu;
      var += d * d;
    }
    var /= static_cast<T>(n);
    const T rs = T(1) / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    for (int64_t j = 0; j < n; ++j) yi[j] = (xi[j] - mu) * rs * gamma[j] + beta[j];
  }
}

template <typename T>
void layer_norm_rows_backward(const T* x, const T* gamma, const T* mean, const T* rstd,
                              const T* dy, T* dx, int64_t rows, int64_t n) {
  const int tc = threads();
#pragma omp parallel for schedule(static) num_threads(tc) if (go_parallel(rows* n * 8))
  for (int64_t r = 0; r < rows; ++r) {
    const T* xi = x + r * n;
    const T* di = dy + r * n;
    T* oi = dx + r * n;
    const T mu = mean[r];
    const T rs = rstd[r];
    T a = T(0), b = T(0);
    for (int64_t j = 0; j < n; ++j) {
      const T xh = (xi[j] - mu) * rs;
      const T dxh = di[j] * gamma[j];
      a += dxh;
      b += dxh * xh;
    }
    a /= static_cast<T>(n);
    b /= static_cast<T>(n);
    for (int64_t j = 0; j < n; ++j) {
      const T xh = (xi[j] - mu) * rs;
      oi[j] += rs * (di[j] * gamma[j] - a - xh * b);
    }
  }
}

// column sums over rows (bias/affine grads); accumulation over rows ascending
template <typename T>
void column_sums(const T* x, T* out, int64_t rows, int64_t n) {
  const int tc = threads();
#pragma omp parallel for schedule(static) num_threads(tc) if (go_parallel(rows* n))
  for (int64_t j = 0; j < n; ++j) {
    T acc = T(0);
    for (int64_t r = 0; r < rows; ++r) acc += x[r * n + j];
    out[j] += acc;
  }
}

// per-column sum of dy[r][j] * xhat[r][j] (layer-norm gamma grad)
template <typename T>
void column_dot_norm(const T* x, const T* mean, const T* rstd, const T* dy, T* dgamma,
                     int64_t rows, int64_t n) {
  const int tc = threads();
#pragma omp parallel for schedule(static) num_threads(tc) if (go_parallel(rows* n))
  for (int64_t j = 0; j < n; ++j) {
    T acc = T(0);
    for (int64_t r = 0; r < rows; ++r) acc += dy[r * n + j] * (x[r * n + j] - mean[r]) * rstd[r];
    dgamma[j] += acc;
  }
}

// ---------------------------------------------------------------------------
// conv2d (NCHW), direct form
// ---------------------------------------------------------------------------

struct ConvShape {
  int64_t batch, in_ch, in_h, in_w;
  int64_t out_ch, kh, kw;
  int64_t stride, pad;
  int64_t out_h() const { return (in_h + 2 * pad - kh) / stride + 1; }
  int64_t out_w() const { return (in_w + 2 * pad - kw) / stride + 1; }
};

template <typename T>
void conv2d(const T* x, const T* w, const T* bias, T* y, const ConvShape& s) {
  const int64_t oh = s.out_h(), ow = s.out_w();
  const int64_t work = s.batch * s.out_ch * oh * ow * s.in_ch * s.kh * s.kw;
  const int tc = threads();
#pragma omp parallel for collapse(3) schedule(static) num_threads(tc) if (go_parallel(work))
  for (int64_t b = 0; b < s.batch; ++b)
    for (int64_t oc = 0; oc < s.out_ch; ++oc)
      for (int64_t oy = 0; oy < oh; ++oy) {
        T* yrow = y + ((b * s.out_ch + oc) * oh + oy) * ow;
        for (int64_t ox = 0; ox < ow; ++ox) {
          T acc = bias ? bias[oc] : T(0);
          for (int64_t ic = 0; ic < s.in_ch; ++ic)
            for (int64_t ky = 0; ky < s.kh; ++ky) {
              const int64_t iy = oy * s.stride + ky - s.pad;
              if (iy < 0 || iy >= s.in_h) continue;
              const T* xrow = x + ((b * s.in_ch + ic) * s.in_h + iy) * s.in_w;
              const T* wrow = w + ((oc * s.in_ch + ic) * s.kh + ky) * s.kw;
              for (int64_t kx = 0; kx < s.kw; ++kx) {
                const int64_t ix = ox * s.stride + kx - s.pad;
                if (ix < 0 || ix >= s.in_w) continue;
                acc += xrow[ix] * wrow[kx];
              }
            }
          yrow[ox] = acc;
        }
      }
}

template <typename T>
void conv2d_backward_input(const T* dy, const T* w, T* dx, const ConvShape& s) {
  const int64_t oh = s.out_h(), ow = s.out_w();
  const int64_t work = s.batch * s.in_ch * s.in_h * s.in_w * s.out_ch * s.kh;
  const int tc = threads();
#pragma omp parallel for collapse(3) schedule(static) num_threads(tc) if (go_parallel(work))
  for (int64_t b = 0; b < s.batch; ++b)
    for (int64_t ic = 0; ic < s.in_ch; ++ic)
      for (int64_t iy = 0; iy < s.in_h; ++iy)
        for (int64_t ix = 0; ix < s.in_w; ++ix) {
          T acc = T(0);
          for (int64_t oc = 0; oc < s.out_ch; ++oc)
            for (int64_t ky = 0; ky < s.kh; ++ky) {
              const int64_t ty = iy + s.pad - ky;
              if (ty < 0 || ty % s.stride != 0) continue;
              const int64_t oy = ty / s.stride;
              if (oy >= oh) continue;
              for (int64_t kx = 0; kx < s.kw; ++kx) {
                const int64_t tx = ix + s.pad - kx;
                if (tx < 0 || tx % s.stride != 0) continue;
                const int64_t ox = tx / s.stride;
                if (ox >= ow) continue;
                acc += dy[((b * s.out_ch + oc) * oh + oy) * ow + ox] *
                       w[((oc * s.in_ch + ic) * s.kh + ky) * s.kw + kx];
              }
            }
          dx[((b * s.in_ch + ic) * s.in_h + iy) * s.in_w + ix] += acc;
        }
}

template <typename T>
void conv2d_backward_weight(const T* x, const T* dy, T* dw, const ConvShape& s) {
  const int64_t oh = s.out_h(), ow = s.out_w();
  const int64_t work = s.out_ch * s.in_ch * s.kh * s.kw * s.batch * oh * ow;
  const int tc = threads();
#pragma omp parallel for collapse(3) schedule(static) num_threads(tc) if (go_parallel(work))
  for (int64_t oc = 0; oc < s.out_ch; ++oc)
    for (int64_t ic = 0; ic < s.in_ch; ++ic)
      for (int64_t ky = 0; ky < s.kh; ++ky)
        for (int64_t kx = 0; kx < s.kw; ++kx) {
          T acc = T(0);
          for (int64_t b = 0; b < s.batch; ++b)
            for (int64_t oy = 0; oy < oh; ++oy) {
              const int64_t iy = oy * s.stride + ky - s.pad;
              if (iy < 0 || iy >= s.in_h) continue;
              for (int64_t ox = 0; ox < ow; ++ox) {
                const int64_t ix = ox * s.stride + kx - s.pad;
                if (ix < 0 || ix >= s.in_w) continue;
                acc += dy[((b * s.out_ch + oc) * oh + oy) * ow + ox] *
                       x[((b * s.in_ch + ic) * s.in_h + iy) * s.in_w + ix];
              }
            }
          dw[((oc * s.in_ch + ic) * s.kh + ky) * s.kw + kx] += acc;
        }
}

template <typename T>
void conv2d_backward_bias(const T* dy, T* db, int64_t batch, int64_t out_ch, int64_t plane) {
  const int tc = threads();
#pragma omp parallel for schedule(static) num_threads(tc) if (go_parallel(batch* out_ch* plane))
  for (int64_t oc = 0; oc < out_ch; ++oc) {
    T acc = T(0);
    for (int64_t b = 0; b < batch; ++b) {
      const T* p = dy + (b * out_ch + oc) * plane;
      for (int64_t i = 0; i < plane; ++i) acc += p[i];
    }
    db[oc] += acc;
  }
}

// ---------------------------------------------------------------------------
// max pooling (NCHW); ties resolve to the first window element scanned
// ---------------------------------------------------------------------------

template <typename T>
void max_pool(const T* x, T* y, int64_t* argmax, int64_t batch, int64_t ch, int64_t in_h,
              int64_t in_w, int64_t k, int64_t stride, int64_t pad) {
  const int64_t oh = (in_h + 2 * pad - k) / stride + 1;
  const int64_t ow = (in_w + 2 * pad - k) / stride + 1;
  const int tc = threads();
#pragma omp parallel for collapse(2) schedule(static) \
    num_threads(tc) if (go_parallel(batch* ch* oh* ow* k* k))
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t c = 0; c < ch; ++c) {
      const T* plane = x + (b * ch + c) * in_h * in_w;
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
          T best = T(0);
          int64_t besti = -1;
          for (int64_t ky = 0; ky < k; ++ky) {
            const int64_t iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= in_h) continue;
            for (int64_t kx = 0; kx < k; ++kx) {
              const int64_t ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= in_w) continue;
              const T v = plane[iy * in_w + ix];
              if (besti < 0 || v > best) {
                best = v;
                besti = iy * in_w + ix;
              }
            }
          }
          const int64_t o = ((b * ch + c) * oh + oy) * ow + ox;
          y[o] = besti < 0 ? T(0) : best;
          argmax[o] = besti;
        }
    }
}

template <typename T>
void max_pool_backward(const T* dy, const int64_t* argmax, T* dx, int64_t batch, int64_t ch,
                       int64_t in_plane, int64_t out_plane) {
  const int tc = threads();
  // scatter stays within one (b, c) plane, so planes parallelize safely
#pragma omp parallel for collapse(2) schedule(static) \
    num_threads(tc) if (go_parallel(batch* ch* out_plane * 4))
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t c = 0; c < ch; ++c) {
      const int64_t base = (b * ch + c);
      T* dplane = dx + base * in_plane;
      const T* dyp = dy + base * out_plane;
      const int64_t* am = argmax + base * out_plane;
      for (int64_t i = 0; i < out_plane; ++i)
        if (am[i] >= 0) dplane[am[i]] += dyp[i];
    }
}

// ---------------------------------------------------------------------------
// Plain serial references. Independent straightforward code with the same
// accumulation order as the kernels above; the tests require bit equality.
// ---------------------------------------------------------------------------

namespace ref {

template <typename T>
void gemm(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) c[i * n + j] = T(0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t kk = 0; kk < k; ++kk)
      for (int64_t j = 0; j < n; ++j) c[i * n + j] += a[i * k + kk] * b[kk * n + j];
}

template <typename T>
void softmax_rows(const T* x, T* y, int64_t rows, int64_t n) {
  for (int64_t r = 0; r < rows; ++r) {
    T mx = x[r * n];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, x[r * n + j]);
    T sum = T(0);
    for (int64_t j = 0; j < n; ++j) {
      y[r * n + j] = std::exp(x[r * n + j] - mx);
      sum += y[r * n + j];
    }
    for (int64_t j = 0; j < n; ++j) y[r * n + j] *= T(1) / sum;
  }
}

template <typename T>
void conv2d(const T* x, const T* w, const T* bias, T* y, const ConvShape& s) {
  const int64_t oh = s.out_h(), ow = s.out_w();
  for (int64_t b = 0; b < s.batch; ++b)
    for (int64_t oc = 0; oc < s.out_ch; ++oc)
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
          T acc = bias ? bias[oc] : T(0);
          for (int64_t ic = 0; ic < s.in_ch; ++ic)
            for (int64_t ky = 0; ky < s.kh; ++ky)
              for (int64_t kx = 0; kx < s.kw; ++kx) {
                const int64_t iy = oy * s.stride + ky - s.pad;
                const int64_t ix = ox * s.stride + kx - s.pad;
                if (iy < 0 || iy >= s.in_h || ix < 0 || ix >= s.in_w) continue;
                acc += x[((b * s.in_ch + ic) * s.in_h + iy) * s.in_w + ix] *
                       w[((oc * s.in_ch + ic) * s.kh + ky) * s.kw + kx];
              }
          y[((b * s.out_ch + oc) * oh + oy) * ow + ox] = acc;
        }
}

}  // namespace ref

}  // namespace pgn::kernels
