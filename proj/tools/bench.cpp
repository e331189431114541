// Compares the plain serial reference kernels against the OpenMP kernels at
// 1 and N threads on training-shaped problems. Build target: pgn_bench.

#include <chrono>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "pgn/kernels.hpp"
#include "pgn/rng.hpp"

using namespace pgn;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
double time_gflops(double flops, F body) {
  body();  // warm
  int iters = 1;
  double dt = 0.0;
  for (;;) {
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < iters; ++i) body();
    dt = seconds_since(t0);
    if (dt > 0.25 || iters > (1 << 20)) break;
    iters *= 4;
  }
  return flops * iters / dt / 1e9;
}

void bench_gemm(int64_t m, int64_t k, int64_t n, int hw_threads) {
  Rng rng(1);
  std::vector<float> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(k * n)),
      c(static_cast<size_t>(m * n));
  for (auto& v : a) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : b) v = static_cast<float>(rng.uniform(-1, 1));
  const double flops = 2.0 * static_cast<double>(m) * k * n;

  const double ref =
      time_gflops(flops, [&] { kernels::ref::gemm(a.data(), b.data(), c.data(), m, k, n); });
  kernels::set_threads(1);
  const double serial =
      time_gflops(flops, [&] { kernels::gemm(a.data(), b.data(), c.data(), m, k, n); });
  kernels::set_threads(hw_threads);
  const double par =
      time_gflops(flops, [&] { kernels::gemm(a.data(), b.data(), c.data(), m, k, n); });
  std::printf("gemm   %5ldx%4ldx%4ld   ref %7.2f   omp(1) %7.2f   omp(%d) %7.2f GFLOP/s\n",
              static_cast<long>(m), static_cast<long>(k), static_cast<long>(n), ref, serial,
              hw_threads, par);
}

void bench_conv(kernels::ConvShape s, int hw_threads) {
  Rng rng(2);
  std::vector<float> x(static_cast<size_t>(s.batch * s.in_ch * s.in_h * s.in_w));
  std::vector<float> w(static_cast<size_t>(s.out_ch * s.in_ch * s.kh * s.kw));
  std::vector<float> bias(static_cast<size_t>(s.out_ch));
  std::vector<float> y(static_cast<size_t>(s.batch * s.out_ch * s.out_h() * s.out_w()));
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : w) v = static_cast<float>(rng.uniform(-1, 1));
  const double flops = 2.0 * static_cast<double>(s.batch) * s.out_ch * s.out_h() * s.out_w() *
                       s.in_ch * s.kh * s.kw;

  const double ref =
      time_gflops(flops, [&] { kernels::ref::conv2d(x.data(), w.data(), bias.data(), y.data(), s); });
  kernels::set_threads(1);
  const double serial =
      time_gflops(flops, [&] { kernels::conv2d(x.data(), w.data(), bias.data(), y.data(), s); });
  kernels::set_threads(hw_threads);
  const double par =
      time_gflops(flops, [&] { kernels::conv2d(x.data(), w.data(), bias.data(), y.data(), s); });
  std::printf("conv2d b%ld %ldc->%ldc %ldx%ld k%ld   ref %7.2f   omp(1) %7.2f   omp(%d) %7.2f GFLOP/s\n",
              static_cast<long>(s.batch), static_cast<long>(s.in_ch), static_cast<long>(s.out_ch),
              static_cast<long>(s.in_h), static_cast<long>(s.in_w), static_cast<long>(s.kh), ref,
              serial, hw_threads, par);
}

}  // namespace

int main(int argc, char** argv) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (argc > 1) hw = std::atoi(argv[1]);
  std::printf("threads for the parallel column: %d\n", hw);

  // linear layers at batch 64/128, sequence ~21-73 tokens
  bench_gemm(1344, 48, 144, hw);
  bench_gemm(3200, 48, 192, hw);
  bench_gemm(3200, 192, 48, hw);
  bench_gemm(4672, 48, 144, hw);
  // classifier / head shapes
  bench_gemm(128, 300, 128, hw);
  bench_gemm(128, 128, 512, hw);

  // backbone stem and a mid stage
  bench_conv({64, 3, 32, 32, 16, 7, 7, 2, 3}, hw);
  bench_conv({64, 16, 8, 8, 32, 3, 3, 2, 1}, hw);
  kernels::set_threads(1);
  return 0;
}
