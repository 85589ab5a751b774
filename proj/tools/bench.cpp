// Micro-benchmark of the convolution GEMM backends and one network step.
#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "CLI11.hpp"
#include "pcle/network.hpp"
#include "pcle/simd/gemm.hpp"

using namespace pcle;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void bench_gemm(int m, int n, int k) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> a(static_cast<std::size_t>(m) * k), b(static_cast<std::size_t>(k) * n), c(static_cast<std::size_t>(m) * n);
  for (auto& v : a) v = u(rng);
  for (auto& v : b) v = u(rng);
  for (simd::Backend be : {simd::Backend::scalar, simd::Backend::avx2}) {
    if (be == simd::Backend::avx2 && !simd::avx2_supported()) continue;
    simd::set_backend(be);
    int reps = 0;
    const auto t0 = Clock::now();
    do {
      simd::gemm(simd::Trans::no, simd::Trans::no, m, n, k, a.data(), k, b.data(), n, c.data(), n, false);
      ++reps;
    } while (seconds_since(t0) < 0.5);
    const double gflops = 2.0 * m * n * k * reps / seconds_since(t0) / 1e9;
    std::printf("gemm %dx%dx%d %-6s %7.2f GFLOP/s\n", m, n, k, std::string(simd::backend_name(be)).c_str(), gflops);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pcle micro-benchmarks"};
  int side = 36;
  int infer_side = 128;
  app.add_option("--side", side, "training crop side");
  app.add_option("--infer-side", infer_side, "inference frame side");
  CLI11_PARSE(app, argc, argv);

  bench_gemm(64, side * side, 576);
  simd::set_backend(simd::avx2_supported() ? simd::Backend::avx2 : simd::Backend::scalar);

  const auto params = NetworkParams<float>::initialise({}, 1);
  Tensor<float> x(1, side, side, 0.5f);
  ForwardCache<float> cache;
  auto t0 = Clock::now();
  int reps = 0;
  do {
    const Tensor<float> y = forward(params, x, &cache);
    const auto g = backward(params, cache, y);
    ++reps;
  } while (seconds_since(t0) < 1.0);
  std::printf("train step %dx%d: %.4f s\n", side, side, seconds_since(t0) / reps);

  Tensor<float> big(1, infer_side, infer_side, 0.5f);
  t0 = Clock::now();
  reps = 0;
  do {
    forward(params, big);
    ++reps;
  } while (seconds_since(t0) < 1.0);
  std::printf("forward %dx%d: %.4f s\n", infer_side, infer_side, seconds_since(t0) / reps);
  return 0;
}
