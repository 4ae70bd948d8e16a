// Compares the serial reference kernels against the OpenMP kernels and
// reports mvc_attention wall-time scaling in the node count.

#include <chrono>
#include <cstdio>
#include <random>

#include "hdgcn/kernels.hpp"
#include "hdgcn/mvcattn.hpp"
#include "hdgcn/tape.hpp"

using namespace hdgcn;
using Clock = std::chrono::steady_clock;

namespace {
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double bench_gemm(int n, int reps, bool parallel, int threads) {
  std::mt19937_64 rng(7);
  Tensor a = Tensor::randn(n, n, rng);
  Tensor b = Tensor::randn(n, n, rng);
  kernels::set_threads(parallel ? threads : 1);
  volatile double sink = 0.0;
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    Tensor c = parallel ? kernels::gemm(a, b) : kernels::gemm_ref(a, b);
    sink = sink + c.v[0];
  }
  return seconds_since(t0) / reps;
}

double bench_mvc(int n, int d_k, int M, int reps) {
  std::mt19937_64 rng(11);
  MVCAttnWeights w = MVCAttnWeights::init("bench", M, d_k, rng);
  Tensor z = Tensor::randn(n, d_k, rng);
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    Tape t;
    Var zv = t.leaf(z);
    mvc_attention(t, zv, w);
  }
  return seconds_since(t0) / reps;
}
}  // namespace

int main(int argc, char** argv) {
  int threads = argc > 1 ? std::atoi(argv[1]) : 4;

  std::printf("== gemm: serial reference vs OpenMP (%d threads) ==\n", threads);
  for (int n : {128, 256, 512}) {
    double ts = bench_gemm(n, 3, false, threads);
    double tp = bench_gemm(n, 3, true, threads);
    std::printf("n=%4d  serial %8.4f s   omp %8.4f s   speedup %.2fx\n", n, ts, tp,
                ts / tp);
  }

  kernels::set_threads(1);
  std::printf("\n== mvc_attention scaling (M=10, d_k=64) ==\n");
  double t_prev = 0.0;
  for (int n : {1024, 2048, 4096, 8192}) {
    double t = bench_mvc(n, 64, 10, 5);
    std::printf("n=%5d  %8.4f s", n, t);
    if (t_prev > 0.0) std::printf("   ratio vs half size %.2fx", t / t_prev);
    std::printf("\n");
    t_prev = t;
  }
  return 0;
}
