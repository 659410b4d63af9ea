// Serial reference kernels vs their OpenMP versions. Prints one line per
// kernel and size with the best-of-N time of each and whether the outputs
// agree bit for bit.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include <omp.h>

#include "fgad/kernels.hpp"

namespace k = fgad::kernels;
using fgad::Matrix;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (double& x : m.values()) x = u(rng);
  return m;
}

double best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  std::mt19937_64 rng(42);
  std::printf("threads available: %d\n", omp_get_max_threads());
  std::printf("%-12s %6s %12s %12s %8s %s\n", "kernel", "n", "serial_s", "openmp_s", "speedup", "identical");
  for (std::size_t n : {64, 128, 256, 512}) {
    const Matrix a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
    struct Case {
      const char* name;
      void (*serial)(const Matrix&, const Matrix&, Matrix&, k::Accumulate);
      void (*omp)(const Matrix&, const Matrix&, Matrix&, k::Accumulate);
    };
    const Case cases[] = {{"matmul", k::reference::matmul, k::parallel::matmul},
                          {"matmul_tn", k::reference::matmul_tn, k::parallel::matmul_tn},
                          {"matmul_nt", k::reference::matmul_nt, k::parallel::matmul_nt}};
    for (const Case& c : cases) {
      Matrix s, p;
      const double ts = best_of(reps, [&] { c.serial(a, b, s, k::Accumulate::Overwrite); });
      const double tp = best_of(reps, [&] { c.omp(a, b, p, k::Accumulate::Overwrite); });
      std::printf("%-12s %6zu %12.6f %12.6f %8.2f %s\n", c.name, n, ts, tp, ts / tp, s == p ? "yes" : "NO");
    }
  }
  for (std::size_t len : {33090, 140868, 1000000}) {
    std::vector<std::vector<double>> vecs(10, std::vector<double>(len));
    for (auto& v : vecs)
      for (double& x : v) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    std::vector<std::span<const double>> views(vecs.begin(), vecs.end());
    std::vector<double> w(10, 0.1), s(len), p(len);
    const double ts = best_of(reps, [&] { k::reference::weighted_sum(views, w, s); });
    const double tp = best_of(reps, [&] { k::parallel::weighted_sum(views, w, p); });
    std::printf("%-12s %6zu %12.6f %12.6f %8.2f %s\n", "wsum(C=10)", len, ts, tp, ts / tp, s == p ? "yes" : "NO");
  }
  return 0;
}
