#include "hdgcn/tensor.hpp"

#include <atomic>
#include <cmath>

namespace hdgcn {

namespace {
std::atomic<size_t> g_alloc_cap{0};
}

void set_alloc_cap(size_t max_elements) { g_alloc_cap = max_elements; }
size_t alloc_cap() { return g_alloc_cap; }

Tensor::Tensor(int r, int c) : rows(r), cols(c) {
  if (r < 0 || c < 0) throw DimensionError("negative tensor dimension");
  size_t n = static_cast<size_t>(r) * static_cast<size_t>(c);
  size_t cap = g_alloc_cap;
  if (cap != 0 && n > cap)
    throw CapabilityError("tensor allocation of " + std::to_string(n) +
                          " elements exceeds cap of " + std::to_string(cap));
  v.assign(n, 0.0);
}

std::string Tensor::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

Tensor Tensor::ones(int r, int c) {
  Tensor t(r, c);
  std::fill(t.v.begin(), t.v.end(), 1.0);
  return t;
}

Tensor Tensor::identity(int n) {
  Tensor t(n, n);
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  int r = static_cast<int>(rows.size());
  int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
  Tensor t(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c)
      throw DimensionError("ragged initializer rows");
    int j = 0;
    for (double x : row) t.at(i, j++) = x;
    ++i;
  }
  return t;
}

Tensor Tensor::glorot(int r, int c, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / (r + c));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(r, c);
  for (auto& x : t.v) x = dist(rng);
  return t;
}

Tensor Tensor::randn(int r, int c, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(r, c);
  for (auto& x : t.v) x = dist(rng);
  return t;
}

void check_finite(const Tensor& t, const char* what) {
  for (double x : t.v)
    if (!std::isfinite(x))
      throw DataError(std::string("non-finite value produced by ") + what);
}

}  // namespace hdgcn
