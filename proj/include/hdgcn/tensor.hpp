#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdgcn {

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major 2-D grid of 64-bit reals. Value type; the autodiff
/// tape stores these per node.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c);

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return v.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const;

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor ones(int r, int c);
  static Tensor identity(int n);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  /// Uniform Glorot init, fan_in = rows, fan_out = cols.
  static Tensor glorot(int r, int c, std::mt19937_64& rng);
  static Tensor randn(int r, int c, std::mt19937_64& rng, double stddev = 1.0);
};

/// Throws DataError if any entry is NaN/Inf. Called on op outputs.
void check_finite(const Tensor& t, const char* what);

/// Per-allocation element cap used by tests to prove no quadratic buffer
/// is ever materialized. 0 disables the cap.
void set_alloc_cap(size_t max_elements);
size_t alloc_cap();

/// RAII helper for the cap.
struct AllocCapGuard {
  size_t prev;
  explicit AllocCapGuard(size_t cap) : prev(alloc_cap()) { set_alloc_cap(cap); }
  ~AllocCapGuard() { set_alloc_cap(prev); }
};

}  // namespace hdgcn
