#include "hdgcn/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hdgcn::kernels {

namespace {
int g_threads = 1;

inline int op_rows(const Tensor& t, bool trans) { return trans ? t.cols : t.rows; }
inline int op_cols(const Tensor& t, bool trans) { return trans ? t.rows : t.cols; }
inline double op_at(const Tensor& t, bool trans, int i, int j) {
  return trans ? t.at(j, i) : t.at(i, j);
}

void check_gemm_shapes(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  if (op_cols(a, ta) != op_rows(b, tb))
    throw DimensionError("matmul shape mismatch: " + a.shape_str() + (ta ? "^T" : "") +
                         " x " + b.shape_str() + (tb ? "^T" : ""));
}
}  // namespace

void set_threads(int n) { g_threads = n < 1 ? 1 : n; }
int threads() { return g_threads; }

Tensor gemm_ref(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  check_gemm_shapes(a, b, trans_a, trans_b);
  int m = op_rows(a, trans_a), n = op_cols(b, trans_b), k = op_cols(a, trans_a);
  Tensor c(m, n);
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double aip = op_at(a, trans_a, i, p);
      if (aip == 0.0) continue;
      for (int j = 0; j < n; ++j) c.at(i, j) += aip * op_at(b, trans_b, p, j);
    }
  return c;
}

void gemm_acc(Tensor& c, const Tensor& a, const Tensor& b, bool trans_a, bool trans_b,
              double alpha) {
  check_gemm_shapes(a, b, trans_a, trans_b);
  int m = op_rows(a, trans_a), n = op_cols(b, trans_b), k = op_cols(a, trans_a);
  if (c.rows != m || c.cols != n)
    throw DimensionError("gemm_acc output shape mismatch: " + c.shape_str());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1)
#endif
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double aip = alpha * op_at(a, trans_a, i, p);
      if (aip == 0.0) continue;
      for (int j = 0; j < n; ++j) c.at(i, j) += aip * op_at(b, trans_b, p, j);
    }
}

Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  check_gemm_shapes(a, b, trans_a, trans_b);
  Tensor c(op_rows(a, trans_a), op_cols(b, trans_b));
  gemm_acc(c, a, b, trans_a, trans_b, 1.0);
  return c;
}

}  // namespace hdgcn::kernels
