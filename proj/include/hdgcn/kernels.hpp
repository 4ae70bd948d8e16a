#pragma once

#include "hdgcn/tensor.hpp"

namespace hdgcn::kernels {

/// Worker threads used by the OpenMP kernels. 1 (the default) gives a
/// fully deterministic serial schedule; parallel schedules are still
/// bitwise deterministic because each output row is owned by one thread.
void set_threads(int n);
int threads();

// Serial reference kernels. Kept as the oracle the OpenMP versions are
// tested and benchmarked against.
Tensor gemm_ref(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

// OpenMP kernels (fall back to serial when built without OpenMP).
Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

/// C += alpha * op(A)·op(B)
void gemm_acc(Tensor& c, const Tensor& a, const Tensor& b, bool trans_a, bool trans_b,
              double alpha = 1.0);

}  // namespace hdgcn::kernels
