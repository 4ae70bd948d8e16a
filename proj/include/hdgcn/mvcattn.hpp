#pragma once

#include <string>
#include <vector>

#include "hdgcn/tape.hpp"

namespace hdgcn {

/// All trainable matrices of one multi-vote cross-attention block.
/// vote[m] projects node sums into supernode m; fk/fq score the forward
/// (node -> supernode) pass, bq/bk the backward pass, fv/bv carry values.
struct MVCAttnWeights {
  std::vector<Parameter> vote;  // M matrices, d_k x d_k
  Parameter fk, fq, fv, bq, bk, bv;
  Parameter proj_gain, proj_bias;  // LayerNorm affine inside the projection

  int M() const { return static_cast<int>(vote.size()); }
  int d_k() const { return fv.value.rows; }

  static MVCAttnWeights init(const std::string& prefix, int M, int d_k,
                             std::mt19937_64& rng);
  std::vector<Parameter*> parameters();
};

/// Row-stochastic attention factors captured during one pass.
struct AttentionTrace {
  int order = 0;
  Tensor a_f;  // M x n
  Tensor a_b;  // n x M
};

/// Supernode values: layer_norm(sum_v z_v W_m) per vote matrix; M x d_k.
Var mv_proj(Tape& t, Var z, MVCAttnWeights& w, double ln_eps = 1e-5);

/// FCAttn. Returns the updated supernodes (M x d_k); a_f written to the
/// trace if given. scores = S W_fq^T W_fk^T Z^T, softmax over nodes.
Var forward_cross_attention(Tape& t, Var z, Var s, MVCAttnWeights& w,
                            Tensor* a_f_out = nullptr);

/// BCAttn. Returns updated nodes (n x d_k); a_b written if given.
/// scores = Z W_bk^T W_bq^T S_hat^T, softmax over supernodes.
Var backward_cross_attention(Tape& t, Var s_hat, Var z, MVCAttnWeights& w,
                             Tensor* a_b_out = nullptr);

/// Full pipeline: mv_proj -> FCAttn -> BCAttn. O(n*M*d_k + M*d_k^2);
/// never materializes an n x n buffer.
Var mvc_attention(Tape& t, Var z, MVCAttnWeights& w, AttentionTrace* trace = nullptr,
                  double ln_eps = 1e-5);

/// A_d = a_b * a_f, the composed dynamic adjacency. Diagnostic only;
/// guarded at n <= 10000.
Tensor effective_dynamic_adjacency(const AttentionTrace& trace);

/// Exports {order, a_f, a_b} as JSON text.
std::string trace_to_json(const AttentionTrace& trace);
/// One matrix as CSV text (rows of comma-separated values).
std::string matrix_to_csv(const Tensor& m);

}  // namespace hdgcn
