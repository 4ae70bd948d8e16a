#include "hdgcn/mvcattn.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hdgcn/kernels.hpp"

namespace hdgcn {

MVCAttnWeights MVCAttnWeights::init(const std::string& prefix, int M, int d_k,
                                    std::mt19937_64& rng) {
  if (M < 1) throw ConfigError("supernode count M must be >= 1");
  MVCAttnWeights w;
  for (int m = 0; m < M; ++m)
    w.vote.emplace_back(prefix + ".vote" + std::to_string(m),
                        Tensor::glorot(d_k, d_k, rng));
  w.fk = Parameter(prefix + ".fk", Tensor::glorot(d_k, d_k, rng));
  w.fq = Parameter(prefix + ".fq", Tensor::glorot(d_k, d_k, rng));
  w.fv = Parameter(prefix + ".fv", Tensor::glorot(d_k, d_k, rng));
  w.bq = Parameter(prefix + ".bq", Tensor::glorot(d_k, d_k, rng));
  w.bk = Parameter(prefix + ".bk", Tensor::glorot(d_k, d_k, rng));
  w.bv = Parameter(prefix + ".bv", Tensor::glorot(d_k, d_k, rng));
  w.proj_gain = Parameter(prefix + ".proj_gain", Tensor::ones(1, d_k));
  w.proj_bias = Parameter(prefix + ".proj_bias", Tensor::zeros(1, d_k));
  return w;
}

std::vector<Parameter*> MVCAttnWeights::parameters() {
  std::vector<Parameter*> ps;
  for (auto& p : vote) ps.push_back(&p);
  for (Parameter* p : {&fk, &fq, &fv, &bq, &bk, &bv, &proj_gain, &proj_bias})
    ps.push_back(p);
  return ps;
}

Var mv_proj(Tape& t, Var z, MVCAttnWeights& w, double ln_eps) {
  if (t.val(z).cols != w.d_k())
    throw DimensionError("mv_proj expects " + std::to_string(w.d_k()) +
                         " feature columns, got " + t.val(z).shape_str());
  Var zsum = t.col_sum(z);  // 1 x d_k
  std::vector<Var> rows;
  rows.reserve(w.vote.size());
  for (auto& vm : w.vote) rows.push_back(t.matmul(zsum, t.watch(vm)));
  Var stacked = t.concat_rows(rows);  // M x d_k
  return t.layer_norm_rows(stacked, t.watch(w.proj_gain), t.watch(w.proj_bias), ln_eps);
}

Var forward_cross_attention(Tape& t, Var z, Var s, MVCAttnWeights& w, Tensor* a_f_out) {
  double scale = std::sqrt(static_cast<double>(w.d_k()));
  // (S W_fq^T W_fk^T) Z^T, shaped M x n without any n x n buffer.
  Var q = t.matmul(t.matmul(s, t.watch(w.fq), false, true), t.watch(w.fk), false, true);
  Var scores = t.matmul(q, z, false, true);          // M x n
  Var a_f = t.softmax_rows(scores, scale);           // softmax over nodes
  Var s_hat = t.matmul(t.matmul(a_f, z), t.watch(w.fv));
  if (a_f_out) *a_f_out = t.val(a_f);
  return s_hat;
}

Var backward_cross_attention(Tape& t, Var s_hat, Var z, MVCAttnWeights& w,
                             Tensor* a_b_out) {
  double scale = std::sqrt(static_cast<double>(w.d_k()));
  Var q = t.matmul(t.matmul(z, t.watch(w.bk), false, true), t.watch(w.bq), false, true);
  Var scores = t.matmul(q, s_hat, false, true);      // n x M
  Var a_b = t.softmax_rows(scores, scale);           // softmax over supernodes
  Var z_new = t.matmul(t.matmul(a_b, s_hat), t.watch(w.bv));
  if (a_b_out) *a_b_out = t.val(a_b);
  return z_new;
}

Var mvc_attention(Tape& t, Var z, MVCAttnWeights& w, AttentionTrace* trace,
                  double ln_eps) {
  if (t.val(z).rows < 1) throw DimensionError("mvc_attention needs at least one node");
  Tensor a_f, a_b;
  Var s = mv_proj(t, z, w, ln_eps);
  Var s_hat = forward_cross_attention(t, z, s, w, trace ? &a_f : nullptr);
  Var z_new = backward_cross_attention(t, s_hat, z, w, trace ? &a_b : nullptr);
  if (trace) {
    trace->a_f = std::move(a_f);
    trace->a_b = std::move(a_b);
  }
  return z_new;
}

Tensor effective_dynamic_adjacency(const AttentionTrace& trace) {
  if (trace.a_f.rows == 0 || trace.a_b.rows == 0)
    throw UsageError("incomplete attention trace");
  int n = trace.a_b.rows;
  if (n > 10000) throw CapabilityError("effective_dynamic_adjacency guarded at n <= 10000");
  return kernels::gemm(trace.a_b, trace.a_f);
}

std::string trace_to_json(const AttentionTrace& trace) {
  nlohmann::json j;
  j["order"] = trace.order;
  auto to_rows = [](const Tensor& m) {
    std::vector<std::vector<double>> rows(m.rows);
    for (int i = 0; i < m.rows; ++i) {
      rows[i].resize(m.cols);
      for (int c = 0; c < m.cols; ++c) rows[i][c] = m.at(i, c);
    }
    return rows;
  };
  j["a_f"] = to_rows(trace.a_f);
  j["a_b"] = to_rows(trace.a_b);
  return j.dump(2);
}

std::string matrix_to_csv(const Tensor& m) {
  std::ostringstream out;
  char buf[32];
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m.at(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace hdgcn
