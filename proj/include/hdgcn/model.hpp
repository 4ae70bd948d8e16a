#pragma once

#include <string>
#include <vector>

#include "hdgcn/graph.hpp"
#include "hdgcn/mvcattn.hpp"
#include "hdgcn/tape.hpp"

namespace hdgcn {

struct HDGCNConfig {
  int K = 6;  // Chebyshev order, even; K/2 high-order units per layer
  int L = 1;
  int d_in = 0;
  int d_k = 64;
  int M = 10;
  int num_classes = 0;
  Activation activation = Activation::ReLU;
  enum class Mode { Dynamic, Static } mode = Mode::Dynamic;
  enum class Task { Node, Graph } task = Task::Node;
  double ln_eps = 1e-5;
  double dropout = 0.0;

  void validate() const;
  static std::string mode_name(Mode m) { return m == Mode::Dynamic ? "dynamic" : "static"; }
  static std::string task_name(Task t) { return t == Task::Node ? "node" : "graph"; }
  static Mode parse_mode(const std::string& s);
  static Task parse_task(const std::string& s);
};

/// One high-order unit: the attention block plus the order filter W^(k).
/// In static mode the attention block is absent (vote list empty).
struct OrderWeights {
  MVCAttnWeights mvc;
  Parameter wk;  // d_k x d_k
  bool has_mvc() const { return !mvc.vote.empty(); }
};

struct LayerWeights {
  Parameter w0;  // d_in x d_k (first layer) or d_k x d_k
  std::vector<OrderWeights> orders;  // exactly K/2
  Parameter fuse_gain, fuse_bias;    // fusion LayerNorm affine
  std::vector<Parameter*> parameters();
};

struct HDGCNModel {
  HDGCNConfig cfg;
  std::vector<LayerWeights> layers;
  // Node head: one-hidden-layer MLP d_k -> d_k -> classes.
  Parameter head_w1, head_b1, head_w2, head_b2;
  // Graph head: gated readout affines + affine classifier.
  Parameter f1_w, f1_b, f2_w, f2_b, gcls_w, gcls_b;

  static HDGCNModel init(const HDGCNConfig& cfg, uint64_t seed);
  std::vector<Parameter*> parameters();
};

struct ModelOutput {
  Var h;       // n x d_k node embeddings
  Var logits;  // n x classes (node task) or 1 x classes (graph task)
  std::vector<AttentionTrace> traces;
};

/// Z^(0) = act(norm_adj * X * W0): the vanilla first-order layer.
Var prime_cheb_forward(Tape& t, const SparseAdjacency& norm_adj, Var x, Parameter& w0,
                       Activation act);

/// One dynamic unit: attention transition, one sparse hop, filter, act.
Var hd_cheb_unit_forward(Tape& t, const SparseAdjacency& norm_adj, Var z_prev,
                         OrderWeights& ow, Activation act, AttentionTrace* trace,
                         double ln_eps = 1e-5);

/// Static ablation unit: act(norm_adj^2 * z_prev * Wk); chaining k units
/// accumulates the norm_adj^{2k} transition.
Var static_cheb_forward(Tape& t, const SparseAdjacency& norm_adj, Var z_prev,
                        Parameter& wk, Activation act);

/// Full layer: prime output plus K/2 chained units, summed, LayerNorm.
Var hdgcn_layer_forward(Tape& t, const SparseAdjacency& norm_adj, Var x,
                        LayerWeights& lw, const HDGCNConfig& cfg,
                        std::vector<AttentionTrace>* traces = nullptr);

Var node_classify(Tape& t, Var h, HDGCNModel& m);
Var graph_readout(Tape& t, Var h, HDGCNModel& m);
Var graph_classify(Tape& t, Var h_g, HDGCNModel& m);

/// All layers plus the task head. A non-null rng enables inverted
/// dropout on the embeddings (training only, rate = cfg.dropout).
ModelOutput hdgcn_forward(Tape& t, const Graph& g, HDGCNModel& m,
                          std::mt19937_64* dropout_rng = nullptr);

/// Dense verification oracle: sum_i theta_i T_i(op) x with the Chebyshev
/// recurrence T_i = 2 op T_{i-1} - T_{i-2}. Guarded at n <= 200.
Tensor chebyshev_truncation_reference(const Tensor& op, const Tensor& x,
                                      const std::vector<double>& thetas);

void save_checkpoint(const std::string& path, const HDGCNModel& m);
HDGCNModel load_checkpoint(const std::string& path);

}  // namespace hdgcn
