#include "hdgcn/model.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "hdgcn/kernels.hpp"

namespace hdgcn {

void HDGCNConfig::validate() const {
  if (K < 0 || K % 2 != 0) throw ConfigError("K must be even and >= 0, got " + std::to_string(K));
  if (L < 1) throw ConfigError("L must be >= 1");
  if (d_in < 1) throw ConfigError("d_in must be >= 1");
  if (d_k < 1) throw ConfigError("d_k must be >= 1");
  if (M < 1) throw ConfigError("M must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
}

HDGCNConfig::Mode HDGCNConfig::parse_mode(const std::string& s) {
  if (s == "dynamic") return Mode::Dynamic;
  if (s == "static") return Mode::Static;
  throw ConfigError("unknown mode: " + s);
}

HDGCNConfig::Task HDGCNConfig::parse_task(const std::string& s) {
  if (s == "node") return Task::Node;
  if (s == "graph") return Task::Graph;
  throw ConfigError("unknown task: " + s);
}

std::vector<Parameter*> LayerWeights::parameters() {
  std::vector<Parameter*> ps{&w0};
  for (auto& o : orders) {
    if (o.has_mvc())
      for (Parameter* p : o.mvc.parameters()) ps.push_back(p);
    ps.push_back(&o.wk);
  }
  ps.push_back(&fuse_gain);
  ps.push_back(&fuse_bias);
  return ps;
}

HDGCNModel HDGCNModel::init(const HDGCNConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  HDGCNModel m;
  m.cfg = cfg;
  for (int l = 0; l < cfg.L; ++l) {
    LayerWeights lw;
    std::string pfx = "layer" + std::to_string(l);
    int in = l == 0 ? cfg.d_in : cfg.d_k;
    lw.w0 = Parameter(pfx + ".w0", Tensor::glorot(in, cfg.d_k, rng));
    for (int k = 1; k <= cfg.K / 2; ++k) {
      OrderWeights ow;
      std::string opfx = pfx + ".order" + std::to_string(k);
      if (cfg.mode == HDGCNConfig::Mode::Dynamic)
        ow.mvc = MVCAttnWeights::init(opfx + ".mvc", cfg.M, cfg.d_k, rng);
      ow.wk = Parameter(opfx + ".wk", Tensor::glorot(cfg.d_k, cfg.d_k, rng));
      lw.orders.push_back(std::move(ow));
    }
    lw.fuse_gain = Parameter(pfx + ".fuse_gain", Tensor::ones(1, cfg.d_k));
    lw.fuse_bias = Parameter(pfx + ".fuse_bias", Tensor::zeros(1, cfg.d_k));
    m.layers.push_back(std::move(lw));
  }
  m.head_w1 = Parameter("head.w1", Tensor::glorot(cfg.d_k, cfg.d_k, rng));
  m.head_b1 = Parameter("head.b1", Tensor::zeros(1, cfg.d_k));
  m.head_w2 = Parameter("head.w2", Tensor::glorot(cfg.d_k, cfg.num_classes, rng));
  m.head_b2 = Parameter("head.b2", Tensor::zeros(1, cfg.num_classes));
  m.f1_w = Parameter("readout.f1_w", Tensor::glorot(cfg.d_k, cfg.d_k, rng));
  m.f1_b = Parameter("readout.f1_b", Tensor::zeros(1, cfg.d_k));
  m.f2_w = Parameter("readout.f2_w", Tensor::glorot(cfg.d_k, cfg.d_k, rng));
  m.f2_b = Parameter("readout.f2_b", Tensor::zeros(1, cfg.d_k));
  m.gcls_w = Parameter("gcls.w", Tensor::glorot(cfg.d_k, cfg.num_classes, rng));
  m.gcls_b = Parameter("gcls.b", Tensor::zeros(1, cfg.num_classes));
  return m;
}

std::vector<Parameter*> HDGCNModel::parameters() {
  std::vector<Parameter*> ps;
  for (auto& lw : layers)
    for (Parameter* p : lw.parameters()) ps.push_back(p);
  if (cfg.task == HDGCNConfig::Task::Node) {
    for (Parameter* p : {&head_w1, &head_b1, &head_w2, &head_b2}) ps.push_back(p);
  } else {
    for (Parameter* p : {&f1_w, &f1_b, &f2_w, &f2_b, &gcls_w, &gcls_b}) ps.push_back(p);
  }
  return ps;
}

Var prime_cheb_forward(Tape& t, const SparseAdjacency& norm_adj, Var x, Parameter& w0,
                       Activation act) {
  if (t.val(x).cols != w0.value.rows)
    throw DimensionError("feature width " + t.val(x).shape_str() +
                         " incompatible with W0 " + w0.value.shape_str());
  Var ax = spmm(t, norm_adj, x);
  return t.activation(t.matmul(ax, t.watch(w0)), act);
}

Var hd_cheb_unit_forward(Tape& t, const SparseAdjacency& norm_adj, Var z_prev,
                         OrderWeights& ow, Activation act, AttentionTrace* trace,
                         double ln_eps) {
  Var z = mvc_attention(t, z_prev, ow.mvc, trace, ln_eps);
  Var az = spmm(t, norm_adj, z);
  return t.activation(t.matmul(az, t.watch(ow.wk)), act);
}

Var static_cheb_forward(Tape& t, const SparseAdjacency& norm_adj, Var z_prev,
                        Parameter& wk, Activation act) {
  Var az = spmm(t, norm_adj, spmm(t, norm_adj, z_prev));
  return t.activation(t.matmul(az, t.watch(wk)), act);
}

Var hdgcn_layer_forward(Tape& t, const SparseAdjacency& norm_adj, Var x,
                        LayerWeights& lw, const HDGCNConfig& cfg,
                        std::vector<AttentionTrace>* traces) {
  if (cfg.K % 2 != 0) throw ConfigError("K must be even");
  Var z = prime_cheb_forward(t, norm_adj, x, lw.w0, cfg.activation);
  Var acc = z;
  for (int k = 1; k <= cfg.K / 2; ++k) {
    OrderWeights& ow = lw.orders.at(k - 1);
    Var zhat;
    if (cfg.mode == HDGCNConfig::Mode::Dynamic) {
      AttentionTrace trace;
      trace.order = k;
      zhat = hd_cheb_unit_forward(t, norm_adj, z, ow, cfg.activation,
                                  traces ? &trace : nullptr, cfg.ln_eps);
      if (traces) traces->push_back(std::move(trace));
    } else {
      zhat = static_cheb_forward(t, norm_adj, z, ow.wk, cfg.activation);
    }
    acc = t.add(acc, zhat);
    z = zhat;
  }
  return t.layer_norm_rows(acc, t.watch(lw.fuse_gain), t.watch(lw.fuse_bias), cfg.ln_eps);
}

Var node_classify(Tape& t, Var h, HDGCNModel& m) {
  Var hidden = t.activation(
      t.add_row_broadcast(t.matmul(h, t.watch(m.head_w1)), t.watch(m.head_b1)),
      m.cfg.activation);
  return t.add_row_broadcast(t.matmul(hidden, t.watch(m.head_w2)), t.watch(m.head_b2));
}

Var graph_readout(Tape& t, Var h, HDGCNModel& m) {
  Var gate = t.activation(
      t.add_row_broadcast(t.matmul(h, t.watch(m.f1_w)), t.watch(m.f1_b)),
      Activation::Sigmoid);
  Var val = t.activation(
      t.add_row_broadcast(t.matmul(h, t.watch(m.f2_w)), t.watch(m.f2_b)),
      Activation::Tanh);
  Var gated = t.mul_elem(gate, val);
  return t.add(t.mean_rows(gated), t.max_rows(gated));
}

Var graph_classify(Tape& t, Var h_g, HDGCNModel& m) {
  return t.add_row_broadcast(t.matmul(h_g, t.watch(m.gcls_w)), t.watch(m.gcls_b));
}

ModelOutput hdgcn_forward(Tape& t, const Graph& g, HDGCNModel& m,
                          std::mt19937_64* dropout_rng) {
  ModelOutput out;
  Var h = t.leaf(g.features);
  for (auto& lw : m.layers)
    h = hdgcn_layer_forward(t, g.normalized, h, lw, m.cfg, &out.traces);
  if (dropout_rng && m.cfg.dropout > 0.0) {
    const Tensor& hv = t.val(h);
    Tensor mask(hv.rows, hv.cols);
    std::bernoulli_distribution keep(1.0 - m.cfg.dropout);
    for (auto& x : mask.v) x = keep(*dropout_rng) ? 1.0 / (1.0 - m.cfg.dropout) : 0.0;
    h = t.mul_elem(h, t.leaf(std::move(mask)));
  }
  out.h = h;
  if (m.cfg.task == HDGCNConfig::Task::Node) {
    out.logits = node_classify(t, h, m);
  } else {
    out.logits = graph_classify(t, graph_readout(t, h, m), m);
  }
  return out;
}

Tensor chebyshev_truncation_reference(const Tensor& op, const Tensor& x,
                                      const std::vector<double>& thetas) {
  if (op.rows != op.cols) throw DimensionError("operator must be square");
  if (op.rows > 200) throw CapabilityError("chebyshev reference guarded at n <= 200");
  if (op.cols != x.rows) throw DimensionError("operator/signal shape mismatch");
  if (thetas.empty()) throw ConfigError("empty theta list");
  Tensor t_prev2 = x;                       // T_0 x
  Tensor t_prev1 = kernels::gemm(op, x);    // T_1 x
  Tensor acc(x.rows, x.cols);
  for (size_t i = 0; i < x.size(); ++i) acc.v[i] = thetas[0] * t_prev2.v[i];
  for (size_t i = 1; i < thetas.size(); ++i) {
    if (i >= 2) {
      Tensor t_next = kernels::gemm(op, t_prev1);
      for (size_t p = 0; p < t_next.size(); ++p)
        t_next.v[p] = 2.0 * t_next.v[p] - t_prev2.v[p];
      t_prev2 = std::move(t_prev1);
      t_prev1 = std::move(t_next);
    }
    for (size_t p = 0; p < acc.size(); ++p) acc.v[p] += thetas[i] * t_prev1.v[p];
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
nlohmann::json config_to_json(const HDGCNConfig& c) {
  return nlohmann::json{{"K", c.K},
                        {"L", c.L},
                        {"d_in", c.d_in},
                        {"d_k", c.d_k},
                        {"M", c.M},
                        {"num_classes", c.num_classes},
                        {"activation", activation_name(c.activation)},
                        {"mode", HDGCNConfig::mode_name(c.mode)},
                        {"task", HDGCNConfig::task_name(c.task)},
                        {"ln_eps", c.ln_eps},
                        {"dropout", c.dropout}};
}

HDGCNConfig config_from_json(const nlohmann::json& j) {
  HDGCNConfig c;
  c.K = j.at("K");
  c.L = j.at("L");
  c.d_in = j.at("d_in");
  c.d_k = j.at("d_k");
  c.M = j.at("M");
  c.num_classes = j.at("num_classes");
  c.activation = parse_activation(j.at("activation"));
  c.mode = HDGCNConfig::parse_mode(j.at("mode"));
  c.task = HDGCNConfig::parse_task(j.at("task"));
  c.ln_eps = j.at("ln_eps");
  c.dropout = j.at("dropout");
  return c;
}
}  // namespace

void save_checkpoint(const std::string& path, const HDGCNModel& m) {
  nlohmann::json j;
  j["format"] = "hdgcn-checkpoint-v1";
  j["config"] = config_to_json(m.cfg);
  nlohmann::json params = nlohmann::json::object();
  for (Parameter* p : const_cast<HDGCNModel&>(m).parameters())
    params[p->name] = {{"rows", p->value.rows}, {"cols", p->value.cols}, {"values", p->value.v}};
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

HDGCNModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("format") != "hdgcn-checkpoint-v1")
      throw DataError("unknown checkpoint format in " + path);
    HDGCNConfig cfg = config_from_json(j.at("config"));
    HDGCNModel m = HDGCNModel::init(cfg, 0);
    const auto& params = j.at("params");
    auto ps = m.parameters();
    if (params.size() != ps.size())
      throw DataError("checkpoint parameter count mismatch in " + path);
    for (Parameter* p : ps) {
      const auto& blob = params.at(p->name);
      int rows = blob.at("rows"), cols = blob.at("cols");
      if (rows != p->value.rows || cols != p->value.cols)
        throw DataError("checkpoint shape mismatch for " + p->name);
      std::vector<double> vals = blob.at("values");
      if (vals.size() != p->value.size())
        throw DataError("checkpoint value count mismatch for " + p->name);
      p->value.v = std::move(vals);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint " + path + ": " + e.what());
  }
}

}  // namespace hdgcn
