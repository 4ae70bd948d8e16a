#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "hdgcn/model.hpp"
#include "oracles.hpp"

using namespace hdgcn;

namespace {

SparseAdjacency small_graph(int n, std::mt19937_64& rng, double p = 0.5) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::tuple<int, int, double>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (coin(rng) < p) edges.emplace_back(i, j, 1.0);
  if (edges.empty()) edges.emplace_back(0, 1, 1.0);
  return SparseAdjacency::from_edges(n, edges);
}

Graph make_node_graph(int n, int d, int classes, std::mt19937_64& rng) {
  Graph g;
  g.adjacency = small_graph(n, rng);
  g.normalized = normalize_adjacency(g.adjacency);
  g.features = Tensor::randn(n, d, rng);
  for (int i = 0; i < n; ++i) {
    g.labels.push_back(i % classes);
    g.train_mask.push_back(1);
    g.val_mask.push_back(0);
    g.test_mask.push_back(0);
  }
  return g;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& p) : path(p) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("prime layer matches the dense first-order oracle") {
  std::mt19937_64 rng(31);
  auto a = small_graph(6, rng);
  auto norm = normalize_adjacency(a);
  Tensor x = Tensor::randn(6, 4, rng);
  Parameter w0("w0", Tensor::glorot(4, 3, rng));
  Tape t;
  Var out = prime_cheb_forward(t, norm, t.leaf(x), w0, Activation::ReLU);
  Tensor expect = oracles::dense_matmul(oracles::dense_matmul(norm.to_dense(), x), w0.value);
  for (double& v : expect.v) v = std::max(0.0, v);
  CHECK(oracles::max_abs_diff(t.val(out), expect) < 1e-12);

  Parameter bad("w0", Tensor::glorot(5, 3, rng));
  CHECK_THROWS_AS(prime_cheb_forward(t, norm, t.leaf(x), bad, Activation::ReLU),
                  DimensionError);
}

TEST_CASE("chained static units accumulate the fourth-power transition") {
  std::mt19937_64 rng(32);
  auto norm = normalize_adjacency(small_graph(7, rng));
  Tensor z = Tensor::randn(7, 3, rng);
  Parameter id1("wk1", Tensor::identity(3)), id2("wk2", Tensor::identity(3));
  Tape t;
  Var z1 = static_cheb_forward(t, norm, t.leaf(z), id1, Activation::Identity);
  Var z2 = static_cheb_forward(t, norm, z1, id2, Activation::Identity);
  Tensor d = norm.to_dense();
  Tensor d2 = oracles::dense_matmul(d, d);
  Tensor d4 = oracles::dense_matmul(d2, d2);
  CHECK(oracles::max_abs_diff(t.val(z2), oracles::dense_matmul(d4, z)) < 1e-11);
}

TEST_CASE("chebyshev reference: base cases and T2 against dense algebra") {
  std::mt19937_64 rng(33);
  Tensor op = Tensor::randn(5, 5, rng);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < i; ++j) op.at(i, j) = op.at(j, i);  // symmetrize
  for (double& v : op.v) v *= 0.2;
  Tensor x = Tensor::randn(5, 2, rng);

  CHECK(oracles::max_abs_diff(chebyshev_truncation_reference(op, x, {1.0}), x) == 0.0);
  CHECK(oracles::max_abs_diff(chebyshev_truncation_reference(op, x, {0.0, 1.0}),
                              oracles::dense_matmul(op, x)) < 1e-13);
  // T2 = 2 op^2 - I.
  Tensor t2 = oracles::dense_matmul(op, oracles::dense_matmul(op, x));
  for (size_t i = 0; i < t2.size(); ++i) t2.v[i] = 2.0 * t2.v[i] - x.v[i];
  CHECK(oracles::max_abs_diff(chebyshev_truncation_reference(op, x, {0.0, 0.0, 1.0}), t2) <
        1e-12);
  CHECK_THROWS_AS(chebyshev_truncation_reference(op, x, {}), ConfigError);
  CHECK_THROWS_AS(chebyshev_truncation_reference(Tensor(3, 4), x, {1.0}), DimensionError);
}

TEST_CASE("third-order truncation collapses to the two-term substituted form") {
  // With A~ = I - E and theta constrained by theta2 = -2 theta3,
  // theta0 = theta3 - theta1 - theta2 ... i.e. theta0 - theta2 = -theta1 + 3 theta3,
  // the truncation sum_{i<=3} theta_i T_i(E) x equals
  // theta'0 (I - E) x + E^2 theta'1 (I - E) x with theta'0 = theta0 - theta2,
  // theta'1 = 2 theta2.
  std::mt19937_64 rng(34);
  auto norm = normalize_adjacency(small_graph(8, rng, 0.6));
  Tensor a_tilde = norm.to_dense();
  Tensor e = Tensor::identity(8);
  for (size_t i = 0; i < e.size(); ++i) e.v[i] -= a_tilde.v[i];
  Tensor x = Tensor::randn(8, 3, rng);

  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    double t3 = dist(rng), t1 = dist(rng);
    double t2 = -2.0 * t3;
    double t0 = t2 - t1 + 3.0 * t3;
    Tensor lhs = chebyshev_truncation_reference(e, x, {t0, t1, t2, t3});

    double th0 = t0 - t2, th1 = 2.0 * t2;
    Tensor ax = oracles::dense_matmul(a_tilde, x);
    Tensor e2ax = oracles::dense_matmul(e, oracles::dense_matmul(e, ax));
    Tensor rhs(8, 3);
    for (size_t i = 0; i < rhs.size(); ++i) rhs.v[i] = th0 * ax.v[i] + th1 * e2ax.v[i];
    CHECK(oracles::max_abs_diff(lhs, rhs) < 1e-12);
  }
}

TEST_CASE("layer forward composes the public subunits") {
  std::mt19937_64 rng(35);
  HDGCNConfig cfg;
  cfg.K = 4;
  cfg.d_in = 5;
  cfg.d_k = 6;
  cfg.M = 3;
  cfg.num_classes = 2;
  auto m = HDGCNModel::init(cfg, 7);
  auto norm = normalize_adjacency(small_graph(6, rng));
  Tensor x = Tensor::randn(6, 5, rng);

  Tape t;
  std::vector<AttentionTrace> traces;
  Var got = hdgcn_layer_forward(t, norm, t.leaf(x), m.layers[0], cfg, &traces);

  Tape t2;
  LayerWeights& lw = m.layers[0];
  Var z = prime_cheb_forward(t2, norm, t2.leaf(x), lw.w0, cfg.activation);
  Var acc = z;
  for (int k = 1; k <= 2; ++k) {
    Var zhat = hd_cheb_unit_forward(t2, norm, z, lw.orders[k - 1], cfg.activation,
                                    nullptr, cfg.ln_eps);
    acc = t2.add(acc, zhat);
    z = zhat;
  }
  Var expect = t2.layer_norm_rows(acc, t2.watch(lw.fuse_gain), t2.watch(lw.fuse_bias),
                                  cfg.ln_eps);
  CHECK(oracles::max_abs_diff(t.val(got), t2.val(expect)) == 0.0);
  CHECK(traces.size() == 2);
  CHECK(traces[0].order == 1);
  CHECK(traces[1].order == 2);
}

TEST_CASE("K=0 layer is just the normalized prime output") {
  std::mt19937_64 rng(36);
  HDGCNConfig cfg;
  cfg.K = 0;
  cfg.d_in = 4;
  cfg.d_k = 5;
  cfg.num_classes = 2;
  auto m = HDGCNModel::init(cfg, 1);
  auto norm = normalize_adjacency(small_graph(5, rng));
  Tensor x = Tensor::randn(5, 4, rng);
  Tape t;
  std::vector<AttentionTrace> traces;
  Var out = hdgcn_layer_forward(t, norm, t.leaf(x), m.layers[0], cfg, &traces);
  CHECK(traces.empty());
  Tape t2;
  Var prime = prime_cheb_forward(t2, norm, t2.leaf(x), m.layers[0].w0, cfg.activation);
  Var expect = t2.layer_norm_rows(prime, t2.watch(m.layers[0].fuse_gain),
                                  t2.watch(m.layers[0].fuse_bias), cfg.ln_eps);
  CHECK(oracles::max_abs_diff(t.val(out), t2.val(expect)) == 0.0);
}

TEST_CASE("graph readout matches a gated loop oracle") {
  std::mt19937_64 rng(37);
  HDGCNConfig cfg;
  cfg.d_in = 4;
  cfg.d_k = 4;
  cfg.num_classes = 3;
  cfg.task = HDGCNConfig::Task::Graph;
  auto m = HDGCNModel::init(cfg, 2);
  Tensor h = Tensor::randn(6, 4, rng);
  Tape t;
  Tensor got = t.val(graph_readout(t, t.leaf(h), m));
  CHECK(got.rows == 1);
  CHECK(got.cols == 4);

  Tensor gated(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) {
      double g = 0.0, v = 0.0;
      for (int k = 0; k < 4; ++k) {
        g += h.at(i, k) * m.f1_w.value.at(k, j);
        v += h.at(i, k) * m.f2_w.value.at(k, j);
      }
      g = 1.0 / (1.0 + std::exp(-(g + m.f1_b.value.at(0, j))));
      v = std::tanh(v + m.f2_b.value.at(0, j));
      gated.at(i, j) = g * v;
    }
  for (int j = 0; j < 4; ++j) {
    double mean = 0.0, mx = gated.at(0, j);
    for (int i = 0; i < 6; ++i) {
      mean += gated.at(i, j);
      mx = std::max(mx, gated.at(i, j));
    }
    CHECK(got.at(0, j) == doctest::Approx(mean / 6.0 + mx).epsilon(1e-12));
  }
}

TEST_CASE("forward shapes for both tasks") {
  std::mt19937_64 rng(38);
  Graph g = make_node_graph(7, 5, 3, rng);
  HDGCNConfig cfg;
  cfg.K = 2;
  cfg.d_in = 5;
  cfg.d_k = 6;
  cfg.M = 2;
  cfg.num_classes = 3;
  auto m = HDGCNModel::init(cfg, 3);
  Tape t;
  auto out = hdgcn_forward(t, g, m);
  CHECK(t.val(out.h).rows == 7);
  CHECK(t.val(out.h).cols == 6);
  CHECK(t.val(out.logits).rows == 7);
  CHECK(t.val(out.logits).cols == 3);
  CHECK(out.traces.size() == 1);

  cfg.task = HDGCNConfig::Task::Graph;
  auto mg = HDGCNModel::init(cfg, 3);
  Tape tg;
  auto outg = hdgcn_forward(tg, g, mg);
  CHECK(tg.val(outg.logits).rows == 1);
  CHECK(tg.val(outg.logits).cols == 3);
}

TEST_CASE("full model passes a finite-difference gradient check") {
  std::mt19937_64 rng(39);
  Graph g = make_node_graph(5, 3, 2, rng);
  HDGCNConfig cfg;
  cfg.K = 2;
  cfg.d_in = 3;
  cfg.d_k = 4;
  cfg.M = 2;
  cfg.num_classes = 2;
  auto m = HDGCNModel::init(cfg, 4);
  auto fwd = [&](Tape& t) {
    auto out = hdgcn_forward(t, g, m);
    return t.cross_entropy(out.logits, g.labels);
  };
  auto report = grad_check(fwd, m.parameters(), 1e-4);
  CHECK(report.pass);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("graph-task gradients, including the maxpool routing") {
  std::mt19937_64 rng(40);
  Graph g = make_node_graph(5, 3, 2, rng);
  HDGCNConfig cfg;
  cfg.K = 2;
  cfg.d_in = 3;
  cfg.d_k = 4;
  cfg.M = 2;
  cfg.num_classes = 2;
  cfg.task = HDGCNConfig::Task::Graph;
  auto m = HDGCNModel::init(cfg, 5);
  auto fwd = [&](Tape& t) {
    auto out = hdgcn_forward(t, g, m);
    return t.cross_entropy(out.logits, {1});
  };
  auto report = grad_check(fwd, m.parameters(), 1e-4);
  CHECK(report.pass);
}

TEST_CASE("dropout perturbs training forward passes only") {
  std::mt19937_64 rng(41);
  Graph g = make_node_graph(6, 4, 2, rng);
  HDGCNConfig cfg;
  cfg.K = 2;
  cfg.d_in = 4;
  cfg.d_k = 5;
  cfg.M = 2;
  cfg.num_classes = 2;
  cfg.dropout = 0.5;
  auto m = HDGCNModel::init(cfg, 6);
  Tape t1, t2, t3;
  Tensor clean = t1.val(hdgcn_forward(t1, g, m).logits);
  CHECK(oracles::max_abs_diff(clean, t2.val(hdgcn_forward(t2, g, m).logits)) == 0.0);
  std::mt19937_64 drop(99);
  Tensor noisy = t3.val(hdgcn_forward(t3, g, m, &drop).logits);
  CHECK(oracles::max_abs_diff(clean, noisy) > 1e-6);
}

TEST_CASE("config validation rejects bad settings") {
  HDGCNConfig cfg;
  cfg.d_in = 3;
  cfg.num_classes = 2;
  CHECK_NOTHROW(cfg.validate());
  auto broken = [&](auto mutate) {
    HDGCNConfig c = cfg;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  broken([](HDGCNConfig& c) { c.K = 3; });
  broken([](HDGCNConfig& c) { c.K = -2; });
  broken([](HDGCNConfig& c) { c.L = 0; });
  broken([](HDGCNConfig& c) { c.d_in = 0; });
  broken([](HDGCNConfig& c) { c.num_classes = 1; });
  broken([](HDGCNConfig& c) { c.dropout = 1.0; });
  CHECK_THROWS_AS(HDGCNConfig::parse_mode("hybrid"), ConfigError);
  CHECK_THROWS_AS(HDGCNConfig::parse_task("edge"), ConfigError);
  CHECK(HDGCNConfig::parse_mode("static") == HDGCNConfig::Mode::Static);
}

TEST_CASE("static mode carries no attention parameters") {
  HDGCNConfig cfg;
  cfg.K = 4;
  cfg.d_in = 3;
  cfg.d_k = 4;
  cfg.num_classes = 2;
  cfg.mode = HDGCNConfig::Mode::Static;
  auto m = HDGCNModel::init(cfg, 1);
  for (auto& ow : m.layers[0].orders) CHECK_FALSE(ow.has_mvc());
  cfg.mode = HDGCNConfig::Mode::Dynamic;
  auto md = HDGCNModel::init(cfg, 1);
  CHECK(md.parameters().size() > m.parameters().size());
}

TEST_CASE("checkpoint round trip is exact") {
  HDGCNConfig cfg;
  cfg.K = 2;
  cfg.d_in = 3;
  cfg.d_k = 4;
  cfg.M = 2;
  cfg.num_classes = 2;
  auto m = HDGCNModel::init(cfg, 11);
  TempFile f("test_ckpt_roundtrip.json");
  save_checkpoint(f.path, m);
  auto m2 = load_checkpoint(f.path);
  auto ps = m.parameters();
  auto ps2 = m2.parameters();
  REQUIRE(ps.size() == ps2.size());
  for (size_t i = 0; i < ps.size(); ++i) {
    CHECK(ps[i]->name == ps2[i]->name);
    CHECK(ps[i]->value.v == ps2[i]->value.v);
  }
  CHECK(m2.cfg.K == 2);
  CHECK(m2.cfg.d_k == 4);
}

TEST_CASE("corrupt checkpoints are rejected") {
  TempFile f("test_ckpt_corrupt.json");
  {
    std::ofstream out(f.path);
    out << "{ not json\n";
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(f.path), doctest::Contains("checkpoint"),
                       DataError);
  {
    std::ofstream out(f.path);
    out << "{\"format\": \"other-format\"}\n";
  }
  CHECK_THROWS_AS(load_checkpoint(f.path), DataError);
  CHECK_THROWS_AS(load_checkpoint("no_such_file.json"), DataError);
}
