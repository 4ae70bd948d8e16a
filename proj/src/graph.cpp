#include "hdgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hdgcn/kernels.hpp"

namespace hdgcn {

SparseAdjacency SparseAdjacency::from_edges(
    int n, const std::vector<std::tuple<int, int, double>>& edges) {
  if (n < 0) throw DataError("negative node count");
  std::map<std::pair<int, int>, double> merged;
  for (auto [i, j, w] : edges) {
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw DataError("edge endpoint out of range: (" + std::to_string(i) + "," +
                      std::to_string(j) + ")");
    if (w < 0.0) throw DataError("negative edge weight");
    merged[{i, j}] += w;
    if (i != j) merged[{j, i}] += w;
  }
  SparseAdjacency a;
  a.n_ = n;
  a.offsets_.assign(n + 1, 0);
  for (auto& [ij, w] : merged) a.offsets_[ij.first + 1]++;
  for (int i = 0; i < n; ++i) a.offsets_[i + 1] += a.offsets_[i];
  a.cols_.resize(merged.size());
  a.weights_.resize(merged.size());
  std::vector<int> cursor(a.offsets_.begin(), a.offsets_.end() - 1);
  for (auto& [ij, w] : merged) {
    int pos = cursor[ij.first]++;
    a.cols_[pos] = ij.second;
    a.weights_[pos] = w;
  }
  return a;
}

double SparseAdjacency::at(int i, int j) const {
  for (int p = offsets_[i]; p < offsets_[i + 1]; ++p)
    if (cols_[p] == j) return weights_[p];
  return 0.0;
}

double SparseAdjacency::weighted_degree(int i) const {
  double d = 0.0;
  for (int p = offsets_[i]; p < offsets_[i + 1]; ++p) d += weights_[p];
  return d;
}

Tensor SparseAdjacency::to_dense() const {
  Tensor t(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int p = offsets_[i]; p < offsets_[i + 1]; ++p) t.at(i, cols_[p]) = weights_[p];
  return t;
}

bool SparseAdjacency::is_symmetric(std::string* offending) const {
  for (int i = 0; i < n_; ++i)
    for (int p = offsets_[i]; p < offsets_[i + 1]; ++p) {
      int j = cols_[p];
      if (std::abs(at(j, i) - weights_[p]) > 1e-12) {
        if (offending)
          *offending = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
        return false;
      }
    }
  return true;
}

SparseAdjacency normalize_adjacency(const SparseAdjacency& a) {
  std::string pair;
  if (!a.is_symmetric(&pair))
    throw DataError("adjacency is not symmetric at entry " + pair);
  int n = a.n();
  std::vector<double> dinv(n);
  for (int i = 0; i < n; ++i) dinv[i] = 1.0 / (a.weighted_degree(i) + 1.0);
  std::vector<std::tuple<int, int, double>> edges;
  const auto& off = a.row_offsets();
  const auto& cols = a.col_indices();
  const auto& w = a.weights();
  for (int i = 0; i < n; ++i) {
    edges.emplace_back(i, i, (1.0 + a.at(i, i)) * dinv[i]);
    for (int p = off[i]; p < off[i + 1]; ++p) {
      int j = cols[p];
      if (j <= i) continue;
      edges.emplace_back(i, j, w[p] * std::sqrt(dinv[i] * dinv[j]));
    }
  }
  return SparseAdjacency::from_edges(n, edges);
}

SparseAdjacency random_walk_adjacency(const SparseAdjacency& a) {
  std::string pair;
  if (!a.is_symmetric(&pair))
    throw DataError("adjacency is not symmetric at entry " + pair);
  int n = a.n();
  SparseAdjacency out;
  // Row scaling breaks symmetry; build CSR directly.
  std::vector<int> offsets(n + 1, 0);
  std::vector<int> cols;
  std::vector<double> weights;
  const auto& off = a.row_offsets();
  const auto& acols = a.col_indices();
  const auto& aw = a.weights();
  for (int i = 0; i < n; ++i) {
    double dinv = 1.0 / (a.weighted_degree(i) + 1.0);
    bool self_emitted = false;
    for (int p = off[i]; p < off[i + 1]; ++p) {
      int j = acols[p];
      double w = aw[p];
      if (j == i) {
        w += 1.0;
        self_emitted = true;
      } else if (!self_emitted && j > i) {
        cols.push_back(i);
        weights.push_back(dinv);
        self_emitted = true;
      }
      cols.push_back(j);
      weights.push_back(w * dinv);
    }
    if (!self_emitted) {
      cols.push_back(i);
      weights.push_back(dinv);
    }
    offsets[i + 1] = static_cast<int>(cols.size());
  }
  out.n_ = n;
  out.offsets_ = std::move(offsets);
  out.cols_ = std::move(cols);
  out.weights_ = std::move(weights);
  return out;
}

Tensor spmm(const SparseAdjacency& a, const Tensor& x) {
  if (a.n() != x.rows)
    throw DimensionError("spmm shape mismatch: adjacency " + std::to_string(a.n()) +
                         " nodes vs features " + x.shape_str());
  Tensor y(a.n(), x.cols);
  const auto& off = a.row_offsets();
  const auto& cols = a.col_indices();
  const auto& w = a.weights();
  int n = a.n(), d = x.cols;
  int nt = kernels::threads();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
#else
  (void)nt;
#endif
  for (int i = 0; i < n; ++i)
    for (int p = off[i]; p < off[i + 1]; ++p) {
      double wij = w[p];
      const double* xr = &x.v[static_cast<size_t>(cols[p]) * d];
      double* yr = &y.v[static_cast<size_t>(i) * d];
      for (int j = 0; j < d; ++j) yr[j] += wij * xr[j];
    }
  return y;
}

Var spmm(Tape& t, const SparseAdjacency& a, Var x) {
  Tensor y = spmm(a, t.val(x));
  // Declared before the lambda so the output handle can be captured.
  Var out{static_cast<int>(t.num_nodes())};
  return t.custom(
      std::move(y),
      [&a, x, out](Tape& tape) {
        // dX += A^T * g, as a scatter over CSR rows.
        const Tensor& g = tape.grad(out);
        Tensor& gx = tape.grad(x);
        const auto& off = a.row_offsets();
        const auto& cols = a.col_indices();
        const auto& w = a.weights();
        int d = g.cols;
        for (int i = 0; i < a.n(); ++i)
          for (int p = off[i]; p < off[i + 1]; ++p) {
            double wij = w[p];
            const double* gr = &g.v[static_cast<size_t>(i) * d];
            double* gxr = &gx.v[static_cast<size_t>(cols[p]) * d];
            for (int j = 0; j < d; ++j) gxr[j] += wij * gr[j];
          }
      },
      "spmm");
}

Tensor power_transition(const SparseAdjacency& a, int k) {
  if (k < 1) throw ConfigError("power_transition requires k >= 1");
  if (a.n() > 10000)
    throw CapabilityError("power_transition guarded at n <= 10000; apply spmm iteratively");
  Tensor p = Tensor::identity(a.n());
  for (int i = 0; i < k; ++i) p = spmm(a, p);
  return p;
}

void Graph::validate() const {
  if (features.rows != adjacency.n())
    throw DataError("feature rows " + std::to_string(features.rows) +
                    " != node count " + std::to_string(adjacency.n()));
  size_t n = static_cast<size_t>(adjacency.n());
  auto check_mask = [&](const std::vector<uint8_t>& m, const char* name) {
    if (!m.empty() && m.size() != n)
      throw DataError(std::string(name) + " mask length mismatch");
  };
  check_mask(train_mask, "train");
  check_mask(val_mask, "val");
  check_mask(test_mask, "test");
  for (size_t i = 0; i < n; ++i) {
    int c = 0;
    if (i < train_mask.size()) c += train_mask[i];
    if (i < val_mask.size()) c += val_mask[i];
    if (i < test_mask.size()) c += test_mask[i];
    if (c > 1) throw DataError("overlapping masks at node " + std::to_string(i));
  }
}

Graph build_cooccurrence_graph(const std::vector<std::string>& tokens, int window,
                               const std::unordered_map<std::string, int>* vocab,
                               std::vector<int>* node_vocab_ids) {
  if (tokens.empty()) throw DataError("empty token list");
  if (window < 2) throw ConfigError("co-occurrence window must be >= 2");
  std::unordered_map<std::string, int> node_of;
  std::vector<int> seq;  // token sequence as node ids
  std::vector<int> vocab_ids;
  seq.reserve(tokens.size());
  for (const auto& tok : tokens) {
    auto it = node_of.find(tok);
    if (it == node_of.end()) {
      int id = static_cast<int>(node_of.size());
      node_of.emplace(tok, id);
      seq.push_back(id);
      if (vocab) {
        auto vit = vocab->find(tok);
        vocab_ids.push_back(vit == vocab->end() ? -1 : vit->second);
      }
    } else {
      seq.push_back(it->second);
    }
  }
  int n = static_cast<int>(node_of.size());
  std::set<std::pair<int, int>> pairs;
  int len = static_cast<int>(seq.size());
  int num_windows = std::max(1, len - window + 1);
  for (int s = 0; s < num_windows; ++s) {
    int end = std::min(len, s + window);
    for (int i = s; i < end; ++i)
      for (int j = i + 1; j < end; ++j) {
        int u = seq[i], v = seq[j];
        if (u == v) continue;
        pairs.emplace(std::min(u, v), std::max(u, v));
      }
  }
  std::vector<std::tuple<int, int, double>> edges;
  for (auto [u, v] : pairs) edges.emplace_back(u, v, 1.0);
  Graph g;
  g.adjacency = SparseAdjacency::from_edges(n, edges);
  g.normalized = normalize_adjacency(g.adjacency);
  g.features = Tensor(n, 0);
  if (node_vocab_ids) *node_vocab_ids = std::move(vocab_ids);
  return g;
}

namespace {
double cosine(const Tensor& h, int a, int b) {
  double dot = 0, na = 0, nb = 0;
  for (int j = 0; j < h.cols; ++j) {
    dot += h.at(a, j) * h.at(b, j);
    na += h.at(a, j) * h.at(a, j);
    nb += h.at(b, j) * h.at(b, j);
  }
  double denom = std::sqrt(na) * std::sqrt(nb);
  if (denom == 0.0) return 0.0;
  return dot / denom;
}

void renormalize_rows(Tensor& h) {
  for (int i = 0; i < h.rows; ++i) {
    double norm = 0.0;
    for (int j = 0; j < h.cols; ++j) norm += h.at(i, j) * h.at(i, j);
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (int j = 0; j < h.cols; ++j) h.at(i, j) /= norm;
  }
}
}  // namespace

AlignmentResult feature_alignment_steps(const SparseAdjacency& a, const Tensor& features,
                                        int src, int dst, bool use_transition,
                                        double threshold, int max_steps) {
  if (src == dst) throw UsageError("src and dst must differ");
  if (threshold <= 0.0 || threshold >= 1.0)
    throw ConfigError("alignment threshold must lie in (0,1)");
  SparseAdjacency op = use_transition ? random_walk_adjacency(a) : normalize_adjacency(a);
  Tensor h = features;
  for (int step = 0; step <= max_steps; ++step) {
    if (cosine(h, src, dst) >= threshold) return {true, step};
    if (step == max_steps) break;
    h = spmm(op, h);
    if (!use_transition) renormalize_rows(h);
  }
  return {false, max_steps};
}

// ---------------------------------------------------------------------------
// Graph file I/O
// ---------------------------------------------------------------------------

Graph read_graph_file(std::istream& in) {
  int n = -1, dim = 0;
  std::vector<std::tuple<int, int, double>> edges;
  std::vector<int> labels;
  std::vector<uint8_t> train, val, test;
  std::vector<std::vector<double>> feats;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    auto fail = [&](const std::string& msg) {
      throw DataError("parse error at line " + std::to_string(line_no) + ": " + msg);
    };
    if (tag == "n") {
      if (!(ls >> n) || n < 0) fail("bad node count");
      labels.assign(n, -1);
      train.assign(n, 0);
      val.assign(n, 0);
      test.assign(n, 0);
      feats.assign(n, {});
    } else if (tag == "d") {
      if (n < 0) fail("d before n");
      if (!(ls >> dim) || dim < 0) fail("bad feature dimension");
    } else if (tag == "e") {
      int i, j;
      double w;
      if (n < 0) fail("e before n");
      if (!(ls >> i >> j >> w)) fail("bad edge line");
      if (i < 0 || j < 0 || i >= n || j >= n) fail("edge endpoint out of range");
      if (i >= j) fail("edge must satisfy i < j");
      edges.emplace_back(i, j, w);
    } else if (tag == "y") {
      int node, cls;
      if (n < 0) fail("y before n");
      if (!(ls >> node >> cls)) fail("bad label line");
      if (node < 0 || node >= n) fail("label node out of range");
      labels[node] = cls;
    } else if (tag == "m") {
      int node;
      std::string split;
      if (n < 0) fail("m before n");
      if (!(ls >> node >> split)) fail("bad mask line");
      if (node < 0 || node >= n) fail("mask node out of range");
      if (split == "train") train[node] = 1;
      else if (split == "val") val[node] = 1;
      else if (split == "test") test[node] = 1;
      else fail("unknown split: " + split);
    } else if (tag == "x") {
      int node;
      if (n < 0) fail("x before n");
      if (dim <= 0) fail("x before d");
      if (!(ls >> node)) fail("bad feature line");
      if (node < 0 || node >= n) fail("feature node out of range");
      std::vector<double> row(dim);
      for (int j = 0; j < dim; ++j)
        if (!(ls >> row[j])) fail("feature line needs " + std::to_string(dim) + " values");
      feats[node] = std::move(row);
    } else {
      fail("unknown line tag: " + tag);
    }
  }
  if (n < 0) throw DataError("graph file missing 'n' header");
  Graph g;
  g.adjacency = SparseAdjacency::from_edges(n, edges);
  g.normalized = normalize_adjacency(g.adjacency);
  g.labels = std::move(labels);
  g.train_mask = std::move(train);
  g.val_mask = std::move(val);
  g.test_mask = std::move(test);
  if (dim > 0) {
    g.features = Tensor(n, dim);
    for (int i = 0; i < n; ++i) {
      if (feats[i].empty()) continue;
      for (int j = 0; j < dim; ++j) g.features.at(i, j) = feats[i][j];
    }
  } else {
    // No features stored: fall back to one-hot node identity.
    g.features = Tensor::identity(n);
  }
  g.validate();
  return g;
}

Graph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open graph file: " + path);
  return read_graph_file(in);
}

namespace {
std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
}  // namespace

void write_graph_file(std::ostream& out, const Graph& g) {
  int n = g.n();
  out << "n " << n << "\n";
  bool one_hot = g.features.cols == n;
  if (one_hot) {
    // Heuristic: identity features are the no-feature fallback; only treat
    // them as such when they are exactly the identity.
    for (int i = 0; i < n && one_hot; ++i)
      for (int j = 0; j < n; ++j)
        if (g.features.at(i, j) != (i == j ? 1.0 : 0.0)) {
          one_hot = false;
          break;
        }
  }
  if (g.features.cols > 0 && !one_hot) out << "d " << g.features.cols << "\n";
  const auto& off = g.adjacency.row_offsets();
  const auto& cols = g.adjacency.col_indices();
  const auto& w = g.adjacency.weights();
  for (int i = 0; i < n; ++i)
    for (int p = off[i]; p < off[i + 1]; ++p)
      if (i < cols[p]) out << "e " << i << " " << cols[p] << " " << fmt_double(w[p]) << "\n";
  for (int i = 0; i < n; ++i)
    if (i < static_cast<int>(g.labels.size()) && g.labels[i] >= 0)
      out << "y " << i << " " << g.labels[i] << "\n";
  auto dump_mask = [&](const std::vector<uint8_t>& m, const char* name) {
    for (int i = 0; i < static_cast<int>(m.size()); ++i)
      if (m[i]) out << "m " << i << " " << name << "\n";
  };
  dump_mask(g.train_mask, "train");
  dump_mask(g.val_mask, "val");
  dump_mask(g.test_mask, "test");
  if (g.features.cols > 0 && !one_hot)
    for (int i = 0; i < n; ++i) {
      out << "x " << i;
      for (int j = 0; j < g.features.cols; ++j) out << " " << fmt_double(g.features.at(i, j));
      out << "\n";
    }
}

void save_graph_file(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write graph file: " + path);
  write_graph_file(out, g);
}

}  // namespace hdgcn
