#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hdgcn/tape.hpp"
#include "hdgcn/tensor.hpp"

namespace hdgcn {

/// Symmetric CSR matrix housing the adjacency A or its normalization.
/// Immutable after construction; column indices sorted within each row,
/// duplicate input edges merged by summation.
class SparseAdjacency {
 public:
  SparseAdjacency() = default;

  /// Builds from an undirected edge list (i, j, w). Each undirected edge
  /// may be given once; both orientations are stored. Self loops allowed.
  static SparseAdjacency from_edges(int n,
                                    const std::vector<std::tuple<int, int, double>>& edges);

  int n() const { return n_; }
  int nnz() const { return static_cast<int>(cols_.size()); }
  const std::vector<int>& row_offsets() const { return offsets_; }
  const std::vector<int>& col_indices() const { return cols_; }
  const std::vector<double>& weights() const { return weights_; }

  double at(int i, int j) const;
  double weighted_degree(int i) const;
  Tensor to_dense() const;
  bool is_symmetric(std::string* offending = nullptr) const;

 private:
  int n_ = 0;
  std::vector<int> offsets_{0};
  std::vector<int> cols_;
  std::vector<double> weights_;

  friend SparseAdjacency normalize_adjacency(const SparseAdjacency& a);
  friend SparseAdjacency random_walk_adjacency(const SparseAdjacency& a);
};

/// (D+I)^{-1/2} (A+I) (D+I)^{-1/2} with weighted degrees. Every node
/// gains a self loop; isolated nodes map to a bare 1 on the diagonal.
SparseAdjacency normalize_adjacency(const SparseAdjacency& a);

/// Row-stochastic random walk matrix (D+I)^{-1} (A+I).
SparseAdjacency random_walk_adjacency(const SparseAdjacency& a);

/// Sparse-dense product A·X on plain tensors (serial or OpenMP).
Tensor spmm(const SparseAdjacency& a, const Tensor& x);

/// Differentiable A·X; A is a constant, grad flows through x only.
Var spmm(Tape& t, const SparseAdjacency& a, Var x);

/// Dense A^k via repeated sparse products. Guarded at n <= 10000.
Tensor power_transition(const SparseAdjacency& a, int k);

struct Graph {
  SparseAdjacency adjacency;            // raw A
  SparseAdjacency normalized;           // cached normalize_adjacency(A)
  Tensor features;                      // n x d
  std::vector<int> labels;              // -1 = unlabeled
  std::vector<uint8_t> train_mask, val_mask, test_mask;

  int n() const { return adjacency.n(); }
  void validate() const;
};

/// One node per distinct token; unweighted undirected edges between all
/// pairs co-occurring in any length-`window` sliding window; no self
/// edges. Features are not attached here.
Graph build_cooccurrence_graph(const std::vector<std::string>& tokens, int window,
                               const std::unordered_map<std::string, int>* vocab = nullptr,
                               std::vector<int>* node_vocab_ids = nullptr);

struct AlignmentResult {
  bool converged = false;
  int steps = 0;
};

/// Counts propagation steps until cosine(H[src], H[dst]) >= threshold.
/// use_transition=true iterates the row-stochastic walk matrix; false
/// iterates the symmetric normalization with per-step row renormalization
/// to unit norm (diffusion without probability transfer).
AlignmentResult feature_alignment_steps(const SparseAdjacency& a, const Tensor& features,
                                        int src, int dst, bool use_transition,
                                        double threshold, int max_steps);

/// Line-oriented text format: `n <count>`, `e <i> <j> <w>` (i<j),
/// optional `y <node> <class>`, optional `m <node> <train|val|test>`.
Graph read_graph_file(std::istream& in);
Graph load_graph_file(const std::string& path);
void write_graph_file(std::ostream& out, const Graph& g);
void save_graph_file(const std::string& path, const Graph& g);

}  // namespace hdgcn
