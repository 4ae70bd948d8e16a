#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hdgcn/tensor.hpp"

namespace hdgcn {

enum class Activation { Identity, ReLU, Sigmoid, Tanh };
Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

/// Named trainable tensor. Grad is filled by Tape::backward for every
/// watched parameter (zeros when the loss does not reach it).
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::zeros(value.rows, value.cols);
  }
};

/// Handle to a tape node.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Define-by-run reverse-mode tape. Built fresh for every forward pass;
/// single-threaded during a pass, distinct tapes may run concurrently.
class Tape {
 public:
  Var leaf(Tensor value);
  /// Watching the same parameter twice returns the same node.
  Var watch(Parameter& p);

  const Tensor& val(Var v) const;
  Tensor& grad(Var v);

  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var mul_elem(Var a, Var b);
  /// x (n x d) + row (1 x d) broadcast over rows.
  Var add_row_broadcast(Var x, Var row);
  Var softmax_rows(Var x, double scale);
  Var layer_norm_rows(Var x, Var gain, Var bias, double eps);
  Var activation(Var x, Activation kind);
  Var col_sum(Var x);    // 1 x cols
  Var mean_rows(Var x);  // 1 x cols
  Var max_rows(Var x);   // 1 x cols, grad routed to first argmax
  Var concat_rows(const std::vector<Var>& parts);
  Var gather_rows(Var x, const std::vector<int>& rows);
  Var sum(Var x);  // 1 x 1
  /// Mean of -log softmax(row)[label]; scalar output.
  Var cross_entropy(Var logits, const std::vector<int>& labels);

  /// Generic node for ops defined outside the tape (e.g. sparse products).
  /// `back` runs during the reverse sweep with grads of later nodes final.
  Var custom(Tensor value, std::function<void(Tape&)> back, const char* what);

  /// Seeds d(loss)/d(loss)=1, sweeps the tape in reverse, then copies
  /// grads into every watched Parameter. Loss must be 1x1.
  void backward(Var loss);

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
  std::map<Parameter*, Var> watched_;

  Var push(Tensor value, std::function<void(Tape&)> back, const char* what);
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};
struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool pass = true;
};

/// Compares tape gradients against central finite differences (step h)
/// for every parameter. `forward` must build a scalar loss on the given
/// tape and be deterministic.
GradCheckReport grad_check(const std::function<Var(Tape&)>& forward,
                           const std::vector<Parameter*>& params, double tol,
                           double h = 1e-5);

}  // namespace hdgcn
