#include "hdgcn/tape.hpp"

#include <algorithm>
#include <cmath>

#include "hdgcn/kernels.hpp"

namespace hdgcn {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation: " + name);
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

Var Tape::push(Tensor value, std::function<void(Tape&)> back, const char* what) {
  check_finite(value, what);
  Node n;
  n.grad = Tensor::zeros(value.rows, value.cols);
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value) { return push(std::move(value), nullptr, "leaf"); }

Var Tape::watch(Parameter& p) {
  auto it = watched_.find(&p);
  if (it != watched_.end()) return it->second;
  Var v = push(p.value, nullptr, "parameter");
  nodes_[v.id].param = &p;
  watched_[&p] = v;
  return v;
}

const Tensor& Tape::val(Var v) const { return nodes_.at(v.id).value; }
Tensor& Tape::grad(Var v) { return nodes_.at(v.id).grad; }

Var Tape::custom(Tensor value, std::function<void(Tape&)> back, const char* what) {
  return push(std::move(value), std::move(back), what);
}

Var Tape::matmul(Var a, Var b, bool ta, bool tb) {
  Tensor c = kernels::gemm(val(a), val(b), ta, tb);
  Var out = push(std::move(c), nullptr, "matmul");
  nodes_[out.id].back = [a, b, ta, tb, out](Tape& t) {
    const Tensor& g = t.grad(out);
    if (!ta)
      kernels::gemm_acc(t.grad(a), g, t.val(b), false, !tb);
    else
      kernels::gemm_acc(t.grad(a), t.val(b), g, tb, true);
    if (!tb)
      kernels::gemm_acc(t.grad(b), t.val(a), g, !ta, false);
    else
      kernels::gemm_acc(t.grad(b), g, t.val(a), true, ta);
  };
  return out;
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (!ta.same_shape(tb))
    throw DimensionError("add shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor c = ta;
  for (size_t i = 0; i < c.size(); ++i) c.v[i] += tb.v[i];
  Var out = push(std::move(c), nullptr, "add");
  nodes_[out.id].back = [a, b, out](Tape& t) {
    const Tensor& g = t.grad(out);
    Tensor& ga = t.grad(a);
    Tensor& gb = t.grad(b);
    for (size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i];
      gb.v[i] += g.v[i];
    }
  };
  return out;
}

Var Tape::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Tape::scale(Var a, double s) {
  Tensor c = val(a);
  for (auto& x : c.v) x *= s;
  Var out = push(std::move(c), nullptr, "scale");
  nodes_[out.id].back = [a, s, out](Tape& t) {
    const Tensor& g = t.grad(out);
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < g.size(); ++i) ga.v[i] += s * g.v[i];
  };
  return out;
}

Var Tape::mul_elem(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (!ta.same_shape(tb))
    throw DimensionError("mul_elem shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor c = ta;
  for (size_t i = 0; i < c.size(); ++i) c.v[i] *= tb.v[i];
  Var out = push(std::move(c), nullptr, "mul_elem");
  nodes_[out.id].back = [a, b, out](Tape& t) {
    const Tensor& g = t.grad(out);
    const Tensor& va = t.val(a);
    const Tensor& vb = t.val(b);
    Tensor& ga = t.grad(a);
    Tensor& gb = t.grad(b);
    for (size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i] * vb.v[i];
      gb.v[i] += g.v[i] * va.v[i];
    }
  };
  return out;
}

Var Tape::add_row_broadcast(Var x, Var row) {
  const Tensor& tx = val(x);
  const Tensor& tr = val(row);
  if (tr.rows != 1 || tr.cols != tx.cols)
    throw DimensionError("broadcast row must be 1x" + std::to_string(tx.cols) + ", got " +
                         tr.shape_str());
  Tensor c = tx;
  for (int i = 0; i < c.rows; ++i)
    for (int j = 0; j < c.cols; ++j) c.at(i, j) += tr.at(0, j);
  Var out = push(std::move(c), nullptr, "add_row_broadcast");
  nodes_[out.id].back = [x, row, out](Tape& t) {
    const Tensor& g = t.grad(out);
    Tensor& gx = t.grad(x);
    Tensor& gr = t.grad(row);
    for (size_t i = 0; i < g.size(); ++i) gx.v[i] += g.v[i];
    for (int i = 0; i < g.rows; ++i)
      for (int j = 0; j < g.cols; ++j) gr.at(0, j) += g.at(i, j);
  };
  return out;
}

Var Tape::softmax_rows(Var x, double sc) {
  if (sc <= 0.0) throw ConfigError("softmax scale must be positive");
  const Tensor& tx = val(x);
  Tensor y(tx.rows, tx.cols);
  for (int i = 0; i < tx.rows; ++i) {
    double mx = -1e300;
    for (int j = 0; j < tx.cols; ++j) mx = std::max(mx, tx.at(i, j) / sc);
    double z = 0.0;
    for (int j = 0; j < tx.cols; ++j) z += std::exp(tx.at(i, j) / sc - mx);
    for (int j = 0; j < tx.cols; ++j) y.at(i, j) = std::exp(tx.at(i, j) / sc - mx) / z;
  }
  Var out = push(std::move(y), nullptr, "softmax_rows");
  nodes_[out.id].back = [x, sc, out](Tape& t) {
    const Tensor& g = t.grad(out);
    const Tensor& yv = t.val(out);
    Tensor& gx = t.grad(x);
    for (int i = 0; i < g.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < g.cols; ++j) dot += g.at(i, j) * yv.at(i, j);
      for (int j = 0; j < g.cols; ++j)
        gx.at(i, j) += yv.at(i, j) * (g.at(i, j) - dot) / sc;
    }
  };
  return out;
}

Var Tape::layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  if (eps <= 0.0) throw ConfigError("layer norm eps must be positive");
  const Tensor& tx = val(x);
  const Tensor& tg = val(gain);
  const Tensor& tb = val(bias);
  if (tg.cols != tx.cols || tb.cols != tx.cols || tg.rows != 1 || tb.rows != 1)
    throw DimensionError("layer norm gain/bias must be 1x" + std::to_string(tx.cols));
  int d = tx.cols;
  Tensor y(tx.rows, d);
  Tensor xhat(tx.rows, d);
  std::vector<double> inv_sigma(tx.rows);
  for (int i = 0; i < tx.rows; ++i) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += tx.at(i, j);
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = tx.at(i, j) - mu;
      var += c * c;
    }
    var /= d;
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = is;
    for (int j = 0; j < d; ++j) {
      xhat.at(i, j) = (tx.at(i, j) - mu) * is;
      y.at(i, j) = tg.at(0, j) * xhat.at(i, j) + tb.at(0, j);
    }
  }
  Var out = push(std::move(y), nullptr, "layer_norm_rows");
  nodes_[out.id].back = [x, gain, bias, out, xhat = std::move(xhat),
                         inv_sigma = std::move(inv_sigma)](Tape& t) {
    const Tensor& g = t.grad(out);
    const Tensor& tg = t.val(gain);
    Tensor& gx = t.grad(x);
    Tensor& gg = t.grad(gain);
    Tensor& gb = t.grad(bias);
    int d = g.cols;
    for (int i = 0; i < g.rows; ++i) {
      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
      for (int j = 0; j < d; ++j) {
        double dxhat = g.at(i, j) * tg.at(0, j);
        mean_dxhat += dxhat;
        mean_dxhat_xhat += dxhat * xhat.at(i, j);
        gg.at(0, j) += g.at(i, j) * xhat.at(i, j);
        gb.at(0, j) += g.at(i, j);
      }
      mean_dxhat /= d;
      mean_dxhat_xhat /= d;
      for (int j = 0; j < d; ++j) {
        double dxhat = g.at(i, j) * tg.at(0, j);
        gx.at(i, j) += inv_sigma[i] *
                       (dxhat - mean_dxhat - xhat.at(i, j) * mean_dxhat_xhat);
      }
    }
  };
  return out;
}

Var Tape::activation(Var x, Activation kind) {
  if (kind == Activation::Identity) return x;
  Tensor y = val(x);
  switch (kind) {
    case Activation::ReLU:
      for (auto& v : y.v) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::Sigmoid:
      for (auto& v : y.v) v = 1.0 / (1.0 + std::exp(-v));
      break;
    case Activation::Tanh:
      for (auto& v : y.v) v = std::tanh(v);
      break;
    default:
      break;
  }
  Var out = push(std::move(y), nullptr, "activation");
  nodes_[out.id].back = [x, kind, out](Tape& t) {
    const Tensor& g = t.grad(out);
    const Tensor& vx = t.val(x);
    const Tensor& vy = t.val(out);
    Tensor& gx = t.grad(x);
    for (size_t i = 0; i < g.size(); ++i) {
      double d = 1.0;
      switch (kind) {
        case Activation::ReLU: d = vx.v[i] > 0.0 ? 1.0 : 0.0; break;
        case Activation::Sigmoid: d = vy.v[i] * (1.0 - vy.v[i]); break;
        case Activation::Tanh: d = 1.0 - vy.v[i] * vy.v[i]; break;
        default: break;
      }
      gx.v[i] += d * g.v[i];
    }
  };
  return out;
}

Var Tape::col_sum(Var x) {
  const Tensor& tx = val(x);
  Tensor y(1, tx.cols);
  for (int i = 0; i < tx.rows; ++i)
    for (int j = 0; j < tx.cols; ++j) y.at(0, j) += tx.at(i, j);
  Var out = push(std::move(y), nullptr, "col_sum");
  nodes_[out.id].back = [x, out](Tape& t) {
    const Tensor& g = t.grad(out);
    Tensor& gx = t.grad(x);
    for (int i = 0; i < gx.rows; ++i)
      for (int j = 0; j < gx.cols; ++j) gx.at(i, j) += g.at(0, j);
  };
  return out;
}

Var Tape::mean_rows(Var x) {
  int n = val(x).rows;
  if (n == 0) throw DimensionError("mean_rows of empty tensor");
  return scale(col_sum(x), 1.0 / n);
}

Var Tape::max_rows(Var x) {
  const Tensor& tx = val(x);
  if (tx.rows == 0) throw DimensionError("max_rows of empty tensor");
  Tensor y(1, tx.cols);
  std::vector<int> arg(tx.cols, 0);
  for (int j = 0; j < tx.cols; ++j) {
    double best = tx.at(0, j);
    for (int i = 1; i < tx.rows; ++i)
      if (tx.at(i, j) > best) {
        best = tx.at(i, j);
        arg[j] = i;
      }
    y.at(0, j) = best;
  }
  Var out = push(std::move(y), nullptr, "max_rows");
  nodes_[out.id].back = [x, out, arg = std::move(arg)](Tape& t) {
    const Tensor& g = t.grad(out);
    Tensor& gx = t.grad(x);
    for (int j = 0; j < g.cols; ++j) gx.at(arg[j], j) += g.at(0, j);
  };
  return out;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  int cols = val(parts[0]).cols;
  int rows = 0;
  for (Var p : parts) {
    if (val(p).cols != cols) throw DimensionError("concat_rows column mismatch");
    rows += val(p).rows;
  }
  Tensor y(rows, cols);
  int r = 0;
  for (Var p : parts) {
    const Tensor& tp = val(p);
    for (int i = 0; i < tp.rows; ++i, ++r)
      for (int j = 0; j < cols; ++j) y.at(r, j) = tp.at(i, j);
  }
  Var out = push(std::move(y), nullptr, "concat_rows");
  nodes_[out.id].back = [parts, out](Tape& t) {
    const Tensor& g = t.grad(out);
    int r = 0;
    for (Var p : parts) {
      Tensor& gp = t.grad(p);
      for (int i = 0; i < gp.rows; ++i, ++r)
        for (int j = 0; j < g.cols; ++j) gp.at(i, j) += g.at(r, j);
    }
  };
  return out;
}

Var Tape::gather_rows(Var x, const std::vector<int>& rows) {
  const Tensor& tx = val(x);
  Tensor y(static_cast<int>(rows.size()), tx.cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    int r = rows[i];
    if (r < 0 || r >= tx.rows) throw DimensionError("gather row out of range");
    for (int j = 0; j < tx.cols; ++j) y.at(static_cast<int>(i), j) = tx.at(r, j);
  }
  Var out = push(std::move(y), nullptr, "gather_rows");
  nodes_[out.id].back = [x, rows, out](Tape& t) {
    const Tensor& g = t.grad(out);
    Tensor& gx = t.grad(x);
    for (size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < g.cols; ++j)
        gx.at(rows[i], j) += g.at(static_cast<int>(i), j);
  };
  return out;
}

Var Tape::sum(Var x) {
  const Tensor& tx = val(x);
  Tensor y(1, 1);
  for (double v : tx.v) y.at(0, 0) += v;
  Var out = push(std::move(y), nullptr, "sum");
  nodes_[out.id].back = [x, out](Tape& t) {
    double g = t.grad(out).at(0, 0);
    Tensor& gx = t.grad(x);
    for (auto& v : gx.v) v += g;
  };
  return out;
}

Var Tape::cross_entropy(Var logits, const std::vector<int>& labels) {
  const Tensor& tl = val(logits);
  if (static_cast<int>(labels.size()) != tl.rows)
    throw DataError("labels length " + std::to_string(labels.size()) +
                    " != logits rows " + std::to_string(tl.rows));
  for (int i = 0; i < tl.rows; ++i)
    if (labels[i] < 0 || labels[i] >= tl.cols)
      throw DataError("label out of range at row " + std::to_string(i));
  int n = tl.rows;
  Tensor probs(tl.rows, tl.cols);
  double loss = 0.0;
  for (int i = 0; i < tl.rows; ++i) {
    double mx = -1e300;
    for (int j = 0; j < tl.cols; ++j) mx = std::max(mx, tl.at(i, j));
    double z = 0.0;
    for (int j = 0; j < tl.cols; ++j) z += std::exp(tl.at(i, j) - mx);
    for (int j = 0; j < tl.cols; ++j) probs.at(i, j) = std::exp(tl.at(i, j) - mx) / z;
    loss -= (tl.at(i, labels[i]) - mx - std::log(z));
  }
  loss /= n;
  Tensor out_t(1, 1);
  out_t.at(0, 0) = loss;
  Var out = push(std::move(out_t), nullptr, "cross_entropy");
  nodes_[out.id].back = [logits, labels, out, probs = std::move(probs)](Tape& t) {
    double g = t.grad(out).at(0, 0);
    Tensor& gl = t.grad(logits);
    int n = gl.rows;
    for (int i = 0; i < gl.rows; ++i)
      for (int j = 0; j < gl.cols; ++j) {
        double delta = (j == labels[i]) ? 1.0 : 0.0;
        gl.at(i, j) += g * (probs.at(i, j) - delta) / n;
      }
  };
  return out;
}

void Tape::backward(Var loss) {
  const Tensor& tl = val(loss);
  if (tl.rows != 1 || tl.cols != 1)
    throw UsageError("backward requires a scalar loss, got " + tl.shape_str());
  nodes_[loss.id].grad.at(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
  // Accumulate so batched passes on separate tapes sum their grads.
  for (auto& [p, v] : watched_) {
    const Tensor& g = nodes_[v.id].grad;
    if (!p->grad.same_shape(g)) p->grad = Tensor::zeros(g.rows, g.cols);
    for (size_t i = 0; i < g.size(); ++i) p->grad.v[i] += g.v[i];
  }
}

GradCheckReport grad_check(const std::function<Var(Tape&)>& forward,
                           const std::vector<Parameter*>& params, double tol, double h) {
  auto eval = [&]() {
    Tape t;
    Var loss = forward(t);
    return t.val(loss).at(0, 0);
  };
  // Analytic pass.
  {
    for (Parameter* p : params) p->grad = Tensor::zeros(p->value.rows, p->value.cols);
    Tape t;
    Var loss = forward(t);
    t.backward(loss);
  }
  GradCheckReport report;
  for (Parameter* p : params) {
    GradCheckEntry e;
    e.name = p->name;
    Tensor analytic = p->grad;
    for (size_t i = 0; i < p->value.size(); ++i) {
      double orig = p->value.v[i];
      p->value.v[i] = orig + h;
      double fp = eval();
      p->value.v[i] = orig - h;
      double fm = eval();
      p->value.v[i] = orig;
      double fd = (fp - fm) / (2.0 * h);
      double ad = analytic.v[i];
      double rel = std::abs(fd - ad) / (std::abs(fd) + std::abs(ad) + 1e-6);
      e.max_rel_err = std::max(e.max_rel_err, rel);
    }
    e.pass = e.max_rel_err < tol;
    report.max_rel_err = std::max(report.max_rel_err, e.max_rel_err);
    report.pass = report.pass && e.pass;
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace hdgcn
