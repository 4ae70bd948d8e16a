#include "hdgcn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace hdgcn {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (opt.lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (eval_every < 1) throw ConfigError("eval cadence must be >= 1");
}

void AdaBelief::step(const std::vector<Parameter*>& params) {
  if (state_.empty()) {
    bound_ = params;
    state_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state_[i].m = Tensor::zeros(params[i]->value.rows, params[i]->value.cols);
      state_[i].s = Tensor::zeros(params[i]->value.rows, params[i]->value.cols);
    }
  } else if (bound_ != params) {
    throw UsageError("AdaBelief stepped with a different parameter list");
  }
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.grad.same_shape(p.value))
      throw UsageError("parameter " + p.name + " has no gradient");
    Tensor& m = state_[i].m;
    Tensor& s = state_[i].s;
    for (size_t j = 0; j < p.value.size(); ++j) {
      double g = p.grad.v[j];
      m.v[j] = cfg_.beta1 * m.v[j] + (1.0 - cfg_.beta1) * g;
      double dev = g - m.v[j];
      s.v[j] = cfg_.beta2 * s.v[j] + (1.0 - cfg_.beta2) * dev * dev + cfg_.eps;
      double mhat = m.v[j] / bc1;
      double shat = s.v[j] / bc2;
      p.value.v[j] -= cfg_.lr * mhat / (std::sqrt(shat) + cfg_.eps);
    }
  }
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows);
  for (int i = 0; i < logits.rows; ++i) {
    int best = 0;
    for (int j = 1; j < logits.cols; ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    out[i] = best;
  }
  return out;
}

Metrics compute_metrics(const std::vector<int>& pred, const std::vector<int>& truth,
                        int num_classes) {
  if (pred.size() != truth.size()) throw UsageError("pred/truth length mismatch");
  Metrics m;
  if (pred.empty()) return m;
  int correct = 0;
  std::vector<int> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == truth[i]) {
      ++correct;
      ++tp[truth[i]];
    } else {
      ++fp[pred[i]];
      ++fn[truth[i]];
    }
  }
  m.accuracy = static_cast<double>(correct) / pred.size();
  double f1_sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    double denom = 2.0 * tp[c] + fp[c] + fn[c];
    f1_sum += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
  }
  m.macro_f1 = f1_sum / num_classes;
  // Single-label multiclass: micro-F1 equals accuracy.
  m.micro_f1 = m.accuracy;
  return m;
}

namespace {
std::vector<int> mask_indices(const std::vector<uint8_t>& mask) {
  std::vector<int> idx;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(static_cast<int>(i));
  return idx;
}

std::vector<int> labels_at(const std::vector<int>& labels, const std::vector<int>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) {
    if (labels[i] < 0) throw DataError("masked node " + std::to_string(i) + " is unlabeled");
    out.push_back(labels[i]);
  }
  return out;
}

std::vector<Tensor> snapshot(const std::vector<Parameter*>& params) {
  std::vector<Tensor> s;
  s.reserve(params.size());
  for (Parameter* p : params) s.push_back(p->value);
  return s;
}

void restore(const std::vector<Parameter*>& params, const std::vector<Tensor>& snap) {
  for (size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->grad = Tensor::zeros(p->value.rows, p->value.cols);
}
}  // namespace

Metrics evaluate_node(HDGCNModel& model, const NodeDataset& data,
                      const std::vector<uint8_t>& mask) {
  std::vector<int> idx = mask_indices(mask);
  if (idx.empty()) return {};
  Tape t;
  ModelOutput out = hdgcn_forward(t, data.graph, model);
  const Tensor& logits = t.val(out.logits);
  std::vector<int> pred_all = argmax_rows(logits);
  std::vector<int> pred, truth;
  for (int i : idx) pred.push_back(pred_all[i]);
  truth = labels_at(data.graph.labels, idx);
  return compute_metrics(pred, truth, data.num_classes);
}

TrainResult train(HDGCNModel& model, const NodeDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.graph.validate();
  std::vector<int> train_idx = mask_indices(data.graph.train_mask);
  if (train_idx.empty()) throw DataError("empty train split");
  std::vector<int> train_labels = labels_at(data.graph.labels, train_idx);
  bool have_val = !mask_indices(data.graph.val_mask).empty();

  auto params = model.parameters();
  AdaBelief opt(cfg.opt);
  std::mt19937_64 dropout_rng(cfg.seed);
  TrainResult result;
  std::vector<Tensor> best;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    zero_grads(params);
    Tape t;
    ModelOutput out = hdgcn_forward(t, data.graph, model,
                                    model.cfg.dropout > 0.0 ? &dropout_rng : nullptr);
    Var loss = t.cross_entropy(t.gather_rows(out.logits, train_idx), train_labels);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = t.val(loss).at(0, 0);
    {
      std::vector<int> pred_all = argmax_rows(t.val(out.logits));
      std::vector<int> pred;
      for (int i : train_idx) pred.push_back(pred_all[i]);
      rec.train_acc = compute_metrics(pred, train_labels, data.num_classes).accuracy;
    }
    t.backward(loss);
    opt.step(params);

    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      double score;
      if (have_val) {
        rec.val_acc = evaluate_node(model, data, data.graph.val_mask).accuracy;
        score = rec.val_acc;
      } else {
        rec.val_acc = 0.0;
        score = rec.train_acc;
      }
      if (result.best_epoch < 0 || score > result.best_val_acc) {
        result.best_epoch = epoch;
        result.best_val_acc = score;
        best = snapshot(params);
      }
    } else if (!result.history.empty()) {
      rec.val_acc = result.history.back().val_acc;
    }
    result.history.push_back(rec);
  }
  if (!best.empty()) restore(params, best);
  result.train = evaluate_node(model, data, data.graph.train_mask);
  result.val = evaluate_node(model, data, data.graph.val_mask);
  result.test = evaluate_node(model, data, data.graph.test_mask);
  return result;
}

Metrics evaluate_graphs(HDGCNModel& model, const TextCorpus& corpus,
                        const std::vector<int>& doc_ids) {
  if (doc_ids.empty()) return {};
  std::vector<int> pred, truth;
  for (int d : doc_ids) {
    Tape t;
    ModelOutput out = hdgcn_forward(t, corpus.graphs[d], model);
    pred.push_back(argmax_rows(t.val(out.logits))[0]);
    truth.push_back(corpus.labels[d]);
  }
  return compute_metrics(pred, truth, corpus.num_classes);
}

TrainResult train(HDGCNModel& model, const TextCorpus& corpus, const TrainConfig& cfg) {
  cfg.validate();
  int ndocs = static_cast<int>(corpus.graphs.size());
  if (ndocs == 0) throw DataError("empty corpus");
  // Deterministic 80/10/10 split.
  std::vector<int> order(ndocs);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(order.begin(), order.end(), rng);
  int n_train = std::max(1, ndocs * 8 / 10);
  int n_val = std::max(0, std::min(ndocs - n_train, (ndocs + 9) / 10));
  std::vector<int> train_ids(order.begin(), order.begin() + n_train);
  std::vector<int> val_ids(order.begin() + n_train, order.begin() + n_train + n_val);
  std::vector<int> test_ids(order.begin() + n_train + n_val, order.end());
  if (train_ids.empty()) throw DataError("empty train split");

  auto params = model.parameters();
  AdaBelief opt(cfg.opt);
  TrainResult result;
  std::vector<Tensor> best;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    int correct = 0;
    for (size_t start = 0; start < train_ids.size(); start += cfg.batch_size) {
      size_t end = std::min(train_ids.size(), start + cfg.batch_size);
      zero_grads(params);
      for (size_t i = start; i < end; ++i) {
        int d = train_ids[i];
        Tape t;
        ModelOutput out = hdgcn_forward(t, corpus.graphs[d], model);
        Var loss = t.scale(t.cross_entropy(out.logits, {corpus.labels[d]}),
                           1.0 / static_cast<double>(end - start));
        loss_sum += t.val(loss).at(0, 0) * (end - start);
        if (argmax_rows(t.val(out.logits))[0] == corpus.labels[d]) ++correct;
        t.backward(loss);
      }
      opt.step(params);
    }
    rec.train_loss = loss_sum / train_ids.size();
    rec.train_acc = static_cast<double>(correct) / train_ids.size();
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      double score;
      if (!val_ids.empty()) {
        rec.val_acc = evaluate_graphs(model, corpus, val_ids).accuracy;
        score = rec.val_acc;
      } else {
        score = rec.train_acc;
      }
      if (result.best_epoch < 0 || score > result.best_val_acc) {
        result.best_epoch = epoch;
        result.best_val_acc = score;
        best = snapshot(params);
      }
    } else if (!result.history.empty()) {
      rec.val_acc = result.history.back().val_acc;
    }
    result.history.push_back(rec);
  }
  if (!best.empty()) restore(params, best);
  result.train = evaluate_graphs(model, corpus, train_ids);
  result.val = evaluate_graphs(model, corpus, val_ids);
  result.test = evaluate_graphs(model, corpus, test_ids);
  return result;
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,train_acc,val_acc\n";
  char buf[96];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss,
                  r.train_acc, r.val_acc);
    out << buf;
  }
  return out.str();
}

std::string history_to_json(const std::vector<EpochRecord>& history) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : history)
    j.push_back({{"epoch", r.epoch},
                 {"train_loss", r.train_loss},
                 {"train_acc", r.train_acc},
                 {"val_acc", r.val_acc}});
  return j.dump(2);
}

}  // namespace hdgcn
