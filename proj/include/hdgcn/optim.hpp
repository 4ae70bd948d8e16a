#pragma once

#include <string>
#include <vector>

#include "hdgcn/data_io.hpp"
#include "hdgcn/model.hpp"

namespace hdgcn {

struct AdaBeliefConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// AdaBelief: momentum plus a second moment of the gradient's deviation
/// from the momentum (the "belief"), both bias-corrected.
class AdaBelief {
 public:
  explicit AdaBelief(AdaBeliefConfig cfg) : cfg_(cfg) {}

  /// Updates every parameter in place from its populated grad.
  void step(const std::vector<Parameter*>& params);

  int t() const { return t_; }
  const AdaBeliefConfig& config() const { return cfg_; }

 private:
  struct Moments {
    Tensor m, s;
  };
  AdaBeliefConfig cfg_;
  std::vector<Moments> state_;
  std::vector<Parameter*> bound_;
  int t_ = 0;
};

struct TrainConfig {
  int epochs = 200;
  AdaBeliefConfig opt;
  uint64_t seed = 0;
  int batch_size = 8;   // graph task
  int eval_every = 1;
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_acc = 0.0;
  Metrics train, val, test;  // at the restored best-val parameters
};

Metrics compute_metrics(const std::vector<int>& pred, const std::vector<int>& truth,
                        int num_classes);

std::vector<int> argmax_rows(const Tensor& logits);

/// Full-batch training on one labeled masked graph. Restores the
/// best-validation parameters into the model before returning.
TrainResult train(HDGCNModel& model, const NodeDataset& data, const TrainConfig& cfg);

/// Mini-batch training over a graph-classification corpus with a
/// deterministic seeded 80/10/10 document split.
TrainResult train(HDGCNModel& model, const TextCorpus& corpus, const TrainConfig& cfg);

Metrics evaluate_node(HDGCNModel& model, const NodeDataset& data,
                      const std::vector<uint8_t>& mask);
Metrics evaluate_graphs(HDGCNModel& model, const TextCorpus& corpus,
                        const std::vector<int>& doc_ids);

std::string history_to_csv(const std::vector<EpochRecord>& history);
std::string history_to_json(const std::vector<EpochRecord>& history);

}  // namespace hdgcn
