// Batch operator surface: train / eval / inspect / propagate.
// Exit codes: 0 ok, 2 usage or config, 3 shape mismatch, 4 corrupt artifact.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hdgcn/data_io.hpp"
#include "hdgcn/kernels.hpp"
#include "hdgcn/model.hpp"
#include "hdgcn/optim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitShape = 3;
constexpr int kExitCorrupt = 4;

/// Section/key-value run configuration file (INI-style, `#` comments).
struct RunConfig {
  std::map<std::string, std::string> kv;  // "section.key" -> value

  static RunConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw hdgcn::ConfigError("cannot open config file: " + path);
    RunConfig c;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      size_t h = line.find('#');
      if (h != std::string::npos) line = line.substr(0, h);
      auto strip = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      line = strip(line);
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        section = strip(line.substr(1, line.size() - 2));
        continue;
      }
      size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw hdgcn::ConfigError("config line " + std::to_string(line_no) +
                                 ": expected key = value");
      std::string key = strip(line.substr(0, eq));
      std::string val = strip(line.substr(eq + 1));
      if (section.empty() || key.empty())
        throw hdgcn::ConfigError("config line " + std::to_string(line_no) +
                                 ": key outside a [section]");
      c.kv[section + "." + key] = val;
    }
    return c;
  }

  std::string get(const std::string& key, const std::string& def) const {
    auto it = kv.find(key);
    return it == kv.end() ? def : it->second;
  }
  std::string require(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw hdgcn::ConfigError("config missing key: " + key);
    return it->second;
  }
  int get_int(const std::string& key, int def) const {
    auto it = kv.find(key);
    return it == kv.end() ? def : std::stoi(it->second);
  }
  double get_double(const std::string& key, double def) const {
    auto it = kv.find(key);
    return it == kv.end() ? def : std::stod(it->second);
  }
};

json metrics_json(const hdgcn::TrainResult& r) {
  auto m = [](const hdgcn::Metrics& x) {
    return json{{"accuracy", x.accuracy}, {"macro_f1", x.macro_f1}, {"micro_f1", x.micro_f1}};
  };
  return json{{"train", m(r.train)},
              {"val", m(r.val)},
              {"test", m(r.test)},
              {"best_epoch", r.best_epoch},
              {"best_val_acc", r.best_val_acc}};
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  if (!out) throw hdgcn::DataError("cannot write " + p.string());
  out << content;
}

int cmd_train(const std::string& config_path) {
  RunConfig cfg = RunConfig::parse_file(config_path);
  std::string task = cfg.get("run.task", "node");
  std::string dataset_path = cfg.require("data.dataset");
  if (!fs::exists(dataset_path))
    throw hdgcn::ConfigError("dataset path does not exist: " + dataset_path);
  std::string emb_path = cfg.get("data.embeddings", "");
  if (!emb_path.empty() && !fs::exists(emb_path))
    throw hdgcn::ConfigError("embeddings path does not exist: " + emb_path);
  fs::path out_dir = cfg.get("run.output_dir", "out");
  fs::create_directories(out_dir);
  hdgcn::kernels::set_threads(cfg.get_int("run.threads", 1));

  hdgcn::HDGCNConfig mc;
  mc.K = cfg.get_int("model.K", 6);
  mc.L = cfg.get_int("model.L", 1);
  mc.d_k = cfg.get_int("model.d_k", 64);
  mc.M = cfg.get_int("model.M", 10);
  mc.activation = hdgcn::parse_activation(cfg.get("model.activation", "relu"));
  mc.mode = hdgcn::HDGCNConfig::parse_mode(cfg.get("model.mode", "dynamic"));
  mc.dropout = cfg.get_double("model.dropout", 0.0);
  mc.task = hdgcn::HDGCNConfig::parse_task(task);

  hdgcn::TrainConfig tc;
  tc.epochs = cfg.get_int("train.epochs", 200);
  tc.opt.lr = cfg.get_double("train.lr", 1e-5);
  tc.opt.beta1 = cfg.get_double("train.beta1", 0.9);
  tc.opt.beta2 = cfg.get_double("train.beta2", 0.999);
  tc.opt.eps = cfg.get_double("train.eps", 1e-8);
  tc.seed = static_cast<uint64_t>(cfg.get_int("run.seed", 0));
  tc.batch_size = cfg.get_int("train.batch_size", 8);
  tc.eval_every = cfg.get_int("train.eval_every", 1);
  tc.validate();

  hdgcn::TrainResult result;
  if (mc.task == hdgcn::HDGCNConfig::Task::Node) {
    hdgcn::NodeDataset ds = hdgcn::load_node_dataset(dataset_path);
    mc.d_in = ds.graph.features.cols;
    mc.num_classes = ds.num_classes;
    hdgcn::HDGCNModel model = hdgcn::HDGCNModel::init(mc, tc.seed);
    result = hdgcn::train(model, ds, tc);
    hdgcn::save_checkpoint((out_dir / "checkpoint.json").string(), model);
  } else {
    hdgcn::WordVectors wv;
    const hdgcn::WordVectors* wvp = nullptr;
    if (!emb_path.empty()) {
      wv = hdgcn::load_word_vectors(emb_path, cfg.get_int("data.embedding_dim", 300));
      wvp = &wv;
    }
    hdgcn::TextCorpus corpus =
        hdgcn::load_text_corpus(dataset_path, cfg.get_int("data.window", 3), wvp);
    mc.d_in = corpus.graphs.front().features.cols;
    mc.num_classes = corpus.num_classes;
    hdgcn::HDGCNModel model = hdgcn::HDGCNModel::init(mc, tc.seed);
    result = hdgcn::train(model, corpus, tc);
    hdgcn::save_checkpoint((out_dir / "checkpoint.json").string(), model);
  }
  write_file(out_dir / "history.csv", hdgcn::history_to_csv(result.history));
  write_file(out_dir / "history.json", hdgcn::history_to_json(result.history) + "\n");
  write_file(out_dir / "metrics.json", metrics_json(result).dump(2) + "\n");
  std::cout << metrics_json(result).dump(2) << std::endl;
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& dataset_path) {
  hdgcn::HDGCNModel model = hdgcn::load_checkpoint(ckpt_path);
  hdgcn::NodeDataset ds = hdgcn::load_node_dataset(dataset_path);
  if (ds.graph.features.cols != model.cfg.d_in || ds.num_classes > model.cfg.num_classes) {
    std::cerr << "shape mismatch: checkpoint expects d_in=" << model.cfg.d_in
              << " classes=" << model.cfg.num_classes << ", dataset has d_in="
              << ds.graph.features.cols << " classes=" << ds.num_classes << "\n";
    return kExitShape;
  }
  hdgcn::Metrics m = hdgcn::evaluate_node(model, ds, ds.graph.test_mask);
  json j{{"accuracy", m.accuracy}, {"macro_f1", m.macro_f1}, {"micro_f1", m.micro_f1}};
  std::cout << j.dump(2) << std::endl;
  return kExitOk;
}

int cmd_inspect(const std::string& ckpt_path, const std::string& dataset_path, int select,
                const std::string& out_dir_s) {
  hdgcn::HDGCNModel model = hdgcn::load_checkpoint(ckpt_path);
  fs::path out_dir = out_dir_s;
  fs::create_directories(out_dir);

  const hdgcn::Graph* graph = nullptr;
  hdgcn::NodeDataset ds;
  hdgcn::TextCorpus corpus;
  if (model.cfg.task == hdgcn::HDGCNConfig::Task::Node) {
    ds = hdgcn::load_node_dataset(dataset_path);
    if (select < 0 || select >= ds.graph.n()) {
      std::cerr << "node selector " << select << " out of range [0," << ds.graph.n()
                << ")\n";
      return kExitUsage;
    }
    graph = &ds.graph;
  } else {
    corpus = hdgcn::load_text_corpus(dataset_path);
    if (select < 0 || select >= static_cast<int>(corpus.graphs.size())) {
      std::cerr << "document selector " << select << " out of range [0,"
                << corpus.graphs.size() << ")\n";
      return kExitUsage;
    }
    graph = &corpus.graphs[select];
  }
  if (graph->features.cols != model.cfg.d_in) {
    std::cerr << "shape mismatch: checkpoint expects d_in=" << model.cfg.d_in
              << ", dataset has " << graph->features.cols << "\n";
    return kExitShape;
  }
  hdgcn::Tape t;
  hdgcn::ModelOutput out = hdgcn::hdgcn_forward(t, *graph, model);
  for (const auto& trace : out.traces) {
    std::string stem = "trace_order" + std::to_string(trace.order);
    write_file(out_dir / (stem + ".json"), hdgcn::trace_to_json(trace) + "\n");
    write_file(out_dir / (stem + "_af.csv"), hdgcn::matrix_to_csv(trace.a_f));
    write_file(out_dir / (stem + "_ab.csv"), hdgcn::matrix_to_csv(trace.a_b));
    if (graph->n() <= 10000)
      write_file(out_dir / (stem + "_ad.csv"),
                 hdgcn::matrix_to_csv(hdgcn::effective_dynamic_adjacency(trace)));
  }
  std::cout << "wrote " << out.traces.size() << " trace(s) to " << out_dir << std::endl;
  return kExitOk;
}

int cmd_propagate(const std::string& graph_path, int src, int dst, double threshold,
                  int max_steps, const std::string& out_path) {
  hdgcn::Graph g = hdgcn::load_graph_file(graph_path);
  if (src < 0 || src >= g.n() || dst < 0 || dst >= g.n()) {
    std::cerr << "node out of range for graph with " << g.n() << " nodes\n";
    return kExitUsage;
  }
  auto with = hdgcn::feature_alignment_steps(g.adjacency, g.features, src, dst, true,
                                             threshold, max_steps);
  auto without = hdgcn::feature_alignment_steps(g.adjacency, g.features, src, dst, false,
                                                threshold, max_steps);
  json j{{"steps_with_transition", with.converged ? json(with.steps) : json(nullptr)},
         {"steps_without", without.converged ? json(without.steps) : json(nullptr)},
         {"gap", with.converged && without.converged ? json(without.steps - with.steps)
                                                     : json(nullptr)},
         {"converged_with", with.converged},
         {"converged_without", without.converged}};
  std::cout << j.dump(2) << std::endl;
  if (!out_path.empty()) write_file(out_path, j.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HDGCN toolkit: high-order dynamic Chebyshev graph convolution"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, dataset_path, graph_path, out_dir = "inspect_out";
  std::string report_path;
  int select = 0, src = 0, dst = 1, max_steps = 1000;
  double threshold = 0.99;

  auto* train_cmd = app.add_subcommand("train", "train a model from a run config file");
  train_cmd->add_option("config", config_path, "run config file")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("checkpoint", ckpt_path)->required();
  eval_cmd->add_option("dataset", dataset_path)->required();

  auto* inspect_cmd = app.add_subcommand("inspect", "export attention traces");
  inspect_cmd->add_option("checkpoint", ckpt_path)->required();
  inspect_cmd->add_option("dataset", dataset_path)->required();
  inspect_cmd->add_option("--select", select, "node or document selector");
  inspect_cmd->add_option("--out", out_dir, "output directory");

  auto* prop_cmd = app.add_subcommand("propagate", "feature-alignment step analysis");
  prop_cmd->add_option("graph", graph_path)->required();
  prop_cmd->add_option("--src", src)->required();
  prop_cmd->add_option("--dst", dst)->required();
  prop_cmd->add_option("--threshold", threshold);
  prop_cmd->add_option("--max-steps", max_steps);
  prop_cmd->add_option("--out", report_path, "also write the report JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(config_path);
    if (eval_cmd->parsed()) return cmd_eval(ckpt_path, dataset_path);
    if (inspect_cmd->parsed())
      return cmd_inspect(ckpt_path, dataset_path, select, out_dir);
    if (prop_cmd->parsed())
      return cmd_propagate(graph_path, src, dst, threshold, max_steps, report_path);
  } catch (const hdgcn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const hdgcn::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const hdgcn::DimensionError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kExitShape;
  } catch (const hdgcn::DataError& e) {
    std::string msg = e.what();
    std::cerr << "data error: " << msg << "\n";
    return msg.find("checkpoint") != std::string::npos ? kExitCorrupt : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
