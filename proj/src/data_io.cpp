#include "hdgcn/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace hdgcn {

NodeDataset load_node_dataset(const std::string& path) {
  NodeDataset ds;
  ds.graph = load_graph_file(path);
  int max_class = -1;
  for (int c : ds.graph.labels) max_class = std::max(max_class, c);
  if (max_class < 0) throw DataError("node dataset has no labels: " + path);
  ds.num_classes = max_class + 1;
  return ds;
}

TextCorpus load_text_corpus(const std::string& path, int window,
                            const WordVectors* vectors) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  TextCorpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("line " + std::to_string(line_no) + ": expected <class>\\t<tokens>");
    int cls;
    try {
      cls = std::stoi(line.substr(0, tab));
    } catch (const std::exception&) {
      throw DataError("line " + std::to_string(line_no) + ": bad class index");
    }
    std::istringstream ts(line.substr(tab + 1));
    std::vector<std::string> tokens;
    std::string tok;
    while (ts >> tok) tokens.push_back(tok);
    if (tokens.empty())
      throw DataError("line " + std::to_string(line_no) + ": empty document");
    for (const auto& t : tokens)
      if (!corpus.vocab.count(t))
        corpus.vocab.emplace(t, static_cast<int>(corpus.vocab.size()));
    corpus.documents.push_back(std::move(tokens));
    corpus.labels.push_back(cls);
    corpus.num_classes = std::max(corpus.num_classes, cls + 1);
  }
  if (corpus.documents.empty()) throw DataError("empty corpus: " + path);

  int dim = vectors ? vectors->matrix.cols : static_cast<int>(corpus.vocab.size());
  for (size_t d = 0; d < corpus.documents.size(); ++d) {
    const auto& tokens = corpus.documents[d];
    Graph g = build_cooccurrence_graph(tokens, window);
    // Recover node -> token order: first occurrence order within the doc.
    std::vector<std::string> node_tokens;
    {
      std::unordered_map<std::string, int> seen;
      for (const auto& t : tokens)
        if (!seen.count(t)) {
          seen.emplace(t, static_cast<int>(seen.size()));
          node_tokens.push_back(t);
        }
    }
    g.features = Tensor(g.n(), dim);
    for (int v = 0; v < g.n(); ++v) {
      if (vectors) {
        auto it = vectors->index.find(node_tokens[v]);
        if (it == vectors->index.end()) {
          ++corpus.oov_tokens;  // zero OOV row
        } else {
          for (int j = 0; j < dim; ++j)
            g.features.at(v, j) = vectors->matrix.at(it->second, j);
        }
      } else {
        g.features.at(v, corpus.vocab.at(node_tokens[v])) = 1.0;
      }
    }
    g.labels.assign(g.n(), -1);
    corpus.graphs.push_back(std::move(g));
  }
  return corpus;
}

WordVectors load_word_vectors(const std::string& path, int dim) {
  if (dim < 1) throw ConfigError("embedding dim must be >= 1");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word vector file: " + path);
  WordVectors wv;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token))
      throw DataError("line " + std::to_string(line_no) + ": missing token");
    std::vector<double> row(dim);
    for (int j = 0; j < dim; ++j)
      if (!(ls >> row[j]))
        throw DataError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(dim) + " values");
    double extra;
    if (ls >> extra)
      throw DataError("line " + std::to_string(line_no) + ": too many fields");
    if (wv.index.count(token)) {
      ++wv.duplicates_skipped;
      continue;
    }
    wv.index.emplace(token, static_cast<int>(rows.size()));
    rows.push_back(std::move(row));
  }
  wv.matrix = Tensor(static_cast<int>(rows.size()), dim);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < dim; ++j) wv.matrix.at(static_cast<int>(i), j) = rows[i][j];
  return wv;
}

}  // namespace hdgcn
