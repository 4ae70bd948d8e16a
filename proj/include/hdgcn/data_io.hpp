#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "hdgcn/graph.hpp"

namespace hdgcn {

struct NodeDataset {
  Graph graph;
  int num_classes = 0;
};

struct TextCorpus {
  std::vector<std::vector<std::string>> documents;
  std::vector<int> labels;
  std::unordered_map<std::string, int> vocab;
  std::vector<Graph> graphs;  // one co-occurrence graph per document
  int num_classes = 0;
  int oov_tokens = 0;  // lookups that fell back to the shared OOV row
};

struct WordVectors {
  std::unordered_map<std::string, int> index;
  Tensor matrix;  // vocab x dim
  int duplicates_skipped = 0;
};

/// Loads the line-oriented graph format, validates masks/labels, and
/// precomputes the normalized adjacency.
NodeDataset load_node_dataset(const std::string& path);

/// One labeled document per line: `<class>\t<tokens...>` (whitespace
/// tokenization). Builds one co-occurrence graph per document; node
/// features come from `vectors` (zero OOV row) or one-hot over the
/// corpus vocabulary when none are given.
TextCorpus load_text_corpus(const std::string& path, int window = 3,
                            const WordVectors* vectors = nullptr);

/// GloVe text format: token then `dim` floats per line. Duplicate tokens
/// keep their first occurrence.
WordVectors load_word_vectors(const std::string& path, int dim);

}  // namespace hdgcn
