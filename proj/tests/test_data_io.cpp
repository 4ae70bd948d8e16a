#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "hdgcn/data_io.hpp"
#include "oracles.hpp"

using namespace hdgcn;

namespace {

struct TempFile {
  std::string path;
  TempFile(const std::string& p, const std::string& contents) : path(p) {
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("node dataset loads labels, masks, and a normalized adjacency") {
  TempFile f("test_io_node.graph",
             "n 4\n"
             "e 0 1 1.0\n"
             "e 1 2 2.0\n"
             "e 2 3 1.0\n"
             "y 0 0\ny 1 1\ny 2 1\ny 3 0\n"
             "m 0 train\nm 1 train\nm 2 val\nm 3 test\n");
  NodeDataset ds = load_node_dataset(f.path);
  CHECK(ds.num_classes == 2);
  CHECK(ds.graph.n() == 4);
  CHECK(ds.graph.adjacency.at(1, 2) == 2.0);
  CHECK(ds.graph.labels == std::vector<int>{0, 1, 1, 0});
  CHECK(ds.graph.train_mask == std::vector<uint8_t>{1, 1, 0, 0});
  CHECK(ds.graph.val_mask == std::vector<uint8_t>{0, 0, 1, 0});
  CHECK(ds.graph.test_mask == std::vector<uint8_t>{0, 0, 0, 1});
  // One-hot fallback features.
  CHECK(oracles::max_abs_diff(ds.graph.features, Tensor::identity(4)) == 0.0);
  // The normalized matrix was precomputed from the stored adjacency.
  CHECK(oracles::max_abs_diff(ds.graph.normalized.to_dense(),
                              normalize_adjacency(ds.graph.adjacency).to_dense()) == 0.0);
}

TEST_CASE("node dataset without labels is rejected") {
  TempFile f("test_io_nolabel.graph", "n 2\ne 0 1 1.0\n");
  CHECK_THROWS_AS(load_node_dataset(f.path), DataError);
  CHECK_THROWS_AS(load_node_dataset("definitely_missing.graph"), DataError);
}

TEST_CASE("text corpus: documents, vocab, and one-hot features") {
  TempFile f("test_io_corpus.tsv",
             "0\tthe cat sat\n"
             "1\tthe dog ran fast\n"
             "\n"
             "0\tcat cat cat\n");
  TextCorpus c = load_text_corpus(f.path, 3);
  REQUIRE(c.documents.size() == 3);
  CHECK(c.labels == std::vector<int>{0, 1, 0});
  CHECK(c.num_classes == 2);
  CHECK(c.vocab.size() == 6);  // the cat sat dog ran fast
  CHECK(c.graphs.size() == 3);
  CHECK(c.graphs[0].n() == 3);
  CHECK(c.graphs[2].n() == 1);  // repeated token collapses to one node
  CHECK(c.oov_tokens == 0);
  // Each feature row is one-hot over the shared vocabulary.
  for (const Graph& g : c.graphs) {
    CHECK(g.features.cols == 6);
    for (int i = 0; i < g.n(); ++i) {
      double sum = 0.0;
      for (int j = 0; j < 6; ++j) sum += g.features.at(i, j);
      CHECK(sum == 1.0);
    }
  }
  // Shared tokens map to the same vocabulary column across documents.
  int the_col = c.vocab.at("the");
  CHECK(c.graphs[0].features.at(0, the_col) == 1.0);
  CHECK(c.graphs[1].features.at(0, the_col) == 1.0);
}

TEST_CASE("text corpus parse errors carry line numbers") {
  {
    TempFile f("test_io_notab.tsv", "0 no tab here\n");
    CHECK_THROWS_WITH_AS(load_text_corpus(f.path), doctest::Contains("line 1"),
                         DataError);
  }
  {
    TempFile f("test_io_badclass.tsv", "0\tok doc\nxyz\ttokens\n");
    CHECK_THROWS_WITH_AS(load_text_corpus(f.path), doctest::Contains("line 2"),
                         DataError);
  }
  {
    TempFile f("test_io_emptydoc.tsv", "0\t  \n");
    CHECK_THROWS_AS(load_text_corpus(f.path), DataError);
  }
  {
    TempFile f("test_io_empty.tsv", "");
    CHECK_THROWS_AS(load_text_corpus(f.path), DataError);
  }
}

TEST_CASE("word vectors load, skip duplicates, and reject bad rows") {
  TempFile f("test_io_vec.txt",
             "cat 1.0 2.0\n"
             "dog 3.0 4.0\n"
             "cat 9.0 9.0\n");
  WordVectors wv = load_word_vectors(f.path, 2);
  CHECK(wv.index.size() == 2);
  CHECK(wv.duplicates_skipped == 1);
  CHECK(wv.matrix.at(wv.index.at("cat"), 0) == 1.0);  // first occurrence wins
  CHECK(wv.matrix.at(wv.index.at("dog"), 1) == 4.0);

  {
    TempFile bad("test_io_vec_short.txt", "cat 1.0\n");
    CHECK_THROWS_WITH_AS(load_word_vectors(bad.path, 2), doctest::Contains("line 1"),
                         DataError);
  }
  {
    TempFile bad("test_io_vec_long.txt", "cat 1.0 2.0 3.0\n");
    CHECK_THROWS_WITH_AS(load_word_vectors(bad.path, 2),
                         doctest::Contains("too many fields"), DataError);
  }
  CHECK_THROWS_AS(load_word_vectors("missing_vectors.txt", 2), DataError);
  CHECK_THROWS_AS(load_word_vectors(f.path, 0), ConfigError);
}

TEST_CASE("corpus with pretrained vectors: lookups and the zero OOV row") {
  TempFile vecs("test_io_vec2.txt",
                "cat 1.0 0.5\n"
                "sat 0.25 0.75\n");
  TempFile corpus("test_io_corpus2.tsv", "0\tcat sat unknown\n1\tcat cat\n");
  WordVectors wv = load_word_vectors(vecs.path, 2);
  TextCorpus c = load_text_corpus(corpus.path, 3, &wv);
  CHECK(c.oov_tokens == 1);
  const Graph& g = c.graphs[0];
  CHECK(g.features.cols == 2);
  CHECK(g.features.at(0, 0) == 1.0);   // cat
  CHECK(g.features.at(1, 1) == 0.75);  // sat
  CHECK(g.features.at(2, 0) == 0.0);   // unknown -> zero row
  CHECK(g.features.at(2, 1) == 0.0);
}
