#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>

#include "kurel/embeddings.hpp"
#include "support.hpp"

using namespace kurel;
using namespace kurel::embeddings;
using kurel::testing::TempDir;

namespace {

// Memoised recursion over prefixes, independent of the library's row DP.
int edit_distance_oracle(const std::string& a, const std::string& b) {
  std::map<std::pair<std::size_t, std::size_t>, int> memo;
  std::function<int(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> int {
    if (i == 0) return static_cast<int>(j);
    if (j == 0) return static_cast<int>(i);
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    int best = std::min({d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});
    memo[key] = best;
    return best;
  };
  return d(a.size(), b.size());
}

EmbeddingTable table_of(std::vector<std::string> terms, std::vector<std::vector<float>> rows) {
  RowMatrixF m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return EmbeddingTable(std::move(terms), std::move(m));
}

double cosine_of(const EmbeddingTable& t, const std::string& a, const std::string& b) {
  auto va = t.row(*t.find(a)).cast<double>();
  auto vb = t.row(*t.find(b)).cast<double>();
  return va.dot(vb) / (va.norm() * vb.norm());
}

}  // namespace

TEST_CASE("levenshtein") {
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("same", "same") == 0);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("abc", "") == 3);
  Rng rng(1);
  for (int k = 0; k < 300; ++k) {
    std::string a, b;
    for (std::size_t i = uniform_index(rng, 9); i > 0; --i) a += static_cast<char>('a' + uniform_index(rng, 3));
    for (std::size_t i = uniform_index(rng, 9); i > 0; --i) b += static_cast<char>('a' + uniform_index(rng, 3));
    CHECK(levenshtein(a, b) == edit_distance_oracle(a, b));
    CHECK(levenshtein(a, b) == levenshtein(b, a));
  }
}

TEST_CASE("levenshtein relation matrix") {
  auto m = build_relation_matrix_levenshtein({"kitten", "sitting", "xy", "qz"}, 0.2);
  CHECK(m.weight("kitten", "kitten") == 1.0);
  CHECK(m.weight("kitten", "sitting") == doctest::Approx((4.0 / 7.0) * (4.0 / 7.0)).epsilon(1e-12));
  CHECK(m.weight("xy", "qz") == 0.0);
  CHECK(m.weight("kitten", "sitting") == m.weight("sitting", "kitten"));
  // below threshold entries are dropped
  auto strict = build_relation_matrix_levenshtein({"kitten", "sitting"}, 0.5);
  CHECK(strict.weight("kitten", "sitting") == 0.0);
}

TEST_CASE("embedding relation matrix") {
  // cos(a, c) = 0.5 exactly; b orthogonal to a; d identical to a
  auto t = table_of({"a", "b", "c", "d", "e"},
                    {{1, 0, 0}, {0, 1, 0}, {0.5f, std::sqrt(3.0f) / 2.0f, 0}, {1, 0, 0}, {-1, 0, 0}});
  auto m = build_relation_matrix_embedding(t, {"a", "b", "c", "d", "e", "missing"}, 0.2);
  CHECK(m.weight("a", "d") == doctest::Approx(1.0));
  CHECK(m.weight("a", "b") == 0.0);
  CHECK(m.weight("a", "c") == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(m.weight("a", "e") == 0.0);  // negative cosine clipped
  CHECK(m.weight("missing", "missing") == 1.0);
  CHECK(m.weight("missing", "a") == 0.0);
  CHECK(build_relation_matrix_embedding(t, {"a", "c"}, 0.3).weight("a", "c") == 0.0);
}

TEST_CASE("relation matrix builders agree across worker counts") {
  std::vector<std::string> vocab;
  Rng rng(4);
  for (int i = 0; i < 300; ++i) vocab.push_back(kurel::testing::random_word(rng) + std::to_string(i));
  CHECK(build_relation_matrix_levenshtein(vocab, 0.2, 1) == build_relation_matrix_levenshtein(vocab, 0.2, 4));
  RowMatrixF v = RowMatrixF::Random(300, 8);
  EmbeddingTable t(vocab, v);
  CHECK(build_relation_matrix_embedding(t, vocab, 0.2, 1) == build_relation_matrix_embedding(t, vocab, 0.2, 3));
}

TEST_CASE("relation matrix invariants and persistence") {
  Rng rng(5);
  std::vector<std::string> vocab;
  for (int i = 0; i < 80; ++i) vocab.push_back("w" + std::to_string(i));
  auto m = build_relation_matrix_levenshtein(vocab, 0.2);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    CHECK(m.weight(i, i) == 1.0);
    for (const auto& [j, w] : m.row(i)) {
      CHECK(w >= 0.2);
      CHECK(w <= 1.0);
      CHECK(m.weight(j, i) == w);
    }
  }
  TempDir dir;
  m.save(dir / "m.bin");
  CHECK(RelationMatrix::load(dir / "m.bin") == m);
  write_file(dir / "bad.bin", "nonsense");
  CHECK_THROWS_AS(RelationMatrix::load(dir / "bad.bin"), Error);
  RelationMatrix manual({"a", "b"});
  CHECK_THROWS_AS(manual.set(0, 0, 0.5), Error);
  CHECK_THROWS_AS(manual.set(0, 1, 1.5), Error);
  CHECK_THROWS_AS(RelationMatrix({"a", "a"}), Error);
}

TEST_CASE("vector files") {
  TempDir dir;
  write_file(dir / "plain.txt", "alpha 1 2 3\nbeta 4 5 6\n");
  auto plain = load_vectors(dir / "plain.txt");
  CHECK(plain.size() == 2);
  CHECK(plain.dim() == 3);
  CHECK(plain.row(*plain.find("beta"))(2) == 6.0f);

  write_file(dir / "header.txt", "2 3\nalpha 1 2 3\nbeta 4 5 6\n");
  CHECK(load_vectors(dir / "header.txt") == plain);

  write_file(dir / "ragged.txt", "alpha 1 2 3\nbeta 4 5\n");
  try {
    load_vectors(dir / "ragged.txt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  save_vectors(plain, dir / "out.txt");
  CHECK(load_vectors(dir / "out.txt") == plain);
}

TEST_CASE("skip-gram contracts") {
  std::vector<std::vector<std::string>> corpus = {{"a", "b", "c"}, {"b", "c", "d"}};
  SkipGramOptions opt;
  opt.dim = 4;
  opt.min_count = 50;
  CHECK_THROWS_AS(train_skipgram(corpus, opt), Error);
  opt.min_count = 2;
  auto t = train_skipgram(corpus, opt);
  CHECK(t.size() == 2);  // b and c
  CHECK(t.find("b"));
  CHECK_FALSE(t.find("a"));
  CHECK(t.dim() == 4);
  CHECK(t == train_skipgram(corpus, opt));
  opt.seed = 2;
  CHECK_FALSE(t == train_skipgram(corpus, opt));
}

TEST_CASE("skip-gram separates topic clusters") {
  Rng rng(6);
  std::vector<std::string> topic_a, topic_b;
  for (int i = 0; i < 20; ++i) {
    topic_a.push_back("a" + std::to_string(i));
    topic_b.push_back("b" + std::to_string(i));
  }
  std::vector<std::vector<std::string>> corpus;
  for (int s = 0; s < 1000; ++s) {
    const auto& topic = s % 2 ? topic_a : topic_b;
    std::vector<std::string> sentence;
    for (int w = 0; w < 10; ++w) sentence.push_back(topic[uniform_index(rng, topic.size())]);
    corpus.push_back(std::move(sentence));
  }
  SkipGramOptions opt;
  opt.dim = 20;
  opt.min_count = 1;
  opt.epochs = 5;
  opt.seed = 9;
  auto t = train_skipgram(corpus, opt);
  double intra = 0, inter = 0;
  int n_intra = 0, n_inter = 0;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      if (i != j) {
        intra += cosine_of(t, topic_a[i], topic_a[j]) + cosine_of(t, topic_b[i], topic_b[j]);
        n_intra += 2;
      }
      inter += cosine_of(t, topic_a[i], topic_b[j]);
      ++n_inter;
    }
  }
  CHECK(intra / n_intra > inter / n_inter);
}

TEST_CASE("embedding table validation") {
  RowMatrixF m(2, 2);
  m << 1, 2, 3, 4;
  CHECK_THROWS_AS(EmbeddingTable({"x"}, m), Error);
  CHECK_THROWS_AS(EmbeddingTable({"x", "x"}, m), Error);
  m(0, 0) = std::nanf("");
  CHECK_THROWS_AS(EmbeddingTable({"x", "y"}, m), Error);
}
