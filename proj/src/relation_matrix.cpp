#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>
#include <tuple>

#include "kurel/embeddings.hpp"

namespace kurel::embeddings {

namespace {

constexpr char kMagic[8] = {'K', 'U', 'R', 'E', 'L', 'R', 'M', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("relation matrix: truncated file");
  return v;
}

using Triple = std::tuple<std::uint32_t, std::uint32_t, double>;

constexpr std::size_t kCosineBlock = 256;

// Runs fn(first_row, last_row, out) over contiguous row blocks and
// concatenates the per-block outputs in block order. Ranges start at
// multiples of `grain`, so blocked kernels see the same blocks whatever the
// worker count.
template <class Fn>
std::vector<Triple> parallel_rows(std::size_t rows, int workers, std::size_t grain, Fn fn) {
  const std::size_t blocks = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(workers), rows));
  std::vector<std::vector<Triple>> parts(blocks);
  if (blocks == 1) {
    fn(0, rows, parts[0]);
  } else {
    // Quadratic work per row shrinks with i, so use sqrt-spaced boundaries.
    std::vector<std::size_t> bounds(blocks + 1);
    for (std::size_t b = 0; b <= blocks; ++b) {
      double frac = 1.0 - std::sqrt(1.0 - static_cast<double>(b) / static_cast<double>(blocks));
      bounds[b] = std::min(rows, static_cast<std::size_t>(frac * static_cast<double>(rows)) / grain * grain);
    }
    bounds[blocks] = rows;
    std::vector<std::thread> threads;
    for (std::size_t b = 0; b < blocks; ++b) {
      threads.emplace_back([&, b] { fn(bounds[b], bounds[b + 1], parts[b]); });
    }
    for (auto& t : threads) t.join();
  }
  std::vector<Triple> all;
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  return all;
}

}  // namespace

RelationMatrix::RelationMatrix(std::vector<std::string> vocabulary, double threshold)
    : vocabulary_(std::move(vocabulary)), rows_(vocabulary_.size()), threshold_(threshold) {
  index_.reserve(vocabulary_.size());
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (!index_.emplace(vocabulary_[i], i).second) throw Error("relation matrix: duplicate term '" + vocabulary_[i] + "'");
  }
}

std::optional<std::size_t> RelationMatrix::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void RelationMatrix::set(std::size_t i, std::size_t j, double weight) {
  if (i == j || i >= rows_.size() || j >= rows_.size()) throw Error("relation matrix: invalid index");
  if (!(weight > 0.0 && weight <= 1.0)) throw Error("relation matrix: weight outside (0, 1]");
  auto insert = [](std::vector<std::pair<std::uint32_t, double>>& row, std::uint32_t col, double w) {
    auto it = std::lower_bound(row.begin(), row.end(), col, [](const auto& e, std::uint32_t c) { return e.first < c; });
    if (it != row.end() && it->first == col) it->second = w;
    else row.insert(it, {col, w});
  };
  insert(rows_[i], static_cast<std::uint32_t>(j), weight);
  insert(rows_[j], static_cast<std::uint32_t>(i), weight);
}

double RelationMatrix::weight(std::size_t i, std::size_t j) const {
  if (i == j) return 1.0;
  const auto& row = rows_.at(i);
  auto it = std::lower_bound(row.begin(), row.end(), static_cast<std::uint32_t>(j),
                             [](const auto& e, std::uint32_t c) { return e.first < c; });
  return it != row.end() && it->first == j ? it->second : 0.0;
}

double RelationMatrix::weight(std::string_view a, std::string_view b) const {
  if (a == b) return 1.0;
  auto i = find(a);
  auto j = find(b);
  return i && j ? weight(*i, *j) : 0.0;
}

std::size_t RelationMatrix::nonzeros() const {
  std::size_t n = 0;
  for (const auto& r : rows_) n += r.size();
  return n / 2;
}

std::uint64_t RelationMatrix::vocabulary_hash() const {
  std::string joined;
  for (const auto& t : vocabulary_) {
    joined += t;
    joined += '\n';
  }
  return sha256_u64(joined);
}

void RelationMatrix::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, vocabulary_hash());
  put<double>(out, threshold_);
  put<std::uint64_t>(out, vocabulary_.size());
  for (const auto& t : vocabulary_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.size()));
    out.write(t.data(), static_cast<std::streamsize>(t.size()));
  }
  put<std::uint64_t>(out, nonzeros());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    for (const auto& [j, w] : rows_[i]) {
      if (j <= i) continue;
      put<std::uint32_t>(out, static_cast<std::uint32_t>(i));
      put<std::uint32_t>(out, j);
      put<double>(out, w);
    }
  }
}

RelationMatrix RelationMatrix::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error(path.string() + ": not a relation matrix file");
  auto hash = get<std::uint64_t>(in);
  auto threshold = get<double>(in);
  auto n = get<std::uint64_t>(in);
  std::vector<std::string> vocab;
  vocab.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto len = get<std::uint32_t>(in);
    std::string t(len, '\0');
    in.read(t.data(), len);
    if (!in) throw Error("relation matrix: truncated vocabulary");
    vocab.push_back(std::move(t));
  }
  RelationMatrix m(std::move(vocab), threshold);
  if (m.vocabulary_hash() != hash) throw Error(path.string() + ": vocabulary hash mismatch");
  auto nnz = get<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < nnz; ++k) {
    auto i = get<std::uint32_t>(in);
    auto j = get<std::uint32_t>(in);
    auto w = get<double>(in);
    m.set(i, j, w);
  }
  return m;
}

RelationMatrix build_relation_matrix_embedding(const EmbeddingTable& table, const std::vector<std::string>& vocab,
                                               double threshold, int workers) {
  RelationMatrix m(vocab, threshold);
  // Unit-normalised vectors of in-table terms.
  std::vector<std::size_t> present;
  Eigen::MatrixXd normed(static_cast<Eigen::Index>(vocab.size()), std::max(table.dim(), 1));
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto r = table.find(vocab[i]);
    if (!r) continue;
    Eigen::VectorXd v = table.row(*r).cast<double>();
    double norm = v.norm();
    if (norm == 0.0) continue;
    normed.row(static_cast<Eigen::Index>(present.size())) = v.transpose() / norm;
    present.push_back(i);
  }
  const auto k = static_cast<Eigen::Index>(present.size());
  const Eigen::MatrixXd rows = normed.topRows(k);
  auto triples = parallel_rows(present.size(), workers, kCosineBlock, [&](std::size_t first, std::size_t last, std::vector<Triple>& out) {
    constexpr auto kBlock = static_cast<Eigen::Index>(kCosineBlock);
    for (auto b = static_cast<Eigen::Index>(first); b < static_cast<Eigen::Index>(last); b += kBlock) {
      Eigen::Index len = std::min(kBlock, static_cast<Eigen::Index>(last) - b);
      Eigen::MatrixXd cos = rows.middleRows(b, len) * rows.transpose();
      for (Eigen::Index r = 0; r < len; ++r) {
        for (Eigen::Index c = b + r + 1; c < k; ++c) {
          double x = std::clamp(cos(r, c), 0.0, 1.0);
          double w = x * x;
          if (w > 0.0 && w >= threshold) {
            out.emplace_back(static_cast<std::uint32_t>(present[static_cast<std::size_t>(b + r)]),
                             static_cast<std::uint32_t>(present[static_cast<std::size_t>(c)]), w);
          }
        }
      }
    }
  });
  for (const auto& [i, j, w] : triples) m.set(i, j, w);
  return m;
}

RelationMatrix build_relation_matrix_levenshtein(const std::vector<std::string>& vocab, double threshold, int workers) {
  RelationMatrix m(vocab, threshold);
  auto triples = parallel_rows(vocab.size(), workers, 1, [&](std::size_t first, std::size_t last, std::vector<Triple>& out) {
    for (std::size_t i = first; i < last; ++i) {
      for (std::size_t j = i + 1; j < vocab.size(); ++j) {
        const double longest = static_cast<double>(std::max(vocab[i].size(), vocab[j].size()));
        if (longest == 0) continue;
        const double len_gap = std::abs(static_cast<double>(vocab[i].size()) - static_cast<double>(vocab[j].size()));
        double bound = 1.0 - len_gap / longest;
        if (bound * bound < threshold || bound <= 0.0) continue;
        double sim = 1.0 - levenshtein(vocab[i], vocab[j]) / longest;
        double w = sim * sim;
        if (w > 0.0 && w >= threshold) out.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), w);
      }
    }
  });
  for (const auto& [i, j, w] : triples) m.set(i, j, w);
  return m;
}

}  // namespace kurel::embeddings
