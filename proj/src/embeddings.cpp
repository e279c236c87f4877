#include "kurel/embeddings.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace kurel::embeddings {

EmbeddingTable::EmbeddingTable(std::vector<std::string> vocabulary, RowMatrixF vectors)
    : vocabulary_(std::move(vocabulary)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(vocabulary_.size()) != vectors_.rows()) {
    throw Error("embedding table: vocabulary size does not match row count");
  }
  if (!vectors_.allFinite()) throw Error("embedding table: non-finite vector entries");
  index_.reserve(vocabulary_.size());
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (!index_.emplace(vocabulary_[i], i).second) throw Error("embedding table: duplicate term '" + vocabulary_[i] + "'");
  }
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

struct Vocab {
  std::vector<std::string> terms;
  std::vector<std::uint64_t> counts;
  std::unordered_map<std::string, int> index;
};

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus, int min_count) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [term, c] : counts) {
    if (c >= static_cast<std::uint64_t>(std::max(min_count, 1))) kept.emplace_back(term, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocab v;
  for (auto& [term, c] : kept) {
    v.index.emplace(term, static_cast<int>(v.terms.size()));
    v.terms.push_back(term);
    v.counts.push_back(c);
  }
  return v;
}

// Negative-sampling distribution proportional to count^0.75.
class UnigramSampler {
 public:
  explicit UnigramSampler(const std::vector<std::uint64_t>& counts) {
    cumulative_.reserve(counts.size());
    double total = 0;
    for (auto c : counts) {
      total += std::pow(static_cast<double>(c), 0.75);
      cumulative_.push_back(total);
    }
  }
  int sample(Rng& rng) const {
    double u = uniform_unit(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<int>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

inline float sigmoid(float x) {
  if (x > 20.f) return 1.f;
  if (x < -20.f) return 0.f;
  return 1.f / (1.f + std::exp(-x));
}

// Element access for the shared parameter arrays. The shared variant goes
// through relaxed atomics so concurrent workers do not race.
template <bool Shared>
struct Cell {
  static float get(float* p) {
    if constexpr (Shared) return std::atomic_ref<float>(*p).load(std::memory_order_relaxed);
    else return *p;
  }
  static void add(float* p, float v) {
    if constexpr (Shared) {
      std::atomic_ref<float> r(*p);
      r.store(r.load(std::memory_order_relaxed) + v, std::memory_order_relaxed);
    } else {
      *p += v;
    }
  }
};

struct Trainer {
  const std::vector<std::vector<int>>* sentences;
  const UnigramSampler* sampler;
  const SkipGramOptions* opt;
  float* syn0;
  float* syn1;
  std::uint64_t total_words;  // across all epochs

  template <bool Shared>
  void run(std::size_t first, std::size_t last, std::uint64_t seed, std::atomic<std::uint64_t>* progress) const {
    using C = Cell<Shared>;
    const int d = opt->dim;
    Rng rng(seed);
    std::vector<float> neu1e(static_cast<std::size_t>(d));
    std::uint64_t local = 0;
    for (int epoch = 0; epoch < opt->epochs; ++epoch) {
      for (std::size_t s = first; s < last; ++s) {
        const auto& sent = (*sentences)[s];
        const int n = static_cast<int>(sent.size());
        for (int pos = 0; pos < n; ++pos) {
          std::uint64_t done = progress ? progress->fetch_add(1, std::memory_order_relaxed) : local++;
          float alpha = opt->learning_rate *
                        std::max(1.f - static_cast<float>(done) / static_cast<float>(total_words + 1), 1e-4f);
          const int center = sent[pos];
          const int reduce = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(opt->window)));
          const int span = opt->window - reduce;
          for (int c = pos - span; c <= pos + span; ++c) {
            if (c == pos || c < 0 || c >= n) continue;
            float* in = syn0 + static_cast<std::ptrdiff_t>(sent[c]) * d;
            std::fill(neu1e.begin(), neu1e.end(), 0.f);
            for (int k = 0; k <= opt->negatives; ++k) {
              int target;
              float label;
              if (k == 0) {
                target = center;
                label = 1.f;
              } else {
                target = sampler->sample(rng);
                if (target == center) continue;
                label = 0.f;
              }
              float* out = syn1 + static_cast<std::ptrdiff_t>(target) * d;
              float f = 0.f;
              for (int j = 0; j < d; ++j) f += C::get(in + j) * C::get(out + j);
              float g = (label - sigmoid(f)) * alpha;
              for (int j = 0; j < d; ++j) neu1e[j] += g * C::get(out + j);
              for (int j = 0; j < d; ++j) C::add(out + j, g * C::get(in + j));
            }
            for (int j = 0; j < d; ++j) C::add(in + j, neu1e[j]);
          }
        }
      }
    }
  }
};

}  // namespace

EmbeddingTable train_skipgram(const std::vector<std::vector<std::string>>& corpus, const SkipGramOptions& opt) {
  if (opt.dim < 1 || opt.window < 1 || opt.negatives < 0 || opt.epochs < 1 || opt.workers < 1) {
    throw Error("skip-gram: invalid options");
  }
  Vocab vocab = build_vocab(corpus, opt.min_count);
  if (vocab.terms.empty()) {
    throw Error("skip-gram: empty vocabulary after min_count=" + std::to_string(opt.min_count) + " filtering");
  }
  std::vector<std::vector<int>> sentences;
  std::uint64_t words = 0;
  for (const auto& sentence : corpus) {
    std::vector<int> ids;
    for (const auto& tok : sentence) {
      auto it = vocab.index.find(tok);
      if (it != vocab.index.end()) ids.push_back(it->second);
    }
    words += ids.size();
    if (ids.size() > 1) sentences.push_back(std::move(ids));
  }

  const auto v = static_cast<Eigen::Index>(vocab.terms.size());
  RowMatrixF syn0(v, opt.dim);
  RowMatrixF syn1 = RowMatrixF::Zero(v, opt.dim);
  Rng init(derive_seed(opt.seed, 0xE3B));
  for (Eigen::Index i = 0; i < syn0.size(); ++i) {
    syn0.data()[i] = static_cast<float>((uniform_unit(init) - 0.5) / opt.dim);
  }

  UnigramSampler sampler(vocab.counts);
  Trainer trainer{&sentences, &sampler, &opt, syn0.data(), syn1.data(), words * static_cast<std::uint64_t>(opt.epochs)};
  if (opt.workers == 1 || sentences.size() < 2) {
    trainer.run<false>(0, sentences.size(), derive_seed(opt.seed, 0), nullptr);
  } else {
    std::atomic<std::uint64_t> progress{0};
    std::vector<std::thread> threads;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(opt.workers), sentences.size());
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t first = sentences.size() * w / workers;
      std::size_t last = sentences.size() * (w + 1) / workers;
      threads.emplace_back([&, first, last, w] { trainer.run<true>(first, last, derive_seed(opt.seed, w), &progress); });
    }
    for (auto& t : threads) t.join();
  }
  return EmbeddingTable(std::move(vocab.terms), std::move(syn0));
}

EmbeddingTable load_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> terms;
  std::vector<float> values;
  int dim = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(std::move(f));
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      int a = 0;
      int b = 0;
      auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), a);
      auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), b);
      if (r1.ec == std::errc() && r2.ec == std::errc() && r1.ptr == fields[0].data() + fields[0].size() &&
          r2.ptr == fields[1].data() + fields[1].size()) {
        dim = b;
        continue;
      }
    }
    const int d = static_cast<int>(fields.size()) - 1;
    if (dim < 0) dim = d;
    if (d != dim || d < 1) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                  " values, found " + std::to_string(d));
    }
    for (int k = 1; k <= d; ++k) {
      const std::string& f = fields[static_cast<std::size_t>(k)];
      float x = 0;
      auto r = std::from_chars(f.data(), f.data() + f.size(), x);
      if (r.ec != std::errc() || r.ptr != f.data() + f.size()) {
        throw Error(path.string() + ":" + std::to_string(line_no) + ": bad number '" + f + "'");
      }
      values.push_back(x);
    }
    terms.push_back(std::move(fields[0]));
  }
  if (terms.empty()) throw Error(path.string() + ": no vectors");
  RowMatrixF m = Eigen::Map<RowMatrixF>(values.data(), static_cast<Eigen::Index>(terms.size()), dim);
  return EmbeddingTable(std::move(terms), std::move(m));
}

void save_vectors(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << table.size() << ' ' << table.dim() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.vocabulary()[i];
    auto r = table.row(i);
    for (int k = 0; k < table.dim(); ++k) {
      auto res = std::to_chars(buf, buf + sizeof(buf), r[k]);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

int levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<int> prev(b.size() + 1);
  std::vector<int> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace kurel::embeddings
