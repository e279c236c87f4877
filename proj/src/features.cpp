#include "kurel/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "json.hpp"

namespace kurel::features {

namespace {

template <class Seq>
std::size_t intersect_count(std::set<Seq>& a, std::set<Seq>& b) {
  if (a.size() > b.size()) std::swap(a, b);
  std::size_t n = 0;
  for (const auto& g : a) n += b.count(g);
  return n;
}

std::set<std::string> word_ngrams(const Tokens& t, int n) {
  std::set<std::string> out;
  if (n < 1) throw Error("n-gram order must be >= 1");
  if (t.size() < static_cast<std::size_t>(n)) return out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= t.size(); ++i) {
    std::string g = t[i];
    for (int k = 1; k < n; ++k) {
      g += '\x1f';  // unit separator: cannot occur inside a token
      g += t[i + static_cast<std::size_t>(k)];
    }
    out.insert(std::move(g));
  }
  return out;
}

std::set<std::string_view> char_ngrams(std::string_view s, int n) {
  std::set<std::string_view> out;
  if (n < 1) throw Error("n-gram order must be >= 1");
  if (s.size() < static_cast<std::size_t>(n)) return out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= s.size(); ++i) out.insert(s.substr(i, static_cast<std::size_t>(n)));
  return out;
}

double norm(const TermVector& v) {
  double s = 0;
  for (const auto& [t, w] : v) s += w * w;
  return std::sqrt(s);
}

// x' M y over sparse vectors. `y` is re-indexed by matrix row once.
double quadratic_form(const TermVector& x, const TermVector& y, const RelationMatrix& m) {
  std::unordered_map<std::size_t, double> y_by_index;
  if (!m.vocabulary().empty()) {
    for (const auto& [t, w] : y) {
      if (auto j = m.find(t)) y_by_index.emplace(*j, w);
    }
  }
  double total = 0;
  for (const auto& [t, xi] : x) {
    double acc = 0;
    if (auto it = y.find(t); it != y.end()) acc += it->second;  // unit diagonal
    if (!y_by_index.empty()) {
      if (auto i = m.find(t)) {
        for (const auto& [j, w] : m.row(*i)) {
          if (auto yj = y_by_index.find(j); yj != y_by_index.end()) acc += w * yj->second;
        }
      }
    }
    total += xi * acc;
  }
  return total;
}

}  // namespace

std::string join_tokens(const Tokens& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

std::size_t common_ngrams(const Tokens& a, const Tokens& b, int n) {
  auto ga = word_ngrams(a, n);
  auto gb = word_ngrams(b, n);
  return intersect_count(ga, gb);
}

std::size_t common_char_ngrams(std::string_view a, std::string_view b, int n) {
  auto ga = char_ngrams(a, n);
  auto gb = char_ngrams(b, n);
  return intersect_count(ga, gb);
}

TfidfModel TfidfModel::fit(const std::vector<Tokens>& corpus) {
  TfidfModel m;
  for (const auto& doc : corpus) {
    std::set<std::string_view> distinct(doc.begin(), doc.end());
    for (auto t : distinct) {
      auto it = m.df_.find(t);
      if (it == m.df_.end()) m.df_.emplace(std::string(t), 1);
      else ++it->second;
    }
  }
  m.documents_ = corpus.size();
  if (m.documents_ == 0) throw Error("tf-idf: empty fit corpus");
  return m;
}

double TfidfModel::idf(std::string_view term) const {
  auto it = df_.find(term);
  if (it == df_.end()) return 0.0;
  return std::log((1.0 + static_cast<double>(documents_)) / (1.0 + static_cast<double>(it->second))) + 1.0;
}

TermVector TfidfModel::transform(const Tokens& tokens) const {
  if (!fitted()) throw Error("tf-idf: transform before fit");
  std::map<std::string_view, double> tf;
  for (const auto& t : tokens) tf[t] += 1.0;
  TermVector v;
  for (const auto& [t, count] : tf) {
    double w = count * idf(t);
    if (w != 0.0) v.emplace(std::string(t), w);
  }
  double n = norm(v);
  if (n > 0) {
    for (auto& [t, w] : v) w /= n;
  }
  return v;
}

std::string TfidfModel::vocabulary_hash() const {
  std::string joined;
  for (const auto& [t, df] : df_) {
    joined += t;
    joined += '\n';
  }
  return sha256_hex(joined);
}

std::string TfidfModel::to_json() const {
  nlohmann::ordered_json j;
  j["documents"] = documents_;
  j["vocabulary_hash"] = vocabulary_hash();
  nlohmann::ordered_json df = nlohmann::ordered_json::object();
  for (const auto& [t, c] : df_) df[t] = c;
  j["df"] = std::move(df);
  return j.dump();
}

TfidfModel TfidfModel::from_json(std::string_view text) {
  auto j = nlohmann::json::parse(text);
  TfidfModel m;
  m.documents_ = j.at("documents").get<std::uint64_t>();
  for (auto& [t, c] : j.at("df").items()) {
    auto v = c.get<std::uint64_t>();
    if (v < 1) throw Error("tf-idf: document frequency must be >= 1 for '" + t + "'");
    m.df_.emplace(t, v);
  }
  if (m.documents_ < 1) throw Error("tf-idf: document count must be >= 1");
  if (j.contains("vocabulary_hash") && j["vocabulary_hash"].get<std::string>() != m.vocabulary_hash()) {
    throw Error("tf-idf: vocabulary hash mismatch");
  }
  return m;
}

double cosine(const TermVector& a, const TermVector& b) {
  double na = norm(a);
  double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  const TermVector& small = a.size() <= b.size() ? a : b;
  const TermVector& large = a.size() <= b.size() ? b : a;
  double dot = 0;
  for (const auto& [t, w] : small) {
    if (auto it = large.find(t); it != large.end()) dot += w * it->second;
  }
  return dot / (na * nb);
}

double soft_cosine(const TermVector& a, const TermVector& b, const RelationMatrix& m) {
  double aa = quadratic_form(a, a, m);
  double bb = quadratic_form(b, b, m);
  if (aa < 0.0 || bb < 0.0) {
    warn("soft-cosine: negative quadratic form clamped to 0 (relation matrix not positive semi-definite)");
    aa = std::max(aa, 0.0);
    bb = std::max(bb, 0.0);
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return quadratic_form(a, b, m) / (std::sqrt(aa) * std::sqrt(bb));
}

std::string_view to_string(Part p) {
  switch (p) {
    case Part::title: return "title";
    case Part::body: return "body";
    case Part::answers: return "answers";
    case Part::text: return "text";
  }
  throw Error("invalid part");
}

const Tokens& part_tokens(const CleanKU& ku, Part p, Tokens& scratch) {
  switch (p) {
    case Part::title: return ku.title_tokens;
    case Part::body: return ku.body_tokens;
    case Part::answers: return ku.answers_tokens;
    case Part::text:
      scratch = ku.title_tokens;
      scratch.insert(scratch.end(), ku.body_tokens.begin(), ku.body_tokens.end());
      return scratch;
  }
  throw Error("invalid part");
}

std::vector<TfidfModel> fit_tfidf(const std::vector<const CleanKU*>& units, const Layout& layout) {
  std::vector<TfidfModel> models;
  for (Part p : layout.parts) {
    std::vector<Tokens> docs;
    docs.reserve(units.size());
    Tokens scratch;
    for (const auto* ku : units) docs.push_back(part_tokens(*ku, p, scratch));
    models.push_back(TfidfModel::fit(docs));
  }
  return models;
}

double FeatureVector::at(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  throw Error("no feature named '" + std::string(name) + "'");
}

std::vector<std::string> feature_names(const Layout& layout) {
  std::vector<std::string> names;
  for (Part p : layout.parts) {
    for (auto f : kFamilies) names.push_back(std::string(to_string(p)) + "." + std::string(f));
  }
  for (Part p : layout.parts) names.push_back(std::string(to_string(p)) + ".present");
  return names;
}

std::vector<std::string> selected_feature_names(const Layout& layout) {
  std::vector<std::string> names;
  for (Part p : layout.parts) {
    for (auto f : kSelectedFamilies) names.push_back(std::string(to_string(p)) + "." + std::string(f));
  }
  for (Part p : layout.parts) names.push_back(std::string(to_string(p)) + ".present");
  return names;
}

FeatureVector pair_features(const CleanKU& ku1, const CleanKU& ku2, const FeatureModels& models) {
  if (models.tfidf.size() != models.layout.parts.size()) throw Error("pair_features: one tf-idf model per part required");
  static const RelationMatrix kIdentity = RelationMatrix::identity();
  const RelationMatrix& m_corpus = models.corpus ? *models.corpus : kIdentity;
  const RelationMatrix& m_ext = models.external ? *models.external : kIdentity;
  const RelationMatrix& m_lev = models.levenshtein ? *models.levenshtein : kIdentity;

  FeatureVector fv;
  fv.ku1 = ku1.id;
  fv.ku2 = ku2.id;
  fv.names = feature_names(models.layout);
  std::vector<double> flags;
  for (std::size_t k = 0; k < models.layout.parts.size(); ++k) {
    Part p = models.layout.parts[k];
    Tokens s1;
    Tokens s2;
    const Tokens& a = part_tokens(ku1, p, s1);
    const Tokens& b = part_tokens(ku2, p, s2);
    const bool present = !a.empty() && !b.empty();
    flags.push_back(present ? 1.0 : 0.0);
    if (!present) {
      fv.values.insert(fv.values.end(), kFamilies.size(), 0.0);
      continue;
    }
    for (int n = 1; n <= 3; ++n) fv.values.push_back(static_cast<double>(common_ngrams(a, b, n)));
    const std::string ja = join_tokens(a);
    const std::string jb = join_tokens(b);
    for (int n = 3; n <= 5; ++n) fv.values.push_back(static_cast<double>(common_char_ngrams(ja, jb, n)));
    const TermVector va = models.tfidf[k].transform(a);
    const TermVector vb = models.tfidf[k].transform(b);
    fv.values.push_back(cosine(va, vb));
    fv.values.push_back(soft_cosine(va, vb, m_corpus));
    fv.values.push_back(soft_cosine(va, vb, m_ext));
    fv.values.push_back(soft_cosine(va, vb, m_lev));
  }
  fv.values.insert(fv.values.end(), flags.begin(), flags.end());
  for (double v : fv.values) {
    if (!std::isfinite(v)) throw Error("pair_features: non-finite feature value");
  }
  return fv;
}

FeatureVector select_features(const FeatureVector& full) {
  FeatureVector out;
  out.ku1 = full.ku1;
  out.ku2 = full.ku2;
  for (std::size_t i = 0; i < full.names.size(); ++i) {
    std::string_view name = full.names[i];
    std::string_view family = name.substr(name.find('.') + 1);
    bool keep = family == "present" ||
                std::find(kSelectedFamilies.begin(), kSelectedFamilies.end(), family) != kSelectedFamilies.end();
    if (keep) {
      out.names.push_back(full.names[i]);
      out.values.push_back(full.values[i]);
    }
  }
  return out;
}

}  // namespace kurel::features
