#pragma once

// Hand-crafted similarity features between two knowledge units.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kurel/common.hpp"
#include "kurel/embeddings.hpp"
#include "kurel/textprep.hpp"

namespace kurel::features {

using embeddings::RelationMatrix;
using textprep::CleanKU;
using Tokens = std::vector<std::string>;

/// Sparse term weights. Zero weights are never stored.
using TermVector = std::map<std::string, double, std::less<>>;

std::size_t common_ngrams(const Tokens& a, const Tokens& b, int n);
/// Character n-grams over the space-joined token strings.
std::size_t common_char_ngrams(std::string_view a, std::string_view b, int n);
std::string join_tokens(const Tokens& tokens);

/// weight(t, d) = tf(t, d) * (ln((1 + D) / (1 + df(t))) + 1), then L2-normalised.
class TfidfModel {
 public:
  static TfidfModel fit(const std::vector<Tokens>& corpus);

  bool fitted() const { return documents_ > 0; }
  std::uint64_t documents() const { return documents_; }
  const std::map<std::string, std::uint64_t, std::less<>>& document_frequencies() const { return df_; }
  double idf(std::string_view term) const;
  /// Throws if the model was never fitted. Unseen terms contribute nothing.
  TermVector transform(const Tokens& tokens) const;
  std::string vocabulary_hash() const;

  std::string to_json() const;
  static TfidfModel from_json(std::string_view text);

  bool operator==(const TfidfModel&) const = default;

 private:
  std::map<std::string, std::uint64_t, std::less<>> df_;
  std::uint64_t documents_ = 0;
};

double cosine(const TermVector& a, const TermVector& b);

/// Sum_ij a_i m_ij b_j / (sqrt(a' M a) * sqrt(b' M b)); 0 when either form is
/// 0. A negative quadratic form (non-PSD M) is clamped to 0 with a warning.
double soft_cosine(const TermVector& a, const TermVector& b, const RelationMatrix& m);

enum class Part { title = 0, body = 1, answers = 2, text = 3 };
std::string_view to_string(Part p);

/// The ten per-part feature families, in output order.
inline constexpr std::array<std::string_view, 10> kFamilies = {
    "word1", "word2", "word3", "char3", "char4", "char5", "cosine", "soft_corpus", "soft_ext", "soft_lev"};
/// Families kept by the selected projection.
inline constexpr std::array<std::string_view, 4> kSelectedFamilies = {"cosine", "soft_corpus", "soft_ext", "soft_lev"};

/// Which text parts make up a knowledge unit: the three-part layout
/// (title, body, answers) or the two-input layout (title+body as one part).
struct Layout {
  std::vector<Part> parts;
  static Layout three_part() { return {{Part::title, Part::body, Part::answers}}; }
  static Layout two_input() { return {{Part::text}}; }
};

/// Tokens of one part; Part::text is title followed by body.
const Tokens& part_tokens(const CleanKU& ku, Part p, Tokens& scratch);

struct FeatureModels {
  Layout layout = Layout::three_part();
  /// One TF-IDF model per part in `layout` order.
  std::vector<TfidfModel> tfidf;
  /// Missing matrices behave as the identity relation (soft-cosine = cosine).
  std::optional<RelationMatrix> corpus;
  std::optional<RelationMatrix> external;
  std::optional<RelationMatrix> levenshtein;
};

/// Fit one TF-IDF model per part on the given units (train and dev only).
std::vector<TfidfModel> fit_tfidf(const std::vector<const CleanKU*>& units, const Layout& layout);

struct FeatureVector {
  KuId ku1 = 0;
  KuId ku2 = 0;
  std::vector<std::string> names;
  std::vector<double> values;

  double at(std::string_view name) const;
};

/// Dimension names: "<part>.<family>" for every part and family, then "<part>.present".
std::vector<std::string> feature_names(const Layout& layout);
std::vector<std::string> selected_feature_names(const Layout& layout);

FeatureVector pair_features(const CleanKU& ku1, const CleanKU& ku2, const FeatureModels& models);
/// Keep only the selected families and the presence flags.
FeatureVector select_features(const FeatureVector& full);

}  // namespace kurel::features
