#include "kurel/textprep.hpp"

#include <algorithm>
#include <fstream>

namespace kurel::textprep {

namespace {

// English stop-word list, version en-v1 (153 words). Contraction forms appear
// only as their apostrophe-free pieces because tokens never contain
// punctuation.
constexpr const char* kEnglishStopWords[] = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours", "yourself", "yourselves",
    "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "these", "those", "am",
    "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having", "do", "does", "did",
    "doing", "a", "an", "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
    "for", "with", "about", "against", "between", "into", "through", "during", "before", "after", "above",
    "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then",
    "once", "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more", "most",
    "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s",
    "t", "can", "will", "just", "don", "should", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren",
    "couldn", "didn", "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn", "mustn", "needn", "shan", "shouldn",
    "wasn", "weren", "won", "wouldn",
};

std::string list_hash(std::vector<std::string> words) {
  std::sort(words.begin(), words.end());
  std::string joined;
  for (const auto& w : words) {
    joined += w;
    joined += '\n';
  }
  return sha256_hex(joined);
}

}  // namespace

StopWords::StopWords(std::vector<std::string> words) : words_(std::move(words)) {
  for (auto& w : words_) w = to_lower_ascii(w);
  set_.insert(words_.begin(), words_.end());
  hash_ = list_hash(words_);
}

const StopWords& StopWords::english() {
  static const StopWords list(std::vector<std::string>(std::begin(kEnglishStopWords), std::end(kEnglishStopWords)));
  return list;
}

StopWords StopWords::from_file(const std::string& path) {
  std::vector<std::string> words;
  for_each_line(path, [&](std::string_view line) {
    auto b = line.find_first_not_of(" \t");
    auto e = line.find_last_not_of(" \t");
    if (line[b] == '#') return;
    words.emplace_back(line.substr(b, e - b + 1));
  });
  return StopWords(std::move(words));
}

}  // namespace kurel::textprep
