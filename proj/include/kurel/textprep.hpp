#pragma once

// HTML cleaning and tokenization for question/answer text.

#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "kurel/common.hpp"
#include "kurel/ingest.hpp"

namespace kurel::textprep {

struct CodeExtraction {
  std::string html_without_code;
  std::vector<std::string> snippets;
  /// True when an opening <pre><code> had no matching close; nothing was extracted.
  bool unbalanced = false;
};

/// Remove every `<pre><code>...</code></pre>` block (attributes on either tag
/// allowed, blocks may span lines), returning the inner contents in document
/// order with entities decoded.
CodeExtraction extract_code_snippets(std::string_view html);

/// Delete markup tags, decode entities, collapse whitespace runs to one space
/// and trim. Input that is nothing but whitespace collapses to a single space.
std::string strip_html(std::string_view html);

/// Remove a leading moderator "Possible Duplicate:" blockquote from raw HTML.
/// Returns true through `removed` when a block was dropped.
std::string remove_signal_block_html(std::string_view html, bool* removed = nullptr);

/// Plain-text form: drop a leading "Possible Duplicate:" marker together with
/// the referenced title (up to the first line break, or else the first
/// sentence terminator). Text without a leading marker is returned unchanged.
std::string remove_signals(std::string_view text, bool* removed = nullptr);

class StopWords {
 public:
  /// The bundled English list.
  static const StopWords& english();
  static StopWords from_file(const std::string& path);
  static StopWords none() { return StopWords({}); }

  explicit StopWords(std::vector<std::string> words);

  bool contains(std::string_view w) const { return set_.contains(std::string(w)); }
  const std::vector<std::string>& words() const { return words_; }
  /// SHA-256 of the newline-joined sorted list; recorded in manifests.
  const std::string& hash() const { return hash_; }

 private:
  std::vector<std::string> words_;
  std::unordered_set<std::string> set_;
  std::string hash_;
};

/// Split on punctuation/underscores/dots, split camel case, map URLs to "url"
/// and standalone numbers to "num", lowercase, drop stop words.
std::vector<std::string> tokenize(std::string_view text, const StopWords& stop_words = StopWords::english());

/// "HTTPServer" -> {"HTTP", "Server"}; "EntityManage" -> {"Entity", "Manage"}.
std::vector<std::string> split_camel_case(std::string_view word);

struct CleanKU {
  KuId id = 0;
  std::vector<std::string> title_tokens;
  std::vector<std::string> body_tokens;
  std::vector<std::string> body_code;
  std::vector<std::string> answers_tokens;
  std::vector<std::string> answers_code;
  std::optional<std::vector<std::string>> accepted_answer_tokens;

  // Cleaned text retained for the dataset export.
  std::string title_text;
  std::string body_text;
  std::vector<KuId> answer_ids;
  std::vector<std::string> answer_texts;
  std::optional<KuId> accepted_answer_id;
  std::string accepted_answer_text;
  std::vector<std::string> accepted_answer_code;
  std::vector<std::string> tags;

  bool operator==(const CleanKU&) const = default;
};

struct CleanStats {
  std::size_t signal_blocks_removed = 0;
  std::size_t unbalanced_code_blocks = 0;
};

CleanKU clean_knowledge_unit(const ingest::KnowledgeUnit& ku, const StopWords& stop_words = StopWords::english(),
                             CleanStats* stats = nullptr);

}  // namespace kurel::textprep
