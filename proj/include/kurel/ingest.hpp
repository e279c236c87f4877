#pragma once

// Reading a Stack-Exchange-style dump (Posts and PostLinks tables) into
// knowledge units and link records.
//
// Both tables are accepted in two row encodings, one row per line:
//   XML   <row Id="1" PostTypeId="1" ... />      (the public dump format)
//   JSON  {"Id": "1", "PostTypeId": "1", ...}   (line-delimited, used by tests)
// Attribute names follow the dump schema. Rows are consumed one at a time so
// a multi-GB table is never held in memory.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kurel/common.hpp"

namespace kurel::ingest {

using AttributeMap = std::map<std::string, std::string, std::less<>>;

enum class PostType { question, answer };

struct RawPost {
  KuId id = 0;
  PostType type = PostType::question;
  std::optional<KuId> parent_id;           // answers only
  std::optional<KuId> accepted_answer_id;  // questions only
  std::optional<std::string> title;        // questions only
  std::string body;                        // raw HTML
  std::vector<std::string> tags;
};

struct Answer {
  KuId id = 0;
  std::string body_html;

  bool operator==(const Answer&) const = default;
};

/// One question thread: the question plus all of its answers (ascending id).
struct KnowledgeUnit {
  KuId id = 0;
  std::string title;
  std::string body_html;
  std::vector<Answer> answers;
  std::optional<KuId> accepted_answer_id;
  std::vector<std::string> tags;

  bool operator==(const KnowledgeUnit&) const = default;
};

enum class LinkKind { duplicate, direct };
std::string_view to_string(LinkKind k);
LinkKind parse_link_kind(std::string_view s);

struct LinkRecord {
  KuId source = 0;
  KuId target = 0;
  LinkKind kind = LinkKind::direct;

  bool operator==(const LinkRecord&) const = default;
};

/// LinkTypeId codes of the PostLinks table.
struct LinkKindCodes {
  int duplicate = 3;
  int direct = 1;
};

// --- row decoding -----------------------------------------------------------

/// Decode one `<row .../>` line. Returns nullopt for lines that are not rows
/// (XML prolog, table open/close tags).
std::optional<AttributeMap> parse_xml_row(std::string_view line);
/// Decode one JSON object line; values of any scalar type are stringified.
std::optional<AttributeMap> parse_json_row(std::string_view line);
/// Decode XML character references and the five predefined entities.
std::string decode_xml_entities(std::string_view s);

/// Stream rows from `in`, auto-detecting XML vs JSON per line.
void for_each_row(std::istream& in, const std::function<void(const AttributeMap&)>& fn);
void for_each_row(const std::filesystem::path& path, const std::function<void(const AttributeMap&)>& fn);

/// "<java><generics>" or "|java|generics|" -> {"java", "generics"}.
std::vector<std::string> parse_tags(std::string_view tag_string);

// --- posts ----------------------------------------------------------------

/// Incremental post parser. Rows of post types other than question (1) and
/// answer (2) are ignored; malformed rows go to the skip log; a repeated post
/// id throws (corrupt dump).
class PostParser {
 public:
  explicit PostParser(SkipLog& log) : log_(&log) {}
  /// Returns the decoded post, or nullopt when the row was skipped.
  std::optional<RawPost> parse(const AttributeMap& row);

 private:
  SkipLog* log_;
  std::set<KuId> seen_;
  std::size_t row_no_ = 0;
};

std::vector<RawPost> parse_posts(const std::vector<AttributeMap>& rows, SkipLog& log);
std::vector<RawPost> parse_posts(std::istream& in, SkipLog& log);

/// Group answers under their questions, keeping questions whose tags contain
/// `tag_filter` (case-insensitive exact match). Output sorted by id.
std::vector<KnowledgeUnit> assemble_knowledge_units(const std::vector<RawPost>& posts, std::string_view tag_filter,
                                                    SkipLog& log);

/// Two-pass streaming variant over a posts file: pass one collects the ids of
/// matching questions, pass two keeps only those questions and their answers.
std::vector<KnowledgeUnit> ingest_posts_file(const std::filesystem::path& posts, std::string_view tag_filter,
                                             SkipLog& log, std::size_t* question_rows = nullptr);

// --- links ----------------------------------------------------------------

std::vector<LinkRecord> parse_links(const std::vector<AttributeMap>& rows, const std::set<KuId>& known_ids,
                                    SkipLog& log, LinkKindCodes codes = {});
std::vector<LinkRecord> parse_links(std::istream& in, const std::set<KuId>& known_ids, SkipLog& log,
                                    LinkKindCodes codes = {});

}  // namespace kurel::ingest
