#include "kurel/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace kurel::ingest {

namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::optional<KuId> parse_id(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  KuId v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

const std::string* find_attr(const AttributeMap& row, std::string_view key) {
  auto it = row.find(key);
  return it == row.end() ? nullptr : &it->second;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

std::string_view to_string(LinkKind k) { return k == LinkKind::duplicate ? "duplicate" : "direct"; }

LinkKind parse_link_kind(std::string_view s) {
  if (s == "duplicate") return LinkKind::duplicate;
  if (s == "direct") return LinkKind::direct;
  throw Error("unknown link kind '" + std::string(s) + "'");
}

std::string decode_xml_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    auto semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out.push_back('&');
      continue;
    }
    std::string_view ent = s.substr(i + 1, semi - i - 1);
    bool ok = true;
    if (ent == "lt") out.push_back('<');
    else if (ent == "gt") out.push_back('>');
    else if (ent == "amp") out.push_back('&');
    else if (ent == "quot") out.push_back('"');
    else if (ent == "apos") out.push_back('\'');
    else if (ent.size() > 1 && ent[0] == '#') {
      std::uint32_t cp = 0;
      std::from_chars_result r{};
      if (ent[1] == 'x' || ent[1] == 'X') {
        r = std::from_chars(ent.data() + 2, ent.data() + ent.size(), cp, 16);
      } else {
        r = std::from_chars(ent.data() + 1, ent.data() + ent.size(), cp, 10);
      }
      if (r.ec == std::errc() && r.ptr == ent.data() + ent.size() && cp <= 0x10FFFF) {
        append_utf8(out, cp);
      } else {
        ok = false;
      }
    } else {
      ok = false;
    }
    if (ok) {
      i = semi;
    } else {
      out.push_back('&');
    }
  }
  return out;
}

std::optional<AttributeMap> parse_xml_row(std::string_view line) {
  auto start = line.find("<row");
  if (start == std::string_view::npos) return std::nullopt;
  std::size_t i = start + 4;
  if (i < line.size() && !is_space(line[i]) && line[i] != '/' && line[i] != '>') return std::nullopt;
  AttributeMap attrs;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    if (i >= line.size() || line[i] == '/' || line[i] == '>') break;
    std::size_t name_begin = i;
    while (i < line.size() && line[i] != '=' && !is_space(line[i])) ++i;
    std::string name(line.substr(name_begin, i - name_begin));
    while (i < line.size() && is_space(line[i])) ++i;
    if (i >= line.size() || line[i] != '=') throw Error("malformed XML row attribute near '" + name + "'");
    ++i;
    while (i < line.size() && is_space(line[i])) ++i;
    if (i >= line.size() || (line[i] != '"' && line[i] != '\'')) throw Error("unquoted XML attribute '" + name + "'");
    char quote = line[i++];
    auto end = line.find(quote, i);
    if (end == std::string_view::npos) throw Error("unterminated XML attribute '" + name + "'");
    attrs[name] = decode_xml_entities(line.substr(i, end - i));
    i = end + 1;
  }
  return attrs;
}

std::optional<AttributeMap> parse_json_row(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  AttributeMap attrs;
  for (auto& [k, v] : j.items()) {
    if (v.is_string()) attrs[k] = v.get<std::string>();
    else if (v.is_null()) continue;
    else attrs[k] = v.dump();
  }
  return attrs;
}

void for_each_row(std::istream& in, const std::function<void(const AttributeMap&)>& fn) {
  std::string line;
  while (std::getline(in, line)) {
    std::string_view v(line);
    while (!v.empty() && is_space(v.front())) v.remove_prefix(1);
    if (v.empty()) continue;
    std::optional<AttributeMap> row = v.front() == '{' ? parse_json_row(v) : parse_xml_row(v);
    if (row) fn(*row);
  }
}

void for_each_row(const std::filesystem::path& path, const std::function<void(const AttributeMap&)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  for_each_row(in, fn);
}

std::vector<std::string> parse_tags(std::string_view s) {
  std::vector<std::string> tags;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tags.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : s) {
    if (c == '<' || c == '>' || c == '|' || is_space(c)) {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return tags;
}

std::optional<RawPost> PostParser::parse(const AttributeMap& row) {
  ++row_no_;
  const std::string* id_s = find_attr(row, "Id");
  const std::string* type_s = find_attr(row, "PostTypeId");
  auto id = id_s ? parse_id(*id_s) : std::nullopt;
  if (!id) {
    log_->add("posts row " + std::to_string(row_no_) + ": unparseable Id '" + (id_s ? *id_s : std::string()) + "'");
    return std::nullopt;
  }
  if (!type_s) {
    log_->add("post " + std::to_string(*id) + ": missing PostTypeId");
    return std::nullopt;
  }
  if (!seen_.insert(*id).second) throw Error("corrupt dump: duplicate post id " + std::to_string(*id));
  auto type_code = parse_id(*type_s);
  if (!type_code || (*type_code != 1 && *type_code != 2)) return std::nullopt;

  RawPost p;
  p.id = *id;
  p.type = *type_code == 1 ? PostType::question : PostType::answer;
  if (const auto* body = find_attr(row, "Body")) p.body = *body;
  if (const auto* tags = find_attr(row, "Tags")) p.tags = parse_tags(*tags);
  const std::string* parent_s = find_attr(row, "ParentId");
  if (p.type == PostType::answer) {
    auto parent = parent_s ? parse_id(*parent_s) : std::nullopt;
    if (!parent) {
      log_->add("answer " + std::to_string(p.id) + ": missing or unparseable ParentId");
      return std::nullopt;
    }
    p.parent_id = parent;
  } else {
    if (parent_s && !parent_s->empty()) {
      log_->add("question " + std::to_string(p.id) + ": unexpected ParentId ignored");
    }
    p.title = "";
    if (const auto* title = find_attr(row, "Title")) p.title = *title;
    if (const auto* acc = find_attr(row, "AcceptedAnswerId")) {
      p.accepted_answer_id = parse_id(*acc);
      if (!p.accepted_answer_id && !acc->empty()) {
        log_->add("question " + std::to_string(p.id) + ": unparseable AcceptedAnswerId ignored");
      }
    }
  }
  return p;
}

std::vector<RawPost> parse_posts(const std::vector<AttributeMap>& rows, SkipLog& log) {
  PostParser parser(log);
  std::vector<RawPost> out;
  for (const auto& row : rows) {
    if (auto p = parser.parse(row)) out.push_back(std::move(*p));
  }
  return out;
}

std::vector<RawPost> parse_posts(std::istream& in, SkipLog& log) {
  PostParser parser(log);
  std::vector<RawPost> out;
  for_each_row(in, [&](const AttributeMap& row) {
    if (auto p = parser.parse(row)) out.push_back(std::move(*p));
  });
  return out;
}

namespace {

bool has_tag(const std::vector<std::string>& tags, std::string_view filter_lower) {
  return std::any_of(tags.begin(), tags.end(), [&](const std::string& t) { return to_lower_ascii(t) == filter_lower; });
}

// Collects matching questions and their answers, then emits sorted units.
class Assembler {
 public:
  Assembler(const std::unordered_set<KuId>* all_questions, SkipLog& log) : all_questions_(all_questions), log_(&log) {}

  void add_question(const RawPost& q) {
    KnowledgeUnit ku;
    ku.id = q.id;
    ku.title = q.title.value_or("");
    ku.body_html = q.body;
    ku.accepted_answer_id = q.accepted_answer_id;
    ku.tags = q.tags;
    units_.emplace(q.id, std::move(ku));
  }

  void add_answer(const RawPost& a) { answers_.push_back(Answer{a.id, a.body}); parents_.push_back(*a.parent_id); }

  std::vector<KnowledgeUnit> finish() {
    for (std::size_t i = 0; i < answers_.size(); ++i) {
      auto it = units_.find(parents_[i]);
      if (it != units_.end()) {
        it->second.answers.push_back(std::move(answers_[i]));
      } else if (!all_questions_->contains(parents_[i])) {
        log_->add("answer " + std::to_string(answers_[i].id) + ": parent question " + std::to_string(parents_[i]) +
                  " absent from dump");
      }
    }
    std::vector<KnowledgeUnit> out;
    out.reserve(units_.size());
    for (auto& [id, ku] : units_) {
      std::sort(ku.answers.begin(), ku.answers.end(), [](const Answer& a, const Answer& b) { return a.id < b.id; });
      if (ku.accepted_answer_id) {
        KuId acc = *ku.accepted_answer_id;
        bool present = std::any_of(ku.answers.begin(), ku.answers.end(), [&](const Answer& a) { return a.id == acc; });
        if (!present) {
          log_->add("question " + std::to_string(id) + ": accepted answer " + std::to_string(acc) +
                    " not among its answers, cleared");
          ku.accepted_answer_id.reset();
        }
      }
      out.push_back(std::move(ku));
    }
    return out;
  }

 private:
  const std::unordered_set<KuId>* all_questions_;
  SkipLog* log_;
  std::map<KuId, KnowledgeUnit> units_;
  std::vector<Answer> answers_;
  std::vector<KuId> parents_;
};

}  // namespace

std::vector<KnowledgeUnit> assemble_knowledge_units(const std::vector<RawPost>& posts, std::string_view tag_filter,
                                                    SkipLog& log) {
  if (tag_filter.empty()) throw Error("tag filter must be non-empty");
  const std::string filter = to_lower_ascii(tag_filter);
  std::unordered_set<KuId> all_questions;
  std::unordered_set<KuId> kept;
  for (const auto& p : posts) {
    if (p.type != PostType::question) continue;
    all_questions.insert(p.id);
    if (has_tag(p.tags, filter)) kept.insert(p.id);
  }
  Assembler asm_(&all_questions, log);
  for (const auto& p : posts) {
    if (p.type == PostType::question) {
      if (kept.contains(p.id)) asm_.add_question(p);
    } else {
      asm_.add_answer(p);
    }
  }
  return asm_.finish();
}

std::vector<KnowledgeUnit> ingest_posts_file(const std::filesystem::path& posts, std::string_view tag_filter,
                                             SkipLog& log, std::size_t* question_rows) {
  if (tag_filter.empty()) throw Error("tag filter must be non-empty");
  const std::string filter = to_lower_ascii(tag_filter);
  std::unordered_set<KuId> all_questions;
  std::unordered_set<KuId> kept;
  {
    SkipLog first_pass;  // problems are logged once, on the second pass
    PostParser parser(first_pass);
    for_each_row(posts, [&](const AttributeMap& row) {
      auto p = parser.parse(row);
      if (!p || p->type != PostType::question) return;
      all_questions.insert(p->id);
      if (has_tag(p->tags, filter)) kept.insert(p->id);
    });
  }
  if (question_rows) *question_rows = kept.size();
  Assembler asm_(&all_questions, log);
  PostParser parser(log);
  for_each_row(posts, [&](const AttributeMap& row) {
    auto p = parser.parse(row);
    if (!p) return;
    if (p->type == PostType::question) {
      if (kept.contains(p->id)) asm_.add_question(*p);
    } else if (kept.contains(*p->parent_id) || !all_questions.contains(*p->parent_id)) {
      asm_.add_answer(*p);
    }
  });
  return asm_.finish();
}

namespace {

class LinkParser {
 public:
  LinkParser(const std::set<KuId>& known, SkipLog& log, LinkKindCodes codes) : known_(&known), log_(&log), codes_(codes) {}

  void add(const AttributeMap& row) {
    ++row_no_;
    const std::string* src_s = find_attr(row, "PostId");
    const std::string* dst_s = find_attr(row, "RelatedPostId");
    const std::string* kind_s = find_attr(row, "LinkTypeId");
    const auto src = src_s ? parse_id(*src_s) : std::nullopt;
    const auto dst = dst_s ? parse_id(*dst_s) : std::nullopt;
    if (!src || !dst) {
      log_->add("links row " + std::to_string(row_no_) + ": unparseable PostId/RelatedPostId");
      return;
    }
    const auto kind = kind_of(kind_s);
    if (!kind) {
      log_->add("links row " + std::to_string(row_no_) + ": unknown LinkTypeId '" + (kind_s ? *kind_s : "") + "'");
      return;
    }
    if (*src == *dst) return;
    if (!known_->contains(*src) || !known_->contains(*dst)) return;
    LinkRecord rec{*src, *dst, *kind};
    if (seen_.insert({rec.source, rec.target, static_cast<int>(rec.kind)}).second) out_.push_back(rec);
  }

  std::vector<LinkRecord> take() { return std::move(out_); }

 private:
  std::optional<LinkKind> kind_of(const std::string* code) const {
    if (!code) return std::nullopt;
    auto v = parse_id(*code);
    if (v && *v == codes_.duplicate) return LinkKind::duplicate;
    if (v && *v == codes_.direct) return LinkKind::direct;
    return std::nullopt;
  }

  const std::set<KuId>* known_;
  SkipLog* log_;
  LinkKindCodes codes_;
  std::size_t row_no_ = 0;
  std::set<std::tuple<KuId, KuId, int>> seen_;
  std::vector<LinkRecord> out_;
};

}  // namespace

std::vector<LinkRecord> parse_links(const std::vector<AttributeMap>& rows, const std::set<KuId>& known_ids, SkipLog& log,
                                    LinkKindCodes codes) {
  LinkParser parser(known_ids, log, codes);
  for (const auto& row : rows) parser.add(row);
  return parser.take();
}

std::vector<LinkRecord> parse_links(std::istream& in, const std::set<KuId>& known_ids, SkipLog& log,
                                    LinkKindCodes codes) {
  LinkParser parser(known_ids, log, codes);
  for_each_row(in, [&](const AttributeMap& row) { parser.add(row); });
  return parser.take();
}

}  // namespace kurel::ingest
