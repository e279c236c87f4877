#include "kurel/dataset_io.hpp"

#include <fstream>

#include "json.hpp"

namespace kurel::io {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

class LineWriter {
 public:
  explicit LineWriter(const fs::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw Error("cannot write " + path.string());
  }
  void write(const ordered_json& j) { out_ << j.dump() << '\n'; }
  void close() {
    out_.close();
    if (!out_) throw Error("failed writing " + path_.string());
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

template <class Fn>
void read_json_lines(const fs::path& path, Fn fn) {
  std::size_t line_no = 0;
  for_each_line(path, [&](std::string_view line) {
    ++line_no;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
}

template <class T>
std::optional<T> optional_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

void write_units(const std::vector<ingest::KnowledgeUnit>& units, const fs::path& path) {
  LineWriter w(path);
  for (const auto& ku : units) {
    ordered_json j;
    j["id"] = ku.id;
    j["title"] = ku.title;
    j["body"] = ku.body_html;
    ordered_json answers = ordered_json::array();
    for (const auto& a : ku.answers) answers.push_back({{"id", a.id}, {"body", a.body_html}});
    j["answers"] = std::move(answers);
    j["accepted_answer_id"] = ku.accepted_answer_id ? ordered_json(*ku.accepted_answer_id) : ordered_json(nullptr);
    j["tags"] = ku.tags;
    w.write(j);
  }
  w.close();
}

std::vector<ingest::KnowledgeUnit> read_units(const fs::path& path) {
  std::vector<ingest::KnowledgeUnit> out;
  read_json_lines(path, [&](const json& j) {
    ingest::KnowledgeUnit ku;
    ku.id = j.at("id").get<KuId>();
    ku.title = j.at("title").get<std::string>();
    ku.body_html = j.at("body").get<std::string>();
    for (const auto& a : j.at("answers")) ku.answers.push_back({a.at("id").get<KuId>(), a.at("body").get<std::string>()});
    ku.accepted_answer_id = optional_field<KuId>(j, "accepted_answer_id");
    ku.tags = j.at("tags").get<std::vector<std::string>>();
    out.push_back(std::move(ku));
  });
  return out;
}

void write_links(const std::vector<ingest::LinkRecord>& links, const fs::path& path) {
  LineWriter w(path);
  for (const auto& l : links) {
    w.write({{"source", l.source}, {"target", l.target}, {"kind", std::string(ingest::to_string(l.kind))}});
  }
  w.close();
}

std::vector<ingest::LinkRecord> read_links(const fs::path& path) {
  std::vector<ingest::LinkRecord> out;
  read_json_lines(path, [&](const json& j) {
    out.push_back({j.at("source").get<KuId>(), j.at("target").get<KuId>(),
                   ingest::parse_link_kind(j.at("kind").get<std::string>())});
  });
  return out;
}

void write_pairs(const std::vector<kunet::LabeledPair>& pairs, const fs::path& path) {
  LineWriter w(path);
  for (const auto& p : pairs) w.write({{"ku1", p.ku1}, {"ku2", p.ku2}, {"label", std::string(to_string(p.label))}});
  w.close();
}

std::vector<kunet::LabeledPair> read_pairs(const fs::path& path) {
  std::vector<kunet::LabeledPair> out;
  read_json_lines(path, [&](const json& j) {
    out.push_back({j.at("ku1").get<KuId>(), j.at("ku2").get<KuId>(), parse_relation(j.at("label").get<std::string>())});
  });
  return out;
}

void write_split(const kunet::DatasetSplit& split, const fs::path& dir) {
  fs::create_directories(dir);
  for (auto s : {kunet::SplitName::train, kunet::SplitName::dev, kunet::SplitName::test}) {
    write_pairs(split.get(s), dir / (std::string(to_string(s)) + ".pairs.jsonl"));
  }
}

kunet::DatasetSplit read_split(const fs::path& dir) {
  kunet::DatasetSplit split;
  split.train = read_pairs(dir / "train.pairs.jsonl");
  split.dev = read_pairs(dir / "dev.pairs.jsonl");
  split.test = read_pairs(dir / "test.pairs.jsonl");
  return split;
}

void write_dqd(const std::vector<eval::DqdPair>& pairs, const fs::path& path) {
  LineWriter w(path);
  for (const auto& p : pairs) {
    w.write({{"ku1", p.ku1},
             {"ku2", p.ku2},
             {"label", p.duplicate ? "duplicate" : "non_duplicate"},
             {"source", std::string(to_string(p.source))}});
  }
  w.close();
}

std::vector<eval::DqdPair> read_dqd(const fs::path& path) {
  std::vector<eval::DqdPair> out;
  read_json_lines(path, [&](const json& j) {
    out.push_back({j.at("ku1").get<KuId>(), j.at("ku2").get<KuId>(), j.at("label").get<std::string>() == "duplicate",
                   parse_relation(j.at("source").get<std::string>())});
  });
  return out;
}

void write_clean(const std::vector<textprep::CleanKU>& units, const fs::path& path) {
  LineWriter w(path);
  for (const auto& ku : units) {
    ordered_json j;
    j["id"] = ku.id;
    j["title_tokens"] = ku.title_tokens;
    j["body_tokens"] = ku.body_tokens;
    j["body_code"] = ku.body_code;
    j["answers_tokens"] = ku.answers_tokens;
    j["answers_code"] = ku.answers_code;
    j["accepted_answer_tokens"] =
        ku.accepted_answer_tokens ? ordered_json(*ku.accepted_answer_tokens) : ordered_json(nullptr);
    j["title_text"] = ku.title_text;
    j["body_text"] = ku.body_text;
    j["answer_ids"] = ku.answer_ids;
    j["answer_texts"] = ku.answer_texts;
    j["accepted_answer_id"] = ku.accepted_answer_id ? ordered_json(*ku.accepted_answer_id) : ordered_json(nullptr);
    j["accepted_answer_text"] = ku.accepted_answer_text;
    j["accepted_answer_code"] = ku.accepted_answer_code;
    j["tags"] = ku.tags;
    w.write(j);
  }
  w.close();
}

std::vector<textprep::CleanKU> read_clean(const fs::path& path) {
  std::vector<textprep::CleanKU> out;
  read_json_lines(path, [&](const json& j) {
    textprep::CleanKU ku;
    using Strings = std::vector<std::string>;
    ku.id = j.at("id").get<KuId>();
    ku.title_tokens = j.at("title_tokens").get<Strings>();
    ku.body_tokens = j.at("body_tokens").get<Strings>();
    ku.body_code = j.at("body_code").get<Strings>();
    ku.answers_tokens = j.at("answers_tokens").get<Strings>();
    ku.answers_code = j.at("answers_code").get<Strings>();
    ku.accepted_answer_tokens = optional_field<Strings>(j, "accepted_answer_tokens");
    ku.title_text = j.at("title_text").get<std::string>();
    ku.body_text = j.at("body_text").get<std::string>();
    ku.answer_ids = j.at("answer_ids").get<std::vector<KuId>>();
    ku.answer_texts = j.at("answer_texts").get<Strings>();
    ku.accepted_answer_id = optional_field<KuId>(j, "accepted_answer_id");
    ku.accepted_answer_text = j.at("accepted_answer_text").get<std::string>();
    ku.accepted_answer_code = j.at("accepted_answer_code").get<Strings>();
    ku.tags = j.at("tags").get<Strings>();
    out.push_back(std::move(ku));
  });
  return out;
}

std::map<KuId, textprep::CleanKU> index_by_id(std::vector<textprep::CleanKU> units) {
  std::map<KuId, textprep::CleanKU> out;
  for (auto& ku : units) {
    KuId id = ku.id;
    if (!out.emplace(id, std::move(ku)).second) throw Error("duplicate unit id " + std::to_string(id));
  }
  return out;
}

void write_features(const FeatureTable& table, const fs::path& path) {
  if (table.rows.size() != table.labels.size()) throw Error("feature table: rows and labels differ in length");
  LineWriter w(path);
  w.write({{"feature_names", table.names}});
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    if (r.values.size() != table.names.size()) throw Error("feature table: ragged row");
    w.write({{"ku1", r.ku1}, {"ku2", r.ku2}, {"label", table.labels[i]}, {"values", r.values}});
  }
  w.close();
}

FeatureTable read_features(const fs::path& path) {
  FeatureTable t;
  bool header = true;
  read_json_lines(path, [&](const json& j) {
    if (header) {
      t.names = j.at("feature_names").get<std::vector<std::string>>();
      header = false;
      return;
    }
    features::FeatureVector v;
    v.ku1 = j.at("ku1").get<KuId>();
    v.ku2 = j.at("ku2").get<KuId>();
    v.names = t.names;
    v.values = j.at("values").get<std::vector<double>>();
    if (v.values.size() != t.names.size()) throw Error(path.string() + ": ragged feature row");
    t.labels.push_back(j.at("label").get<int>());
    t.rows.push_back(std::move(v));
  });
  if (header) throw Error(path.string() + ": empty feature file");
  return t;
}

std::vector<std::string> read_label_lines(const fs::path& path) {
  std::vector<std::string> out;
  for_each_line(path, [&](std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    out.emplace_back(line);
  });
  return out;
}

void write_label_lines(const std::vector<std::string>& labels, const fs::path& path) {
  std::string text;
  for (const auto& l : labels) text += l + "\n";
  write_file(path, text);
}

}  // namespace kurel::io
