#include "kurel/eval.hpp"

#include <algorithm>

#include "json.hpp"

namespace kurel::eval {

MetricsReport evaluate(const std::vector<int>& predictions, const std::vector<int>& gold, int num_classes) {
  if (predictions.size() != gold.size()) {
    throw Error("evaluate: " + std::to_string(predictions.size()) + " predictions for " + std::to_string(gold.size()) +
                " gold labels");
  }
  int k = num_classes;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || predictions[i] < 0) throw Error("evaluate: negative label");
    if (num_classes == 0) k = std::max({k, gold[i] + 1, predictions[i] + 1});
    else if (gold[i] >= k || predictions[i] >= k) throw Error("evaluate: label outside the class set");
  }
  MetricsReport r;
  r.confusion.assign(static_cast<std::size_t>(k), std::vector<std::size_t>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < gold.size(); ++i) ++r.confusion[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(predictions[i])];

  std::size_t tp = 0, fp = 0, fn = 0;
  r.per_class_f.assign(static_cast<std::size_t>(k), 0.0);
  for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
    std::size_t ctp = r.confusion[c][c];
    std::size_t cfp = 0, cfn = 0;
    for (std::size_t o = 0; o < static_cast<std::size_t>(k); ++o) {
      if (o == c) continue;
      cfp += r.confusion[o][c];
      cfn += r.confusion[c][o];
    }
    const std::size_t denom = 2 * ctp + cfp + cfn;
    r.per_class_f[c] = denom ? 2.0 * static_cast<double>(ctp) / static_cast<double>(denom) : 0.0;
    tp += ctp;
    fp += cfp;
    fn += cfn;
  }
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.micro_f = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.accuracy = gold.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(gold.size());
  return r;
}

std::vector<DqdPair> reformulate_dqd(const std::vector<kunet::LabeledPair>& pairs, std::uint64_t seed) {
  std::vector<DqdPair> positives;
  std::vector<DqdPair> pool;
  for (const auto& p : pairs) {
    (p.label == Relation::duplicate ? positives : pool).push_back({p.ku1, p.ku2, p.label == Relation::duplicate, p.label});
  }
  if (positives.empty()) throw Error("dqd: no duplicate pairs to use as positives");
  if (pool.size() < positives.size()) {
    throw Error("dqd: " + std::to_string(pool.size()) + " non-duplicate pairs cannot balance " +
                std::to_string(positives.size()) + " duplicates");
  }
  std::sort(pool.begin(), pool.end());
  Rng rng(seed);
  for (std::size_t i = 0; i < positives.size(); ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
  pool.resize(positives.size());
  positives.insert(positives.end(), pool.begin(), pool.end());
  std::sort(positives.begin(), positives.end());
  return positives;
}

DqdSplit reformulate_dqd(const kunet::DatasetSplit& split, std::uint64_t seed) {
  return {reformulate_dqd(split.train, derive_seed(seed, 0)), reformulate_dqd(split.dev, derive_seed(seed, 1)),
          reformulate_dqd(split.test, derive_seed(seed, 2))};
}

bilstm::PairExample two_input_mode(const bilstm::PairExample& example, int length) {
  if (example.inputs.size() != 6) throw Error("two_input_mode expects a six-sequence example");
  bilstm::PairExample out;
  out.label = example.label;
  for (std::size_t unit = 0; unit < 2; ++unit) {
    std::vector<int> ids;
    for (std::size_t part = 0; part < 2; ++part) {
      for (int id : example.inputs[unit * 3 + part]) {
        if (id != bilstm::kPadId) ids.push_back(id);
      }
    }
    out.inputs.push_back(bilstm::pad_sequence(ids, length));
  }
  return out;
}

const ExportRow& export_header() {
  static const ExportRow header = [] {
    ExportRow h;
    h[0] = "Id";
    const char* fields[] = {"Id",   "Title",          "Body",          "BodyCode",    "AcceptedAnswerId",
                            "AcceptedAnswerBody", "AcceptedAnswerCode", "AnswersIdList", "AnswersBody",
                            "AnswersCode", "Tags"};
    for (int q = 0; q < 2; ++q) {
      for (std::size_t f = 0; f < 11; ++f) h[1 + q * 11 + f] = "q" + std::to_string(q + 1) + "_" + fields[f];
    }
    h[23] = "Class";
    return h;
  }();
  return header;
}

std::vector<ExportRow> export_dataset(const std::vector<kunet::LabeledPair>& pairs,
                                      const std::map<KuId, textprep::CleanKU>& units) {
  std::vector<ExportRow> rows;
  rows.reserve(pairs.size());
  auto json_list = [](const auto& v) { return nlohmann::json(v).dump(); };
  for (const auto& p : pairs) {
    ExportRow row;
    row[0] = std::to_string(p.ku1) + "_" + std::to_string(p.ku2);
    KuId ids[2] = {p.ku1, p.ku2};
    for (std::size_t q = 0; q < 2; ++q) {
      auto it = units.find(ids[q]);
      if (it == units.end()) throw Error("export: pair references missing unit " + std::to_string(ids[q]));
      const auto& ku = it->second;
      std::string* f = &row[1 + q * 11];
      f[0] = std::to_string(ku.id);
      f[1] = ku.title_text;
      f[2] = ku.body_text;
      f[3] = json_list(ku.body_code);
      f[4] = ku.accepted_answer_id ? std::to_string(*ku.accepted_answer_id) : "";
      f[5] = ku.accepted_answer_text;
      f[6] = json_list(ku.accepted_answer_code);
      f[7] = json_list(ku.answer_ids);
      f[8] = json_list(ku.answer_texts);
      f[9] = json_list(ku.answers_code);
      f[10] = json_list(ku.tags);
    }
    row[23] = std::string(to_string(p.label));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

void append_csv_field(std::string& out, const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

void append_csv_record(std::string& out, const ExportRow& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    append_csv_field(out, row[i]);
  }
  out += "\r\n";
}

}  // namespace

std::string to_csv(const std::vector<ExportRow>& rows) {
  std::string out;
  append_csv_record(out, export_header());
  for (const auto& r : rows) append_csv_record(out, r);
  return out;
}

std::vector<ExportRow> from_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  std::size_t i = 0;
  bool field_started = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == '"' && !field_started) {
      field_started = true;
      ++i;
      for (;;) {
        if (i >= text.size()) throw Error("csv: unterminated quoted field");
        if (text[i] == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        field += text[i++];
      }
      if (i < text.size() && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
        throw Error("csv: unexpected character after closing quote");
      }
      continue;
    }
    if (c == ',') {
      end_field();
      ++i;
    } else if (c == '\r' || c == '\n') {
      end_record();
      i += (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ? 2 : 1;
    } else {
      field_started = true;
      field += c;
      ++i;
    }
  }
  if (field_started || !record.empty()) end_record();

  if (records.empty()) throw Error("csv: missing header");
  auto to_row = [](std::vector<std::string>& rec, std::size_t line) {
    if (rec.size() != kExportColumns) {
      throw Error("csv: record " + std::to_string(line) + " has " + std::to_string(rec.size()) + " fields, expected 24");
    }
    ExportRow row;
    std::move(rec.begin(), rec.end(), row.begin());
    return row;
  };
  if (to_row(records[0], 0) != export_header()) throw Error("csv: unexpected header");
  std::vector<ExportRow> rows;
  for (std::size_t r = 1; r < records.size(); ++r) rows.push_back(to_row(records[r], r));
  return rows;
}

std::string to_jsonl(const std::vector<ExportRow>& rows) {
  std::string out;
  const auto& header = export_header();
  for (const auto& row : rows) {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < kExportColumns; ++i) j[header[i]] = row[i];
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<ExportRow> from_jsonl(std::string_view text) {
  std::vector<ExportRow> rows;
  const auto& header = export_header();
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    if (j.size() != kExportColumns) throw Error("jsonl: record does not have 24 fields");
    ExportRow row;
    for (std::size_t i = 0; i < kExportColumns; ++i) row[i] = j.at(header[i]).get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace kurel::eval
