#pragma once

// Line-delimited JSON files exchanged between pipeline stages.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kurel/eval.hpp"
#include "kurel/features.hpp"
#include "kurel/ingest.hpp"
#include "kurel/kunet.hpp"
#include "kurel/textprep.hpp"

namespace kurel::io {

namespace fs = std::filesystem;

void write_units(const std::vector<ingest::KnowledgeUnit>& units, const fs::path& path);
std::vector<ingest::KnowledgeUnit> read_units(const fs::path& path);

void write_links(const std::vector<ingest::LinkRecord>& links, const fs::path& path);
std::vector<ingest::LinkRecord> read_links(const fs::path& path);

void write_pairs(const std::vector<kunet::LabeledPair>& pairs, const fs::path& path);
std::vector<kunet::LabeledPair> read_pairs(const fs::path& path);

/// <dir>/train.pairs.jsonl, dev.pairs.jsonl, test.pairs.jsonl.
void write_split(const kunet::DatasetSplit& split, const fs::path& dir);
kunet::DatasetSplit read_split(const fs::path& dir);

void write_dqd(const std::vector<eval::DqdPair>& pairs, const fs::path& path);
std::vector<eval::DqdPair> read_dqd(const fs::path& path);

void write_clean(const std::vector<textprep::CleanKU>& units, const fs::path& path);
std::vector<textprep::CleanKU> read_clean(const fs::path& path);
std::map<KuId, textprep::CleanKU> index_by_id(std::vector<textprep::CleanKU> units);

/// First line carries the column names; each further line one labelled vector.
struct FeatureTable {
  std::vector<std::string> names;
  std::vector<features::FeatureVector> rows;
  std::vector<int> labels;
};
void write_features(const FeatureTable& table, const fs::path& path);
FeatureTable read_features(const fs::path& path);

/// One label per line: a class name or an integer class index.
std::vector<std::string> read_label_lines(const fs::path& path);
void write_label_lines(const std::vector<std::string>& labels, const fs::path& path);

}  // namespace kurel::io
