#pragma once

// Metrics, the binary duplicate-detection reformulation, the two-input mode
// and the 24-attribute dataset export.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kurel/bilstm.hpp"
#include "kurel/common.hpp"
#include "kurel/kunet.hpp"
#include "kurel/textprep.hpp"

namespace kurel::eval {

struct MetricsReport {
  double micro_f = 0;
  double precision = 0;
  double recall = 0;
  double accuracy = 0;
  std::vector<double> per_class_f;
  /// confusion[gold][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

/// Micro-averaged precision/recall/F over all decisions plus per-class F.
/// `num_classes` = 0 means 1 + the largest label seen.
MetricsReport evaluate(const std::vector<int>& predictions, const std::vector<int>& gold, int num_classes = 0);

// --- duplicate question detection ---------------------------------------------

struct DqdPair {
  KuId ku1 = 0;
  KuId ku2 = 0;
  bool duplicate = false;
  Relation source = Relation::isolated;

  auto operator<=>(const DqdPair&) const = default;
};

/// Duplicates become positives; an equal number of negatives is drawn
/// uniformly from the pooled direct/indirect/isolated pairs. Sorted by (ku1, ku2).
std::vector<DqdPair> reformulate_dqd(const std::vector<kunet::LabeledPair>& pairs, std::uint64_t seed);

struct DqdSplit {
  std::vector<DqdPair> train;
  std::vector<DqdPair> dev;
  std::vector<DqdPair> test;
};

/// Applied independently inside each split.
DqdSplit reformulate_dqd(const kunet::DatasetSplit& split, std::uint64_t seed);

// --- two-input mode ---------------------------------------------------------------

/// Collapse a six-sequence example into two: per unit, the real title tokens
/// followed by the real body tokens, truncated/padded to `length`.
bilstm::PairExample two_input_mode(const bilstm::PairExample& example, int length = 70);

// --- dataset export -----------------------------------------------------------------

inline constexpr std::size_t kExportColumns = 24;
using ExportRow = std::array<std::string, kExportColumns>;

const ExportRow& export_header();

/// One row per pair; list-valued fields are JSON arrays. Throws on a pair
/// whose unit is missing from `units`.
std::vector<ExportRow> export_dataset(const std::vector<kunet::LabeledPair>& pairs,
                                      const std::map<KuId, textprep::CleanKU>& units);

/// RFC-4180: CRLF record separators, fields quoted when they contain a comma,
/// quote, CR or LF. The header row is written first.
std::string to_csv(const std::vector<ExportRow>& rows);
/// Inverse of to_csv; checks the header and the field count of every record.
std::vector<ExportRow> from_csv(std::string_view text);

std::string to_jsonl(const std::vector<ExportRow>& rows);
std::vector<ExportRow> from_jsonl(std::string_view text);

}  // namespace kurel::eval
