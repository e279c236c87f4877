#pragma once

// Knowledge-unit network: build, resolve duplicate/direct overlaps, close
// duplicates transitively, extract the four relatedness classes, then
// balance and split.

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "kurel/common.hpp"
#include "kurel/ingest.hpp"

namespace kurel::kunet {

using ingest::LinkKind;
using ingest::LinkRecord;

/// Unordered id pair stored with first < second.
struct NodePair {
  KuId first = 0;
  KuId second = 0;

  static NodePair of(KuId a, KuId b) { return a < b ? NodePair{a, b} : NodePair{b, a}; }
  auto operator<=>(const NodePair&) const = default;
};

struct Edge {
  LinkKind label = LinkKind::direct;
  /// Set by build_network when the pair was linked with both labels.
  bool conflict = false;

  bool operator==(const Edge&) const = default;
};

struct KUNet {
  std::set<KuId> nodes;
  std::map<NodePair, Edge> edges;

  std::size_t count(LinkKind label) const;
  bool operator==(const KUNet&) const = default;
};

struct LabeledPair {
  KuId ku1 = 0;  // ku1 < ku2
  KuId ku2 = 0;
  Relation label = Relation::isolated;

  auto operator<=>(const LabeledPair&) const = default;
};

KUNet build_network(const std::vector<LinkRecord>& links, const std::set<KuId>& nodes);
KUNet resolve_overlaps(KUNet net);
KUNet close_duplicates(KUNet net);

struct ExtractOptions {
  int distance_min = 2;
  int distance_max = 5;
  /// Number of isolated pairs to sample; unset means "as many as indirect pairs".
  std::optional<std::uint64_t> isolated_count;
  std::uint64_t seed = 0;
};

/// Output sorted by (label, ku1, ku2).
std::vector<LabeledPair> extract_pairs(const KUNet& net, const ExtractOptions& options);

/// Unordered pairs (a<b) without an edge whose label-blind shortest-path
/// length lies in [distance_min, distance_max]. Sorted.
std::vector<NodePair> indirect_pairs(const KUNet& net, int distance_min, int distance_max);

/// Number of unordered node pairs lying in different connected components.
std::uint64_t cross_component_pair_count(const KUNet& net);

struct SplitRatios {
  double train = 0.6;
  double dev = 0.1;
  double test = 0.3;
};

enum class SplitName { train = 0, dev = 1, test = 2 };
std::string_view to_string(SplitName s);

struct DatasetSplit {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> dev;
  std::vector<LabeledPair> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
  /// KU partition the pairs were filtered against.
  std::array<std::vector<KuId>, 3> partition;
  /// Pairs dropped because their endpoints fell in different partitions.
  std::size_t cross_partition_dropped = 0;
  /// Per-split class counts before undersampling.
  std::array<std::array<std::size_t, kNumRelations>, 3> counts_before{};

  const std::vector<LabeledPair>& get(SplitName s) const;
};

DatasetSplit balance_and_split(const std::vector<LabeledPair>& pairs, SplitRatios ratios, std::uint64_t seed);

/// Class counts of a pair list, indexed by Relation.
std::array<std::size_t, kNumRelations> class_counts(const std::vector<LabeledPair>& pairs);

}  // namespace kurel::kunet
