#include "kurel/kunet.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace kurel::kunet {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];  // path halving
      i = parent_[i];
    }
    return i;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

// Dense index over the node set plus label-blind adjacency lists.
struct IndexedGraph {
  std::vector<KuId> ids;
  std::unordered_map<KuId, std::size_t> index;
  std::vector<std::vector<std::size_t>> adjacency;

  explicit IndexedGraph(const KUNet& net) : ids(net.nodes.begin(), net.nodes.end()), adjacency(ids.size()) {
    index.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
    for (const auto& [pair, edge] : net.edges) {
      std::size_t a = index.at(pair.first);
      std::size_t b = index.at(pair.second);
      adjacency[a].push_back(b);
      adjacency[b].push_back(a);
    }
    for (auto& adj : adjacency) std::sort(adj.begin(), adj.end());
  }

  std::vector<std::size_t> component_of() const {
    DisjointSets ds(ids.size());
    for (std::size_t a = 0; a < ids.size(); ++a) {
      for (std::size_t b : adjacency[a]) ds.unite(a, b);
    }
    std::vector<std::size_t> comp(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) comp[i] = ds.find(i);
    return comp;
  }
};

}  // namespace

std::size_t KUNet::count(LinkKind label) const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [&](const auto& e) { return e.second.label == label; }));
}

KUNet build_network(const std::vector<LinkRecord>& links, const std::set<KuId>& nodes) {
  KUNet net;
  net.nodes = nodes;
  for (const auto& link : links) {
    if (link.source == link.target) throw Error("self-link on " + std::to_string(link.source));
    if (!nodes.contains(link.source) || !nodes.contains(link.target)) {
      throw Error("link endpoint outside node set: " + std::to_string(link.source) + " - " +
                  std::to_string(link.target));
    }
    auto key = NodePair::of(link.source, link.target);
    auto [it, inserted] = net.edges.try_emplace(key, Edge{link.kind, false});
    if (!inserted && it->second.label != link.kind) it->second.conflict = true;
  }
  return net;
}

KUNet resolve_overlaps(KUNet net) {
  for (auto& [pair, edge] : net.edges) {
    if (edge.conflict) {
      edge.label = LinkKind::duplicate;
      edge.conflict = false;
    }
  }
  return net;
}

KUNet close_duplicates(KUNet net) {
  for (const auto& [pair, edge] : net.edges) {
    if (edge.conflict) throw Error("close_duplicates requires resolved overlaps");
  }
  IndexedGraph g(net);
  DisjointSets ds(g.ids.size());
  for (const auto& [pair, edge] : net.edges) {
    if (edge.label == LinkKind::duplicate) ds.unite(g.index.at(pair.first), g.index.at(pair.second));
  }
  std::map<std::size_t, std::vector<std::size_t>> components;
  for (const auto& [pair, edge] : net.edges) {
    if (edge.label != LinkKind::duplicate) continue;
    components[ds.find(g.index.at(pair.first))];
  }
  for (std::size_t i = 0; i < g.ids.size(); ++i) {
    auto it = components.find(ds.find(i));
    if (it != components.end()) it->second.push_back(i);
  }
  for (const auto& [root, members] : components) {
    for (std::size_t x = 0; x < members.size(); ++x) {
      for (std::size_t y = x + 1; y < members.size(); ++y) {
        // ids are sorted, so members[x] < members[y] implies ids ordered
        net.edges[NodePair{g.ids[members[x]], g.ids[members[y]]}] = Edge{LinkKind::duplicate, false};
      }
    }
  }
  return net;
}

std::vector<NodePair> indirect_pairs(const KUNet& net, int distance_min, int distance_max) {
  if (distance_min < 1 || distance_max < distance_min) throw Error("invalid distance range");
  IndexedGraph g(net);
  const std::size_t n = g.ids.size();
  std::vector<NodePair> out;
  std::vector<int> dist(n, -1);
  std::vector<std::size_t> touched;
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < n; ++s) {
    if (g.adjacency[s].empty()) continue;
    dist[s] = 0;
    touched.assign(1, s);
    queue.assign(1, s);
    while (!queue.empty()) {
      std::size_t u = queue.front();
      queue.pop_front();
      if (dist[u] == distance_max) continue;
      for (std::size_t v : g.adjacency[u]) {
        if (dist[v] >= 0) continue;
        dist[v] = dist[u] + 1;
        touched.push_back(v);
        queue.push_back(v);
      }
    }
    for (std::size_t t : touched) {
      if (t <= s || dist[t] < distance_min) continue;
      // distance 1 means an edge; only reachable when distance_min == 1
      if (dist[t] == 1) continue;
      out.push_back(NodePair{g.ids[s], g.ids[t]});
    }
    for (std::size_t t : touched) dist[t] = -1;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t cross_component_pair_count(const KUNet& net) {
  IndexedGraph g(net);
  auto comp = g.component_of();
  std::unordered_map<std::size_t, std::uint64_t> sizes;
  for (auto c : comp) ++sizes[c];
  const std::uint64_t n = g.ids.size();
  std::uint64_t same = 0;
  for (const auto& [c, s] : sizes) same += s * (s - 1) / 2;
  return n * (n - 1) / 2 - same;
}

namespace {

std::vector<NodePair> sample_isolated(const KUNet& net, std::uint64_t count, std::uint64_t seed) {
  IndexedGraph g(net);
  auto comp = g.component_of();
  const std::uint64_t total = cross_component_pair_count(net);
  if (count > total) {
    throw Error("isolated_count " + std::to_string(count) + " exceeds the " + std::to_string(total) +
                " cross-component pairs");
  }
  Rng rng(derive_seed(seed, 0x150));
  const std::size_t n = g.ids.size();
  std::vector<NodePair> out;
  if (count == 0) return out;
  if (count * 2 >= total) {
    // Dense request: enumerate, then partial Fisher-Yates.
    std::vector<NodePair> all;
    all.reserve(total);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        if (comp[a] != comp[b]) all.push_back(NodePair{g.ids[a], g.ids[b]});
      }
    }
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t j = i + uniform_index(rng, all.size() - i);
      std::swap(all[i], all[j]);
    }
    all.resize(count);
    out = std::move(all);
  } else {
    // Sparse request: rejection sampling over ordered pairs is uniform over
    // unordered cross-component pairs.
    std::set<NodePair> chosen;
    while (chosen.size() < count) {
      std::size_t a = uniform_index(rng, n);
      std::size_t b = uniform_index(rng, n);
      if (a == b || comp[a] == comp[b]) continue;
      chosen.insert(NodePair::of(g.ids[a], g.ids[b]));
    }
    out.assign(chosen.begin(), chosen.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<LabeledPair> extract_pairs(const KUNet& net, const ExtractOptions& options) {
  std::vector<LabeledPair> out;
  for (const auto& [pair, edge] : net.edges) {
    if (edge.conflict) throw Error("extract_pairs requires resolved overlaps");
    out.push_back({pair.first, pair.second, edge.label == LinkKind::duplicate ? Relation::duplicate : Relation::direct});
  }
  auto indirect = indirect_pairs(net, options.distance_min, options.distance_max);
  for (const auto& p : indirect) out.push_back({p.first, p.second, Relation::indirect});
  std::uint64_t isolated = options.isolated_count.value_or(indirect.size());
  for (const auto& p : sample_isolated(net, isolated, options.seed)) out.push_back({p.first, p.second, Relation::isolated});
  std::sort(out.begin(), out.end(), [](const LabeledPair& a, const LabeledPair& b) {
    return std::tie(a.label, a.ku1, a.ku2) < std::tie(b.label, b.ku1, b.ku2);
  });
  return out;
}

std::string_view to_string(SplitName s) {
  switch (s) {
    case SplitName::train: return "train";
    case SplitName::dev: return "dev";
    case SplitName::test: return "test";
  }
  throw Error("invalid split");
}

const std::vector<LabeledPair>& DatasetSplit::get(SplitName s) const {
  switch (s) {
    case SplitName::train: return train;
    case SplitName::dev: return dev;
    case SplitName::test: return test;
  }
  throw Error("invalid split");
}

std::array<std::size_t, kNumRelations> class_counts(const std::vector<LabeledPair>& pairs) {
  std::array<std::size_t, kNumRelations> c{};
  for (const auto& p : pairs) ++c[static_cast<int>(p.label)];
  return c;
}

DatasetSplit balance_and_split(const std::vector<LabeledPair>& pairs, SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.dev <= 0 || ratios.test <= 0 ||
      std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9) {
    throw Error("split ratios must be positive and sum to 1");
  }
  std::set<KuId> node_set;
  for (const auto& p : pairs) {
    if (p.ku1 >= p.ku2) throw Error("pair not in canonical orientation: " + std::to_string(p.ku1) + "," + std::to_string(p.ku2));
    node_set.insert(p.ku1);
    node_set.insert(p.ku2);
  }
  std::vector<KuId> nodes(node_set.begin(), node_set.end());
  Rng rng(derive_seed(seed, 0x5917));
  shuffle(nodes, rng);
  const std::size_t n = nodes.size();
  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n)));
  const auto n_dev = std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios.dev * static_cast<double>(n))));

  DatasetSplit split;
  split.seed = seed;
  split.ratios = ratios;
  std::unordered_map<KuId, int> part;
  part.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    int s = i < n_train ? 0 : (i < n_train + n_dev ? 1 : 2);
    part.emplace(nodes[i], s);
    split.partition[s].push_back(nodes[i]);
  }
  for (auto& p : split.partition) std::sort(p.begin(), p.end());

  std::array<std::array<std::vector<LabeledPair>, kNumRelations>, 3> buckets;
  for (const auto& p : pairs) {
    int a = part.at(p.ku1);
    if (a != part.at(p.ku2)) {
      ++split.cross_partition_dropped;
      continue;
    }
    buckets[a][static_cast<int>(p.label)].push_back(p);
  }

  std::ostringstream empty_diag;
  for (int s = 0; s < 3; ++s) {
    for (int c = 0; c < kNumRelations; ++c) {
      split.counts_before[s][c] = buckets[s][c].size();
      if (buckets[s][c].empty()) {
        empty_diag << ' ' << to_string(static_cast<SplitName>(s)) << '.' << to_string(static_cast<Relation>(c));
      }
    }
  }
  if (!empty_diag.str().empty()) {
    std::ostringstream msg;
    msg << "empty class after split:" << empty_diag.str() << "; counts (dup,direct,indirect,isolated):";
    for (int s = 0; s < 3; ++s) {
      msg << ' ' << to_string(static_cast<SplitName>(s)) << '=';
      for (int c = 0; c < kNumRelations; ++c) msg << (c ? "," : "") << split.counts_before[s][c];
    }
    throw Error(msg.str());
  }

  std::array<std::vector<LabeledPair>*, 3> targets{&split.train, &split.dev, &split.test};
  for (int s = 0; s < 3; ++s) {
    std::size_t smallest = buckets[s][0].size();
    for (int c = 1; c < kNumRelations; ++c) smallest = std::min(smallest, buckets[s][c].size());
    for (int c = 0; c < kNumRelations; ++c) {
      auto& bucket = buckets[s][c];
      std::sort(bucket.begin(), bucket.end());
      Rng crng(derive_seed(seed, 0x100 + static_cast<std::uint64_t>(s * kNumRelations + c)));
      shuffle(bucket, crng);
      targets[s]->insert(targets[s]->end(), bucket.begin(), bucket.begin() + static_cast<std::ptrdiff_t>(smallest));
    }
    std::sort(targets[s]->begin(), targets[s]->end(), [](const LabeledPair& a, const LabeledPair& b) {
      return std::tie(a.ku1, a.ku2, a.label) < std::tie(b.ku1, b.ku2, b.label);
    });
  }
  return split;
}

}  // namespace kurel::kunet
