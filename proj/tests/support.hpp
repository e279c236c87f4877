#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kurel/bilstm.hpp"
#include "kurel/common.hpp"
#include "kurel/features.hpp"
#include "kurel/kunet.hpp"
#include "kurel/textprep.hpp"

namespace kurel::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() / ("kurel-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    set_warning_sink([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { set_warning_sink(nullptr); }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  std::vector<std::string> messages;
};

// --- random graphs -------------------------------------------------------------

inline std::vector<ingest::LinkRecord> random_links(Rng& rng, int nodes, double density, double dup_share) {
  std::vector<ingest::LinkRecord> links;
  for (int a = 1; a <= nodes; ++a) {
    for (int b = a + 1; b <= nodes; ++b) {
      if (uniform_unit(rng) >= density) continue;
      auto kind = uniform_unit(rng) < dup_share ? ingest::LinkKind::duplicate : ingest::LinkKind::direct;
      links.push_back({a, b, kind});
    }
  }
  return links;
}

inline std::set<KuId> node_range(int n) {
  std::set<KuId> out;
  for (int i = 1; i <= n; ++i) out.insert(i);
  return out;
}

/// Random labelled pairs over `units` ids, each class present.
inline std::vector<kunet::LabeledPair> random_pairs(Rng& rng, int units, int count) {
  std::set<std::pair<KuId, KuId>> used;
  std::vector<kunet::LabeledPair> out;
  while (static_cast<int>(out.size()) < count) {
    KuId a = 1 + static_cast<KuId>(uniform_index(rng, units));
    KuId b = 1 + static_cast<KuId>(uniform_index(rng, units));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!used.insert({a, b}).second) continue;
    out.push_back({a, b, kAllRelations[uniform_index(rng, kNumRelations)]});
  }
  return out;
}

// --- synthetic relatedness corpus -------------------------------------------------

/// Pairs whose class decides which text parts the second unit copies from the
/// first: duplicate {title, body, answers}, direct {title, body},
/// indirect {answers}, isolated {}. Copied tokens are replaced by a random word
/// with probability `noise`. With `plant_marker`, both titles also receive the
/// class marker token "classmark<k>" at a random position.
struct SyntheticCorpus {
  std::vector<std::string> words;
  std::map<KuId, textprep::CleanKU> units;
  std::vector<kunet::LabeledPair> train;
  std::vector<kunet::LabeledPair> dev;
};

inline std::string random_word(Rng& rng) {
  std::size_t len = 4 + uniform_index(rng, 5);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + uniform_index(rng, 26));
  return w;
}

inline SyntheticCorpus make_synthetic_corpus(std::uint64_t seed, int train_pairs, int dev_pairs,
                                             int vocabulary = 300, double noise = 0.1,
                                             bool plant_marker = true) {
  Rng rng(seed);
  SyntheticCorpus corpus;
  std::set<std::string> distinct;
  while (static_cast<int>(distinct.size()) < vocabulary) distinct.insert(random_word(rng));
  corpus.words.assign(distinct.begin(), distinct.end());

  auto draw = [&](std::size_t n) {
    std::vector<std::string> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back(corpus.words[uniform_index(rng, corpus.words.size())]);
    return t;
  };
  auto copy_noisy = [&](const std::vector<std::string>& src) {
    auto t = src;
    for (auto& w : t) {
      if (uniform_unit(rng) < noise) w = corpus.words[uniform_index(rng, corpus.words.size())];
    }
    return t;
  };
  auto make_unit = [](KuId id, std::vector<std::string> title, std::vector<std::string> body,
                      std::vector<std::string> answers) {
    textprep::CleanKU ku;
    ku.id = id;
    ku.title_tokens = std::move(title);
    ku.body_tokens = std::move(body);
    ku.answers_tokens = std::move(answers);
    return ku;
  };

  KuId next_id = 1;
  auto make_pairs = [&](int count, std::vector<kunet::LabeledPair>& out) {
    for (int k = 0; k < count; ++k) {
      Relation label = kAllRelations[k % kNumRelations];
      auto t1 = draw(6), b1 = draw(10), a1 = draw(10);
      bool same_tb = label == Relation::duplicate || label == Relation::direct;
      bool same_a = label == Relation::duplicate || label == Relation::indirect;
      auto t2 = same_tb ? copy_noisy(t1) : draw(6);
      auto b2 = same_tb ? copy_noisy(b1) : draw(10);
      auto a2 = same_a ? copy_noisy(a1) : draw(10);
      if (plant_marker) {
        std::string marker = "classmark" + std::to_string(static_cast<int>(label));
        t1.insert(t1.begin() + static_cast<long>(uniform_index(rng, t1.size() + 1)), marker);
        t2.insert(t2.begin() + static_cast<long>(uniform_index(rng, t2.size() + 1)), marker);
      }
      KuId id1 = next_id++, id2 = next_id++;
      corpus.units.emplace(id1, make_unit(id1, t1, b1, a1));
      corpus.units.emplace(id2, make_unit(id2, t2, b2, a2));
      out.push_back({id1, id2, label});
    }
    shuffle(out, rng);
  };
  make_pairs(train_pairs, corpus.train);
  make_pairs(dev_pairs, corpus.dev);
  return corpus;
}

/// One sentence per unit part, for skip-gram training.
inline std::vector<std::vector<std::string>> synthetic_sentences(const SyntheticCorpus& corpus) {
  std::vector<std::vector<std::string>> out;
  for (const auto& [id, ku] : corpus.units) {
    out.push_back(ku.title_tokens);
    out.push_back(ku.body_tokens);
    out.push_back(ku.answers_tokens);
  }
  return out;
}

// --- toy networks ---------------------------------------------------------------------

inline bilstm::PairExample random_example(Rng& rng, int vocab_size, int inputs, int max_len, int num_classes) {
  bilstm::PairExample ex;
  for (int s = 0; s < inputs; ++s) {
    int len = 1 + static_cast<int>(uniform_index(rng, max_len));
    std::vector<int> ids;
    for (int t = 0; t < len; ++t) ids.push_back(1 + static_cast<int>(uniform_index(rng, vocab_size - 1)));
    ex.inputs.push_back(bilstm::pad_sequence(ids, max_len));
  }
  ex.label = static_cast<int>(uniform_index(rng, num_classes));
  return ex;
}

inline bilstm::NetworkConfig toy_config(int vocab, int dim, int hidden, int parts = 3) {
  bilstm::NetworkConfig c;
  c.vocab_size = vocab;
  c.embed_dim = dim;
  c.hidden = hidden;
  c.dense = 12;
  c.parts = parts;
  return c;
}

// --- synthetic data dump ---------------------------------------------------------------

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "&#xA;"; break;
      default: out += c;
    }
  }
  return out;
}

struct SyntheticDump {
  fs::path posts;
  fs::path links;
  std::size_t java_questions = 0;
};

/// Posts.xml / PostLinks.xml in data-dump form. Java questions come in
/// `clusters` topic groups of `cluster_size`; links stay inside a group, so
/// groups are separate components. A few python questions and links to them
/// are mixed in and should be filtered by the tag.
inline SyntheticDump write_synthetic_dump(const fs::path& dir, std::uint64_t seed, int clusters = 50,
                                          int cluster_size = 14, double dup_share = 0.4) {
  Rng rng(seed);
  std::string posts = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n";
  std::string links = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<postlinks>\n";
  KuId next_id = 100;
  int link_id = 1;
  std::vector<std::vector<KuId>> groups(static_cast<std::size_t>(clusters));
  auto sentence = [&](const std::vector<std::string>& topic, int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + topic[uniform_index(rng, topic.size())];
    return s;
  };
  auto add_question = [&](const std::vector<std::string>& topic, const std::string& tags) {
    KuId q = next_id;
    KuId a1 = q + 1, a2 = q + 2;
    next_id += 3;
    std::string body = "<p>" + sentence(topic, 12) + "</p><pre><code>call(" + topic[0] + ");</code></pre>";
    posts += "  <row Id=\"" + std::to_string(q) + "\" PostTypeId=\"1\" AcceptedAnswerId=\"" + std::to_string(a1) +
             "\" Title=\"" + xml_escape(sentence(topic, 6)) + "\" Body=\"" + xml_escape(body) + "\" Tags=\"" +
             xml_escape(tags) + "\" />\n";
    for (KuId a : {a1, a2}) {
      posts += "  <row Id=\"" + std::to_string(a) + "\" PostTypeId=\"2\" ParentId=\"" + std::to_string(q) +
               "\" Body=\"" + xml_escape("<p>" + sentence(topic, 10) + "</p>") + "\" />\n";
    }
    return q;
  };
  auto add_link = [&](KuId a, KuId b, int type) {
    links += "  <row Id=\"" + std::to_string(link_id++) + "\" PostId=\"" + std::to_string(a) + "\" RelatedPostId=\"" +
             std::to_string(b) + "\" LinkTypeId=\"" + std::to_string(type) + "\" />\n";
  };
  SyntheticDump dump;
  for (auto& group : groups) {
    std::vector<std::string> topic;
    for (int w = 0; w < 8; ++w) topic.push_back(random_word(rng));
    for (int i = 0; i < cluster_size; ++i) group.push_back(add_question(topic, "<java><jpa>"));
    dump.java_questions += static_cast<std::size_t>(cluster_size);
    // a spanning chain keeps the group connected; extra edges add variety
    for (std::size_t i = 1; i < group.size(); ++i) {
      KuId other = group[uniform_index(rng, i)];
      add_link(group[i], other, uniform_unit(rng) < dup_share ? 3 : 1);
    }
    for (int e = 0; e < cluster_size / 3; ++e) {
      KuId a = group[uniform_index(rng, group.size())], b = group[uniform_index(rng, group.size())];
      if (a != b) add_link(a, b, uniform_unit(rng) < dup_share ? 3 : 1);
    }
  }
  std::vector<std::string> py = {"python", "list", "append", "slow"};
  for (int i = 0; i < 3; ++i) add_link(add_question(py, "<python>"), groups[0][0], 1);
  posts += "</posts>\n";
  links += "</postlinks>\n";
  dump.posts = dir / "Posts.xml";
  dump.links = dir / "PostLinks.xml";
  std::ofstream(dump.posts, std::ios::binary) << posts;
  std::ofstream(dump.links, std::ios::binary) << links;
  return dump;
}

}  // namespace kurel::testing
