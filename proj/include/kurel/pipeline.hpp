#pragma once

// Stage helpers shared by the CLI subcommands, and the config-driven
// end-to-end run (ingest -> pairs -> clean -> embed -> features -> train -> eval).

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kurel/bilstm.hpp"
#include "kurel/dataset_io.hpp"
#include "kurel/embeddings.hpp"
#include "kurel/eval.hpp"
#include "kurel/features.hpp"
#include "kurel/ingest.hpp"
#include "kurel/kunet.hpp"
#include "kurel/svm.hpp"
#include "kurel/textprep.hpp"

namespace kurel::pipeline {

namespace fs = std::filesystem;

// --- ingest -----------------------------------------------------------------------

struct IngestOutput {
  std::vector<ingest::KnowledgeUnit> units;
  std::vector<ingest::LinkRecord> links;
  SkipLog log;
  std::size_t question_rows = 0;
  std::size_t link_rows = 0;
};

IngestOutput run_ingest(const fs::path& posts, const fs::path& links, const std::string& tag,
                        ingest::LinkKindCodes codes = {});

/// kus.jsonl, links.jsonl, manifest.json (counts and input hashes), ingest.skipped.log.
void write_ingest(const IngestOutput& out, const fs::path& posts, const fs::path& links, const std::string& tag,
                  const fs::path& dir);

// --- pairs ------------------------------------------------------------------------

struct PairsOutput {
  kunet::KUNet network;  // after overlap resolution and duplicate closure
  std::size_t overlaps_resolved = 0;
  std::vector<kunet::LabeledPair> pairs;
  kunet::DatasetSplit split;
};

PairsOutput run_pairs(const std::vector<ingest::KnowledgeUnit>& units, const std::vector<ingest::LinkRecord>& links,
                      const kunet::ExtractOptions& extract, kunet::SplitRatios ratios, std::uint64_t seed);

/// <split>.pairs.jsonl, all.pairs.jsonl and manifest.json with class counts.
void write_pairs_output(const PairsOutput& out, const fs::path& dir);

// --- clean ------------------------------------------------------------------------

/// Clean every unit, in input order, spreading the work over `workers` threads.
std::vector<textprep::CleanKU> clean_all(const std::vector<ingest::KnowledgeUnit>& units,
                                         const textprep::StopWords& stop_words, textprep::CleanStats* stats = nullptr,
                                         int workers = 1);

// --- embeddings and features ---------------------------------------------------------

/// One sentence per non-empty text part (title, body, answers) of each unit.
std::vector<std::vector<std::string>> embedding_corpus(const std::vector<const textprep::CleanKU*>& units);

/// Sorted distinct tokens over the parts of `layout`.
std::vector<std::string> term_vocabulary(const std::vector<const textprep::CleanKU*>& units,
                                         const features::Layout& layout);

void save_tfidf(const std::vector<features::TfidfModel>& models, const features::Layout& layout, const fs::path& path);
std::vector<features::TfidfModel> load_tfidf(const fs::path& path, features::Layout* layout = nullptr);

/// A labelled pair with an integer class index (relation index, or 0/1 for
/// duplicate/non-duplicate in the binary task).
struct Example {
  KuId ku1 = 0;
  KuId ku2 = 0;
  int label = 0;
};

std::vector<Example> to_examples(const std::vector<kunet::LabeledPair>& pairs);
std::vector<Example> to_examples(const std::vector<eval::DqdPair>& pairs);

/// Pair features computed in parallel, in input order.
io::FeatureTable feature_table(const std::vector<Example>& examples, const std::map<KuId, textprep::CleanKU>& units,
                               const features::FeatureModels& models, bool selected, int workers = 1);

svm::Dataset to_dataset(const io::FeatureTable& table);

std::vector<bilstm::PairExample> encode_examples(const std::vector<Example>& examples,
                                                 const std::map<KuId, textprep::CleanKU>& units,
                                                 const bilstm::Vocabulary& vocab, const bilstm::SequenceLengths& lengths);

// --- end-to-end ----------------------------------------------------------------------

struct Config {
  int version = 1;
  std::uint64_t seed = 1;
  fs::path posts;
  fs::path links;
  std::string tag = "java";
  fs::path out_dir;
  ingest::LinkKindCodes link_codes;
  kunet::ExtractOptions extract;
  kunet::SplitRatios ratios;
  bool keep_stopwords = false;
  std::optional<fs::path> stopword_list;
  embeddings::SkipGramOptions skipgram;
  std::optional<fs::path> external_vectors;
  double corpus_threshold = 0.2;
  double external_threshold = 0.2;
  double levenshtein_threshold = 0.2;
  /// "four_class" or "dqd".
  std::string task = "four_class";
  /// "three_part" or "two_input".
  std::string layout = "three_part";
  bool svm_selected = true;
  svm::TrainOptions svm;
  bool run_bilstm = true;
  bilstm::NetworkConfig network;
  bilstm::TrainOptions bilstm;
  bilstm::SequenceLengths lengths;
  int vocab_min_count = 2;
  int workers = 1;

  /// Unknown keys are rejected; relative paths resolve against `base_dir`.
  static Config from_json(std::string_view text, const fs::path& base_dir = {});
  std::string to_json() const;
};

/// Run every stage, writing artifacts under config.out_dir. Returns the JSON
/// report (also written to out_dir/report.json).
std::string run(const Config& config);

}  // namespace kurel::pipeline
