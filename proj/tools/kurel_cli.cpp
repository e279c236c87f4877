// Command-line front end for every pipeline stage.

#include <CLI11.hpp>

#include <charconv>
#include <iostream>
#include <set>

#include "json.hpp"
#include "kurel/bilstm.hpp"
#include "kurel/dataset_io.hpp"
#include "kurel/embeddings.hpp"
#include "kurel/eval.hpp"
#include "kurel/features.hpp"
#include "kurel/pipeline.hpp"
#include "kurel/svm.hpp"

namespace fs = std::filesystem;
using namespace kurel;
using nlohmann::ordered_json;

namespace {

const std::vector<std::string> kBinaryClasses = {"duplicate", "non_duplicate"};

std::vector<std::string> relation_classes() {
  std::vector<std::string> out;
  for (Relation r : kAllRelations) out.emplace_back(to_string(r));
  return out;
}

std::vector<std::string> class_names(int num_classes) {
  if (num_classes == 2) return kBinaryClasses;
  if (num_classes == kNumRelations) return relation_classes();
  std::vector<std::string> out;
  for (int c = 0; c < num_classes; ++c) out.push_back(std::to_string(c));
  return out;
}

kunet::SplitRatios parse_ratios(const std::string& text) {
  std::vector<double> v;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    v.push_back(std::stod(text.substr(start, end - start)));
    start = end + 1;
  }
  if (v.size() != 3) throw Error("--ratios needs three comma-separated values");
  return {v[0], v[1], v[2]};
}

features::Layout layout_from_flag(bool two_input) {
  return two_input ? features::Layout::two_input() : features::Layout::three_part();
}

/// Labelled pairs from a four-class pairs file or a binary dqd file.
std::vector<pipeline::Example> read_examples(const fs::path& path) {
  if (path.string().ends_with(".dqd.jsonl")) return pipeline::to_examples(io::read_dqd(path));
  return pipeline::to_examples(io::read_pairs(path));
}

std::vector<std::string> read_terms(const fs::path& path, const features::Layout& layout) {
  if (path.extension() == ".jsonl") {
    auto units = io::read_clean(path);
    std::vector<const textprep::CleanKU*> ptrs;
    for (const auto& u : units) ptrs.push_back(&u);
    return pipeline::term_vocabulary(ptrs, layout);
  }
  std::vector<std::string> terms;
  for_each_line(path, [&](std::string_view line) { terms.emplace_back(line); });
  return terms;
}

/// Labels given as class names or as integer indices.
std::vector<int> decode_labels(const std::vector<std::string>& lines, std::vector<std::string>& names) {
  bool numeric = std::all_of(lines.begin(), lines.end(), [](const std::string& s) {
    int v;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
  });
  std::vector<int> out;
  if (numeric) {
    for (const auto& s : lines) out.push_back(std::stoi(s));
    return out;
  }
  const bool binary = std::find(lines.begin(), lines.end(), "non_duplicate") != lines.end();
  if (names.empty()) names = binary ? kBinaryClasses : relation_classes();
  for (const auto& s : lines) {
    auto it = std::find(names.begin(), names.end(), s);
    if (it == names.end()) throw Error("unknown class label '" + s + "'");
    out.push_back(static_cast<int>(it - names.begin()));
  }
  return out;
}

ordered_json metrics_json(const eval::MetricsReport& m, const std::vector<std::string>& names) {
  ordered_json j;
  j["micro_f"] = m.micro_f;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["accuracy"] = m.accuracy;
  for (std::size_t c = 0; c < m.per_class_f.size(); ++c) {
    j["per_class_f"][c < names.size() ? names[c] : std::to_string(c)] = m.per_class_f[c];
  }
  j["confusion"] = m.confusion;
  return j;
}

ordered_json ablation_json(const std::vector<svm::AblationRow>& rows) {
  ordered_json out = ordered_json::array();
  for (const auto& r : rows) {
    out.push_back({{"name", r.name}, {"micro_f", r.micro_f}, {"precision", r.precision}, {"recall", r.recall}});
  }
  return out;
}

void print_ablation(const std::vector<svm::AblationRow>& rows) {
  for (const auto& r : rows) {
    std::printf("%-12s micro-F %.4f  P %.4f  R %.4f\n", r.name.c_str(), r.micro_f, r.precision, r.recall);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-unit relatedness toolkit"};
  app.require_subcommand(1);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse a posts/links dump into knowledge units and link records");
  std::string posts, links, tag = "java", out_dir;
  int dup_code = 3, direct_code = 1;
  ingest_cmd->add_option("--posts", posts, "Posts table (XML rows or JSON lines)")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--links", links, "PostLinks table")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--tag", tag, "Tag filter (case-insensitive)");
  ingest_cmd->add_option("--duplicate-code", dup_code, "LinkTypeId of duplicate links");
  ingest_cmd->add_option("--direct-code", direct_code, "LinkTypeId of direct links");
  ingest_cmd->add_option("--out", out_dir, "Output directory")->required();

  // pairs
  auto* pairs_cmd = app.add_subcommand("pairs", "Build the network, extract the four classes, balance and split");
  std::string net_dir, ratios_text = "0.6,0.1,0.3";
  int dmin = 2, dmax = 5;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> isolated_count;
  pairs_cmd->add_option("--net", net_dir, "Directory written by ingest")->required()->check(CLI::ExistingDirectory);
  pairs_cmd->add_option("--distance-min", dmin);
  pairs_cmd->add_option("--distance-max", dmax);
  pairs_cmd->add_option("--isolated-count", isolated_count, "Isolated pairs to sample (default: number of indirect pairs)");
  pairs_cmd->add_option("--seed", seed);
  pairs_cmd->add_option("--ratios", ratios_text, "train,dev,test");
  pairs_cmd->add_option("--out", out_dir)->required();

  // clean
  auto* clean_cmd = app.add_subcommand("clean", "Clean and tokenize knowledge units");
  std::string in_path, out_path, stopword_list;
  bool keep_stopwords = false;
  int workers = 1;
  clean_cmd->add_option("--in", in_path, "kus.jsonl")->required()->check(CLI::ExistingFile);
  clean_cmd->add_option("--out", out_path, "clean.jsonl")->required();
  clean_cmd->add_flag("--keep-stopwords", keep_stopwords);
  clean_cmd->add_option("--stopword-list", stopword_list)->check(CLI::ExistingFile);
  clean_cmd->add_option("--workers", workers);

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Word vectors and relation matrices");
  embed_cmd->require_subcommand(1);
  auto* embed_train = embed_cmd->add_subcommand("train", "Train skip-gram vectors on cleaned units");
  embeddings::SkipGramOptions sg;
  std::string corpus_path;
  embed_train->add_option("--corpus", corpus_path, "clean.jsonl")->required()->check(CLI::ExistingFile);
  embed_train->add_option("--dim", sg.dim);
  embed_train->add_option("--min-count", sg.min_count);
  embed_train->add_option("--window", sg.window);
  embed_train->add_option("--negatives", sg.negatives);
  embed_train->add_option("--epochs", sg.epochs);
  embed_train->add_option("--lr", sg.learning_rate);
  embed_train->add_option("--seed", sg.seed);
  embed_train->add_option("--workers", sg.workers);
  embed_train->add_option("--out", out_path, "vecs.txt")->required();
  auto* embed_relmat = embed_cmd->add_subcommand("relmat", "Build a term relation matrix");
  std::string vectors_path, vocab_path;
  bool use_lev = false, two_input = false;
  double threshold = 0.2;
  auto* vec_opt = embed_relmat->add_option("--vectors", vectors_path)->check(CLI::ExistingFile);
  auto* lev_opt = embed_relmat->add_flag("--levenshtein", use_lev);
  vec_opt->excludes(lev_opt);
  embed_relmat->add_option("--threshold", threshold);
  embed_relmat->add_option("--vocab", vocab_path, "Term list (one per line) or clean.jsonl")->required()->check(CLI::ExistingFile);
  embed_relmat->add_flag("--two-input", two_input, "Vocabulary over the title+body part only");
  embed_relmat->add_option("--workers", workers);
  embed_relmat->add_option("--out", out_path)->required();

  // features
  auto* feat_cmd = app.add_subcommand("features", "Compute pair features");
  std::string pairs_path, clean_path, tfidf_path, rel_corpus, rel_ext, rel_lev;
  std::vector<std::string> fit_pairs;
  bool full = false;
  feat_cmd->add_option("--pairs", pairs_path, "*.pairs.jsonl or *.dqd.jsonl")->required()->check(CLI::ExistingFile);
  feat_cmd->add_option("--clean", clean_path)->required()->check(CLI::ExistingFile);
  feat_cmd->add_option("--tfidf", tfidf_path, "TF-IDF model file (written when --fit-pairs is given)")->required();
  feat_cmd->add_option("--fit-pairs", fit_pairs, "Fit TF-IDF on the units of these pair files");
  feat_cmd->add_option("--relmat-corpus", rel_corpus)->check(CLI::ExistingFile);
  feat_cmd->add_option("--relmat-ext", rel_ext)->check(CLI::ExistingFile);
  feat_cmd->add_option("--relmat-lev", rel_lev)->check(CLI::ExistingFile);
  feat_cmd->add_flag("--full", full, "All ten families instead of the selected four");
  feat_cmd->add_flag("--two-input", two_input);
  feat_cmd->add_option("--workers", workers);
  feat_cmd->add_option("--out", out_path)->required();

  // svm
  auto* svm_cmd = app.add_subcommand("svm", "Linear SVM");
  svm_cmd->require_subcommand(1);
  svm::TrainOptions svm_opts;
  std::string train_path, dev_path, model_path;
  auto* svm_train = svm_cmd->add_subcommand("train");
  svm_train->add_option("--train", train_path, "Feature file")->required()->check(CLI::ExistingFile);
  svm_train->add_option("--lambda", svm_opts.lambda);
  svm_train->add_option("--epochs", svm_opts.epochs);
  svm_train->add_option("--eta0", svm_opts.eta0);
  svm_train->add_option("--seed", svm_opts.seed);
  svm_train->add_option("--classes", svm_opts.num_classes, "Number of classes (default: from labels)");
  svm_train->add_option("--out", out_path)->required();
  auto* svm_predict = svm_cmd->add_subcommand("predict");
  std::string feat_path;
  svm_predict->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  svm_predict->add_option("--features", feat_path)->required()->check(CLI::ExistingFile);
  svm_predict->add_option("--out", out_path, "One predicted class per line")->required();
  auto* svm_ablate_f = svm_cmd->add_subcommand("ablate-features", "One model per feature family");
  auto* svm_ablate_p = svm_cmd->add_subcommand("ablate-parts", "Title, body, answers and all");
  for (auto* c : {svm_ablate_f, svm_ablate_p}) {
    c->add_option("--train", train_path)->required()->check(CLI::ExistingFile);
    c->add_option("--dev", dev_path)->required()->check(CLI::ExistingFile);
    c->add_option("--lambda", svm_opts.lambda);
    c->add_option("--epochs", svm_opts.epochs);
    c->add_option("--seed", svm_opts.seed);
    c->add_option("--out", out_path, "JSON table");
  }

  // bilstm
  auto* nn_cmd = app.add_subcommand("bilstm", "Shared-encoder BiLSTM");
  nn_cmd->require_subcommand(1);
  auto* nn_train = nn_cmd->add_subcommand("train");
  std::string data_dir;
  bilstm::NetworkConfig net_cfg;
  bilstm::TrainOptions nn_opts;
  std::vector<int> lengths = {10, 60, 180};
  int vocab_min = 2;
  bool dqd_mode = false;
  nn_train->add_option("--data", data_dir, "Directory with train/dev pair files")->required()->check(CLI::ExistingDirectory);
  nn_train->add_option("--clean", clean_path)->required()->check(CLI::ExistingFile);
  nn_train->add_option("--vectors", vectors_path, "Pretrained vectors for the embedding layer")->check(CLI::ExistingFile);
  nn_train->add_option("--seed", nn_opts.seed);
  nn_train->add_option("--epochs", nn_opts.epochs);
  nn_train->add_option("--lr", nn_opts.learning_rate);
  nn_train->add_option("--batch", nn_opts.batch_size);
  nn_train->add_option("--workers", nn_opts.workers);
  nn_train->add_option("--embed-dim", net_cfg.embed_dim);
  nn_train->add_option("--hidden", net_cfg.hidden);
  nn_train->add_option("--dense", net_cfg.dense);
  nn_train->add_option("--dropout", net_cfg.dropout);
  nn_train->add_option("--lengths", lengths, "Per-part sequence lengths")->delimiter(',');
  nn_train->add_option("--vocab-min-count", vocab_min);
  nn_train->add_flag("--dqd", dqd_mode, "Use the binary *.dqd.jsonl files");
  nn_train->add_flag("--two-input", two_input, "Title+body as one sequence of length 70");
  nn_train->add_option("--out", out_path)->required();
  auto* nn_grad = nn_cmd->add_subcommand("gradcheck", "Finite-difference check on a random toy network");
  int gc_dim = 8, gc_hidden = 8, gc_len = 6;
  double epsilon = 1e-5;
  std::size_t coords = 200;
  nn_grad->add_option("--dim", gc_dim);
  nn_grad->add_option("--hidden", gc_hidden);
  nn_grad->add_option("--length", gc_len, "Maximum input length");
  nn_grad->add_option("--epsilon", epsilon);
  nn_grad->add_option("--coordinates", coords);
  nn_grad->add_option("--seed", seed);
  auto* nn_predict = nn_cmd->add_subcommand("predict");
  nn_predict->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  nn_predict->add_option("--pairs", pairs_path)->required()->check(CLI::ExistingFile);
  nn_predict->add_option("--clean", clean_path)->required()->check(CLI::ExistingFile);
  nn_predict->add_option("--out", out_path)->required();

  // eval, dqd, export, pipeline
  auto* eval_cmd = app.add_subcommand("eval", "Micro-F, precision, recall, per-class F");
  std::string pred_path, gold_path;
  eval_cmd->add_option("--pred", pred_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gold", gold_path, "Label lines, or a pairs file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", out_path, "JSON report");

  auto* dqd_cmd = app.add_subcommand("dqd", "Binary duplicate-detection reformulation, per split");
  dqd_cmd->add_option("--in", in_path, "Directory with train/dev/test pair files")->required()->check(CLI::ExistingDirectory);
  dqd_cmd->add_option("--seed", seed);
  dqd_cmd->add_option("--out", out_dir)->required();

  auto* export_cmd = app.add_subcommand("export", "Write the 24-attribute dataset");
  bool jsonl = false;
  export_cmd->add_option("--pairs", pairs_path)->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--clean", clean_path)->required()->check(CLI::ExistingFile);
  export_cmd->add_flag("--jsonl", jsonl, "JSON lines instead of CSV");
  export_cmd->add_option("--out", out_path)->required();

  auto* pipe_cmd = app.add_subcommand("pipeline", "Run every stage from one config file");
  std::string config_path;
  pipe_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest_cmd) {
      auto out = pipeline::run_ingest(posts, links, tag, {dup_code, direct_code});
      pipeline::write_ingest(out, posts, links, tag, out_dir);
      std::printf("%zu knowledge units, %zu links, %zu skipped rows\n", out.units.size(), out.links.size(), out.log.size());
    } else if (*pairs_cmd) {
      kunet::ExtractOptions ex{dmin, dmax, isolated_count, derive_seed(seed, 1)};
      auto out = pipeline::run_pairs(io::read_units(fs::path(net_dir) / "kus.jsonl"),
                                     io::read_links(fs::path(net_dir) / "links.jsonl"), ex, parse_ratios(ratios_text),
                                     derive_seed(seed, 2));
      pipeline::write_pairs_output(out, out_dir);
      std::printf("%zu pairs; train %zu, dev %zu, test %zu\n", out.pairs.size(), out.split.train.size(),
                  out.split.dev.size(), out.split.test.size());
    } else if (*clean_cmd) {
      auto sw = keep_stopwords          ? textprep::StopWords::none()
                : !stopword_list.empty() ? textprep::StopWords::from_file(stopword_list)
                                         : textprep::StopWords::english();
      textprep::CleanStats stats;
      auto cleaned = pipeline::clean_all(io::read_units(in_path), sw, &stats, workers);
      io::write_clean(cleaned, out_path);
      std::printf("%zu units cleaned; %zu signal blocks removed; stop words %s\n", cleaned.size(),
                  stats.signal_blocks_removed, sw.hash().c_str());
    } else if (*embed_train) {
      auto units = io::read_clean(corpus_path);
      std::vector<const textprep::CleanKU*> ptrs;
      for (const auto& u : units) ptrs.push_back(&u);
      auto table = embeddings::train_skipgram(pipeline::embedding_corpus(ptrs), sg);
      embeddings::save_vectors(table, out_path);
      std::printf("%zu vectors of dimension %d\n", table.size(), table.dim());
    } else if (*embed_relmat) {
      if (vectors_path.empty() && !use_lev) throw Error("relmat needs --vectors or --levenshtein");
      auto terms = read_terms(vocab_path, layout_from_flag(two_input));
      auto m = use_lev ? embeddings::build_relation_matrix_levenshtein(terms, threshold, workers)
                       : embeddings::build_relation_matrix_embedding(embeddings::load_vectors(vectors_path), terms,
                                                                     threshold, workers);
      m.save(out_path);
      std::printf("%zu terms, %zu off-diagonal entries\n", m.vocabulary().size(), m.nonzeros());
    } else if (*feat_cmd) {
      auto units = io::index_by_id(io::read_clean(clean_path));
      features::FeatureModels models;
      models.layout = layout_from_flag(two_input);
      if (!fit_pairs.empty()) {
        std::set<KuId> ids;
        for (const auto& f : fit_pairs) {
          for (const auto& e : read_examples(f)) ids.insert({e.ku1, e.ku2});
        }
        std::vector<const textprep::CleanKU*> fit_units;
        for (KuId id : ids) {
          auto it = units.find(id);
          if (it == units.end()) throw Error("unit " + std::to_string(id) + " missing from " + clean_path);
          fit_units.push_back(&it->second);
        }
        models.tfidf = features::fit_tfidf(fit_units, models.layout);
        pipeline::save_tfidf(models.tfidf, models.layout, tfidf_path);
      } else {
        features::Layout stored{{}};
        models.tfidf = pipeline::load_tfidf(tfidf_path, &stored);
        if (stored.parts != models.layout.parts) throw Error("tf-idf model was fitted for a different layout");
      }
      if (!rel_corpus.empty()) models.corpus = embeddings::RelationMatrix::load(rel_corpus);
      if (!rel_ext.empty()) models.external = embeddings::RelationMatrix::load(rel_ext);
      if (!rel_lev.empty()) models.levenshtein = embeddings::RelationMatrix::load(rel_lev);
      auto table = pipeline::feature_table(read_examples(pairs_path), units, models, !full, workers);
      io::write_features(table, out_path);
      std::printf("%zu feature vectors of dimension %zu\n", table.rows.size(), table.names.size());
    } else if (*svm_train) {
      auto model = svm::train_linear_svm(pipeline::to_dataset(io::read_features(train_path)), svm_opts);
      write_file(out_path, model.to_json() + "\n");
      std::printf("final objective %.6f\n", model.objective_trace.empty() ? 0.0 : model.objective_trace.back());
    } else if (*svm_predict) {
      auto model = svm::SvmModel::from_json(read_file(model_path));
      auto data = pipeline::to_dataset(io::read_features(feat_path));
      if (data.names != model.feature_names) throw Error("feature columns do not match the model");
      auto names = class_names(model.num_classes());
      std::vector<std::string> lines;
      for (int p : model.predict(data)) lines.push_back(names[static_cast<std::size_t>(p)]);
      io::write_label_lines(lines, out_path);
    } else if (*svm_ablate_f || *svm_ablate_p) {
      auto train = pipeline::to_dataset(io::read_features(train_path));
      auto dev = pipeline::to_dataset(io::read_features(dev_path));
      auto rows = *svm_ablate_f ? svm::feature_ablation(train, dev, svm_opts) : svm::text_part_ablation(train, dev, svm_opts);
      print_ablation(rows);
      if (!out_path.empty()) write_file(out_path, ablation_json(rows).dump(2) + "\n");
    } else if (*nn_train) {
      auto units = io::index_by_id(io::read_clean(clean_path));
      const std::string suffix = dqd_mode ? ".dqd.jsonl" : ".pairs.jsonl";
      auto train_ex = read_examples(fs::path(data_dir) / ("train" + suffix));
      auto dev_ex = read_examples(fs::path(data_dir) / ("dev" + suffix));
      bilstm::SequenceLengths seq{two_input ? std::vector<int>{70} : lengths};
      std::set<KuId> train_ids;
      for (const auto& e : train_ex) train_ids.insert({e.ku1, e.ku2});
      std::vector<features::Tokens> owned;
      std::vector<const std::vector<std::string>*> docs;
      features::Tokens scratch;
      for (KuId id : train_ids) {
        const auto& ku = units.at(id);
        if (two_input) owned.push_back(features::part_tokens(ku, features::Part::text, scratch));
        else docs.insert(docs.end(), {&ku.title_tokens, &ku.body_tokens, &ku.answers_tokens});
      }
      for (const auto& d : owned) docs.push_back(&d);
      auto vocab = bilstm::Vocabulary::build(docs, vocab_min);
      net_cfg.vocab_size = static_cast<int>(vocab.size());
      net_cfg.num_classes = dqd_mode ? 2 : kNumRelations;
      net_cfg.parts = static_cast<int>(seq.per_part.size());
      std::optional<embeddings::EmbeddingTable> vectors;
      if (!vectors_path.empty()) vectors = embeddings::load_vectors(vectors_path);
      auto init = bilstm::NetworkParams::init(net_cfg, nn_opts.seed, &vocab.terms(), vectors ? &*vectors : nullptr);
      auto result = bilstm::train(std::move(init), pipeline::encode_examples(train_ex, units, vocab, seq),
                                  pipeline::encode_examples(dev_ex, units, vocab, seq), nn_opts);
      ordered_json manifest;
      manifest["format"] = "kurel-bilstm";
      manifest["seed"] = nn_opts.seed;
      manifest["learning_rate"] = nn_opts.learning_rate;
      manifest["epochs"] = nn_opts.epochs;
      manifest["batch_size"] = nn_opts.batch_size;
      manifest["best_epoch"] = result.log.best_epoch;
      manifest["dev_accuracy"] = result.log.dev_accuracy;
      manifest["epoch_losses"] = result.log.epoch_losses;
      manifest["diverged"] = result.log.diverged;
      manifest["task"] = dqd_mode ? "dqd" : "four_class";
      bilstm::save_model({result.params, vocab, seq, manifest.dump()}, out_path);
      for (std::size_t e = 0; e < result.log.dev_accuracy.size(); ++e) {
        std::printf("epoch %zu  loss %.5f  dev accuracy %.4f\n", e + 1, result.log.epoch_losses[e], result.log.dev_accuracy[e]);
      }
      std::printf("best epoch %d\n", result.log.best_epoch + 1);
    } else if (*nn_grad) {
      bilstm::NetworkConfig cfg{50, gc_dim, gc_hidden, 10, 4, 3, 0.0};
      auto params = bilstm::NetworkParams::init(cfg, seed);
      Rng rng(derive_seed(seed, 99));
      bilstm::PairExample ex;
      ex.label = static_cast<int>(uniform_index(rng, 4));
      for (int s = 0; s < 6; ++s) {
        std::vector<int> ids;
        auto n = 1 + uniform_index(rng, static_cast<std::uint64_t>(gc_len));
        for (std::uint64_t t = 0; t < n; ++t) ids.push_back(1 + static_cast<int>(uniform_index(rng, 49)));
        ex.inputs.push_back(bilstm::pad_sequence(ids, gc_len));
      }
      auto report = bilstm::gradient_check(params, ex, epsilon, coords, seed);
      for (const auto& [name, err] : report.per_tensor_max) {
        std::printf("%-10s %3zu coords  max rel err %.3e\n", name.c_str(), report.per_tensor_count.at(name), err);
      }
      std::printf("max relative error %.3e over %zu coordinates\n", report.max_relative_error, report.coordinates);
      return report.max_relative_error < 1e-4 ? 0 : 2;
    } else if (*nn_predict) {
      auto model = bilstm::load_model(model_path);
      auto units = io::index_by_id(io::read_clean(clean_path));
      auto examples = pipeline::encode_examples(read_examples(pairs_path), units, model.vocabulary, model.lengths);
      auto names = class_names(model.params.config.num_classes);
      std::vector<std::string> lines;
      for (const auto& ex : examples) lines.push_back(names[static_cast<std::size_t>(bilstm::predict(model.params, ex))]);
      io::write_label_lines(lines, out_path);
    } else if (*eval_cmd) {
      std::vector<std::string> names;
      std::vector<int> gold;
      if (gold_path.ends_with(".jsonl")) {
        names = gold_path.ends_with(".dqd.jsonl") ? kBinaryClasses : relation_classes();
        for (const auto& e : read_examples(gold_path)) gold.push_back(e.label);
      }
      auto pred = decode_labels(io::read_label_lines(pred_path), names);
      if (gold.empty()) gold = decode_labels(io::read_label_lines(gold_path), names);
      auto m = eval::evaluate(pred, gold, static_cast<int>(names.size()));
      auto j = metrics_json(m, names);
      std::cout << j.dump(2) << "\n";
      if (!out_path.empty()) write_file(out_path, j.dump(2) + "\n");
    } else if (*dqd_cmd) {
      auto split = io::read_split(in_path);
      auto dqd = eval::reformulate_dqd(split, seed);
      fs::create_directories(out_dir);
      io::write_dqd(dqd.train, fs::path(out_dir) / "train.dqd.jsonl");
      io::write_dqd(dqd.dev, fs::path(out_dir) / "dev.dqd.jsonl");
      io::write_dqd(dqd.test, fs::path(out_dir) / "test.dqd.jsonl");
      std::printf("train %zu, dev %zu, test %zu\n", dqd.train.size(), dqd.dev.size(), dqd.test.size());
    } else if (*export_cmd) {
      auto rows = eval::export_dataset(io::read_pairs(pairs_path), io::index_by_id(io::read_clean(clean_path)));
      write_file(out_path, jsonl ? eval::to_jsonl(rows) : eval::to_csv(rows));
      std::printf("%zu rows\n", rows.size());
    } else if (*pipe_cmd) {
      auto cfg = pipeline::Config::from_json(read_file(config_path), fs::path(config_path).parent_path());
      std::cout << pipeline::run(cfg) << "\n";
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
