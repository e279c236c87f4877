#include "kurel/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <set>
#include <thread>

#include "json.hpp"

namespace kurel::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Run fn(i) for i in [0, n) over contiguous chunks, one per worker.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const std::size_t w = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(n, 1));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> jobs;
  for (std::size_t k = 0; k < w; ++k) {
    jobs.push_back(std::async(std::launch::async, [&, k] {
      for (std::size_t i = n * k / w; i < n * (k + 1) / w; ++i) fn(i);
    }));
  }
  for (auto& j : jobs) j.get();
}

ordered_json counts_json(const std::array<std::size_t, kNumRelations>& counts) {
  ordered_json j;
  for (Relation r : kAllRelations) j[std::string(to_string(r))] = counts[static_cast<std::size_t>(r)];
  return j;
}

ordered_json metrics_json(const eval::MetricsReport& m, const std::vector<std::string>& class_names) {
  ordered_json j;
  j["micro_f"] = m.micro_f;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["accuracy"] = m.accuracy;
  ordered_json per_class;
  for (std::size_t c = 0; c < m.per_class_f.size(); ++c) {
    per_class[c < class_names.size() ? class_names[c] : std::to_string(c)] = m.per_class_f[c];
  }
  j["per_class_f"] = std::move(per_class);
  j["confusion"] = m.confusion;
  return j;
}

std::vector<const textprep::CleanKU*> units_of(const std::vector<KuId>& ids, const std::map<KuId, textprep::CleanKU>& units) {
  std::vector<const textprep::CleanKU*> out;
  for (KuId id : ids) {
    auto it = units.find(id);
    if (it != units.end()) out.push_back(&it->second);
  }
  return out;
}

features::Layout layout_named(const std::string& name) {
  if (name == "three_part") return features::Layout::three_part();
  if (name == "two_input") return features::Layout::two_input();
  throw Error("unknown layout '" + name + "' (expected three_part or two_input)");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error("config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      throw Error("config: unknown key '" + it.key() + "' in " + where);
    }
  }
}

}  // namespace

IngestOutput run_ingest(const fs::path& posts, const fs::path& links, const std::string& tag, ingest::LinkKindCodes codes) {
  if (tag.empty()) throw Error("ingest: tag filter must be non-empty");
  IngestOutput out;
  out.units = ingest::ingest_posts_file(posts, tag, out.log, &out.question_rows);
  std::set<KuId> known;
  for (const auto& ku : out.units) known.insert(ku.id);
  std::ifstream in(links, std::ios::binary);
  if (!in) throw Error("cannot open " + links.string());
  ingest::for_each_row(links, [&](const ingest::AttributeMap&) { ++out.link_rows; });
  out.links = ingest::parse_links(in, known, out.log, codes);
  return out;
}

void write_ingest(const IngestOutput& out, const fs::path& posts, const fs::path& links, const std::string& tag,
                  const fs::path& dir) {
  fs::create_directories(dir);
  io::write_units(out.units, dir / "kus.jsonl");
  io::write_links(out.links, dir / "links.jsonl");
  out.log.write(dir / "ingest.skipped.log");
  std::size_t answers = 0, with_answers = 0;
  for (const auto& ku : out.units) {
    answers += ku.answers.size();
    with_answers += ku.answers.empty() ? 0 : 1;
  }
  std::size_t dup = 0;
  for (const auto& l : out.links) dup += l.kind == ingest::LinkKind::duplicate ? 1 : 0;
  ordered_json m;
  m["tag"] = tag;
  m["posts"] = {{"path", posts.string()}, {"sha256", sha256_file(posts)}};
  m["links"] = {{"path", links.string()}, {"sha256", sha256_file(links)}};
  m["question_rows_matching_tag"] = out.question_rows;
  m["knowledge_units"] = out.units.size();
  m["answers"] = answers;
  m["units_with_answers"] = with_answers;
  m["link_rows"] = out.link_rows;
  m["link_records"] = {{"duplicate", dup}, {"direct", out.links.size() - dup}};
  m["skipped"] = out.log.size();
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

PairsOutput run_pairs(const std::vector<ingest::KnowledgeUnit>& units, const std::vector<ingest::LinkRecord>& links,
                      const kunet::ExtractOptions& extract, kunet::SplitRatios ratios, std::uint64_t seed) {
  std::set<KuId> nodes;
  for (const auto& ku : units) nodes.insert(ku.id);
  PairsOutput out;
  auto net = kunet::build_network(links, nodes);
  out.overlaps_resolved = static_cast<std::size_t>(
      std::count_if(net.edges.begin(), net.edges.end(), [](const auto& e) { return e.second.conflict; }));
  out.network = kunet::close_duplicates(kunet::resolve_overlaps(std::move(net)));
  out.pairs = kunet::extract_pairs(out.network, extract);
  out.split = kunet::balance_and_split(out.pairs, ratios, seed);
  return out;
}

void write_pairs_output(const PairsOutput& out, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_split(out.split, dir);
  io::write_pairs(out.pairs, dir / "all.pairs.jsonl");
  ordered_json m;
  m["nodes"] = out.network.nodes.size();
  m["edges"] = {{"duplicate", out.network.count(ingest::LinkKind::duplicate)},
                {"direct", out.network.count(ingest::LinkKind::direct)}};
  m["overlaps_resolved_to_duplicate"] = out.overlaps_resolved;
  m["pairs_before_split"] = counts_json(kunet::class_counts(out.pairs));
  m["seed"] = out.split.seed;
  m["ratios"] = {out.split.ratios.train, out.split.ratios.dev, out.split.ratios.test};
  m["cross_partition_dropped"] = out.split.cross_partition_dropped;
  for (auto s : {kunet::SplitName::train, kunet::SplitName::dev, kunet::SplitName::test}) {
    const auto name = std::string(to_string(s));
    m["splits"][name]["partition_units"] = out.split.partition[static_cast<std::size_t>(s)].size();
    m["splits"][name]["before_balancing"] = counts_json(out.split.counts_before[static_cast<std::size_t>(s)]);
    m["splits"][name]["balanced"] = counts_json(kunet::class_counts(out.split.get(s)));
  }
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::vector<textprep::CleanKU> clean_all(const std::vector<ingest::KnowledgeUnit>& units,
                                         const textprep::StopWords& stop_words, textprep::CleanStats* stats, int workers) {
  std::vector<textprep::CleanKU> out(units.size());
  std::vector<textprep::CleanStats> per_unit(units.size());
  parallel_for(units.size(), workers,
               [&](std::size_t i) { out[i] = textprep::clean_knowledge_unit(units[i], stop_words, &per_unit[i]); });
  if (stats) {
    for (const auto& s : per_unit) {
      stats->signal_blocks_removed += s.signal_blocks_removed;
      stats->unbalanced_code_blocks += s.unbalanced_code_blocks;
    }
  }
  return out;
}

std::vector<std::vector<std::string>> embedding_corpus(const std::vector<const textprep::CleanKU*>& units) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto* ku : units) {
    for (const auto* part : {&ku->title_tokens, &ku->body_tokens, &ku->answers_tokens}) {
      if (!part->empty()) corpus.push_back(*part);
    }
  }
  return corpus;
}

std::vector<std::string> term_vocabulary(const std::vector<const textprep::CleanKU*>& units,
                                         const features::Layout& layout) {
  std::set<std::string> terms;
  features::Tokens scratch;
  for (const auto* ku : units) {
    for (auto p : layout.parts) {
      const auto& toks = features::part_tokens(*ku, p, scratch);
      terms.insert(toks.begin(), toks.end());
    }
  }
  return {terms.begin(), terms.end()};
}

void save_tfidf(const std::vector<features::TfidfModel>& models, const features::Layout& layout, const fs::path& path) {
  if (models.size() != layout.parts.size()) throw Error("save_tfidf: one model per part required");
  ordered_json j;
  j["format"] = "kurel-tfidf";
  j["version"] = 1;
  j["idf"] = "ln((1+D)/(1+df))+1";
  ordered_json parts = ordered_json::array();
  for (std::size_t k = 0; k < models.size(); ++k) {
    parts.push_back({{"part", std::string(features::to_string(layout.parts[k]))},
                     {"model", ordered_json::parse(models[k].to_json())}});
  }
  j["parts"] = std::move(parts);
  write_file(path, j.dump() + "\n");
}

std::vector<features::TfidfModel> load_tfidf(const fs::path& path, features::Layout* layout) {
  auto j = json::parse(read_file(path));
  if (j.value("format", "") != "kurel-tfidf") throw Error(path.string() + ": not a tf-idf model file");
  std::vector<features::TfidfModel> models;
  features::Layout l{{}};
  for (const auto& p : j.at("parts")) {
    const auto name = p.at("part").get<std::string>();
    features::Part part = name == "title" ? features::Part::title
                          : name == "body" ? features::Part::body
                          : name == "answers" ? features::Part::answers
                          : name == "text" ? features::Part::text
                                           : throw Error("tf-idf file: unknown part '" + name + "'");
    l.parts.push_back(part);
    models.push_back(features::TfidfModel::from_json(p.at("model").dump()));
  }
  if (layout) *layout = l;
  return models;
}

std::vector<Example> to_examples(const std::vector<kunet::LabeledPair>& pairs) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.ku1, p.ku2, static_cast<int>(p.label)});
  return out;
}

std::vector<Example> to_examples(const std::vector<eval::DqdPair>& pairs) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.ku1, p.ku2, p.duplicate ? 0 : 1});
  return out;
}

io::FeatureTable feature_table(const std::vector<Example>& examples, const std::map<KuId, textprep::CleanKU>& units,
                               const features::FeatureModels& models, bool selected, int workers) {
  io::FeatureTable t;
  t.names = selected ? features::selected_feature_names(models.layout) : features::feature_names(models.layout);
  t.rows.resize(examples.size());
  t.labels.reserve(examples.size());
  for (const auto& e : examples) {
    if (!units.contains(e.ku1) || !units.contains(e.ku2)) {
      throw Error("pair (" + std::to_string(e.ku1) + ", " + std::to_string(e.ku2) + ") references a unit with no cleaned text");
    }
    t.labels.push_back(e.label);
  }
  parallel_for(examples.size(), workers, [&](std::size_t i) {
    auto fv = features::pair_features(units.at(examples[i].ku1), units.at(examples[i].ku2), models);
    t.rows[i] = selected ? features::select_features(fv) : std::move(fv);
  });
  return t;
}

svm::Dataset to_dataset(const io::FeatureTable& table) {
  svm::Dataset d;
  d.names = table.names;
  d.labels = table.labels;
  d.rows.reserve(table.rows.size());
  for (const auto& r : table.rows) d.rows.push_back(r.values);
  return d;
}

std::vector<bilstm::PairExample> encode_examples(const std::vector<Example>& examples,
                                                 const std::map<KuId, textprep::CleanKU>& units,
                                                 const bilstm::Vocabulary& vocab, const bilstm::SequenceLengths& lengths) {
  std::vector<bilstm::PairExample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    auto a = units.find(e.ku1);
    auto b = units.find(e.ku2);
    if (a == units.end() || b == units.end()) throw Error("pair references a unit with no cleaned text");
    out.push_back(bilstm::encode_example(a->second, b->second, e.label, vocab, lengths));
  }
  return out;
}

Config Config::from_json(std::string_view text, const fs::path& base_dir) {
  auto j = json::parse(text);
  check_keys(j, {"version", "seed", "input", "out_dir", "pairs", "clean", "embeddings", "task", "layout", "svm", "bilstm",
                 "workers"},
             "config");
  Config c;
  c.version = j.at("version").get<int>();
  if (c.version != 1) throw Error("config: unsupported version " + std::to_string(c.version));
  c.seed = j.at("seed").get<std::uint64_t>();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base_dir.empty() ? fs::path(p) : base_dir / p; };

  const auto& in = j.at("input");
  check_keys(in, {"posts", "links", "tag", "link_codes"}, "input");
  c.posts = resolve(in.at("posts").get<std::string>());
  c.links = resolve(in.at("links").get<std::string>());
  c.tag = in.value("tag", c.tag);
  if (in.contains("link_codes")) {
    check_keys(in["link_codes"], {"duplicate", "direct"}, "input.link_codes");
    c.link_codes.duplicate = in["link_codes"].value("duplicate", c.link_codes.duplicate);
    c.link_codes.direct = in["link_codes"].value("direct", c.link_codes.direct);
  }
  c.out_dir = resolve(j.at("out_dir").get<std::string>());
  c.workers = j.value("workers", c.workers);
  c.task = j.value("task", c.task);
  if (c.task != "four_class" && c.task != "dqd") throw Error("config: task must be four_class or dqd");
  c.layout = j.value("layout", c.layout);
  layout_named(c.layout);

  if (j.contains("pairs")) {
    const auto& p = j["pairs"];
    check_keys(p, {"distance_min", "distance_max", "isolated_count", "ratios"}, "pairs");
    c.extract.distance_min = p.value("distance_min", c.extract.distance_min);
    c.extract.distance_max = p.value("distance_max", c.extract.distance_max);
    if (p.contains("isolated_count") && !p["isolated_count"].is_null()) c.extract.isolated_count = p["isolated_count"].get<std::uint64_t>();
    if (p.contains("ratios")) {
      auto r = p["ratios"].get<std::vector<double>>();
      if (r.size() != 3) throw Error("config: pairs.ratios needs three values");
      c.ratios = {r[0], r[1], r[2]};
    }
  }
  if (j.contains("clean")) {
    const auto& s = j["clean"];
    check_keys(s, {"keep_stopwords", "stopword_list"}, "clean");
    c.keep_stopwords = s.value("keep_stopwords", false);
    if (s.contains("stopword_list") && !s["stopword_list"].is_null()) c.stopword_list = resolve(s["stopword_list"].get<std::string>());
  }
  if (j.contains("embeddings")) {
    const auto& e = j["embeddings"];
    check_keys(e, {"dim", "min_count", "window", "negatives", "epochs", "learning_rate", "workers", "external_vectors",
                   "corpus_threshold", "external_threshold", "levenshtein_threshold"},
               "embeddings");
    c.skipgram.dim = e.value("dim", c.skipgram.dim);
    c.skipgram.min_count = e.value("min_count", c.skipgram.min_count);
    c.skipgram.window = e.value("window", c.skipgram.window);
    c.skipgram.negatives = e.value("negatives", c.skipgram.negatives);
    c.skipgram.epochs = e.value("epochs", c.skipgram.epochs);
    c.skipgram.learning_rate = e.value("learning_rate", c.skipgram.learning_rate);
    c.skipgram.workers = e.value("workers", c.skipgram.workers);
    if (e.contains("external_vectors") && !e["external_vectors"].is_null()) c.external_vectors = resolve(e["external_vectors"].get<std::string>());
    c.corpus_threshold = e.value("corpus_threshold", c.corpus_threshold);
    c.external_threshold = e.value("external_threshold", c.external_threshold);
    c.levenshtein_threshold = e.value("levenshtein_threshold", c.levenshtein_threshold);
  }
  if (j.contains("svm")) {
    const auto& s = j["svm"];
    check_keys(s, {"selected", "lambda", "epochs", "eta0"}, "svm");
    c.svm_selected = s.value("selected", c.svm_selected);
    c.svm.lambda = s.value("lambda", c.svm.lambda);
    c.svm.epochs = s.value("epochs", c.svm.epochs);
    c.svm.eta0 = s.value("eta0", c.svm.eta0);
  }
  if (j.contains("bilstm")) {
    const auto& b = j["bilstm"];
    check_keys(b, {"enabled", "embed_dim", "hidden", "dense", "dropout", "epochs", "learning_rate", "batch_size", "lengths",
                   "vocab_min_count", "workers"},
               "bilstm");
    c.run_bilstm = b.value("enabled", c.run_bilstm);
    c.network.embed_dim = b.value("embed_dim", c.network.embed_dim);
    c.network.hidden = b.value("hidden", c.network.hidden);
    c.network.dense = b.value("dense", c.network.dense);
    c.network.dropout = b.value("dropout", c.network.dropout);
    c.bilstm.epochs = b.value("epochs", c.bilstm.epochs);
    c.bilstm.learning_rate = b.value("learning_rate", c.bilstm.learning_rate);
    c.bilstm.batch_size = b.value("batch_size", c.bilstm.batch_size);
    c.bilstm.workers = b.value("workers", c.bilstm.workers);
    if (b.contains("lengths")) c.lengths.per_part = b["lengths"].get<std::vector<int>>();
    c.vocab_min_count = b.value("vocab_min_count", c.vocab_min_count);
  }
  if (c.layout == "two_input" && c.lengths.per_part.size() != 1) c.lengths.per_part = {70};
  if (c.layout == "three_part" && c.lengths.per_part.size() != 3) throw Error("config: bilstm.lengths needs three values");
  return c;
}

std::string Config::to_json() const {
  ordered_json j;
  j["version"] = version;
  j["seed"] = seed;
  j["input"] = {{"posts", posts.string()},
                {"links", links.string()},
                {"tag", tag},
                {"link_codes", {{"duplicate", link_codes.duplicate}, {"direct", link_codes.direct}}}};
  j["out_dir"] = out_dir.string();
  j["pairs"] = {{"distance_min", extract.distance_min},
                {"distance_max", extract.distance_max},
                {"isolated_count", extract.isolated_count ? ordered_json(*extract.isolated_count) : ordered_json(nullptr)},
                {"ratios", {ratios.train, ratios.dev, ratios.test}}};
  j["clean"] = {{"keep_stopwords", keep_stopwords},
                {"stopword_list", stopword_list ? ordered_json(stopword_list->string()) : ordered_json(nullptr)}};
  j["embeddings"] = {{"dim", skipgram.dim},
                     {"min_count", skipgram.min_count},
                     {"window", skipgram.window},
                     {"negatives", skipgram.negatives},
                     {"epochs", skipgram.epochs},
                     {"learning_rate", skipgram.learning_rate},
                     {"workers", skipgram.workers},
                     {"external_vectors", external_vectors ? ordered_json(external_vectors->string()) : ordered_json(nullptr)},
                     {"corpus_threshold", corpus_threshold},
                     {"external_threshold", external_threshold},
                     {"levenshtein_threshold", levenshtein_threshold}};
  j["task"] = task;
  j["layout"] = layout;
  j["svm"] = {{"selected", svm_selected}, {"lambda", svm.lambda}, {"epochs", svm.epochs}, {"eta0", svm.eta0}};
  j["bilstm"] = {{"enabled", run_bilstm},
                 {"embed_dim", network.embed_dim},
                 {"hidden", network.hidden},
                 {"dense", network.dense},
                 {"dropout", network.dropout},
                 {"epochs", bilstm.epochs},
                 {"learning_rate", bilstm.learning_rate},
                 {"batch_size", bilstm.batch_size},
                 {"lengths", lengths.per_part},
                 {"vocab_min_count", vocab_min_count},
                 {"workers", bilstm.workers}};
  j["workers"] = workers;
  return j.dump(2);
}

std::string run(const Config& c) {
  const fs::path out = c.out_dir;
  fs::create_directories(out);
  write_file(out / "config.resolved.json", c.to_json() + "\n");
  ordered_json report;
  report["seed"] = c.seed;
  report["task"] = c.task;
  report["layout"] = c.layout;

  // ingest
  auto ing = run_ingest(c.posts, c.links, c.tag, c.link_codes);
  write_ingest(ing, c.posts, c.links, c.tag, out / "ingest");
  report["knowledge_units"] = ing.units.size();
  report["link_records"] = ing.links.size();

  // pairs
  kunet::ExtractOptions extract = c.extract;
  extract.seed = derive_seed(c.seed, 1);
  auto pairs = run_pairs(ing.units, ing.links, extract, c.ratios, derive_seed(c.seed, 2));
  write_pairs_output(pairs, out / "pairs");
  report["pairs"] = counts_json(kunet::class_counts(pairs.pairs));

  // clean
  textprep::StopWords stop_words = c.keep_stopwords ? textprep::StopWords::none()
                                   : c.stopword_list ? textprep::StopWords::from_file(c.stopword_list->string())
                                                     : textprep::StopWords::english();
  textprep::CleanStats stats;
  auto cleaned = clean_all(ing.units, stop_words, &stats, c.workers);
  io::write_clean(cleaned, out / "clean.jsonl");
  report["stopwords_sha256"] = stop_words.hash();
  report["signal_blocks_removed"] = stats.signal_blocks_removed;
  const auto units = io::index_by_id(std::move(cleaned));

  // task examples
  std::array<std::vector<Example>, 3> examples;
  std::vector<std::string> class_names;
  if (c.task == "dqd") {
    auto dqd = eval::reformulate_dqd(pairs.split, derive_seed(c.seed, 3));
    fs::create_directories(out / "dqd");
    io::write_dqd(dqd.train, out / "dqd" / "train.dqd.jsonl");
    io::write_dqd(dqd.dev, out / "dqd" / "dev.dqd.jsonl");
    io::write_dqd(dqd.test, out / "dqd" / "test.dqd.jsonl");
    examples = {to_examples(dqd.train), to_examples(dqd.dev), to_examples(dqd.test)};
    class_names = {"duplicate", "non_duplicate"};
  } else {
    examples = {to_examples(pairs.split.train), to_examples(pairs.split.dev), to_examples(pairs.split.test)};
    for (Relation r : kAllRelations) class_names.emplace_back(to_string(r));
  }
  const int num_classes = static_cast<int>(class_names.size());

  // embeddings and relation matrices, from the train and dev partitions only
  std::vector<KuId> fit_ids = pairs.split.partition[0];
  fit_ids.insert(fit_ids.end(), pairs.split.partition[1].begin(), pairs.split.partition[1].end());
  std::sort(fit_ids.begin(), fit_ids.end());
  const auto fit_units = units_of(fit_ids, units);
  const auto layout = layout_named(c.layout);

  auto sg = c.skipgram;
  sg.seed = derive_seed(c.seed, 4);
  auto vectors = embeddings::train_skipgram(embedding_corpus(fit_units), sg);
  embeddings::save_vectors(vectors, out / "vecs.txt");
  const auto vocab = term_vocabulary(fit_units, layout);
  features::FeatureModels models;
  models.layout = layout;
  models.corpus = embeddings::build_relation_matrix_embedding(vectors, vocab, c.corpus_threshold, c.workers);
  models.corpus->save(out / "relmat_corpus.bin");
  if (c.external_vectors) {
    models.external = embeddings::build_relation_matrix_embedding(embeddings::load_vectors(*c.external_vectors), vocab,
                                                                  c.external_threshold, c.workers);
    models.external->save(out / "relmat_ext.bin");
  } else {
    warn("pipeline: no external vectors configured; the external soft-cosine uses the identity relation");
  }
  models.levenshtein = embeddings::build_relation_matrix_levenshtein(vocab, c.levenshtein_threshold, c.workers);
  models.levenshtein->save(out / "relmat_lev.bin");
  models.tfidf = features::fit_tfidf(fit_units, layout);
  save_tfidf(models.tfidf, layout, out / "tfidf.json");
  report["vocabulary"] = vocab.size();
  report["relation_nonzeros"] = {{"corpus", models.corpus->nonzeros()},
                                 {"external", models.external ? models.external->nonzeros() : 0},
                                 {"levenshtein", models.levenshtein->nonzeros()}};

  // SVM
  fs::create_directories(out / "features");
  std::array<svm::Dataset, 3> data;
  const char* split_names[3] = {"train", "dev", "test"};
  for (std::size_t s = 0; s < 3; ++s) {
    auto table = feature_table(examples[s], units, models, c.svm_selected, c.workers);
    io::write_features(table, out / "features" / (std::string(split_names[s]) + ".feat.jsonl"));
    data[s] = to_dataset(table);
  }
  auto svm_opts = c.svm;
  svm_opts.seed = derive_seed(c.seed, 5);
  svm_opts.num_classes = num_classes;
  auto svm_model = svm::train_linear_svm(data[0], svm_opts);
  write_file(out / "svm.json", svm_model.to_json() + "\n");
  report["svm"]["dev"] = metrics_json(eval::evaluate(svm_model.predict(data[1]), data[1].labels, num_classes), class_names);
  report["svm"]["test"] = metrics_json(eval::evaluate(svm_model.predict(data[2]), data[2].labels, num_classes), class_names);

  // BiLSTM
  if (c.run_bilstm) {
    std::vector<const std::vector<std::string>*> docs;
    features::Tokens scratch;
    std::vector<features::Tokens> owned;
    for (const auto* ku : units_of(pairs.split.partition[0], units)) {
      if (layout.parts.front() == features::Part::text) {
        owned.push_back(features::part_tokens(*ku, features::Part::text, scratch));
      } else {
        docs.insert(docs.end(), {&ku->title_tokens, &ku->body_tokens, &ku->answers_tokens});
      }
    }
    for (const auto& d : owned) docs.push_back(&d);
    auto nn_vocab = bilstm::Vocabulary::build(docs, c.vocab_min_count);
    auto cfg = c.network;
    cfg.vocab_size = static_cast<int>(nn_vocab.size());
    cfg.num_classes = num_classes;
    cfg.parts = static_cast<int>(c.lengths.per_part.size());
    const bool use_vectors = vectors.dim() == cfg.embed_dim;
    if (!use_vectors) warn("pipeline: corpus vector size differs from the BiLSTM embedding size; using random initialisation");
    auto init = bilstm::NetworkParams::init(cfg, derive_seed(c.seed, 6), &nn_vocab.terms(), use_vectors ? &vectors : nullptr);
    std::array<std::vector<bilstm::PairExample>, 3> nn;
    for (std::size_t s = 0; s < 3; ++s) nn[s] = encode_examples(examples[s], units, nn_vocab, c.lengths);
    auto opts = c.bilstm;
    opts.seed = derive_seed(c.seed, 7);
    auto result = bilstm::train(std::move(init), nn[0], nn[1], opts);
    bilstm::save_model({result.params, nn_vocab, c.lengths, c.to_json()}, out / "bilstm.bin");
    auto predict_all = [&](const std::vector<bilstm::PairExample>& xs, std::vector<int>& gold) {
      std::vector<int> pred;
      for (const auto& x : xs) {
        pred.push_back(bilstm::predict(result.params, x));
        gold.push_back(x.label);
      }
      return pred;
    };
    std::vector<int> gold_dev, gold_test;
    auto pred_dev = predict_all(nn[1], gold_dev);
    auto pred_test = predict_all(nn[2], gold_test);
    report["bilstm"]["best_epoch"] = result.log.best_epoch;
    report["bilstm"]["diverged"] = result.log.diverged;
    report["bilstm"]["epoch_losses"] = result.log.epoch_losses;
    report["bilstm"]["dev_accuracy"] = result.log.dev_accuracy;
    report["bilstm"]["dev"] = metrics_json(eval::evaluate(pred_dev, gold_dev, num_classes), class_names);
    report["bilstm"]["test"] = metrics_json(eval::evaluate(pred_test, gold_test, num_classes), class_names);
  }

  auto text = report.dump(2);
  write_file(out / "report.json", text + "\n");
  return text;
}

}  // namespace kurel::pipeline
