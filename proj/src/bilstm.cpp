#include "kurel/bilstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <thread>

namespace kurel::bilstm {

namespace {

struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index size;
};

void lstm_tensors(LstmParams& p, const std::string& prefix, std::vector<TensorRef>& out) {
  auto add = [&](const char* name, auto& t) { out.push_back({prefix + name, t.data(), t.size()}); };
  add("w_ix", p.w_ix);
  add("w_fx", p.w_fx);
  add("w_ox", p.w_ox);
  add("w_cx", p.w_cx);
  add("w_ic", p.w_ic);
  add("w_fc", p.w_fc);
  add("w_oc", p.w_oc);
  add("b_i", p.b_i);
  add("b_f", p.b_f);
  add("b_o", p.b_o);
  add("b_c", p.b_c);
}

// Every tensor except the embedding, in a fixed order shared by params and gradients.
template <class T>
std::vector<TensorRef> dense_tensors(T& p) {
  std::vector<TensorRef> out;
  lstm_tensors(p.fwd, "fwd.", out);
  lstm_tensors(p.bwd, "bwd.", out);
  out.push_back({"dense_w", p.dense_w.data(), p.dense_w.size()});
  out.push_back({"dense_b", p.dense_b.data(), p.dense_b.size()});
  out.push_back({"out_w", p.out_w.data(), p.out_w.size()});
  out.push_back({"out_b", p.out_b.data(), p.out_b.size()});
  return out;
}

void fill_uniform(double* data, Eigen::Index n, double limit, Rng& rng) {
  for (Eigen::Index i = 0; i < n; ++i) data[i] = (2.0 * uniform_unit(rng) - 1.0) * limit;
}

void glorot(MatrixXd& w, Rng& rng) {
  fill_uniform(w.data(), w.size(), std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols())), rng);
}

struct SequenceCache {
  std::vector<int> ids;  // real (non-pad) tokens in order
  std::vector<StepCache> fwd;
  std::vector<StepCache> bwd;  // bwd[k] processed ids[n - 1 - k]
  VectorXd encoding;
};

struct NetCache {
  std::vector<SequenceCache> seqs;
  VectorXd z, a1, keep, r_drop, logits, probs;
};

void validate(const NetworkParams& params, const PairExample& ex) {
  const auto& cfg = params.config;
  if (static_cast<int>(ex.inputs.size()) != 2 * cfg.parts) {
    throw Error("example has " + std::to_string(ex.inputs.size()) + " inputs, network expects " +
                std::to_string(2 * cfg.parts));
  }
  if (ex.label < 0 || ex.label >= cfg.num_classes) throw Error("example label out of range");
  for (const auto& seq : ex.inputs) {
    for (int id : seq) {
      if (id < 0 || id >= params.embedding.rows()) throw Error("token id " + std::to_string(id) + " outside vocabulary");
    }
  }
}

ForwardResult run_forward(const NetworkParams& params, const PairExample& ex, bool train_mode, Rng* rng,
                          NetCache* cache) {
  validate(params, ex);
  const auto& cfg = params.config;
  const int h = cfg.hidden;
  const int parts = cfg.parts;
  ForwardResult result;
  std::vector<SequenceCache> local(ex.inputs.size());
  for (std::size_t s = 0; s < ex.inputs.size(); ++s) {
    auto& sc = local[s];
    for (int id : ex.inputs[s]) {
      if (id != kPadId) sc.ids.push_back(id);
    }
    const std::size_t n = sc.ids.size();
    LstmState sf{VectorXd::Zero(h), VectorXd::Zero(h)};
    LstmState sb{VectorXd::Zero(h), VectorXd::Zero(h)};
    if (cache) {
      sc.fwd.resize(n);
      sc.bwd.resize(n);
    }
    for (std::size_t t = 0; t < n; ++t) {
      sf = lstm_step(params.fwd, params.embedding.row(sc.ids[t]).transpose(), sf, cache ? &sc.fwd[t] : nullptr);
    }
    for (std::size_t k = 0; k < n; ++k) {
      sb = lstm_step(params.bwd, params.embedding.row(sc.ids[n - 1 - k]).transpose(), sb, cache ? &sc.bwd[k] : nullptr);
    }
    sc.encoding.resize(2 * h);
    sc.encoding << sf.h, sb.h;
    result.encodings.push_back(sc.encoding);
  }

  VectorXd z(cfg.interaction_dim());
  result.interactions.resize(parts * parts);
  for (int p = 0; p < parts; ++p) {
    for (int q = 0; q < parts; ++q) {
      double v = result.encodings[static_cast<std::size_t>(p)].dot(result.encodings[static_cast<std::size_t>(parts + q)]);
      result.interactions[p * parts + q] = v;
      z[p * parts + q] = v;
    }
  }
  for (int s = 0; s < 2 * parts; ++s) z.segment(parts * parts + s * 2 * h, 2 * h) = result.encodings[static_cast<std::size_t>(s)];

  VectorXd a1 = params.dense_w * z + params.dense_b;
  VectorXd keep = VectorXd::Ones(cfg.dense);
  if (train_mode && cfg.dropout > 0) {
    if (!rng) throw Error("forward: train mode requires an rng");
    const double scale = 1.0 / (1.0 - cfg.dropout);
    for (int k = 0; k < cfg.dense; ++k) keep[k] = uniform_unit(*rng) < cfg.dropout ? 0.0 : scale;
  }
  VectorXd r_drop = a1.cwiseMax(0.0).cwiseProduct(keep);
  VectorXd logits = params.out_w * r_drop + params.out_b;
  const double mx = logits.maxCoeff();
  VectorXd e = (logits.array() - mx).exp().matrix();
  result.probabilities = e / e.sum();
  if (!result.probabilities.allFinite() || !z.allFinite()) throw Error("forward: non-finite activation");
  if (cache) {
    cache->seqs = std::move(local);
    cache->z = std::move(z);
    cache->a1 = std::move(a1);
    cache->keep = std::move(keep);
    cache->r_drop = std::move(r_drop);
    cache->logits = std::move(logits);
    cache->probs = result.probabilities;
  }
  return result;
}

double cross_entropy(const VectorXd& logits, int label) {
  const double mx = logits.maxCoeff();
  return std::log((logits.array() - mx).exp().sum()) + mx - logits[label];
}

void add_lstm(LstmParams& a, const LstmParams& b, double s = 1.0) {
  a.w_ix += s * b.w_ix;
  a.w_fx += s * b.w_fx;
  a.w_ox += s * b.w_ox;
  a.w_cx += s * b.w_cx;
  a.w_ic += s * b.w_ic;
  a.w_fc += s * b.w_fc;
  a.w_oc += s * b.w_oc;
  a.b_i += s * b.b_i;
  a.b_f += s * b.b_f;
  a.b_o += s * b.b_o;
  a.b_c += s * b.b_c;
}

}  // namespace

NetworkParams NetworkParams::zeros(const NetworkConfig& cfg) {
  if (cfg.vocab_size < 2 || cfg.embed_dim < 1 || cfg.hidden < 1 || cfg.dense < 1 || cfg.num_classes < 2 ||
      cfg.parts < 1 || cfg.dropout < 0 || cfg.dropout >= 1) {
    throw Error("invalid network configuration");
  }
  NetworkParams p;
  p.config = cfg;
  p.embedding = MatrixXd::Zero(cfg.vocab_size, cfg.embed_dim);
  p.fwd = LstmParams::zeros(cfg.embed_dim, cfg.hidden);
  p.bwd = LstmParams::zeros(cfg.embed_dim, cfg.hidden);
  p.dense_w = MatrixXd::Zero(cfg.dense, cfg.interaction_dim());
  p.dense_b = VectorXd::Zero(cfg.dense);
  p.out_w = MatrixXd::Zero(cfg.num_classes, cfg.dense);
  p.out_b = VectorXd::Zero(cfg.num_classes);
  return p;
}

NetworkParams NetworkParams::init(const NetworkConfig& cfg, std::uint64_t seed, const std::vector<std::string>* vocabulary,
                                  const embeddings::EmbeddingTable* pretrained) {
  NetworkParams p = zeros(cfg);
  Rng rng(derive_seed(seed, 0x1417));
  fill_uniform(p.embedding.data(), p.embedding.size(), 0.05, rng);
  if (pretrained) {
    if (!vocabulary || static_cast<int>(vocabulary->size()) != cfg.vocab_size) {
      throw Error("pretrained initialisation needs the vocabulary");
    }
    if (pretrained->dim() != cfg.embed_dim) {
      throw Error("pretrained vectors have dimension " + std::to_string(pretrained->dim()) + ", network expects " +
                  std::to_string(cfg.embed_dim));
    }
    for (int i = 0; i < cfg.vocab_size; ++i) {
      if (auto r = pretrained->find((*vocabulary)[static_cast<std::size_t>(i)])) {
        p.embedding.row(i) = pretrained->row(*r).cast<double>().transpose();
      }
    }
  }
  p.embedding.row(kPadId).setZero();
  for (LstmParams* l : {&p.fwd, &p.bwd}) {
    for (MatrixXd* w : {&l->w_ix, &l->w_fx, &l->w_ox, &l->w_cx, &l->w_ic, &l->w_fc, &l->w_oc}) glorot(*w, rng);
    l->b_f.setOnes();
  }
  glorot(p.dense_w, rng);
  glorot(p.out_w, rng);
  return p;
}

Gradients Gradients::zeros_like(const NetworkParams& p) {
  Gradients g;
  g.fwd = LstmParams::zeros(p.config.embed_dim, p.config.hidden);
  g.bwd = LstmParams::zeros(p.config.embed_dim, p.config.hidden);
  g.dense_w = MatrixXd::Zero(p.dense_w.rows(), p.dense_w.cols());
  g.dense_b = VectorXd::Zero(p.dense_b.size());
  g.out_w = MatrixXd::Zero(p.out_w.rows(), p.out_w.cols());
  g.out_b = VectorXd::Zero(p.out_b.size());
  return g;
}

void Gradients::add(const Gradients& o) {
  add_lstm(fwd, o.fwd);
  add_lstm(bwd, o.bwd);
  dense_w += o.dense_w;
  dense_b += o.dense_b;
  out_w += o.out_w;
  out_b += o.out_b;
  for (const auto& [row, v] : o.embedding) {
    auto it = embedding.find(row);
    if (it == embedding.end()) embedding.emplace(row, v);
    else it->second += v;
  }
}

void Gradients::scale(double s) {
  for (auto& t : dense_tensors(*this)) Eigen::Map<VectorXd>(t.data, t.size) *= s;
  for (auto& [row, v] : embedding) v *= s;
}

ForwardResult forward(const NetworkParams& params, const PairExample& example, bool train_mode, Rng* rng) {
  return run_forward(params, example, train_mode, rng, nullptr);
}

double loss(const NetworkParams& params, const PairExample& example) {
  NetCache cache;
  run_forward(params, example, false, nullptr, &cache);
  return cross_entropy(cache.logits, example.label);
}

double loss_and_gradient(const NetworkParams& params, const PairExample& ex, Gradients& grad, bool train_mode, Rng* rng) {
  NetCache cache;
  run_forward(params, ex, train_mode, rng, &cache);
  const auto& cfg = params.config;
  const int h = cfg.hidden;
  const int parts = cfg.parts;

  VectorXd dlogits = cache.probs;
  dlogits[ex.label] -= 1.0;
  grad.out_w.noalias() += dlogits * cache.r_drop.transpose();
  grad.out_b += dlogits;
  VectorXd dr = (params.out_w.transpose() * dlogits).cwiseProduct(cache.keep);
  VectorXd da1 = dr.cwiseProduct((cache.a1.array() > 0.0).cast<double>().matrix());
  grad.dense_w.noalias() += da1 * cache.z.transpose();
  grad.dense_b += da1;
  VectorXd dz = params.dense_w.transpose() * da1;

  std::vector<VectorXd> denc(static_cast<std::size_t>(2 * parts));
  for (int s = 0; s < 2 * parts; ++s) denc[static_cast<std::size_t>(s)] = dz.segment(parts * parts + s * 2 * h, 2 * h);
  for (int p = 0; p < parts; ++p) {
    for (int q = 0; q < parts; ++q) {
      const double d = dz[p * parts + q];
      denc[static_cast<std::size_t>(p)] += d * cache.seqs[static_cast<std::size_t>(parts + q)].encoding;
      denc[static_cast<std::size_t>(parts + q)] += d * cache.seqs[static_cast<std::size_t>(p)].encoding;
    }
  }

  VectorXd dx;
  VectorXd dh_prev;
  VectorXd dc_prev;
  auto accumulate_embedding = [&](int id, const VectorXd& g) {
    auto it = grad.embedding.find(id);
    if (it == grad.embedding.end()) grad.embedding.emplace(id, g);
    else it->second += g;
  };
  for (std::size_t s = 0; s < cache.seqs.size(); ++s) {
    const auto& sc = cache.seqs[s];
    const std::size_t n = sc.ids.size();
    VectorXd dh = denc[s].head(h);
    VectorXd dc = VectorXd::Zero(h);
    for (std::size_t t = n; t-- > 0;) {
      lstm_step_backward(params.fwd, sc.fwd[t], dh, dc, grad.fwd, dx, dh_prev, dc_prev);
      accumulate_embedding(sc.ids[t], dx);
      dh.swap(dh_prev);
      dc.swap(dc_prev);
    }
    dh = denc[s].tail(h);
    dc.setZero();
    for (std::size_t k = n; k-- > 0;) {
      lstm_step_backward(params.bwd, sc.bwd[k], dh, dc, grad.bwd, dx, dh_prev, dc_prev);
      accumulate_embedding(sc.ids[n - 1 - k], dx);
      dh.swap(dh_prev);
      dc.swap(dc_prev);
    }
  }
  return cross_entropy(cache.logits, ex.label);
}

Vocabulary Vocabulary::build(const std::vector<const std::vector<std::string>*>& documents, int min_count) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto* doc : documents) {
    for (const auto& t : *doc) ++counts[t];
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [t, c] : counts) {
    if (c >= static_cast<std::uint64_t>(std::max(min_count, 1))) kept.emplace_back(t, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> terms = {"<pad>", "<unk>"};
  for (auto& [t, c] : kept) terms.push_back(t);
  return from_terms(std::move(terms));
}

Vocabulary Vocabulary::from_terms(std::vector<std::string> terms) {
  if (terms.size() < 2) throw Error("vocabulary needs PAD and UNK entries");
  Vocabulary v;
  v.terms_ = std::move(terms);
  for (std::size_t i = 0; i < v.terms_.size(); ++i) {
    if (!v.index_.emplace(v.terms_[i], static_cast<int>(i)).second) throw Error("duplicate vocabulary term '" + v.terms_[i] + "'");
  }
  return v;
}

int Vocabulary::id(const std::string& term) const {
  auto it = index_.find(term);
  return it == index_.end() || it->second == kPadId ? kUnkId : it->second;
}

std::vector<int> pad_sequence(const std::vector<int>& ids, int length) {
  std::vector<int> out(ids.begin(), ids.begin() + std::min<std::ptrdiff_t>(length, static_cast<std::ptrdiff_t>(ids.size())));
  out.resize(static_cast<std::size_t>(length), kPadId);
  return out;
}

PairExample encode_example(const textprep::CleanKU& ku1, const textprep::CleanKU& ku2, int label,
                           const Vocabulary& vocab, const SequenceLengths& lengths) {
  PairExample ex;
  ex.label = label;
  auto ids = [&](const std::vector<std::string>& toks) {
    std::vector<int> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(vocab.id(t));
    return out;
  };
  for (const auto* ku : {&ku1, &ku2}) {
    if (lengths.per_part.size() == 3) {
      ex.inputs.push_back(pad_sequence(ids(ku->title_tokens), lengths.per_part[0]));
      ex.inputs.push_back(pad_sequence(ids(ku->body_tokens), lengths.per_part[1]));
      ex.inputs.push_back(pad_sequence(ids(ku->answers_tokens), lengths.per_part[2]));
    } else if (lengths.per_part.size() == 1) {
      std::vector<std::string> text = ku->title_tokens;
      text.insert(text.end(), ku->body_tokens.begin(), ku->body_tokens.end());
      ex.inputs.push_back(pad_sequence(ids(text), lengths.per_part[0]));
    } else {
      throw Error("sequence lengths must list 3 parts or 1 part");
    }
  }
  return ex;
}

namespace {

class Adam {
 public:
  Adam(const NetworkParams& p, const TrainOptions& o)
      : opt_(o), m_(Gradients::zeros_like(p)), v_(Gradients::zeros_like(p)),
        m_emb_(MatrixXd::Zero(p.embedding.rows(), p.embedding.cols())),
        v_emb_(MatrixXd::Zero(p.embedding.rows(), p.embedding.cols())) {}

  void step(NetworkParams& p, Gradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    auto params = dense_tensors(p);
    auto grads = dense_tensors(g);
    auto ms = dense_tensors(m_);
    auto vs = dense_tensors(v_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      update(params[k].data, grads[k].data, ms[k].data, vs[k].data, params[k].size, c1, c2);
    }
    // Sparse rows: moments of untouched rows are left as they are.
    for (auto& [row, gr] : g.embedding) {
      if (row == kPadId) continue;
      Eigen::VectorXd prow = p.embedding.row(row).transpose();
      Eigen::VectorXd mrow = m_emb_.row(row).transpose();
      Eigen::VectorXd vrow = v_emb_.row(row).transpose();
      update(prow.data(), gr.data(), mrow.data(), vrow.data(), prow.size(), c1, c2);
      p.embedding.row(row) = prow.transpose();
      m_emb_.row(row) = mrow.transpose();
      v_emb_.row(row) = vrow.transpose();
    }
  }

 private:
  void update(double* w, const double* g, double* m, double* v, Eigen::Index n, double c1, double c2) const {
    for (Eigen::Index i = 0; i < n; ++i) {
      m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
      v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
      w[i] -= opt_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt_.adam_epsilon);
    }
  }

  TrainOptions opt_;
  Gradients m_;
  Gradients v_;
  MatrixXd m_emb_;
  MatrixXd v_emb_;
  std::uint64_t t_ = 0;
};

double batch_gradient(const NetworkParams& params, const std::vector<PairExample>& data,
                      const std::vector<std::size_t>& batch, std::uint64_t dropout_seed, int workers, Gradients& out) {
  auto run = [&](std::size_t first, std::size_t last, Gradients& g) {
    double total = 0;
    for (std::size_t j = first; j < last; ++j) {
      Rng rng(derive_seed(dropout_seed, j));
      total += loss_and_gradient(params, data[batch[j]], g, true, &rng);
    }
    return total;
  };
  out = Gradients::zeros_like(params);
  double total = 0;
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), batch.size());
  if (w <= 1) {
    total = run(0, batch.size(), out);
  } else {
    std::vector<Gradients> parts(w, Gradients::zeros_like(params));
    std::vector<double> losses(w, 0.0);
    std::vector<std::thread> threads;
    for (std::size_t k = 0; k < w; ++k) {
      threads.emplace_back([&, k] {
        losses[k] = run(batch.size() * k / w, batch.size() * (k + 1) / w, parts[k]);
      });
    }
    for (auto& t : threads) t.join();
    for (std::size_t k = 0; k < w; ++k) {
      out.add(parts[k]);
      total += losses[k];
    }
  }
  out.scale(1.0 / static_cast<double>(batch.size()));
  return total / static_cast<double>(batch.size());
}

}  // namespace

int predict(const NetworkParams& params, const PairExample& example) {
  auto r = forward(params, example, false, nullptr);
  Eigen::Index best = 0;
  r.probabilities.maxCoeff(&best);
  return static_cast<int>(best);
}

double accuracy(const NetworkParams& params, const std::vector<PairExample>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) correct += predict(params, ex) == ex.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

TrainResult train(NetworkParams initial, const std::vector<PairExample>& train_set,
                  const std::vector<PairExample>& dev_set, const TrainOptions& opt) {
  if (train_set.empty() || dev_set.empty()) throw Error("bilstm train: train and dev sets must be non-empty");
  if (opt.batch_size < 1 || opt.epochs < 1 || opt.learning_rate <= 0) throw Error("bilstm train: invalid options");
  NetworkParams params = std::move(initial);
  Adam adam(params, opt);
  TrainResult result{params, {}};
  double best_acc = -1.0;
  std::uint64_t step = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  bool stop = false;
  for (int epoch = 0; epoch < opt.epochs && !stop; ++epoch) {
    Rng shuffle_rng(derive_seed(opt.seed, 0xE000 + static_cast<std::uint64_t>(epoch)));
    shuffle(order, shuffle_rng);
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(
                                                         std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size))));
      Gradients g;
      double batch_loss;
      try {
        batch_loss = batch_gradient(params, train_set, batch, derive_seed(opt.seed, 0xD000000 + step), opt.workers, g);
      } catch (const Error&) {
        batch_loss = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isfinite(batch_loss)) {
        result.log.diverged = true;
        warn("bilstm train: non-finite loss at step " + std::to_string(step) + ", stopping at last finite checkpoint");
        stop = true;
        break;
      }
      adam.step(params, g);
      ++step;
      result.log.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss;
      ++batches;
      if (opt.max_steps && step >= opt.max_steps) {
        stop = true;
        break;
      }
    }
    if (result.log.diverged) break;
    result.log.epoch_losses.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
    const double acc = accuracy(params, dev_set);
    result.log.dev_accuracy.push_back(acc);
    if (acc > best_acc) {
      best_acc = acc;
      result.params = params;
      result.log.best_epoch = epoch;
    }
  }
  return result;
}

GradientCheckReport gradient_check(const NetworkParams& base, const PairExample& example, double epsilon,
                                   std::size_t min_coordinates, std::uint64_t seed, double floor) {
  NetworkParams params = base;
  Gradients analytic = Gradients::zeros_like(params);
  loss_and_gradient(params, example, analytic, false, nullptr);

  struct Target {
    std::string name;
    double* param;
    const double* grad;
    Eigen::Index size;
  };
  std::vector<Target> targets;
  auto ps = dense_tensors(params);
  auto gs = dense_tensors(analytic);
  for (std::size_t k = 0; k < ps.size(); ++k) targets.push_back({ps[k].name, ps[k].data, gs[k].data, ps[k].size});

  // Embedding coordinates: rows of tokens in the example, gathered row-wise.
  std::vector<std::pair<int, int>> emb_coords;
  std::set<int> rows;
  for (const auto& seq : example.inputs) {
    for (int id : seq) {
      if (id != kPadId) rows.insert(id);
    }
  }
  for (int r : rows) {
    for (int c = 0; c < params.config.embed_dim; ++c) emb_coords.emplace_back(r, c);
  }

  const std::size_t tensors = targets.size() + (emb_coords.empty() ? 0 : 1);
  const std::size_t per_tensor = std::max<std::size_t>(8, (min_coordinates + tensors - 1) / tensors);
  Rng rng(seed);
  GradientCheckReport report;

  auto check = [&](const std::string& name, double& value, double grad) {
    const double saved = value;
    value = saved + epsilon;
    const double plus = loss(params, example);
    value = saved - epsilon;
    const double minus = loss(params, example);
    value = saved;
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double rel = std::abs(grad - numeric) / std::max({std::abs(grad), std::abs(numeric), floor});
    report.max_relative_error = std::max(report.max_relative_error, rel);
    report.per_tensor_max[name] = std::max(report.per_tensor_max[name], rel);
    ++report.per_tensor_count[name];
    ++report.coordinates;
  };

  auto sample = [&](std::size_t size) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t k = std::min(size, per_tensor);
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + uniform_index(rng, size - i)]);
    idx.resize(k);
    return idx;
  };

  for (auto& t : targets) {
    for (std::size_t i : sample(static_cast<std::size_t>(t.size))) check(t.name, t.param[i], t.grad[i]);
  }
  for (std::size_t i : sample(emb_coords.size())) {
    auto [r, c] = emb_coords[i];
    auto it = analytic.embedding.find(r);
    const double g = it == analytic.embedding.end() ? 0.0 : it->second[c];
    check("embedding", params.embedding(r, c), g);
  }
  return report;
}

namespace {

constexpr char kModelMagic[8] = {'K', 'U', 'R', 'E', 'L', 'N', 'N', '1'};
constexpr std::uint32_t kModelVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("model file truncated");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  auto n = get<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error("model file truncated");
  return s;
}

void put_tensor(std::ostream& out, const double* data, Eigen::Index rows, Eigen::Index cols) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(rows));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(cols));
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(sizeof(double) * rows * cols));
}

void get_tensor(std::istream& in, double* data, Eigen::Index rows, Eigen::Index cols) {
  auto r = get<std::uint64_t>(in);
  auto c = get<std::uint64_t>(in);
  if (r != static_cast<std::uint64_t>(rows) || c != static_cast<std::uint64_t>(cols)) throw Error("model file: tensor shape mismatch");
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!in) throw Error("model file truncated");
}

template <class Fn>
void visit_tensors(NetworkParams& p, Fn fn) {
  fn(p.embedding.data(), p.embedding.rows(), p.embedding.cols());
  for (LstmParams* l : {&p.fwd, &p.bwd}) {
    for (MatrixXd* w : {&l->w_ix, &l->w_fx, &l->w_ox, &l->w_cx, &l->w_ic, &l->w_fc, &l->w_oc}) fn(w->data(), w->rows(), w->cols());
    for (VectorXd* b : {&l->b_i, &l->b_f, &l->b_o, &l->b_c}) fn(b->data(), b->size(), Eigen::Index{1});
  }
  fn(p.dense_w.data(), p.dense_w.rows(), p.dense_w.cols());
  fn(p.dense_b.data(), p.dense_b.size(), Eigen::Index{1});
  fn(p.out_w.data(), p.out_w.rows(), p.out_w.cols());
  fn(p.out_b.data(), p.out_b.size(), Eigen::Index{1});
}

}  // namespace

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kModelMagic, sizeof(kModelMagic));
  put<std::uint32_t>(out, kModelVersion);
  const auto& c = model.params.config;
  for (int v : {c.vocab_size, c.embed_dim, c.hidden, c.dense, c.num_classes, c.parts}) put<std::int32_t>(out, v);
  put<double>(out, c.dropout);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.lengths.per_part.size()));
  for (int l : model.lengths.per_part) put<std::int32_t>(out, l);
  put<std::uint64_t>(out, model.vocabulary.size());
  for (const auto& t : model.vocabulary.terms()) put_string(out, t);
  put_string(out, model.manifest_json);
  NetworkParams copy = model.params;
  visit_tensors(copy, [&](double* d, Eigen::Index r, Eigen::Index cols) { put_tensor(out, d, r, cols); });
  if (!out) throw Error("failed writing " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) throw Error(path.string() + ": not a BiLSTM model file");
  if (auto v = get<std::uint32_t>(in); v != kModelVersion) throw Error("unsupported model version " + std::to_string(v));
  NetworkConfig c;
  c.vocab_size = get<std::int32_t>(in);
  c.embed_dim = get<std::int32_t>(in);
  c.hidden = get<std::int32_t>(in);
  c.dense = get<std::int32_t>(in);
  c.num_classes = get<std::int32_t>(in);
  c.parts = get<std::int32_t>(in);
  c.dropout = get<double>(in);
  ModelFile m;
  m.lengths.per_part.resize(get<std::uint32_t>(in));
  for (int& l : m.lengths.per_part) l = get<std::int32_t>(in);
  std::vector<std::string> terms(get<std::uint64_t>(in));
  for (auto& t : terms) t = get_string(in);
  m.vocabulary = Vocabulary::from_terms(std::move(terms));
  m.manifest_json = get_string(in);
  m.params = NetworkParams::zeros(c);
  visit_tensors(m.params, [&](double* d, Eigen::Index r, Eigen::Index cols) { get_tensor(in, d, r, cols); });
  if (static_cast<int>(m.vocabulary.size()) != c.vocab_size) throw Error("model file: vocabulary size mismatch");
  return m;
}

}  // namespace kurel::bilstm
