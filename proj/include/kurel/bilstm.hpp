#pragma once

// Shared-encoder BiLSTM over the text parts of two knowledge units, with
// pairwise dot-product interactions, a ReLU dense layer, dropout and a
// softmax output. Gradients are computed by hand; training uses Adam.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kurel/common.hpp"
#include "kurel/embeddings.hpp"
#include "kurel/textprep.hpp"

namespace kurel::bilstm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;

/// Gate weights act on the concatenation X = [x_t; h_{t-1}]; the cell
/// weights W_ic, W_fc, W_oc act on c_{t-1}.
struct LstmParams {
  MatrixXd w_ix, w_fx, w_ox, w_cx;  // H x (d + H)
  MatrixXd w_ic, w_fc, w_oc;        // H x H
  VectorXd b_i, b_f, b_o, b_c;      // H

  static LstmParams zeros(int input_dim, int hidden);
  int input_dim() const { return static_cast<int>(w_ix.cols() - w_ix.rows()); }
  int hidden() const { return static_cast<int>(w_ix.rows()); }
  bool operator==(const LstmParams&) const = default;
};

struct LstmState {
  VectorXd h;
  VectorXd c;
};

/// Intermediate values of one step, kept for backpropagation.
struct StepCache {
  VectorXd x_concat;
  VectorXd c_prev;
  VectorXd i, f, o, g;
  VectorXd c;
  VectorXd tanh_c;
};

/// i = s(W_iX X + W_ic c_{t-1} + b_i); f = s(W_fX X + W_fc c_{t-1} + b_f);
/// o = s(W_oX X + W_oc c_{t-1} + b_o); c = f*c_{t-1} + i*tanh(W_cX X + b_c);
/// h = o*tanh(c). Throws on non-finite input.
LstmState lstm_step(const LstmParams& p, const VectorXd& x, const LstmState& prev, StepCache* cache = nullptr);

/// Backpropagate one step. Accumulates parameter gradients into `grad` and
/// writes the gradients w.r.t. x_t, h_{t-1}, c_{t-1}.
void lstm_step_backward(const LstmParams& p, const StepCache& k, const VectorXd& dh, const VectorXd& dc, LstmParams& grad,
                        VectorXd& dx, VectorXd& dh_prev, VectorXd& dc_prev);

/// Rows of `sequence` are time steps; rows with mask == false are padding and
/// leave the state untouched. Returns [h_fwd_final; h_bwd_final].
VectorXd bilstm_encode(const LstmParams& fwd, const LstmParams& bwd, const MatrixXd& sequence,
                       const std::vector<bool>& mask);

struct NetworkConfig {
  int vocab_size = 2;
  int embed_dim = 300;
  int hidden = 128;
  int dense = 50;
  int num_classes = 4;
  /// Text parts per knowledge unit: 3 (title, body, answers) or 1 (title+body).
  int parts = 3;
  double dropout = 0.2;

  int interaction_dim() const { return parts * parts + 2 * parts * 2 * hidden; }
  bool operator==(const NetworkConfig&) const = default;
};

struct NetworkParams {
  NetworkConfig config;
  MatrixXd embedding;  // vocab x d, row kPadId unused
  LstmParams fwd;      // shared by every input sequence
  LstmParams bwd;
  MatrixXd dense_w;  // dense x interaction_dim
  VectorXd dense_b;
  MatrixXd out_w;  // classes x dense
  VectorXd out_b;

  /// Seeded initialisation. Embedding rows come from `pretrained` where the
  /// vocabulary term exists, else uniform in [-0.05, 0.05].
  static NetworkParams init(const NetworkConfig& config, std::uint64_t seed,
                            const std::vector<std::string>* vocabulary = nullptr,
                            const embeddings::EmbeddingTable* pretrained = nullptr);
  static NetworkParams zeros(const NetworkConfig& config);
  bool operator==(const NetworkParams&) const = default;
};

/// Gradient buffers. Embedding gradients are kept per touched row.
struct Gradients {
  LstmParams fwd;
  LstmParams bwd;
  MatrixXd dense_w;
  VectorXd dense_b;
  MatrixXd out_w;
  VectorXd out_b;
  std::map<int, VectorXd> embedding;

  static Gradients zeros_like(const NetworkParams& p);
  void add(const Gradients& other);
  void scale(double s);
};

/// Six (or two) token-id sequences: KU1 parts then KU2 parts.
struct PairExample {
  std::vector<std::vector<int>> inputs;
  int label = 0;

  bool operator==(const PairExample&) const = default;
};

struct SequenceLengths {
  std::vector<int> per_part = {10, 60, 180};
};

struct ForwardResult {
  VectorXd probabilities;
  VectorXd interactions;  // parts x parts, row-major: enc1[p] . enc2[q]
  std::vector<VectorXd> encodings;
};

/// Dropout is applied only when `train_mode` is set, drawing from `rng`.
ForwardResult forward(const NetworkParams& params, const PairExample& example, bool train_mode = false,
                      Rng* rng = nullptr);

/// Cross-entropy of one example; accumulates d(loss)/d(params) into `grad`.
double loss_and_gradient(const NetworkParams& params, const PairExample& example, Gradients& grad,
                         bool train_mode = false, Rng* rng = nullptr);

double loss(const NetworkParams& params, const PairExample& example);

// --- vocabulary and example encoding ----------------------------------------

class Vocabulary {
 public:
  /// Ids 0 and 1 are PAD and UNK; then terms with frequency >= min_count, by
  /// descending frequency then lexicographically.
  static Vocabulary build(const std::vector<const std::vector<std::string>*>& documents, int min_count = 2);
  static Vocabulary from_terms(std::vector<std::string> terms);

  int id(const std::string& term) const;
  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  bool operator==(const Vocabulary& o) const { return terms_ == o.terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, int> index_;
};

/// Truncate to `length` or post-pad with kPadId.
std::vector<int> pad_sequence(const std::vector<int>& ids, int length);

PairExample encode_example(const textprep::CleanKU& ku1, const textprep::CleanKU& ku2, int label,
                           const Vocabulary& vocab, const SequenceLengths& lengths = {});

// --- training -----------------------------------------------------------------

struct TrainOptions {
  double learning_rate = 0.001;
  int epochs = 25;
  int batch_size = 64;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Stop after this many optimizer steps (0 = no limit).
  std::uint64_t max_steps = 0;
  /// 1 = deterministic reference mode; more workers split each minibatch.
  int workers = 1;
};

struct TrainingLog {
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;
  std::vector<double> dev_accuracy;
  int best_epoch = -1;
  bool diverged = false;
};

struct TrainResult {
  NetworkParams params;  // best epoch by dev accuracy
  TrainingLog log;
};

TrainResult train(NetworkParams initial, const std::vector<PairExample>& train_set,
                  const std::vector<PairExample>& dev_set, const TrainOptions& options);

int predict(const NetworkParams& params, const PairExample& example);
double accuracy(const NetworkParams& params, const std::vector<PairExample>& examples);

// --- gradient check -----------------------------------------------------------

struct GradientCheckReport {
  double max_relative_error = 0;
  std::size_t coordinates = 0;
  std::map<std::string, double> per_tensor_max;
  std::map<std::string, std::size_t> per_tensor_count;
};

/// Compare analytic gradients with central differences on a random subsample
/// of coordinates from every tensor (embedding rows restricted to tokens that
/// occur in the example). Relative error is |a - n| / max(|a|, |n|, floor).
GradientCheckReport gradient_check(const NetworkParams& params, const PairExample& example, double epsilon,
                                   std::size_t min_coordinates = 200, std::uint64_t seed = 7, double floor = 1e-6);

// --- persistence ----------------------------------------------------------------

struct ModelFile {
  NetworkParams params;
  Vocabulary vocabulary;
  SequenceLengths lengths;
  std::string manifest_json;
};

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace kurel::bilstm
