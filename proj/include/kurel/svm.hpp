#pragma once

// One-vs-rest linear SVM trained by stochastic subgradient descent on the
// L2-regularised hinge loss, plus the feature and text-part ablations.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kurel/common.hpp"

namespace kurel::svm {

/// Row-major design matrix with named columns and integer class labels.
struct Dataset {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;

  std::size_t dim() const { return names.size(); }
  /// Keep only the named columns, in the given order.
  Dataset select(const std::vector<std::string>& columns) const;
};

struct TrainOptions {
  double lambda = 1e-4;
  int epochs = 50;
  /// Initial step size; step t uses eta0 / (1 + eta0 * lambda * t).
  double eta0 = 0.1;
  std::uint64_t seed = 1;
  /// Number of classes; 0 means 1 + max label.
  int num_classes = 0;
};

struct SvmModel {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> weights;  // [class][dim]
  std::vector<double> bias;                  // [class]
  std::vector<double> mean;
  std::vector<double> stddev;  // floor-clamped, > 0
  TrainOptions options;
  /// Regularised hinge objective (averaged over classes) at each epoch end.
  std::vector<double> objective_trace;

  int num_classes() const { return static_cast<int>(weights.size()); }
  std::size_t dim() const { return mean.size(); }

  std::vector<double> scores(const std::vector<double>& features) const;
  /// Argmax of per-class scores; ties go to the lowest class index.
  int predict(const std::vector<double>& features) const;
  std::vector<int> predict(const Dataset& data) const;

  std::string to_json() const;
  static SvmModel from_json(std::string_view text);

  bool operator==(const SvmModel& other) const {
    return feature_names == other.feature_names && weights == other.weights && bias == other.bias &&
           mean == other.mean && stddev == other.stddev;
  }
};

SvmModel train_linear_svm(const Dataset& data, const TrainOptions& options);

struct AblationRow {
  std::string name;
  double micro_f = 0;
  double precision = 0;
  double recall = 0;
};

/// One model per feature family (the family's column in every text part),
/// evaluated on dev; rows sorted by dev micro-F, descending.
std::vector<AblationRow> feature_ablation(const Dataset& train, const Dataset& dev, const TrainOptions& options);

/// Models on title-only, body-only, answers-only and all columns.
std::vector<AblationRow> text_part_ablation(const Dataset& train, const Dataset& dev, const TrainOptions& options);

}  // namespace kurel::svm
