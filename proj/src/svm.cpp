#include "kurel/svm.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "json.hpp"
#include "kurel/eval.hpp"

namespace kurel::svm {

namespace {

constexpr double kStdFloor = 1e-12;

std::string_view family_of(std::string_view name) {
  auto dot = name.find('.');
  return dot == std::string_view::npos ? name : name.substr(dot + 1);
}

std::string_view part_of(std::string_view name) {
  auto dot = name.find('.');
  return dot == std::string_view::npos ? std::string_view{} : name.substr(0, dot);
}

AblationRow score(const std::string& name, const Dataset& train, const Dataset& dev, const TrainOptions& options) {
  SvmModel model = train_linear_svm(train, options);
  auto pred = model.predict(dev);
  auto report = eval::evaluate(pred, dev.labels, model.num_classes());
  return {name, report.micro_f, report.precision, report.recall};
}

}  // namespace

Dataset Dataset::select(const std::vector<std::string>& columns) const {
  std::vector<std::size_t> idx;
  for (const auto& c : columns) {
    auto it = std::find(names.begin(), names.end(), c);
    if (it == names.end()) throw Error("dataset has no column '" + c + "'");
    idx.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  Dataset out;
  out.names = columns;
  out.labels = labels;
  out.rows.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<double> x;
    x.reserve(idx.size());
    for (auto i : idx) x.push_back(r[i]);
    out.rows.push_back(std::move(x));
  }
  return out;
}

std::vector<double> SvmModel::scores(const std::vector<double>& features) const {
  if (features.size() != dim()) {
    throw Error("svm: feature dimension " + std::to_string(features.size()) + " does not match model dimension " +
                std::to_string(dim()));
  }
  std::vector<double> out(weights.size());
  for (std::size_t c = 0; c < weights.size(); ++c) {
    double s = bias[c];
    for (std::size_t k = 0; k < features.size(); ++k) s += weights[c][k] * (features[k] - mean[k]) / stddev[k];
    out[c] = s;
  }
  return out;
}

int SvmModel::predict(const std::vector<double>& features) const {
  auto s = scores(features);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

std::vector<int> SvmModel::predict(const Dataset& data) const {
  std::vector<int> out;
  out.reserve(data.rows.size());
  for (const auto& r : data.rows) out.push_back(predict(r));
  return out;
}

SvmModel train_linear_svm(const Dataset& data, const TrainOptions& options) {
  const std::size_t n = data.rows.size();
  const std::size_t d = data.dim();
  if (n == 0 || data.labels.size() != n) throw Error("svm: empty or inconsistent training data");
  if (options.lambda <= 0 || options.epochs < 1 || options.eta0 <= 0) throw Error("svm: invalid options");
  int k = options.num_classes;
  int max_label = *std::max_element(data.labels.begin(), data.labels.end());
  if (*std::min_element(data.labels.begin(), data.labels.end()) < 0) throw Error("svm: negative label");
  if (k == 0) k = max_label + 1;
  if (max_label >= k) throw Error("svm: label out of range");
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (int y : data.labels) seen[static_cast<std::size_t>(y)] = true;
  if (std::count(seen.begin(), seen.end(), true) < 2) throw Error("svm: training data must contain at least two classes");

  SvmModel model;
  model.feature_names = data.names;
  model.options = options;
  model.options.num_classes = k;
  model.mean.assign(d, 0.0);
  model.stddev.assign(d, 0.0);
  for (const auto& r : data.rows) {
    if (r.size() != d) throw Error("svm: ragged feature rows");
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(r[j])) throw Error("svm: non-finite feature value");
      model.mean[j] += r[j];
    }
  }
  for (auto& m : model.mean) m /= static_cast<double>(n);
  for (const auto& r : data.rows) {
    for (std::size_t j = 0; j < d; ++j) model.stddev[j] += (r[j] - model.mean[j]) * (r[j] - model.mean[j]);
  }
  for (auto& s : model.stddev) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < kStdFloor) s = 1.0;
  }
  std::vector<std::vector<double>> x(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[i][j] = (data.rows[i][j] - model.mean[j]) / model.stddev[j];
  }

  model.weights.assign(static_cast<std::size_t>(k), std::vector<double>(d, 0.0));
  model.bias.assign(static_cast<std::size_t>(k), 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(options.seed, 0x5F));
  const double lambda = options.lambda;
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t i : order) {
      const double eta = options.eta0 / (1.0 + options.eta0 * lambda * static_cast<double>(t));
      ++t;
      for (int c = 0; c < k; ++c) {
        auto& w = model.weights[static_cast<std::size_t>(c)];
        double& b = model.bias[static_cast<std::size_t>(c)];
        const double y = data.labels[i] == c ? 1.0 : -1.0;
        double s = b;
        for (std::size_t j = 0; j < d; ++j) s += w[j] * x[i][j];
        const double shrink = 1.0 - eta * lambda;
        for (auto& wj : w) wj *= shrink;
        if (y * s < 1.0) {
          for (std::size_t j = 0; j < d; ++j) w[j] += eta * y * x[i][j];
          b += eta * y;
        }
      }
    }
    double objective = 0;
    for (int c = 0; c < k; ++c) {
      const auto& w = model.weights[static_cast<std::size_t>(c)];
      double reg = 0;
      for (double wj : w) reg += wj * wj;
      double hinge = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double y = data.labels[i] == c ? 1.0 : -1.0;
        double s = model.bias[static_cast<std::size_t>(c)];
        for (std::size_t j = 0; j < d; ++j) s += w[j] * x[i][j];
        hinge += std::max(0.0, 1.0 - y * s);
      }
      objective += 0.5 * lambda * reg + hinge / static_cast<double>(n);
    }
    model.objective_trace.push_back(objective / k);
  }
  return model;
}

std::string SvmModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "kurel-svm";
  j["version"] = 1;
  j["multiclass"] = "one-vs-rest";
  j["feature_names"] = feature_names;
  j["weights"] = weights;
  j["bias"] = bias;
  j["mean"] = mean;
  j["stddev"] = stddev;
  j["lambda"] = options.lambda;
  j["epochs"] = options.epochs;
  j["eta0"] = options.eta0;
  j["seed"] = options.seed;
  j["num_classes"] = options.num_classes;
  j["objective_trace"] = objective_trace;
  return j.dump();
}

SvmModel SvmModel::from_json(std::string_view text) {
  auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "kurel-svm") throw Error("not an svm model file");
  SvmModel m;
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  m.bias = j.at("bias").get<std::vector<double>>();
  m.mean = j.at("mean").get<std::vector<double>>();
  m.stddev = j.at("stddev").get<std::vector<double>>();
  m.options.lambda = j.at("lambda").get<double>();
  m.options.epochs = j.at("epochs").get<int>();
  m.options.eta0 = j.at("eta0").get<double>();
  m.options.seed = j.at("seed").get<std::uint64_t>();
  m.options.num_classes = j.at("num_classes").get<int>();
  m.objective_trace = j.value("objective_trace", std::vector<double>{});
  if (m.weights.size() != m.bias.size() || m.mean.size() != m.stddev.size()) throw Error("svm model: inconsistent shapes");
  for (const auto& w : m.weights) {
    if (w.size() != m.mean.size()) throw Error("svm model: weight dimension mismatch");
  }
  for (double s : m.stddev) {
    if (!(s > 0)) throw Error("svm model: non-positive deviation");
  }
  return m;
}

std::vector<AblationRow> feature_ablation(const Dataset& train, const Dataset& dev, const TrainOptions& options) {
  std::vector<std::string> families;
  for (const auto& name : train.names) {
    auto f = std::string(family_of(name));
    if (f == "present") continue;
    if (std::find(families.begin(), families.end(), f) == families.end()) families.push_back(f);
  }
  std::vector<std::future<AblationRow>> jobs;
  for (const auto& family : families) {
    std::vector<std::string> cols;
    for (const auto& name : train.names) {
      if (family_of(name) == family) cols.push_back(name);
    }
    jobs.push_back(std::async(std::launch::async, [&, family, cols] {
      return score(family, train.select(cols), dev.select(cols), options);
    }));
  }
  std::vector<AblationRow> rows;
  for (auto& j : jobs) rows.push_back(j.get());
  std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) { return a.micro_f > b.micro_f; });
  return rows;
}

std::vector<AblationRow> text_part_ablation(const Dataset& train, const Dataset& dev, const TrainOptions& options) {
  std::vector<std::pair<std::string, std::vector<std::string>>> subsets;
  for (std::string_view part : {"title", "body", "answers"}) {
    std::vector<std::string> cols;
    for (const auto& name : train.names) {
      if (part_of(name) == part) cols.push_back(name);
    }
    if (cols.empty()) throw Error("text_part_ablation: no columns for part '" + std::string(part) + "'");
    subsets.emplace_back(std::string(part), std::move(cols));
  }
  subsets.emplace_back("all", train.names);
  std::vector<std::future<AblationRow>> jobs;
  for (const auto& [name, cols] : subsets) {
    jobs.push_back(std::async(std::launch::async, [&, name = name, cols = cols] {
      return score(name, train.select(cols), dev.select(cols), options);
    }));
  }
  std::vector<AblationRow> rows;
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

}  // namespace kurel::svm
