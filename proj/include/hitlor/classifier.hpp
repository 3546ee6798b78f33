#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlor/error.hpp"
#include "hitlor/feature_store.hpp"
#include "hitlor/representation.hpp"
#include "hitlor/svm.hpp"

namespace hitlor {

enum class ClassWeighting { Balanced, Uniform };

// score = 1 / (1 + exp(-(scale * margin + offset)))
struct Calibration {
  double scale = 1.0;
  double offset = 0.0;
};

struct TrainConfig {
  double C = 1.0;
  ClassWeighting class_weighting = ClassWeighting::Balanced;
  int max_epochs = 1000;
  double optimality_tolerance = 1e-4;
  // Free-set refinement after convergence when min(free samples, features)
  // is at most this; 0 turns it off.
  std::size_t polish_rank = 128;
  bool l2_normalize_inputs = true;
  Calibration calibration;
};

struct TrainStats {
  double max_violation = 0.0;
  double dual_objective = 0.0;
  int epochs = 0;
  bool converged = false;
  std::size_t samples = 0;
};

inline double logistic(double margin, const Calibration& calibration = {}) {
  return 1.0 / (1.0 + std::exp(-(calibration.scale * margin + calibration.offset)));
}

// L2-normalizes each of `segments` equal blocks of v independently. Zero
// blocks are left untouched.
inline void normalize_segments(std::span<double> v, int segments) {
  const std::size_t len = v.size() / static_cast<std::size_t>(segments);
  for (int s = 0; s < segments; ++s) {
    auto block = v.subspan(static_cast<std::size_t>(s) * len, len);
    double norm = 0.0;
    for (double x : block) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (double& x : block) x /= norm;
    }
  }
}

// Trained linear separator. The bias is learned as the weight of a constant
// feature, so it is regularized together with the weights.
struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  Calibration calibration;
  bool l2_normalize_inputs = true;
  int segments = 1;
  TrainStats stats;

  std::size_t dim() const noexcept { return weights.size(); }

  std::vector<double> preprocess(std::span<const double> v) const {
    std::vector<double> out(v.begin(), v.end());
    if (l2_normalize_inputs) normalize_segments(out, segments);
    return out;
  }

  // Signed margin of an already preprocessed vector.
  double raw_margin(std::span<const double> v) const { return svm::dot(weights, v) + bias; }

  double margin(std::span<const double> v) const {
    if (v.size() != weights.size()) {
      throw ValidationError("vector has length " + std::to_string(v.size()) + ", model expects " +
                            std::to_string(weights.size()));
    }
    if (!l2_normalize_inputs) return raw_margin(v);
    return raw_margin(preprocess(v));
  }

  double score(std::span<const double> v) const { return logistic(margin(v), calibration); }
};

inline double score(const LinearModel& model, std::span<const double> v) { return model.score(v); }

// Trains the linear SVM on the labeled samples. Samples are put in a
// canonical order first so the result does not depend on input order.
inline LinearModel train(std::span<const LabeledSample> samples, const TrainConfig& config, int segments = 1) {
  if (!(config.C > 0) || config.max_epochs <= 0 || !(config.optimality_tolerance > 0) || segments <= 0 ||
      !(config.calibration.scale > 0)) {
    throw ConfigError("training configuration values must be positive");
  }
  if (samples.empty()) throw TrainingError("no training samples");
  const std::size_t dim = samples.front().vector.size();
  if (dim == 0 || dim % static_cast<std::size_t>(segments) != 0) {
    throw ValidationError("sample length " + std::to_string(dim) + " does not split into " +
                          std::to_string(segments) + " segments");
  }
  std::size_t positives = 0;
  for (const auto& s : samples) {
    if (s.vector.size() != dim) throw ValidationError("training samples differ in length");
    if (s.label != 0 && s.label != 1) throw ValidationError("labels must be 0 or 1");
    for (double v : s.vector) {
      if (!std::isfinite(v)) throw ValidationError("non-finite value in training sample");
    }
    positives += static_cast<std::size_t>(s.label);
  }
  const std::size_t negatives = samples.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw TrainingError("training needs at least one positive and one negative sample (got " +
                        std::to_string(positives) + " positive, " + std::to_string(negatives) + " negative)");
  }

  std::vector<const LabeledSample*> ordered;
  ordered.reserve(samples.size());
  for (const auto& s : samples) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(), [](const LabeledSample* a, const LabeledSample* b) {
    if (a->label != b->label) return a->label > b->label;
    return a->vector < b->vector;
  });

  const std::size_t n = ordered.size();
  svm::DenseMatrix x{n, dim + 1, std::vector<double>(n * (dim + 1))};
  std::vector<int> y(n);
  std::vector<double> upper(n);
  const double total = static_cast<double>(n);
  const double c_pos = config.class_weighting == ClassWeighting::Balanced
                           ? config.C * total / (2.0 * static_cast<double>(positives))
                           : config.C;
  const double c_neg = config.class_weighting == ClassWeighting::Balanced
                           ? config.C * total / (2.0 * static_cast<double>(negatives))
                           : config.C;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    std::copy(ordered[i]->vector.begin(), ordered[i]->vector.end(), row.begin());
    if (config.l2_normalize_inputs) normalize_segments(row.first(dim), segments);
    row[dim] = 1.0;
    y[i] = ordered[i]->label == 1 ? 1 : -1;
    upper[i] = y[i] > 0 ? c_pos : c_neg;
  }

  const auto solution = svm::solve_dual_cd(x, y, upper, config.optimality_tolerance, config.max_epochs,
                                              config.polish_rank);

  LinearModel model;
  model.weights.assign(solution.w.begin(), solution.w.begin() + static_cast<std::ptrdiff_t>(dim));
  model.bias = solution.w[dim];
  model.calibration = config.calibration;
  model.l2_normalize_inputs = config.l2_normalize_inputs;
  model.segments = segments;
  model.stats = {solution.max_violation, solution.dual_objective, solution.epochs, solution.converged, n};
  return model;
}

inline LinearModel train(const std::vector<LabeledSample>& samples, const TrainConfig& config, int segments = 1) {
  return train(std::span<const LabeledSample>(samples), config, segments);
}

struct ImageScore {
  double image_score = 0.0;
  std::vector<double> per_view;
};

// Max over the strategy's inference views.
inline ImageScore score_image(const LinearModel& model, const Strategy& strategy, std::string_view image_id,
                              const Dataset& dataset) {
  const auto views = inference_views(strategy, image_id, dataset);
  ImageScore out;
  out.per_view.reserve(views.size());
  out.image_score = 0.0;
  for (const auto& view : views) {
    out.per_view.push_back(model.score(view.vector));
    out.image_score = std::max(out.image_score, out.per_view.back());
  }
  return out;
}

// Every inference view of every image, preprocessed once for a strategy so
// repeated scoring across iterations is a sequence of dot products.
class ViewIndex {
 public:
  ViewIndex(const Strategy& strategy, const Dataset& dataset, bool l2_normalize)
      : strategy_(strategy), l2_normalize_(l2_normalize) {
    check_strategy(strategy, dataset);
    dim_ = strategy_feature_dim(strategy, dataset);
    offsets_.reserve(dataset.size() + 1);
    offsets_.push_back(0);
    for (std::size_t row = 0; row < dataset.size(); ++row) {
      for (auto& view : inference_views(strategy, row, dataset)) {
        if (l2_normalize_) normalize_segments(view.vector, strategy.segments());
        values_.insert(values_.end(), view.vector.begin(), view.vector.end());
      }
      offsets_.push_back(values_.size() / dim_);
    }
  }

  const Strategy& strategy() const noexcept { return strategy_; }
  std::size_t images() const noexcept { return offsets_.size() - 1; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t views_of(std::size_t row) const { return offsets_[row + 1] - offsets_[row]; }
  std::span<const double> view(std::size_t row, std::size_t k) const {
    return {values_.data() + (offsets_[row] + k) * dim_, dim_};
  }

  std::vector<double> per_view_scores(const LinearModel& model, std::size_t row) const {
    check(model);
    std::vector<double> out(views_of(row));
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = logistic(model.raw_margin(view(row, k)), model.calibration);
    return out;
  }

  double image_score(const LinearModel& model, std::size_t row) const {
    double best = 0.0;
    for (std::size_t k = 0; k < views_of(row); ++k) {
      best = std::max(best, logistic(model.raw_margin(view(row, k)), model.calibration));
    }
    return best;
  }

  // Image scores for all rows, in row order.
  std::vector<double> score_all(const LinearModel& model) const {
    check(model);
    std::vector<double> out(images());
    for (std::size_t row = 0; row < out.size(); ++row) out[row] = image_score(model, row);
    return out;
  }

  void check(const LinearModel& model) const {
    if (model.dim() != dim_) throw ValidationError("model dimension does not match the strategy's feature dimension");
    if (model.l2_normalize_inputs != l2_normalize_ || model.segments != strategy_.segments()) {
      throw ConfigError("model preprocessing does not match the view index");
    }
  }

 private:

  Strategy strategy_;
  bool l2_normalize_ = true;
  std::size_t dim_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

// Image scores of every image not in `exclude`.
inline std::map<std::string, double> score_dataset(const LinearModel& model, const ViewIndex& index,
                                                   const Dataset& dataset, const std::set<std::string>& exclude = {}) {
  index.check(model);
  std::map<std::string, double> out;
  for (std::size_t row = 0; row < dataset.size(); ++row) {
    const auto& id = dataset.manifest()[row].id;
    if (exclude.contains(id)) continue;
    out.emplace(id, index.image_score(model, row));
  }
  return out;
}

inline std::map<std::string, double> score_dataset(const LinearModel& model, const Strategy& strategy,
                                                   const Dataset& dataset, const std::set<std::string>& exclude = {}) {
  if (exclude.size() >= dataset.size()) {
    bool all = true;
    for (const auto& img : dataset.manifest().images()) all = all && exclude.contains(img.id);
    if (all) return {};
  }
  const ViewIndex index(strategy, dataset, model.l2_normalize_inputs);
  return score_dataset(model, index, dataset, exclude);
}

inline nlohmann::json model_to_json(const LinearModel& model) {
  return {{"weights", model.weights},
          {"bias", model.bias},
          {"calibration", {{"scale", model.calibration.scale}, {"offset", model.calibration.offset}}},
          {"l2_normalize_inputs", model.l2_normalize_inputs},
          {"segments", model.segments}};
}

inline LinearModel model_from_json(const nlohmann::json& doc) {
  LinearModel model;
  try {
    model.weights = doc.at("weights").get<std::vector<double>>();
    model.bias = doc.at("bias").get<double>();
    model.calibration.scale = doc.at("calibration").at("scale").get<double>();
    model.calibration.offset = doc.at("calibration").at("offset").get<double>();
    model.l2_normalize_inputs = doc.value("l2_normalize_inputs", true);
    model.segments = doc.value("segments", 1);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  }
  for (double w : model.weights) {
    if (!std::isfinite(w)) throw ValidationError("model weights must be finite");
  }
  if (!(model.calibration.scale > 0)) throw ValidationError("calibration scale must be positive");
  return model;
}

}  // namespace hitlor
