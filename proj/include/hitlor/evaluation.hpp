#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlor/error.hpp"
#include "hitlor/feature_store.hpp"
#include "hitlor/rng.hpp"

namespace hitlor {

// ---------------------------------------------------------------------------
// Average precision
// ---------------------------------------------------------------------------

// AP of the ranking by descending score, ties broken by `tie_rank`
// ascending. relevant[i] != 0 marks relevant items.
inline double average_precision(std::span<const double> scores, std::span<const std::size_t> tie_rank,
                                std::span<const char> relevant) {
  const std::size_t n = scores.size();
  std::size_t total_relevant = 0;
  for (char r : relevant) total_relevant += r != 0;
  if (total_relevant == 0) throw ValidationError("average precision is undefined without relevant items");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return tie_rank[a] < tie_rank[b];
  });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (relevant[order[k]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(total_relevant);
}

inline double average_precision(const std::map<std::string, double>& scores, const std::set<std::string>& relevant) {
  if (relevant.empty()) throw ValidationError("average precision is undefined for an empty relevant set");
  for (const auto& id : relevant) {
    if (!scores.contains(id)) throw ValidationError("relevant image '" + id + "' has no score");
  }
  // std::map iterates in ascending id order, which is the tie-break order.
  std::vector<double> s;
  std::vector<std::size_t> rank;
  std::vector<char> rel;
  for (const auto& [id, value] : scores) {
    rank.push_back(s.size());
    s.push_back(value);
    rel.push_back(relevant.contains(id) ? 1 : 0);
  }
  return average_precision(s, rank, rel);
}

// ---------------------------------------------------------------------------
// Normalized AUC
// ---------------------------------------------------------------------------

// Trapezoidal area under a per-iteration curve divided by the number of
// intervals, so a constant curve maps to its value.
inline double normalized_auc(std::span<const double> values) {
  if (values.size() < 2) throw ValidationError("AUC needs at least two iterations");
  // Extended precision keeps a constant curve an exact fixed point.
  long double area = 0.0L;
  for (std::size_t t = 0; t + 1 < values.size(); ++t) {
    area += (static_cast<long double>(values[t]) + static_cast<long double>(values[t + 1])) / 2.0L;
  }
  return static_cast<double>(area / static_cast<long double>(values.size() - 1));
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

struct KMeansResult {
  std::vector<std::vector<double>> centers;
  std::vector<int> assignment;
  // Objective (sum of squared distances) after each assignment step.
  std::vector<double> objective_history;
  int iterations = 0;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

// Lloyd iterations from k-means++ seeding, until the assignment stops
// changing or max_iterations. Empty clusters are re-seeded to the point
// farthest from its center.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, int max_iterations, Rng& rng) {
  const std::size_t n = points.size();
  if (n == 0) throw ValidationError("k-means over an empty point set");
  if (k <= 0) throw ValidationError("k must be positive");
  if (static_cast<std::size_t>(k) > n) k = static_cast<int>(n);

  KMeansResult out;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  out.centers.push_back(points[rng.uniform_index(n)]);
  while (out.centers.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], out.centers.back()));
      total += nearest[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += nearest[i];
        if (acc > target && nearest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_index(n);
    }
    out.centers.push_back(points[pick]);
  }

  const std::size_t dim = points.front().size();
  out.assignment.assign(n, -1);
  std::vector<double> dist(n);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(points[i], out.centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(points[i], out.centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (out.assignment[i] != best) changed = true;
      out.assignment[i] = best;
      dist[i] = best_d;
      objective += best_d;
    }
    out.objective_history.push_back(objective);
    out.iterations = iter + 1;
    if (!changed) break;

    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = out.assignment[i];
      ++counts[c];
      for (std::size_t j = 0; j < dim; ++j) sums[c][j] += points[i][j];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j) out.centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
      }
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (dist[i] > dist[far]) far = i;
      }
      out.centers[c] = points[far];
      dist[far] = 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

struct CoverageConfig {
  int k = 32;
  int clusterings = 10;
  int max_kmeans_iterations = 100;
  std::uint64_t seed = 0;
};

// Repeated clusterings of a class's positive images. Clustering j uses seed
// `seed + j`; coverage of a returned set is the mean hit fraction.
class CoverageIndex {
 public:
  CoverageIndex(const std::map<std::string, std::vector<double>>& class_positive_features, const CoverageConfig& config)
      : config_(config) {
    if (class_positive_features.empty()) throw ValidationError("coverage needs at least one positive image");
    if (config.k <= 0 || config.clusterings <= 0 || config.max_kmeans_iterations <= 0) {
      throw ConfigError("coverage k, clusterings and iterations must be positive");
    }
    std::vector<std::vector<double>> points;
    for (const auto& [id, vec] : class_positive_features) {
      slot_.emplace(id, ids_.size());
      ids_.push_back(id);
      points.push_back(vec);
    }
    k_ = std::min<int>(config.k, static_cast<int>(points.size()));
    for (int j = 0; j < config.clusterings; ++j) {
      Rng rng(config.seed + static_cast<std::uint64_t>(j));
      auto result = kmeans(points, k_, config.max_kmeans_iterations, rng);
      assignments_.push_back(std::move(result.assignment));
    }
  }

  int k() const noexcept { return k_; }
  bool clamped() const noexcept { return k_ < config_.k; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<int>& assignment(int clustering) const { return assignments_.at(clustering); }

  bool contains(const std::string& id) const { return slot_.contains(id); }

  double coverage(const std::set<std::string>& returned) const {
    std::vector<std::size_t> slots;
    for (const auto& id : returned) {
      const auto it = slot_.find(id);
      if (it == slot_.end()) throw ValidationError("returned image '" + id + "' is not a positive of the class");
      slots.push_back(it->second);
    }
    double sum = 0.0;
    for (const auto& assign : assignments_) {
      std::vector<char> hit(k_, 0);
      for (std::size_t s : slots) hit[assign[s]] = 1;
      sum += static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(k_);
    }
    return sum / static_cast<double>(assignments_.size());
  }

 private:
  CoverageConfig config_;
  int k_ = 0;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> slot_;
  std::vector<std::vector<int>> assignments_;
};

inline double coverage(const std::set<std::string>& returned_positives,
                       const std::map<std::string, std::vector<double>>& class_positive_features,
                       const CoverageConfig& config) {
  return CoverageIndex(class_positive_features, config).coverage(returned_positives);
}

// ---------------------------------------------------------------------------
// Object size profile
// ---------------------------------------------------------------------------

enum class SizeClass { Small, Medium, Large };

// Small below 1/16 of the image area, large above 1/4, medium in between
// (both bounds inclusive). Integer-free comparison against the exact
// thresholds avoids rounding at the boundaries.
inline SizeClass classify_size(double bbox_area, int width, int height) {
  const double image_area = static_cast<double>(width) * static_cast<double>(height);
  if (16.0 * bbox_area < image_area) return SizeClass::Small;
  if (4.0 * bbox_area > image_area) return SizeClass::Large;
  return SizeClass::Medium;
}

struct SizeCounts {
  std::size_t small = 0;
  std::size_t medium = 0;
  std::size_t large = 0;

  std::size_t total() const noexcept { return small + medium + large; }
  double proportion(SizeClass c) const noexcept {
    if (total() == 0) return 0.0;
    const std::size_t count = c == SizeClass::Small ? small : c == SizeClass::Medium ? medium : large;
    return static_cast<double>(count) / static_cast<double>(total());
  }
  void add(SizeClass c) noexcept { ++(c == SizeClass::Small ? small : c == SizeClass::Medium ? medium : large); }
};

struct SizeProfile {
  std::map<std::string, SizeCounts> per_class;
  SizeCounts overall;
  std::string recommendation;  // "2x2", "4x4" or "2x2+4x4"
};

// Large objects favour coarse patches, small ones fine patches; a mixed
// distribution gets both grids.
inline std::string recommend_grid(const SizeCounts& counts) {
  const double small = counts.proportion(SizeClass::Small);
  const double large = counts.proportion(SizeClass::Large);
  if (small >= 0.5 && small > large) return "4x4";
  if (large >= 0.5 && large > small) return "2x2";
  return "2x2+4x4";
}

inline SizeProfile size_profile(const AnnotationStore& annotations, const ImageManifest& manifest) {
  SizeProfile profile;
  for (const auto& [image_id, instances] : annotations.all()) {
    const auto& img = manifest.at(image_id);
    for (const auto& inst : instances) {
      const SizeClass c = classify_size(inst.bbox.area(), img.width, img.height);
      profile.per_class[inst.class_label].add(c);
      profile.overall.add(c);
    }
  }
  profile.recommendation = recommend_grid(profile.overall);
  return profile;
}

// ---------------------------------------------------------------------------
// Run reports
// ---------------------------------------------------------------------------

struct SeriesPoint {
  int iteration = 0;
  double map = 0.0;
  double coverage = 0.0;
  int positives_found = 0;
};

struct RunReport {
  std::string query_id;
  std::string class_label;
  std::string strategy;
  std::string grid;
  std::uint64_t seed = 0;
  std::string status;
  int coverage_k = 0;
  bool coverage_k_clamped = false;
  std::vector<SeriesPoint> series;
  double auc_map = 0.0;
  double auc_coverage = 0.0;

  void summarize() {
    std::vector<double> maps;
    std::vector<double> covs;
    for (const auto& p : series) {
      maps.push_back(p.map);
      covs.push_back(p.coverage);
    }
    if (series.size() >= 2) {
      auc_map = normalized_auc(maps);
      auc_coverage = normalized_auc(covs);
    } else if (series.size() == 1) {
      auc_map = maps[0];
      auc_coverage = covs[0];
    }
  }
};

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json series = nlohmann::json::array();
  for (const auto& p : r.series) {
    series.push_back({{"iteration", p.iteration}, {"map", p.map}, {"coverage", p.coverage}, {"positives_found", p.positives_found}});
  }
  return {{"query_id", r.query_id},   {"class", r.class_label},       {"strategy", r.strategy},
          {"grid", r.grid},           {"seed", r.seed},               {"status", r.status},
          {"coverage_k", r.coverage_k}, {"coverage_k_clamped", r.coverage_k_clamped},
          {"series", std::move(series)},
          {"summary", {{"auc_map", r.auc_map}, {"auc_coverage", r.auc_coverage}}}};
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.query_id = j.at("query_id").get<std::string>();
  r.class_label = j.at("class").get<std::string>();
  r.strategy = j.at("strategy").get<std::string>();
  r.grid = j.at("grid").get<std::string>();
  r.seed = j.value("seed", std::uint64_t{0});
  r.status = j.value("status", std::string{});
  r.coverage_k = j.value("coverage_k", 0);
  r.coverage_k_clamped = j.value("coverage_k_clamped", false);
  for (const auto& p : j.at("series")) {
    r.series.push_back({p.at("iteration").get<int>(), p.at("map").get<double>(), p.at("coverage").get<double>(),
                        p.at("positives_found").get<int>()});
  }
  if (j.contains("summary")) {
    r.auc_map = j["summary"].value("auc_map", 0.0);
    r.auc_coverage = j["summary"].value("auc_coverage", 0.0);
  }
  return r;
}

}  // namespace hitlor
