#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hitlor/error.hpp"
#include "hitlor/feature_store.hpp"
#include "hitlor/geometry.hpp"
#include "hitlor/rng.hpp"

namespace hitlor {

enum class Representation { GlobalOnly, LocalOnly, GlobalLocal };
enum class LocalBase { OneProto, OneRand, All };
enum class Fusion { Concat, Pool };

inline std::string_view base_name(LocalBase base) {
  switch (base) {
    case LocalBase::OneProto: return "one-proto";
    case LocalBase::OneRand: return "one-rand";
    case LocalBase::All: return "all";
  }
  return "?";
}

// How labeled images become training vectors and how an image is viewed at
// inference time.
struct Strategy {
  Representation representation = Representation::GlobalOnly;
  LocalBase base = LocalBase::All;
  Fusion fusion = Fusion::Concat;
  GridSpec grid{1, 1};
  // GL-pool-All normally drops the non-object patches of positive images
  // like GL-concat-All does; this restores them as negatives.
  bool pool_keep_negative_patches = false;
  // Minimum share of a cell the object must cover for the cell to count as
  // overlapped. 0 means any positive intersection.
  double min_overlap_fraction = 0.0;

  bool is_global_only() const noexcept { return representation == Representation::GlobalOnly; }
  bool uses_global() const noexcept { return representation != Representation::LocalOnly; }
  bool uses_grid() const noexcept { return representation != Representation::GlobalOnly; }
  GridSpec local_grid() const noexcept { return is_global_only() ? GridSpec{1, 1} : grid; }

  std::string name() const {
    switch (representation) {
      case Representation::GlobalOnly: return "go";
      case Representation::LocalOnly: return base == LocalBase::All ? "lo-all" : "lo-" + std::string(base_name(base));
      case Representation::GlobalLocal:
        return std::string(fusion == Fusion::Concat ? "gl-concat-" : "gl-pool-") + std::string(base_name(base));
    }
    return "?";
  }

  std::size_t feature_dim(std::size_t d) const noexcept {
    return (representation == Representation::GlobalLocal && fusion == Fusion::Concat) ? 2 * d : d;
  }
  // Number of equal-length blocks normalized independently (global and local
  // halves of a concatenation).
  int segments() const noexcept {
    return (representation == Representation::GlobalLocal && fusion == Fusion::Concat) ? 2 : 1;
  }

  static Strategy parse(std::string_view id, GridSpec grid = {2, 2}) {
    Strategy s;
    s.grid = grid;
    const auto parse_base = [&](std::string_view text) {
      if (text == "one-proto") return LocalBase::OneProto;
      if (text == "one-rand") return LocalBase::OneRand;
      if (text == "all") return LocalBase::All;
      throw ConfigError("unknown strategy '" + std::string(id) + "'");
    };
    if (id == "go") {
      s.representation = Representation::GlobalOnly;
      s.grid = {1, 1};
    } else if (id.starts_with("lo-")) {
      s.representation = Representation::LocalOnly;
      s.base = parse_base(id.substr(3));
    } else if (id.starts_with("gl-concat-")) {
      s.representation = Representation::GlobalLocal;
      s.fusion = Fusion::Concat;
      s.base = parse_base(id.substr(10));
    } else if (id.starts_with("gl-pool-")) {
      s.representation = Representation::GlobalLocal;
      s.fusion = Fusion::Pool;
      s.base = parse_base(id.substr(8));
    } else {
      throw ConfigError("unknown strategy '" + std::string(id) + "'");
    }
    if (s.uses_grid() && grid.is_global()) {
      throw ConfigError("strategy '" + std::string(id) + "' needs a patch grid larger than 1x1");
    }
    return s;
  }
};

// Throws ConfigError when the dataset lacks a descriptor set the strategy
// reads, or the global and local dimensions disagree for fusion.
inline void check_strategy(const Strategy& strategy, const Dataset& dataset) {
  if (strategy.uses_global() && !dataset.has_grid({1, 1})) {
    throw ConfigError("strategy " + strategy.name() + " needs the 1x1 (global) descriptor file");
  }
  if (strategy.uses_grid()) {
    if (!dataset.has_grid(strategy.grid)) {
      throw ConfigError("strategy " + strategy.name() + " needs the " + strategy.grid.name() + " descriptor file");
    }
    if (strategy.uses_global() && dataset.descriptors({1, 1}).dim() != dataset.descriptors(strategy.grid).dim()) {
      throw ConfigError("global and " + strategy.grid.name() + " descriptors have different dimensions");
    }
  }
}

inline std::size_t strategy_feature_dim(const Strategy& strategy, const Dataset& dataset) {
  return strategy.feature_dim(dataset.descriptors(strategy.local_grid()).dim());
}

enum class SampleKind { Global, Patch, Prototype, Fused };

struct Provenance {
  std::string image_id;
  std::optional<int> cell;  // absent for global vectors and prototypes
  SampleKind kind = SampleKind::Global;
};

struct LabeledSample {
  std::vector<double> vector;
  int label = 0;
  Provenance provenance;
};

// One labeled image as stored in the session. `negative_cell` caches the
// random patch of a LO-One-Rand negative so retraining sees the same sample.
struct LabeledImage {
  std::string image_id;
  int label = 0;
  std::optional<BBox> bbox;
  std::optional<int> negative_cell;
};

// Elementwise mean of the M patch vectors.
template <typename Range>
std::vector<double> pooled_prototype(const Range& patches) {
  if (std::empty(patches)) throw ValidationError("prototype of zero patches");
  const std::size_t dim = std::size(*std::begin(patches));
  std::vector<double> mean(dim, 0.0);
  std::size_t count = 0;
  for (const auto& patch : patches) {
    if (std::size(patch) != dim) throw ValidationError("patch vectors differ in length");
    std::size_t j = 0;
    for (auto v : patch) mean[j++] += static_cast<double>(v);
    ++count;
  }
  for (auto& v : mean) v /= static_cast<double>(count);
  return mean;
}

template <typename A, typename B>
std::vector<double> fuse(const A& global, const B& local, Fusion fusion) {
  if (std::size(global) != std::size(local)) throw ValidationError("global and local vectors differ in length");
  std::vector<double> out;
  if (fusion == Fusion::Concat) {
    out.reserve(2 * std::size(global));
    for (auto v : global) out.push_back(static_cast<double>(v));
    for (auto v : local) out.push_back(static_cast<double>(v));
  } else {
    out.reserve(std::size(global));
    auto it = std::begin(local);
    for (auto v : global) out.push_back((static_cast<double>(v) + static_cast<double>(*it++)) / 2.0);
  }
  return out;
}

namespace detail {

inline std::vector<double> widen(std::span<const float> v) { return {v.begin(), v.end()}; }

inline std::vector<double> image_prototype(const DescriptorSet& set, std::size_t row) {
  std::vector<std::span<const float>> cells;
  cells.reserve(set.cells());
  for (std::size_t m = 0; m < set.cells(); ++m) cells.push_back(set.cell(row, m));
  return pooled_prototype(cells);
}

}  // namespace detail

// Training vectors contributed by one labeled image.
inline std::vector<LabeledSample> build_training_samples(const Strategy& strategy, const LabeledImage& image,
                                                         const Dataset& dataset, Rng& rng) {
  check_strategy(strategy, dataset);
  if (image.label != 0 && image.label != 1) throw ValidationError("label must be 0 or 1", "label");
  const bool positive = image.label == 1;
  if (positive && !image.bbox && strategy.uses_grid()) {
    throw ValidationError("positive image '" + image.image_id + "' has no bounding box", "bbox");
  }
  const std::size_t row = dataset.manifest().row_of(image.image_id);
  const ImageEntry& entry = dataset.manifest()[row];

  std::vector<LabeledSample> out;
  if (strategy.is_global_only()) {
    out.push_back({detail::widen(dataset.descriptors({1, 1}).cell(row, 0)), image.label,
                   {image.image_id, std::nullopt, SampleKind::Global}});
    return out;
  }

  const DescriptorSet& local = dataset.descriptors(strategy.grid);
  const bool fused = strategy.representation == Representation::GlobalLocal;
  std::span<const float> global;
  if (fused) global = dataset.descriptors({1, 1}).cell(row, 0);

  const auto emit_cell = [&](int m, int label) {
    if (fused) {
      out.push_back({fuse(global, local.cell(row, m), strategy.fusion), label, {image.image_id, m, SampleKind::Fused}});
    } else {
      out.push_back({detail::widen(local.cell(row, m)), label, {image.image_id, m, SampleKind::Patch}});
    }
  };

  if (positive) {
    const PatchOverlap overlap =
        compute_overlap(*image.bbox, strategy.grid, entry.width, entry.height, strategy.min_overlap_fraction);
    if (strategy.base != LocalBase::All) {
      emit_cell(overlap.best_cell, 1);
      return out;
    }
    for (int m : overlap.positive_cells) emit_cell(m, 1);
    const bool keep_negatives = !fused || (strategy.fusion == Fusion::Pool && strategy.pool_keep_negative_patches);
    if (keep_negatives) {
      for (int m : overlap.negative_cells) emit_cell(m, 0);
    }
    return out;
  }

  switch (strategy.base) {
    case LocalBase::OneProto: {
      auto proto = detail::image_prototype(local, row);
      if (fused) {
        out.push_back({fuse(global, proto, strategy.fusion), 0, {image.image_id, std::nullopt, SampleKind::Fused}});
      } else {
        out.push_back({std::move(proto), 0, {image.image_id, std::nullopt, SampleKind::Prototype}});
      }
      break;
    }
    case LocalBase::OneRand: {
      const int m = image.negative_cell ? *image.negative_cell
                                        : static_cast<int>(rng.uniform_index(local.cells()));
      if (m < 0 || m >= static_cast<int>(local.cells())) throw ValidationError("cached negative cell out of range");
      emit_cell(m, 0);
      break;
    }
    case LocalBase::All:
      for (int m = 0; m < static_cast<int>(local.cells()); ++m) emit_cell(m, 0);
      break;
  }
  return out;
}

struct InferenceView {
  std::vector<double> vector;
  std::string tag;  // "global", "cell:<m>", "prototype"
};

// Views whose maximum score decides the image score: the global vector for
// GO, otherwise the M patches (fused with the global vector under GL) plus
// the patch prototype for One-Proto strategies.
inline std::vector<InferenceView> inference_views(const Strategy& strategy, std::size_t row, const Dataset& dataset) {
  check_strategy(strategy, dataset);
  std::vector<InferenceView> views;
  if (strategy.is_global_only()) {
    views.push_back({detail::widen(dataset.descriptors({1, 1}).cell(row, 0)), "global"});
    return views;
  }
  const DescriptorSet& local = dataset.descriptors(strategy.grid);
  const bool fused = strategy.representation == Representation::GlobalLocal;
  std::span<const float> global;
  if (fused) global = dataset.descriptors({1, 1}).cell(row, 0);
  for (std::size_t m = 0; m < local.cells(); ++m) {
    auto tag = "cell:" + std::to_string(m);
    if (fused) {
      views.push_back({fuse(global, local.cell(row, m), strategy.fusion), std::move(tag)});
    } else {
      views.push_back({detail::widen(local.cell(row, m)), std::move(tag)});
    }
  }
  if (strategy.base == LocalBase::OneProto) {
    auto proto = detail::image_prototype(local, row);
    views.push_back({fused ? fuse(global, proto, strategy.fusion) : std::move(proto), "prototype"});
  }
  return views;
}

inline std::vector<InferenceView> inference_views(const Strategy& strategy, std::string_view image_id,
                                                  const Dataset& dataset) {
  return inference_views(strategy, dataset.manifest().row_of(image_id), dataset);
}

}  // namespace hitlor
