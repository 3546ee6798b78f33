#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "hitlor/feature_store.hpp"
#include "hitlor/geometry.hpp"
#include "hitlor/rng.hpp"

namespace hitlor::synthetic {

// Parameters of the planted-object generator. Every patch descriptor is
// isotropic Gaussian noise plus the class direction of each object whose box
// overlaps the cell. The global (1x1) descriptor is fresh noise plus each
// class direction scaled by the object's share of the image area, so small
// objects barely register globally.
struct PlantedConfig {
  std::size_t images = 2000;
  std::size_t dim = 16;
  int classes = 8;
  // Classes [0, small_classes) get objects no larger than one 4x4 cell;
  // the rest get objects spanning several cells.
  int small_classes = 4;
  double positive_rate = 0.10;
  double noise_sigma = 1.0;
  // Norm of each class direction as a multiple of the noise scale, the
  // expected norm noise_sigma * sqrt(dim) of a noise vector.
  double signal_ratio = 4.0;
  int width = 256;
  int height = 256;
  std::vector<GridSpec> grids{{1, 1}, {2, 2}, {4, 4}};
  std::uint64_t seed = 0;
};

struct PlantedDataset {
  std::shared_ptr<const Dataset> dataset;
  std::vector<std::string> class_labels;
  std::set<std::string> small_classes;
};

inline std::string class_name(int c) { return "class-" + std::to_string(c); }

namespace detail {

// Gram-Schmidt on Gaussian draws; requires classes <= dim.
inline std::vector<std::vector<double>> orthonormal_directions(int count, std::size_t dim, Rng& rng) {
  std::vector<std::vector<double>> dirs;
  while (static_cast<int>(dirs.size()) < count) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    for (const auto& u : dirs) {
      double proj = 0.0;
      for (std::size_t j = 0; j < dim; ++j) proj += v[j] * u[j];
      for (std::size_t j = 0; j < dim; ++j) v[j] -= proj * u[j];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

inline BBox small_box(int width, int height, Rng& rng) {
  // Inside one 4x4 cell, covering 60-100% of each side of the cell.
  const GridSpec fine{4, 4};
  const auto cell = cell_rectangle(fine, static_cast<int>(rng.uniform_index(16)), width, height);
  const double cw = cell.x1 - cell.x0;
  const double ch = cell.y1 - cell.y0;
  const double w = std::floor(cw * rng.uniform(0.6, 1.0));
  const double h = std::floor(ch * rng.uniform(0.6, 1.0));
  const double x = cell.x0 + std::floor(rng.uniform(0.0, cw - w + 1.0));
  const double y = cell.y0 + std::floor(rng.uniform(0.0, ch - h + 1.0));
  return {x, y, std::min(x + w, static_cast<double>(cell.x1)), std::min(y + h, static_cast<double>(cell.y1))};
}

inline BBox large_box(int width, int height, Rng& rng) {
  // Sides between 45% and 75% of the image.
  const double w = std::floor(width * rng.uniform(0.45, 0.75));
  const double h = std::floor(height * rng.uniform(0.45, 0.75));
  const double x = std::floor(rng.uniform(0.0, width - w + 1.0));
  const double y = std::floor(rng.uniform(0.0, height - h + 1.0));
  return {x, y, std::min(x + w, static_cast<double>(width)), std::min(y + h, static_cast<double>(height))};
}

}  // namespace detail

inline PlantedDataset generate_planted(const PlantedConfig& config) {
  if (config.classes <= 0 || static_cast<std::size_t>(config.classes) > config.dim) {
    throw ConfigError("planted generator needs 1 <= classes <= dim");
  }
  Rng rng(config.seed);
  const auto directions = detail::orthonormal_directions(config.classes, config.dim, rng);
  const double strength = config.signal_ratio * config.noise_sigma * std::sqrt(static_cast<double>(config.dim));

  PlantedDataset out;
  std::vector<ImageEntry> images;
  for (std::size_t i = 0; i < config.images; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "img%05zu", i);
    images.push_back({id, std::nullopt, config.width, config.height});
  }

  AnnotationStore annotations;
  std::vector<std::vector<std::pair<int, BBox>>> objects(config.images);
  const std::size_t per_class = static_cast<std::size_t>(std::llround(config.positive_rate * static_cast<double>(config.images)));
  std::vector<std::size_t> rows(config.images);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (int c = 0; c < config.classes; ++c) {
    const auto label = class_name(c);
    out.class_labels.push_back(label);
    const bool small = c < config.small_classes;
    if (small) out.small_classes.insert(label);
    for (std::size_t row : rng.sample_without_replacement<std::size_t>(rows, per_class)) {
      const BBox box = small ? detail::small_box(config.width, config.height, rng)
                             : detail::large_box(config.width, config.height, rng);
      objects[row].emplace_back(c, box);
      annotations.add(images[row].id, {label, box});
    }
  }

  std::vector<DescriptorSet> sets;
  for (const GridSpec& grid : config.grids) {
    const std::size_t cells = static_cast<std::size_t>(grid.cells());
    std::vector<float> data(config.images * cells * config.dim);
    for (std::size_t row = 0; row < config.images; ++row) {
      for (std::size_t m = 0; m < cells; ++m) {
        const auto rect = cell_rectangle(grid, static_cast<int>(m), config.width, config.height);
        float* cell = data.data() + (row * cells + m) * config.dim;
        std::vector<double> v(config.dim);
        for (auto& x : v) x = config.noise_sigma * rng.normal();
        for (const auto& [c, box] : objects[row]) {
          const double overlap = intersection_area(box, rect);
          if (overlap <= 0.0) continue;
          const double share = grid.is_global() ? box.area() / static_cast<double>(rect.area()) : 1.0;
          for (std::size_t j = 0; j < config.dim; ++j) v[j] += strength * share * directions[c][j];
        }
        for (std::size_t j = 0; j < config.dim; ++j) cell[j] = static_cast<float>(v[j]);
      }
    }
    sets.emplace_back(grid, config.images, config.dim, std::move(data), "planted-" + grid.name());
  }

  ImageManifest manifest("planted-synthetic", std::move(images));
  out.dataset = std::make_shared<const Dataset>(std::move(manifest), std::move(annotations), std::move(sets));
  return out;
}

// Writes manifest.json, annotations.json and one features_RxC.bin per grid.
inline std::vector<std::filesystem::path> write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "manifest.json", manifest_to_json(dataset.manifest()));
  if (dataset.has_annotations()) write_json_file(dir / "annotations.json", annotations_to_json(dataset.annotations()));
  std::vector<std::filesystem::path> files;
  for (const auto& grid : dataset.grids()) {
    auto path = dir / ("features_" + grid.name() + ".bin");
    write_descriptors(path, dataset.descriptors(grid));
    files.push_back(std::move(path));
  }
  return files;
}

}  // namespace hitlor::synthetic
