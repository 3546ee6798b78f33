#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hitlor/hitlor.hpp"

namespace hitlor::testing {

inline std::string image_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "im%03zu", i);
  return buf;
}

// Random-descriptor dataset: n images of size w x h, one descriptor set per
// grid filled with standard normal values.
inline std::shared_ptr<const Dataset> random_dataset(std::size_t n, std::size_t d, const std::vector<GridSpec>& grids,
                                                     std::optional<AnnotationStore> annotations = std::nullopt,
                                                     std::uint64_t seed = 1, int w = 100, int h = 100) {
  Rng rng(seed);
  std::vector<ImageEntry> images;
  for (std::size_t i = 0; i < n; ++i) images.push_back({image_id(i), std::nullopt, w, h});
  std::vector<DescriptorSet> sets;
  for (const auto& g : grids) {
    std::vector<float> data(n * static_cast<std::size_t>(g.cells()) * d);
    for (auto& v : data) v = static_cast<float>(rng.normal());
    sets.emplace_back(g, n, d, std::move(data), "test-" + g.name());
  }
  return std::make_shared<const Dataset>(ImageManifest("toy", std::move(images)), std::move(annotations), std::move(sets));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hitlor-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Small planted dataset shared by loop, bench and service tests.
inline synthetic::PlantedDataset small_planted(std::uint64_t seed = 7, std::size_t images = 200) {
  synthetic::PlantedConfig c;
  c.images = images;
  c.seed = seed;
  c.classes = 4;
  c.small_classes = 2;
  c.dim = 8;
  return synthetic::generate_planted(c);
}

}  // namespace hitlor::testing

namespace hitlor::testing {

// Linearly separable labeled points: a random hyperplane with offset, points
// kept only if their distance to it is at least `gap`. Both classes present.
struct SeparableInstance {
  std::vector<std::vector<double>> x;  // raw points, no bias column
  std::vector<int> y;                  // +1 / -1
};

inline SeparableInstance separable_instance(Rng& rng, std::size_t n, std::size_t d, double gap = 0.1) {
  for (;;) {
    std::vector<double> w(d);
    double norm = 0;
    for (auto& v : w) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    const double b = rng.uniform(-0.5, 0.5);
    SeparableInstance inst;
    int pos = 0;
    while (inst.x.size() < n) {
      std::vector<double> p(d);
      for (auto& v : p) v = rng.normal();
      double m = b;
      for (std::size_t k = 0; k < d; ++k) m += w[k] * p[k];
      if (std::abs(m) / norm < gap) continue;
      inst.y.push_back(m > 0 ? 1 : -1);
      pos += m > 0;
      inst.x.push_back(std::move(p));
    }
    if (pos > 0 && pos < static_cast<int>(n)) return inst;
  }
}

inline std::vector<LabeledSample> to_samples(const SeparableInstance& inst) {
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < inst.x.size(); ++i) out.push_back({inst.x[i], inst.y[i] > 0 ? 1 : 0, {}});
  return out;
}

// Raw points with the constant bias column the trainer appends.
inline std::vector<std::vector<double>> with_bias(const std::vector<std::vector<double>>& x) {
  auto out = x;
  for (auto& row : out) row.push_back(1.0);
  return out;
}

}  // namespace hitlor::testing
