#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlor/error.hpp"
#include "hitlor/geometry.hpp"

namespace hitlor {

struct ImageEntry {
  std::string id;
  std::optional<std::string> path;
  int width = 0;
  int height = 0;
};

// Ordered image list; the position of an image is its row in every
// descriptor file of the dataset.
class ImageManifest {
 public:
  ImageManifest() = default;
  ImageManifest(std::string dataset_name, std::vector<ImageEntry> images)
      : name_(std::move(dataset_name)), images_(std::move(images)) {
    for (std::size_t i = 0; i < images_.size(); ++i) {
      const auto& img = images_[i];
      if (img.id.empty()) throw ValidationError("image " + std::to_string(i) + " has an empty id", "id");
      if (img.width <= 0 || img.height <= 0) {
        throw ValidationError("image '" + img.id + "' must have positive width and height", "width");
      }
      if (!index_.emplace(img.id, i).second) throw ValidationError("duplicate image id '" + img.id + "'", "id");
    }
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return images_.size(); }
  const std::vector<ImageEntry>& images() const noexcept { return images_; }
  const ImageEntry& operator[](std::size_t row) const { return images_.at(row); }

  std::optional<std::size_t> find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t row_of(std::string_view id) const {
    if (auto row = find(id)) return *row;
    throw ValidationError("unknown image id '" + std::string(id) + "'", "image_id");
  }
  const ImageEntry& at(std::string_view id) const { return images_[row_of(id)]; }

 private:
  std::string name_;
  std::vector<ImageEntry> images_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Instance {
  std::string class_label;
  BBox bbox;
};

// Ground-truth object instances per image. Only the oracle and the
// evaluation code read it.
class AnnotationStore {
 public:
  AnnotationStore() = default;

  void add(const std::string& image_id, Instance instance) { by_image_[image_id].push_back(std::move(instance)); }

  const std::vector<Instance>& instances(const std::string& image_id) const {
    static const std::vector<Instance> kNone;
    const auto it = by_image_.find(image_id);
    return it == by_image_.end() ? kNone : it->second;
  }

  bool contains_class(const std::string& image_id, const std::string& class_label) const {
    for (const auto& inst : instances(image_id)) {
      if (inst.class_label == class_label) return true;
    }
    return false;
  }

  std::set<std::string> classes() const {
    std::set<std::string> out;
    for (const auto& [id, list] : by_image_) {
      for (const auto& inst : list) out.insert(inst.class_label);
    }
    return out;
  }

  const std::map<std::string, std::vector<Instance>>& all() const noexcept { return by_image_; }

 private:
  std::map<std::string, std::vector<Instance>> by_image_;
};

// N x (M*d) float matrix for one grid configuration.
class DescriptorSet {
 public:
  DescriptorSet() = default;
  DescriptorSet(GridSpec grid, std::size_t images, std::size_t dim, std::vector<float> data, std::string source_tag)
      : grid_(grid), images_(images), dim_(dim), data_(std::move(data)), tag_(std::move(source_tag)) {
    if (grid_.rows <= 0 || grid_.cols <= 0) throw ValidationError("grid must be at least 1x1", "grid");
    if (dim_ == 0) throw ValidationError("descriptor dimension must be positive", "dim");
    if (data_.size() != images_ * row_width()) {
      throw ValidationError("descriptor payload has " + std::to_string(data_.size()) + " values, expected " +
                            std::to_string(images_ * row_width()));
    }
    for (std::size_t i = 0; i < images_; ++i) {
      for (float v : row(i)) {
        if (!std::isfinite(v)) throw ValidationError("non-finite descriptor value in row " + std::to_string(i), "data");
      }
    }
  }

  const GridSpec& grid() const noexcept { return grid_; }
  std::size_t images() const noexcept { return images_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t cells() const noexcept { return static_cast<std::size_t>(grid_.cells()); }
  std::size_t row_width() const noexcept { return cells() * dim_; }
  const std::string& source_tag() const noexcept { return tag_; }
  std::span<const float> data() const noexcept { return data_; }

  std::span<const float> row(std::size_t image) const {
    return std::span<const float>(data_).subspan(image * row_width(), row_width());
  }
  std::span<const float> cell(std::size_t image, std::size_t m) const {
    return std::span<const float>(data_).subspan(image * row_width() + m * dim_, dim_);
  }

 private:
  GridSpec grid_;
  std::size_t images_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::string tag_;
};

// ---------------------------------------------------------------------------
// HITLORF1 binary descriptor format (little-endian):
//   "HITLORF1" | u32 version=1 | u32 N | u32 d | u16 rows | u16 cols |
//   32-byte zero-padded source tag | N*rows*cols*d f32 values
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 8> kDescriptorMagic{'H', 'I', 'T', 'L', 'O', 'R', 'F', '1'};
inline constexpr std::uint32_t kDescriptorVersion = 1;
inline constexpr std::size_t kSourceTagBytes = 32;
inline constexpr std::size_t kDescriptorHeaderBytes = 8 + 4 + 4 + 4 + 2 + 2 + kSourceTagBytes;

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::span<const unsigned char> bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[offset + i]) << (8 * i);
  return value;
}

}  // namespace detail

inline std::vector<unsigned char> encode_descriptors(const DescriptorSet& set) {
  if (set.source_tag().size() > kSourceTagBytes) throw ValidationError("source tag longer than 32 bytes", "source_tag");
  std::vector<unsigned char> out;
  out.reserve(kDescriptorHeaderBytes + set.data().size() * 4);
  out.insert(out.end(), kDescriptorMagic.begin(), kDescriptorMagic.end());
  detail::put_le<std::uint32_t>(out, kDescriptorVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.images()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(set.grid().rows));
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(set.grid().cols));
  std::array<unsigned char, kSourceTagBytes> tag{};
  std::memcpy(tag.data(), set.source_tag().data(), set.source_tag().size());
  out.insert(out.end(), tag.begin(), tag.end());
  for (float v : set.data()) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    detail::put_le<std::uint32_t>(out, bits);
  }
  return out;
}

// `origin` names the file in error messages.
inline DescriptorSet decode_descriptors(std::span<const unsigned char> bytes, const std::string& origin = "<memory>") {
  if (bytes.size() < kDescriptorHeaderBytes) throw LoadError(origin + ": truncated descriptor header");
  if (!std::equal(kDescriptorMagic.begin(), kDescriptorMagic.end(), bytes.begin())) {
    throw LoadError(origin + ": bad magic, expected HITLORF1");
  }
  const auto version = detail::get_le<std::uint32_t>(bytes, 8);
  if (version != kDescriptorVersion) throw LoadError(origin + ": unsupported version " + std::to_string(version));
  const auto n = detail::get_le<std::uint32_t>(bytes, 12);
  const auto d = detail::get_le<std::uint32_t>(bytes, 16);
  const auto rows = detail::get_le<std::uint16_t>(bytes, 20);
  const auto cols = detail::get_le<std::uint16_t>(bytes, 22);
  if (d == 0 || rows == 0 || cols == 0) throw LoadError(origin + ": zero dimension in header");
  const auto tag_bytes = bytes.subspan(24, kSourceTagBytes);
  std::string tag(reinterpret_cast<const char*>(tag_bytes.data()), kSourceTagBytes);
  tag.resize(std::strlen(tag.c_str()));

  const std::uint64_t count = static_cast<std::uint64_t>(n) * rows * cols * d;
  const std::uint64_t expected = kDescriptorHeaderBytes + count * 4;
  if (bytes.size() < expected) throw LoadError(origin + ": truncated payload");
  if (bytes.size() > expected) throw LoadError(origin + ": " + std::to_string(bytes.size() - expected) + " trailing bytes");

  std::vector<float> data(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto bits = detail::get_le<std::uint32_t>(bytes, kDescriptorHeaderBytes + i * 4);
    std::memcpy(&data[i], &bits, sizeof bits);
  }
  const std::size_t width = static_cast<std::size_t>(rows) * cols * d;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(data[i])) {
      throw ValidationError(origin + ": non-finite descriptor value in row " + std::to_string(i / width), "data");
    }
  }
  return DescriptorSet(GridSpec{rows, cols}, n, d, std::move(data), std::move(tag));
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string() + ": cannot open");
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline DescriptorSet read_descriptors(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_descriptors(bytes, path.string());
}

inline void write_descriptors(const std::filesystem::path& path, const DescriptorSet& set) {
  const auto bytes = encode_descriptors(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError(path.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// JSON manifest and annotations
// ---------------------------------------------------------------------------

inline ImageManifest manifest_from_json(const nlohmann::json& doc, const std::string& origin = "<manifest>") {
  try {
    std::vector<ImageEntry> images;
    for (const auto& item : doc.at("images")) {
      ImageEntry entry;
      entry.id = item.at("id").get<std::string>();
      if (item.contains("path") && !item["path"].is_null()) entry.path = item["path"].get<std::string>();
      entry.width = item.at("width").get<int>();
      entry.height = item.at("height").get<int>();
      images.push_back(std::move(entry));
    }
    return ImageManifest(doc.value("dataset_name", std::string{}), std::move(images));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(origin + ": " + e.what());
  } catch (const ValidationError& e) {
    throw LoadError(origin + ": " + e.what());
  }
}

inline nlohmann::json manifest_to_json(const ImageManifest& manifest) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& img : manifest.images()) {
    images.push_back({{"id", img.id},
                      {"path", img.path ? nlohmann::json(*img.path) : nlohmann::json(nullptr)},
                      {"width", img.width},
                      {"height", img.height}});
  }
  return {{"dataset_name", manifest.name()}, {"images", std::move(images)}};
}

inline AnnotationStore annotations_from_json(const nlohmann::json& doc, const ImageManifest& manifest,
                                             const std::string& origin = "<annotations>") {
  AnnotationStore store;
  try {
    for (const auto& [image_id, list] : doc.at("annotations").items()) {
      const auto row = manifest.find(image_id);
      if (!row) throw LoadError(origin + ": annotation for unknown image '" + image_id + "'");
      const auto& img = manifest[*row];
      for (const auto& item : list) {
        const auto& b = item.at("bbox");
        if (!b.is_array() || b.size() != 4) throw LoadError(origin + ": bbox of '" + image_id + "' must have 4 numbers");
        BBox box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
        try {
          validate_bbox(box, img.width, img.height);
        } catch (const ValidationError& e) {
          throw LoadError(origin + ": image '" + image_id + "': " + e.what());
        }
        store.add(image_id, Instance{item.at("class").get<std::string>(), box});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(origin + ": " + e.what());
  }
  return store;
}

inline nlohmann::json annotations_to_json(const AnnotationStore& store) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [id, list] : store.all()) {
    auto& arr = out[id] = nlohmann::json::array();
    for (const auto& inst : list) {
      arr.push_back({{"class", inst.class_label},
                     {"bbox", {inst.bbox.x_min, inst.bbox.y_min, inst.bbox.x_max, inst.bbox.y_max}}});
    }
  }
  return {{"annotations", std::move(out)}};
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string() + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc, int indent = 2) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError(path.string() + ": cannot open for writing");
  out << doc.dump(indent) << '\n';
}

// Immutable bundle of manifest, optional annotations and one descriptor set
// per grid. Shared read-only between sessions.
class Dataset {
 public:
  Dataset(ImageManifest manifest, std::optional<AnnotationStore> annotations, std::vector<DescriptorSet> sets)
      : manifest_(std::move(manifest)), annotations_(std::move(annotations)) {
    for (auto& set : sets) {
      if (set.images() != manifest_.size()) {
        throw LoadError("descriptor set " + set.grid().name() + " has " + std::to_string(set.images()) +
                        " rows but the manifest lists " + std::to_string(manifest_.size()) + " images");
      }
      if (!sets_.empty() && set.dim() != sets_.begin()->second.dim()) {
        throw LoadError("descriptor set " + set.grid().name() + " has d=" + std::to_string(set.dim()) +
                        ", other grids have d=" + std::to_string(sets_.begin()->second.dim()));
      }
      const GridSpec grid = set.grid();
      if (!sets_.emplace(grid, std::move(set)).second) throw LoadError("two descriptor sets for grid " + grid.name());
    }
    // Tie-break order for rankings: ascending image id.
    id_order_.resize(manifest_.size());
    for (std::size_t i = 0; i < id_order_.size(); ++i) id_order_[i] = i;
    std::sort(id_order_.begin(), id_order_.end(),
              [&](std::size_t a, std::size_t b) { return manifest_[a].id < manifest_[b].id; });
    id_rank_.resize(manifest_.size());
    for (std::size_t r = 0; r < id_order_.size(); ++r) id_rank_[id_order_[r]] = r;
  }

  const ImageManifest& manifest() const noexcept { return manifest_; }
  std::size_t size() const noexcept { return manifest_.size(); }
  bool has_annotations() const noexcept { return annotations_.has_value(); }
  const AnnotationStore& annotations() const {
    if (!annotations_) throw ConfigError("this operation needs ground-truth annotations, none were loaded");
    return *annotations_;
  }

  bool has_grid(const GridSpec& grid) const { return sets_.contains(grid); }
  const DescriptorSet& descriptors(const GridSpec& grid) const {
    const auto it = sets_.find(grid);
    if (it == sets_.end()) throw ConfigError("no descriptor file loaded for grid " + grid.name());
    return it->second;
  }
  std::vector<GridSpec> grids() const {
    std::vector<GridSpec> out;
    for (const auto& [grid, set] : sets_) out.push_back(grid);
    return out;
  }

  // Rank of row i when images are sorted by ascending id.
  std::size_t id_rank(std::size_t row) const { return id_rank_[row]; }

 private:
  ImageManifest manifest_;
  std::optional<AnnotationStore> annotations_;
  std::map<GridSpec, DescriptorSet> sets_;
  std::vector<std::size_t> id_order_;
  std::vector<std::size_t> id_rank_;
};

inline std::shared_ptr<const Dataset> load_dataset(const std::filesystem::path& manifest_path,
                                                   const std::optional<std::filesystem::path>& annotation_path,
                                                   std::span<const std::filesystem::path> descriptor_paths) {
  auto manifest = manifest_from_json(read_json_file(manifest_path), manifest_path.string());
  std::optional<AnnotationStore> annotations;
  if (annotation_path) {
    annotations = annotations_from_json(read_json_file(*annotation_path), manifest, annotation_path->string());
  }
  std::vector<DescriptorSet> sets;
  for (const auto& path : descriptor_paths) {
    auto set = read_descriptors(path);
    if (set.images() != manifest.size()) {
      throw LoadError(path.string() + ": declares N=" + std::to_string(set.images()) + " but the manifest lists " +
                      std::to_string(manifest.size()) + " images");
    }
    sets.push_back(std::move(set));
  }
  return std::make_shared<const Dataset>(std::move(manifest), std::move(annotations), std::move(sets));
}

}  // namespace hitlor
