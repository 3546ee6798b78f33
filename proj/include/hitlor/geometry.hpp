#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "hitlor/error.hpp"

namespace hitlor {

// Regular R x C partition of an image. 1x1 is the global descriptor.
struct GridSpec {
  int rows = 1;
  int cols = 1;

  int cells() const noexcept { return rows * cols; }
  bool is_global() const noexcept { return rows == 1 && cols == 1; }
  std::string name() const { return std::to_string(rows) + "x" + std::to_string(cols); }

  friend auto operator<=>(const GridSpec&, const GridSpec&) = default;
};

inline GridSpec parse_grid(std::string_view text) {
  const auto sep = text.find_first_of("xX");
  if (sep == std::string_view::npos) throw ConfigError("grid must look like RxC, got '" + std::string(text) + "'");
  int rows = 0;
  int cols = 0;
  const auto r = std::from_chars(text.data(), text.data() + sep, rows);
  const auto c = std::from_chars(text.data() + sep + 1, text.data() + text.size(), cols);
  if (r.ec != std::errc{} || r.ptr != text.data() + sep || c.ec != std::errc{} ||
      c.ptr != text.data() + text.size() || rows <= 0 || cols <= 0 || rows > 0xFFFF || cols > 0xFFFF) {
    throw ConfigError("grid must look like RxC with positive R and C, got '" + std::string(text) + "'");
  }
  return {rows, cols};
}

// Half-open integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  std::int64_t area() const noexcept {
    return static_cast<std::int64_t>(std::max(0, x1 - x0)) * std::max(0, y1 - y0);
  }
  bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

// Object bounding box in continuous pixel coordinates.
struct BBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return std::max(0.0, width()) * std::max(0.0, height()); }

  static BBox full_image(int width, int height) {
    return {0.0, 0.0, static_cast<double>(width), static_cast<double>(height)};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
  friend auto operator<=>(const BBox& a, const BBox& b) {
    return std::tie(a.x_min, a.y_min, a.x_max, a.y_max) <=> std::tie(b.x_min, b.y_min, b.x_max, b.y_max);
  }
};

// Throws ValidationError unless 0 <= x_min < x_max <= width (same for y)
// and every coordinate is finite.
inline void validate_bbox(const BBox& box, int width, int height) {
  const bool finite = std::isfinite(box.x_min) && std::isfinite(box.y_min) && std::isfinite(box.x_max) &&
                      std::isfinite(box.y_max);
  if (!finite) throw ValidationError("bbox has non-finite coordinates", "bbox");
  if (!(box.x_min < box.x_max) || !(box.y_min < box.y_max)) {
    throw ValidationError("bbox has zero or negative area", "bbox");
  }
  if (box.x_min < 0 || box.y_min < 0 || box.x_max > width || box.y_max > height) {
    throw ValidationError("bbox [" + std::to_string(box.x_min) + ", " + std::to_string(box.y_min) + ", " +
                              std::to_string(box.x_max) + ", " + std::to_string(box.y_max) +
                              "] lies outside the " + std::to_string(width) + "x" + std::to_string(height) +
                              " image",
                          "bbox");
  }
}

// Pixel rectangle of cell m (row-major). Boundaries use floor division so
// the cells tile the image exactly for any width/height.
inline PixelRect cell_rectangle(const GridSpec& grid, int m, int width, int height) {
  if (m < 0 || m >= grid.cells()) {
    throw std::out_of_range("cell index " + std::to_string(m) + " outside grid " + grid.name());
  }
  const int row = m / grid.cols;
  const int col = m % grid.cols;
  const auto edge = [](int k, int extent, int parts) {
    return static_cast<int>(static_cast<std::int64_t>(k) * extent / parts);
  };
  return {edge(col, width, grid.cols), edge(row, height, grid.rows), edge(col + 1, width, grid.cols),
          edge(row + 1, height, grid.rows)};
}

inline double intersection_area(const BBox& box, const PixelRect& rect) {
  const double w = std::min(box.x_max, static_cast<double>(rect.x1)) - std::max(box.x_min, static_cast<double>(rect.x0));
  const double h = std::min(box.y_max, static_cast<double>(rect.y1)) - std::max(box.y_min, static_cast<double>(rect.y0));
  return (w > 0 && h > 0) ? w * h : 0.0;
}

// Cells overlapped by an object (M+), the rest (M-), and the cell with the
// largest overlap (M*, lowest index on ties).
struct PatchOverlap {
  std::vector<int> positive_cells;
  std::vector<int> negative_cells;
  int best_cell = -1;
  std::vector<double> areas;
};

// A cell joins M+ when its intersection with `box` is strictly positive and
// covers at least `min_fraction` of the cell.
inline PatchOverlap compute_overlap(const BBox& box, const GridSpec& grid, int width, int height,
                                    double min_fraction = 0.0) {
  validate_bbox(box, width, height);
  PatchOverlap out;
  out.areas.resize(grid.cells());
  double best = 0.0;
  for (int m = 0; m < grid.cells(); ++m) {
    const PixelRect rect = cell_rectangle(grid, m, width, height);
    const double area = intersection_area(box, rect);
    out.areas[m] = area;
    const bool overlaps = area > 0.0 && (min_fraction <= 0.0 || area >= min_fraction * static_cast<double>(rect.area()));
    (overlaps ? out.positive_cells : out.negative_cells).push_back(m);
    if (overlaps && area > best) {
      best = area;
      out.best_cell = m;
    }
  }
  if (out.positive_cells.empty()) {
    // The fraction threshold rejected every cell; keep the largest overlap so
    // a positive image always contributes its object.
    const auto it = std::max_element(out.areas.begin(), out.areas.end());
    out.best_cell = static_cast<int>(it - out.areas.begin());
    out.positive_cells.push_back(out.best_cell);
    std::erase(out.negative_cells, out.best_cell);
  }
  return out;
}

}  // namespace hitlor
