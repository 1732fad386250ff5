#pragma once

#include <naptron/binary_pattern.hpp>
#include <naptron/box.hpp>
#include <naptron/error.hpp>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace naptron {

/// Row-major view of a [P, Out] fully connected layer output.
struct ProposalMatrix {
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Activation row of one proposal in an FC head.
inline ActivationVector extract_fc_pattern(const ProposalMatrix& m, std::size_t proposal_index) {
  if (m.values.size() != m.rows * m.cols) throw InputError("proposal matrix size mismatch");
  if (proposal_index >= m.rows)
    throw InputError("proposal index " + std::to_string(proposal_index) + " out of range (" +
                     std::to_string(m.rows) + " rows)");
  auto row = m.values.subspan(proposal_index * m.cols, m.cols);
  return ActivationVector(row.begin(), row.end());
}

/// [W, H, C] feature map stored row-major in (h, w, c) order, together with
/// the size of the image it was computed from.
struct FeatureMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<double> values;
  double image_width = 0;
  double image_height = 0;

  void validate() const {
    if (width == 0 || height == 0 || channels == 0)
      throw InputError("feature map dimensions must be >= 1");
    if (values.size() != width * height * channels)
      throw InputError("feature map value count does not equal W*H*C");
  }

  double at(std::size_t w, std::size_t h, std::size_t c) const {
    return values[(h * width + w) * channels + c];
  }
};

/// Column (w) and row (h) of a feature-map cell.
struct Cell {
  std::size_t w = 0;
  std::size_t h = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Cell whose location corresponds to the box center under proportional
/// image-to-map scaling, floored and clamped into the map.
inline Cell map_box_to_cell(const BoxGeometry& box, const FeatureMap& map) {
  require_valid(box);
  if (!(map.image_width > 0 && map.image_height > 0))
    throw InputError("feature map has no source image size");
  if (map.width == 0 || map.height == 0) throw InputError("feature map dimensions must be >= 1");
  auto scale = [](double center, std::size_t cells, double extent) {
    const double raw = std::floor(center * static_cast<double>(cells) / extent);
    const double hi = static_cast<double>(cells - 1);
    return static_cast<std::size_t>(std::clamp(raw, 0.0, hi));
  };
  return {scale(box.center_x(), map.width, map.image_width),
          scale(box.center_y(), map.height, map.image_height)};
}

/// C-long channel vector at one cell of a convolutional head output.
inline ActivationVector extract_conv_pattern(const FeatureMap& map, Cell cell) {
  map.validate();
  if (cell.w >= map.width || cell.h >= map.height)
    throw InputError("cell (" + std::to_string(cell.w) + ", " + std::to_string(cell.h) +
                     ") outside " + std::to_string(map.width) + "x" + std::to_string(map.height) +
                     " map");
  const auto first = map.values.begin() +
                     static_cast<std::ptrdiff_t>((cell.h * map.width + cell.w) * map.channels);
  return ActivationVector(first, first + static_cast<std::ptrdiff_t>(map.channels));
}

/// Per-channel mean over all W*H cells, flattening a backbone map to a C-long
/// vector. Summation runs in storage order.
inline ActivationVector channel_mean_flatten(const FeatureMap& map) {
  map.validate();
  ActivationVector sums(map.channels, 0.0);
  const std::size_t cells = map.width * map.height;
  for (std::size_t i = 0; i < cells; ++i)
    for (std::size_t c = 0; c < map.channels; ++c) sums[c] += map.values[i * map.channels + c];
  for (auto& s : sums) s /= static_cast<double>(cells);
  return sums;
}

}  // namespace naptron
