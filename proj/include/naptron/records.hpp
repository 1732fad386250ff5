#pragma once

#include <naptron/box.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace naptron {

using ImageId = std::int64_t;
using DetId = std::int64_t;

/// Where one layer's activations for a detection live. In vector mode this is
/// a float range inside activations.bin; in map mode `offset` points at the
/// header of a feature map inside feature_maps.bin.
struct ActivationLocator {
  int layer = 0;
  std::uint64_t offset = 0;  // bytes
  std::uint64_t count = 0;   // float elements
  friend bool operator==(const ActivationLocator&, const ActivationLocator&) = default;
};

struct GroundTruthRecord {
  ImageId image_id = 0;
  std::int64_t gt_id = 0;
  BoxGeometry box;
  int class_id = 0;
  bool known = true;
};

struct DetectionRecord {
  ImageId image_id = 0;
  DetId det_id = 0;
  BoxGeometry box;
  int label = 0;
  double score = 0.0;
  std::optional<std::vector<double>> softmax;
  std::optional<std::vector<double>> logits;
  std::vector<ActivationLocator> activations;

  const ActivationLocator* locator(int layer) const {
    for (const auto& loc : activations)
      if (loc.layer == layer) return &loc;
    return nullptr;
  }
};

}  // namespace naptron
