#pragma once

#include <naptron/box.hpp>
#include <naptron/error.hpp>
#include <naptron/records.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace naptron {

enum class SampleKind { IdTruePositive, OutOfDistribution, FalsePositiveBackground };

inline std::string_view to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::IdTruePositive: return "ID_TP";
    case SampleKind::OutOfDistribution: return "OOD";
    case SampleKind::FalsePositiveBackground: return "FP_BACKGROUND";
  }
  return "?";
}

struct SampleLabel {
  SampleKind kind = SampleKind::FalsePositiveBackground;
  std::optional<std::int64_t> gt_id;  // absent for background
  double iou = 0.0;                   // IOU with the matched ground truth, else best IOU seen
};

inline constexpr double kDefaultIouThreshold = 0.5;

/// Labels one detection against the ground truths of its image. A same-class
/// known match above `lambda` wins over an unknown-class match; a ground
/// truth may match any number of detections.
inline SampleLabel label_detection(const DetectionRecord& det,
                                   std::span<const GroundTruthRecord* const> image_gts,
                                   double lambda) {
  const GroundTruthRecord* best_known = nullptr;
  const GroundTruthRecord* best_unknown = nullptr;
  double known_iou = 0.0, unknown_iou = 0.0, any_iou = 0.0;
  for (const GroundTruthRecord* gt : image_gts) {
    const double v = iou(det.box, gt->box);
    any_iou = std::max(any_iou, v);
    if (gt->known) {
      if (gt->class_id == det.label && v > known_iou) {
        known_iou = v;
        best_known = gt;
      }
    } else if (v > unknown_iou) {
      unknown_iou = v;
      best_unknown = gt;
    }
  }
  if (best_known && known_iou > lambda)
    return {SampleKind::IdTruePositive, best_known->gt_id, known_iou};
  if (best_unknown && unknown_iou > lambda)
    return {SampleKind::OutOfDistribution, best_unknown->gt_id, unknown_iou};
  return {SampleKind::FalsePositiveBackground, std::nullopt, any_iou};
}

inline void require_iou_threshold(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("IOU threshold must lie in (0, 1)");
}

/// One label per detection, in input order.
inline std::vector<SampleLabel> label_predictions(std::span<const DetectionRecord> detections,
                                                  std::span<const GroundTruthRecord> ground_truths,
                                                  double lambda = kDefaultIouThreshold) {
  require_iou_threshold(lambda);
  std::unordered_map<ImageId, std::vector<const GroundTruthRecord*>> by_image;
  for (const auto& gt : ground_truths) by_image[gt.image_id].push_back(&gt);

  std::vector<SampleLabel> labels;
  labels.reserve(detections.size());
  static const std::vector<const GroundTruthRecord*> none;
  for (const auto& det : detections) {
    auto it = by_image.find(det.image_id);
    const auto& gts = it == by_image.end() ? none : it->second;
    labels.push_back(label_detection(det, gts, lambda));
  }
  return labels;
}

}  // namespace naptron
