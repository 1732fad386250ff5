#pragma once

#include <naptron/binary_pattern.hpp>
#include <naptron/error.hpp>
#include <naptron/labeling.hpp>
#include <naptron/pattern_store.hpp>
#include <naptron/records.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace naptron {

enum class Method { NaptronMin, NaptronAvg, Msp, Energy };
enum class Reduction { Min, Avg };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::NaptronMin: return "naptron-min";
    case Method::NaptronAvg: return "naptron-avg";
    case Method::Msp: return "msp";
    case Method::Energy: return "energy";
  }
  return "?";
}

inline Method parse_method(std::string_view name) {
  for (Method m : {Method::NaptronMin, Method::NaptronAvg, Method::Msp, Method::Energy})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown scoring method '" + std::string(name) + "'");
}

inline bool uses_store(Method m) { return m == Method::NaptronMin || m == Method::NaptronAvg; }

struct ScoringConfig {
  Method method = Method::NaptronMin;
  double temperature = 1.0;  // energy only

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw ConfigError("energy temperature must be positive");
  }
};

/// Anything that can hand out the activation vector of a detection at a layer.
template <typename S>
concept ActivationSource = requires(const S& s, const DetectionRecord& d, int layer) {
  { s.fetch(d, layer) } -> std::convertible_to<ActivationVector>;
};

inline void validate_store_config(const StoreConfig& cfg) {
  if (!(cfg.percentile >= 0.0 && cfg.percentile <= 1.0))
    throw ConfigError("binarization percentile p must lie in [0, 1]");
  if (!(cfg.train_iou >= 0.0 && cfg.train_iou <= 1.0))
    throw ConfigError("training IOU threshold must lie in [0, 1]");
  if (!(cfg.softmax_threshold >= 0.0 && cfg.softmax_threshold <= 1.0))
    throw ConfigError("training softmax threshold s must lie in [0, 1]");
  if (cfg.layer < 0) throw ConfigError("layer index must be non-negative");
}

/// True when a labeled training detection enters the pattern store.
inline bool admitted_to_store(const DetectionRecord& det, const SampleLabel& label,
                              const StoreConfig& cfg) {
  return label.kind == SampleKind::IdTruePositive && label.iou > cfg.train_iou &&
         det.score >= cfg.softmax_threshold;
}

/// Builds and freezes the known-pattern store from labeled training
/// detections. Every id in `known_classes` gets a (possibly empty) list.
template <ActivationSource Source>
PatternStore build_store(std::span<const DetectionRecord> detections,
                         std::span<const SampleLabel> labels, const Source& source,
                         const StoreConfig& cfg, std::span<const int> known_classes) {
  validate_store_config(cfg);
  if (detections.size() != labels.size())
    throw InputError("detections and labels differ in length");
  PatternStore store(cfg);
  for (int c : known_classes) store.register_class(c);
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& det = detections[i];
    if (!admitted_to_store(det, labels[i], cfg)) continue;
    const ActivationVector act = source.fetch(det, cfg.layer);
    store.insert(det.label, binarize(std::span<const double>(act), cfg.percentile));
  }
  if (store.total_count() == 0)
    throw BuildError("no training detection qualified for the pattern store");
  store.freeze();
  return store;
}

/// NAPTRON uncertainty: distance from the detection's binarized activations
/// to the known patterns of its predicted class.
inline double score_naptron(const PatternStore& store, std::span<const double> activation,
                            int label, Reduction reduction) {
  if (!store.frozen()) throw StateError("scoring requires a frozen store");
  const BinaryPattern query = binarize(activation, store.config().percentile);
  if (reduction == Reduction::Min)
    return static_cast<double>(store.min_distance(label, query));
  return store.avg_distance(label, query);
}

/// Maximum softmax probability, flipped so higher means more uncertain.
inline double score_msp(const DetectionRecord& det) { return 1.0 - det.score; }

/// -T * log(sum_i exp(z_i / T)).
inline double energy(std::span<const double> logits, double temperature = 1.0) {
  if (logits.empty()) throw DataError("energy score needs at least one logit");
  if (!(temperature > 0.0)) throw ConfigError("energy temperature must be positive");
  double hi = -INFINITY;
  for (double z : logits) hi = std::max(hi, z / temperature);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z / temperature - hi);
  return -temperature * (hi + std::log(sum));
}

inline double score_energy(const DetectionRecord& det, double temperature = 1.0) {
  if (!det.logits) throw DataError("detection " + std::to_string(det.det_id) + " has no logits");
  return energy(*det.logits, temperature);
}

}  // namespace naptron
