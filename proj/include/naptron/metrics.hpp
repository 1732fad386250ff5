#pragma once

#include <naptron/error.hpp>
#include <naptron/labeling.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace naptron {

// All metrics take uncertainty scores with "higher = more OOD".

/// P(ood > id) over all pairs, ties counted one half. Computed from sorted
/// ID scores with exact integer pair counts.
inline double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty())
    throw UndefinedMetricError("AUROC needs at least one ID and one OOD score");
  std::vector<double> id(id_scores.begin(), id_scores.end());
  std::sort(id.begin(), id.end());
  std::uint64_t twice_wins = 0;
  for (double s : ood_scores) {
    const auto lo = std::lower_bound(id.begin(), id.end(), s);
    const auto hi = std::upper_bound(lo, id.end(), s);
    twice_wins += 2 * static_cast<std::uint64_t>(lo - id.begin()) +
                  static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(id.size()) * static_cast<double>(ood_scores.size());
  return static_cast<double>(twice_wins) / (2.0 * pairs);
}

/// Which group the "true positive rate" of FPR@TPR refers to.
enum class FprPositive {
  InDistribution,    // ID accepted as ID counts as a true positive (default)
  OutOfDistribution  // OOD flagged as OOD counts as a true positive
};

namespace detail {
/// Smallest k with k >= target * n, tolerant of representation error.
inline std::size_t required_count(double target, std::size_t n) {
  const double need = target * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(need - 1e-9 * std::max(1.0, need)));
  return std::clamp<std::size_t>(k, 1, n);
}
}  // namespace detail

/// False positive rate at the threshold where `tpr_target` of the positives
/// are retained.
///
/// With ID as positive: tau is the smallest uncertainty such that at least
/// `tpr_target` of ID samples have uncertainty <= tau; the result is the
/// fraction of OOD samples with uncertainty <= tau. With OOD as positive the
/// roles flip: tau is the largest value such that at least `tpr_target` of
/// OOD samples are >= tau, and the result is the fraction of ID samples >= tau.
inline double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                         double tpr_target = 0.95,
                         FprPositive positive = FprPositive::InDistribution) {
  if (id_scores.empty() || ood_scores.empty())
    throw UndefinedMetricError("FPR@TPR needs at least one ID and one OOD score");
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) throw ConfigError("TPR target must lie in (0, 1]");

  if (positive == FprPositive::InDistribution) {
    std::vector<double> id(id_scores.begin(), id_scores.end());
    std::sort(id.begin(), id.end());
    const double tau = id[detail::required_count(tpr_target, id.size()) - 1];
    const auto accepted = std::count_if(ood_scores.begin(), ood_scores.end(),
                                        [tau](double s) { return s <= tau; });
    return static_cast<double>(accepted) / static_cast<double>(ood_scores.size());
  }
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end(), std::greater<>());
  const double tau = ood[detail::required_count(tpr_target, ood.size()) - 1];
  const auto flagged = std::count_if(id_scores.begin(), id_scores.end(),
                                     [tau](double s) { return s >= tau; });
  return static_cast<double>(flagged) / static_cast<double>(id_scores.size());
}

struct ScoredSample {
  double uncertainty = 0.0;
  SampleKind kind = SampleKind::IdTruePositive;
  int predicted_class = 0;
  double softmax = 0.0;
};

struct ClassValue {
  int class_id = 0;
  std::size_t id_count = 0;
  std::size_t ood_count = 0;
  std::optional<double> value;      // absent when excluded
  std::string excluded_reason;
};

struct PerClassTable {
  std::vector<ClassValue> classes;  // ascending class id
  double macro = 0.0;
  std::size_t included = 0;
};

using MetricFn = std::function<double(std::span<const double>, std::span<const double>)>;

/// Evaluates `metric` separately for every predicted class with at least one
/// ID and one OOD sample and averages the results without weighting.
inline PerClassTable per_class_macro(std::span<const ScoredSample> samples, const MetricFn& metric) {
  if (samples.empty()) throw UndefinedMetricError("no samples to evaluate");
  struct Group {
    std::vector<double> id, ood;
  };
  std::map<int, Group> groups;
  for (const auto& s : samples) {
    auto& g = groups[s.predicted_class];
    if (s.kind == SampleKind::IdTruePositive) g.id.push_back(s.uncertainty);
    else if (s.kind == SampleKind::OutOfDistribution) g.ood.push_back(s.uncertainty);
    else throw InputError("background false positives cannot enter OOD metrics");
  }
  PerClassTable table;
  double sum = 0.0;
  for (const auto& [cls, g] : groups) {
    ClassValue row{cls, g.id.size(), g.ood.size(), std::nullopt, {}};
    if (g.id.empty()) row.excluded_reason = "no ID samples";
    else if (g.ood.empty()) row.excluded_reason = "no OOD samples";
    else {
      row.value = metric(g.id, g.ood);
      sum += *row.value;
      ++table.included;
    }
    table.classes.push_back(std::move(row));
  }
  if (table.included == 0)
    throw UndefinedMetricError("no class has both ID and OOD samples");
  table.macro = sum / static_cast<double>(table.included);
  return table;
}

struct MetricOptions {
  double tpr_target = 0.95;
  FprPositive positive = FprPositive::InDistribution;
};

struct ClassMetrics {
  int class_id = 0;
  std::size_t id_count = 0;
  std::size_t ood_count = 0;
  std::optional<double> auroc;
  std::optional<double> fpr95;
  std::string excluded_reason;
};

/// Per-class AUROC and FPR@TPR with their macro averages; macro values are
/// absent when no class is includable.
struct MacroMetrics {
  std::vector<ClassMetrics> classes;
  std::optional<double> auroc;
  std::optional<double> fpr95;
  std::size_t id_count = 0;
  std::size_t ood_count = 0;
  std::string undefined_reason;
};

/// Like per_class_macro for both metrics, but tolerant of undefined results
/// and of background samples, which are skipped.
inline MacroMetrics evaluate_ood(std::span<const ScoredSample> samples,
                                 const MetricOptions& opts = {}) {
  std::vector<ScoredSample> metric_samples;
  for (const auto& s : samples)
    if (s.kind != SampleKind::FalsePositiveBackground) metric_samples.push_back(s);

  MacroMetrics out;
  for (const auto& s : metric_samples)
    (s.kind == SampleKind::IdTruePositive ? out.id_count : out.ood_count) += 1;
  try {
    const auto au = per_class_macro(metric_samples, [](auto id, auto ood) { return auroc(id, ood); });
    const auto fp = per_class_macro(metric_samples, [&](auto id, auto ood) {
      return fpr_at_tpr(id, ood, opts.tpr_target, opts.positive);
    });
    out.auroc = au.macro;
    out.fpr95 = fp.macro;
    for (std::size_t i = 0; i < au.classes.size(); ++i)
      out.classes.push_back({au.classes[i].class_id, au.classes[i].id_count,
                             au.classes[i].ood_count, au.classes[i].value, fp.classes[i].value,
                             au.classes[i].excluded_reason});
  } catch (const UndefinedMetricError& e) {
    out.undefined_reason = e.what();
    std::map<int, ClassMetrics> rows;
    for (const auto& s : metric_samples) {
      auto& r = rows[s.predicted_class];
      r.class_id = s.predicted_class;
      (s.kind == SampleKind::IdTruePositive ? r.id_count : r.ood_count) += 1;
    }
    for (auto& [_, r] : rows) {
      r.excluded_reason = r.id_count == 0 ? "no ID samples" : "no OOD samples";
      out.classes.push_back(r);
    }
  }
  return out;
}

struct CurvePoint {
  std::size_t fp_count = 0;
  double tpr = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct CurveInput {
  double softmax = 0.0;
  SampleKind kind = SampleKind::FalsePositiveBackground;
  std::int64_t image_id = 0;
  std::optional<std::int64_t> gt_id;  // matched GT; repeat hits recall it once
};

/// TPR against false-positive count while the confidence threshold sweeps
/// from high to low. TPR is the fraction of the N known objects recalled by
/// an ID true positive, so extra hits on one GT do not raise it; OOD and
/// background detections both count as false positives. Detections with equal
/// confidence are admitted together. Starts at (0, 0).
inline std::vector<CurvePoint> tpr_fp_curve(std::span<const CurveInput> detections,
                                            std::size_t known_objects) {
  if (known_objects == 0) throw InputError("TPR-vs-FP curve needs N > 0 known objects");
  std::vector<CurveInput> sorted(detections.begin(), detections.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const CurveInput& a, const CurveInput& b) { return a.softmax > b.softmax; });
  std::vector<CurvePoint> curve{{0, 0.0}};
  std::size_t tp = 0, fp = 0;
  std::set<std::pair<std::int64_t, std::int64_t>> recalled;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    for (; j < sorted.size() && sorted[j].softmax == sorted[i].softmax; ++j) {
      const auto& d = sorted[j];
      if (d.kind != SampleKind::IdTruePositive)
        ++fp;
      else if (!d.gt_id || recalled.insert({d.image_id, *d.gt_id}).second)
        ++tp;
    }
    if (tp > known_objects) throw InputError("more recalled objects than N known objects");
    curve.push_back({fp, static_cast<double>(tp) / static_cast<double>(known_objects)});
    i = j;
  }
  return curve;
}

/// Trapezoidal area under a TPR-vs-FP curve with the FP axis normalized by
/// `fp_cap` and truncated at 1. The curve is held flat past its last point.
inline double auc_limited(std::span<const CurvePoint> curve, std::size_t fp_cap) {
  if (fp_cap == 0) throw InputError("FP cap must be positive");
  if (curve.empty()) return 0.0;
  const double cap = static_cast<double>(fp_cap);
  double area = 0.0;
  double px = static_cast<double>(curve.front().fp_count) / cap;
  double py = curve.front().tpr;
  if (px >= 1.0) return 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double x = static_cast<double>(curve[i].fp_count) / cap;
    const double y = curve[i].tpr;
    if (x >= 1.0) {
      const double y_cut = x == px ? y : py + (y - py) * (1.0 - px) / (x - px);
      area += (1.0 - px) * (py + y_cut) / 2.0;
      return area;
    }
    area += (x - px) * (py + y) / 2.0;
    px = x;
    py = y;
  }
  area += (1.0 - px) * py;
  return area;
}

/// AUC limited to 2N false positives.
inline double auc_2n(std::span<const CurvePoint> curve, std::size_t known_objects) {
  return auc_limited(curve, 2 * known_objects);
}

struct SweepRow {
  double threshold = 0.0;
  std::size_t retained = 0;  // detections of every label with softmax >= threshold
  MacroMetrics metrics;
};

/// Recomputes OOD metrics after dropping detections whose softmax score falls
/// below each threshold. Labels are not recomputed.
inline std::vector<SweepRow> nms_sweep(std::span<const ScoredSample> samples,
                                       std::span<const double> thresholds,
                                       const MetricOptions& opts = {}) {
  for (double t : thresholds)
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("sweep thresholds must lie in [0, 1]");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw ConfigError("sweep thresholds must be ascending");
  std::vector<SweepRow> rows;
  for (double t : thresholds) {
    std::vector<ScoredSample> kept;
    for (const auto& s : samples)
      if (s.softmax >= t) kept.push_back(s);
    rows.push_back({t, kept.size(), evaluate_ood(kept, opts)});
  }
  return rows;
}

struct ScatterRow {
  double softmax = 0.0;
  double uncertainty = 0.0;
  SampleKind kind = SampleKind::FalsePositiveBackground;
};

inline std::vector<ScatterRow> scatter_export(std::span<const ScoredSample> samples) {
  std::vector<ScatterRow> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back({s.softmax, s.uncertainty, s.kind});
  return rows;
}

}  // namespace naptron
