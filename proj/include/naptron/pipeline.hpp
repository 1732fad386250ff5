#pragma once

#include <naptron/detail/le_io.hpp>
#include <naptron/error.hpp>
#include <naptron/io/dataset.hpp>
#include <naptron/labeling.hpp>
#include <naptron/metrics.hpp>
#include <naptron/pattern_store.hpp>
#include <naptron/scoring.hpp>

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace naptron::pipeline {

namespace fs = std::filesystem;
using detail::format_double;

// ---------------------------------------------------------------------------
// build

struct BuildOptions {
  std::optional<int> layer;  // defaults to the manifest's penultimate layer
  double percentile = 0.0;
  double train_iou = 0.5;
  double softmax_threshold = 0.0;
  double lambda = kDefaultIouThreshold;
};

inline StoreConfig resolve_store_config(const io::Dataset& ds, const BuildOptions& opts) {
  const int layer = opts.layer.value_or(ds.manifest.default_layer());
  if (layer < 0 || layer >= ds.manifest.layout.layer_count)
    throw ConfigError("layer " + std::to_string(layer) + " outside the dataset's " +
                      std::to_string(ds.manifest.layout.layer_count) + " exported layers");
  StoreConfig cfg{layer, opts.percentile, opts.train_iou, opts.softmax_threshold};
  validate_store_config(cfg);
  return cfg;
}

/// Labels the training detections and stores the patterns of qualifying
/// true positives.
inline PatternStore build(const io::Dataset& ds, const BuildOptions& opts) {
  const StoreConfig cfg = resolve_store_config(ds, opts);
  const auto labels = label_predictions(ds.detections, ds.ground_truths, opts.lambda);
  const auto classes = ds.manifest.known_class_ids();
  try {
    return build_store(std::span<const DetectionRecord>(ds.detections), labels, ds.activations, cfg,
                       classes);
  } catch (const DimensionError& e) {
    throw DataError(std::string("inconsistent activation lengths: ") + e.what());
  } catch (const InputError& e) {
    throw DataError(e.what());
  }
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  Method method = Method::NaptronMin;
  double lambda = kDefaultIouThreshold;
  double nms_threshold = 0.01;
  double temperature = 1.0;
  MetricOptions metric;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct DetectionScore {
  const DetectionRecord* det = nullptr;
  SampleLabel label;
  std::optional<double> uncertainty;
  std::string error;  // set when no uncertainty could be computed
};

struct EvalResult {
  std::string fingerprint;
  EvalOptions options;
  std::optional<StoreConfig> store_config;
  std::vector<DetectionScore> scores;  // retained detections, input order
  std::size_t known_objects = 0;
  MacroMetrics metrics;
  std::vector<CurvePoint> curve;
  std::optional<double> auc;

  std::vector<ScoredSample> samples() const {
    std::vector<ScoredSample> out;
    for (const auto& s : scores)
      if (s.uncertainty)
        out.push_back({*s.uncertainty, s.label.kind, s.det->label, s.det->score});
    return out;
  }
};

namespace detail {

/// Runs fn(i) for i in [0, n) on several threads. Results land by index, so
/// output does not depend on scheduling; the lowest-index exception wins.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::size_t> error_at(threads, n);
  auto work = [&](unsigned t) {
    for (std::size_t i = t; i < n; i += threads) {
      try {
        fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
        error_at[t] = i;
        return;
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }
  const auto first = std::min_element(error_at.begin(), error_at.end()) - error_at.begin();
  if (errors[static_cast<std::size_t>(first)]) std::rethrow_exception(errors[static_cast<std::size_t>(first)]);
}

}  // namespace detail

/// Labels, filters by the NMS score threshold, and scores every retained
/// detection. Detections whose predicted class has no stored patterns keep
/// an error message instead of a score.
inline EvalResult score_dataset(const io::Dataset& ds, const PatternStore* store, const EvalOptions& opts) {
  require_iou_threshold(opts.lambda);
  if (!(opts.nms_threshold >= 0.0 && opts.nms_threshold <= 1.0))
    throw ConfigError("NMS threshold must lie in [0, 1]");
  ScoringConfig{opts.method, opts.temperature}.validate();
  if (uses_store(opts.method)) {
    if (!store) throw ConfigError(std::string(to_string(opts.method)) + " requires a pattern store");
    if (store->config().layer >= ds.manifest.layout.layer_count)
      throw ConfigError("store layer " + std::to_string(store->config().layer) +
                        " is not exported by the dataset");
    if (store->pattern_length() != ds.manifest.layout.vector_length(store->config().layer))
      throw DataError("store pattern length " + std::to_string(store->pattern_length()) +
                      " differs from the dataset's activation length");
  }

  EvalResult res;
  res.fingerprint = ds.fingerprint;
  res.options = opts;
  if (store && uses_store(opts.method)) res.store_config = store->config();
  res.known_objects = ds.known_object_count();

  const auto labels = label_predictions(ds.detections, ds.ground_truths, opts.lambda);
  for (std::size_t i = 0; i < ds.detections.size(); ++i)
    if (ds.detections[i].score >= opts.nms_threshold)
      res.scores.push_back({&ds.detections[i], labels[i], std::nullopt, {}});

  detail::parallel_for(res.scores.size(), opts.threads, [&](std::size_t i) {
    auto& s = res.scores[i];
    switch (opts.method) {
      case Method::Msp: s.uncertainty = score_msp(*s.det); break;
      case Method::Energy: s.uncertainty = score_energy(*s.det, opts.temperature); break;
      case Method::NaptronMin:
      case Method::NaptronAvg: {
        const ActivationVector act = ds.activations.fetch(*s.det, store->config().layer);
        try {
          s.uncertainty = score_naptron(*store, act, s.det->label,
                                        opts.method == Method::NaptronMin ? Reduction::Min : Reduction::Avg);
        } catch (const EmptyClassError& e) {
          s.error = e.what();
        } catch (const DimensionError& e) {
          throw DataError("detection " + std::to_string(s.det->det_id) + ": " + e.what());
        }
        break;
      }
    }
  });

  const auto samples = res.samples();
  res.metrics = evaluate_ood(samples, opts.metric);
  if (res.known_objects > 0) {
    std::vector<CurveInput> curve_in;
    for (const auto& s : res.scores) curve_in.push_back({s.det->score, s.label.kind, s.det->image_id, s.label.gt_id});
    res.curve = tpr_fp_curve(curve_in, res.known_objects);
    res.auc = auc_2n(res.curve, res.known_objects);
  }
  return res;
}

// ---------------------------------------------------------------------------
// report files

inline std::string fmt_opt(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("undefined");
}

inline std::string fpr_positive_name(FprPositive p) {
  return p == FprPositive::InDistribution ? "id" : "ood";
}

/// Rows of the `threshold,class,auroc,fpr95,id_count,ood_count` table for
/// one threshold: one per class, then the macro row.
inline void write_metric_rows(std::ostream& out, double threshold, const MacroMetrics& m) {
  for (const auto& c : m.classes)
    out << format_double(threshold) << ',' << c.class_id << ',' << fmt_opt(c.auroc) << ','
        << fmt_opt(c.fpr95) << ',' << c.id_count << ',' << c.ood_count << '\n';
  out << format_double(threshold) << ",macro," << fmt_opt(m.auroc) << ',' << fmt_opt(m.fpr95) << ','
      << m.id_count << ',' << m.ood_count << '\n';
}

inline constexpr const char* kMetricsHeader = "threshold,class,auroc,fpr95,id_count,ood_count";

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

/// Writes report.txt, metrics.csv, curve.csv, scatter.csv, scores.csv and
/// score_errors.csv into `dir`.
inline void write_report(const fs::path& dir, const EvalResult& r) {
  fs::create_directories(dir);
  std::size_t n_tp = 0, n_ood = 0, n_fp = 0, n_err = 0;
  for (const auto& s : r.scores) {
    if (!s.uncertainty) ++n_err;
    switch (s.label.kind) {
      case SampleKind::IdTruePositive: ++n_tp; break;
      case SampleKind::OutOfDistribution: ++n_ood; break;
      case SampleKind::FalsePositiveBackground: ++n_fp; break;
    }
  }

  std::ostringstream txt;
  txt << "report_version: 1\n"
      << "dataset_fingerprint: " << r.fingerprint << '\n'
      << "method: " << to_string(r.options.method) << '\n'
      << "lambda: " << format_double(r.options.lambda) << '\n'
      << "nms_threshold: " << format_double(r.options.nms_threshold) << '\n'
      << "fpr_positive: " << fpr_positive_name(r.options.metric.positive) << '\n'
      << "tpr_target: " << format_double(r.options.metric.tpr_target) << '\n';
  if (r.options.method == Method::Energy) txt << "temperature: " << format_double(r.options.temperature) << '\n';
  if (r.store_config) {
    txt << "store_layer: " << r.store_config->layer << '\n'
        << "store_p: " << format_double(r.store_config->percentile) << '\n'
        << "store_train_iou: " << format_double(r.store_config->train_iou) << '\n'
        << "store_softmax_s: " << format_double(r.store_config->softmax_threshold) << '\n';
  }
  txt << "detections: " << r.scores.size() << '\n'
      << "id_tp: " << n_tp << '\n'
      << "ood: " << n_ood << '\n'
      << "fp_background: " << n_fp << '\n'
      << "score_errors: " << n_err << '\n'
      << "known_objects: " << r.known_objects << '\n'
      << "macro_auroc: " << fmt_opt(r.metrics.auroc) << '\n'
      << "macro_fpr95: " << fmt_opt(r.metrics.fpr95) << '\n'
      << "auc_2n: " << fmt_opt(r.auc) << '\n';
  if (!r.metrics.undefined_reason.empty()) txt << "macro_undefined_reason: " << r.metrics.undefined_reason << '\n';
  txt << "\n[per_class]\nclass,auroc,fpr95,id_count,ood_count,status\n";
  for (const auto& c : r.metrics.classes)
    txt << c.class_id << ',' << fmt_opt(c.auroc) << ',' << fmt_opt(c.fpr95) << ',' << c.id_count << ','
        << c.ood_count << ',' << (c.excluded_reason.empty() ? "included" : "excluded: " + c.excluded_reason)
        << '\n';
  write_text(dir / "report.txt", txt.str());

  std::ostringstream metrics;
  metrics << kMetricsHeader << '\n';
  write_metric_rows(metrics, r.options.nms_threshold, r.metrics);
  write_text(dir / "metrics.csv", metrics.str());

  std::ostringstream curve;
  curve << "fp_count,tpr\n";
  for (const auto& p : r.curve) curve << p.fp_count << ',' << format_double(p.tpr) << '\n';
  write_text(dir / "curve.csv", curve.str());

  std::ostringstream scatter;
  scatter << "softmax,uncertainty,label\n";
  for (const auto& row : scatter_export(r.samples()))
    scatter << format_double(row.softmax) << ',' << format_double(row.uncertainty) << ','
            << to_string(row.kind) << '\n';
  write_text(dir / "scatter.csv", scatter.str());

  std::ostringstream scores, errors;
  scores << "det_id,image_id,label,sample,softmax,uncertainty\n";
  errors << "det_id,image_id,label,reason\n";
  for (const auto& s : r.scores) {
    scores << s.det->det_id << ',' << s.det->image_id << ',' << s.det->label << ',' << to_string(s.label.kind)
           << ',' << format_double(s.det->score) << ',' << (s.uncertainty ? format_double(*s.uncertainty) : "error")
           << '\n';
    if (!s.uncertainty)
      errors << s.det->det_id << ',' << s.det->image_id << ',' << s.det->label << ",\"" << s.error << "\"\n";
  }
  write_text(dir / "scores.csv", scores.str());
  write_text(dir / "score_errors.csv", errors.str());
}

// ---------------------------------------------------------------------------
// sweep

/// Metrics at every threshold, computed from a single scoring pass.
inline std::vector<SweepRow> sweep(const io::Dataset& ds, const PatternStore* store, EvalOptions opts,
                                   std::span<const double> thresholds) {
  for (double t : thresholds)
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("sweep thresholds must lie in [0, 1]");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw ConfigError("sweep thresholds must be ascending");
  opts.nms_threshold = 0.0;
  const auto scored = score_dataset(ds, store, opts);
  const auto samples = scored.samples();
  return nms_sweep(samples, thresholds, opts.metric);
}

inline std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  for (const auto& row : rows) write_metric_rows(out, row.threshold, row.metrics);
  return out.str();
}

// ---------------------------------------------------------------------------
// compare

using ReportFields = std::map<std::string, std::string>;

/// Key/value header of a report.txt (everything before the first table).
inline ReportFields read_report_fields(const fs::path& report_dir) {
  const fs::path path = fs::is_directory(report_dir) ? report_dir / "report.txt" : report_dir;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read report " + path.string());
  ReportFields fields;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '[') break;
    const auto colon = line.find(": ");
    if (colon == std::string::npos) throw ValidationError("malformed report line: " + line);
    fields[line.substr(0, colon)] = line.substr(colon + 2);
  }
  return fields;
}

struct Delta {
  std::string key;
  std::optional<double> a, b, delta;  // delta = a - b
};

struct CompareResult {
  std::string fingerprint;
  std::vector<Delta> deltas;

  const Delta& get(const std::string& key) const {
    for (const auto& d : deltas)
      if (d.key == key) return d;
    throw InputError("no delta named " + key);
  }
};

/// Metric differences of report A against baseline report B. Refuses
/// reports computed on different datasets.
inline CompareResult compare_reports(const fs::path& a_dir, const fs::path& b_dir) {
  const auto a = read_report_fields(a_dir);
  const auto b = read_report_fields(b_dir);
  auto field = [](const ReportFields& f, const std::string& key) -> std::string {
    auto it = f.find(key);
    if (it == f.end()) throw ValidationError("report lacks field " + key);
    return it->second;
  };
  const std::string fa = field(a, "dataset_fingerprint"), fb = field(b, "dataset_fingerprint");
  if (fa != fb)
    throw ConfigError("reports come from different datasets (fingerprints " + fa + " vs " + fb + ")");
  auto number = [](const std::string& s) -> std::optional<double> {
    if (s == "undefined") return std::nullopt;
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw ValidationError("malformed number in report: " + s);
      return v;
    } catch (const std::logic_error&) {
      throw ValidationError("malformed number in report: " + s);
    }
  };
  CompareResult out{fa, {}};
  for (const std::string key : {"auc_2n", "macro_auroc", "macro_fpr95"}) {
    Delta d{key, number(field(a, key)), number(field(b, key)), std::nullopt};
    if (d.a && d.b) d.delta = *d.a - *d.b;
    out.deltas.push_back(d);
  }
  return out;
}

}  // namespace naptron::pipeline
