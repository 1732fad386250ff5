#pragma once

#include <naptron/box.hpp>
#include <naptron/detail/le_io.hpp>
#include <naptron/error.hpp>
#include <naptron/io/dataset.hpp>
#include <naptron/labeling.hpp>
#include <naptron/records.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace naptron::synth {

/// Deterministic RNG: mt19937_64 is fully specified by the standard, and the
/// uniform draw below avoids the implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

struct ScoreRange {
  double lo = 0.5;
  double hi = 0.99;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  int class_count = 4;
  int unknown_class_count = 2;
  std::size_t pattern_length = 64;
  std::size_t train_tps_per_class = 20;
  std::size_t train_fp_count = 10;
  std::size_t test_id_count = 80;
  std::size_t test_ood_count = 40;
  std::size_t test_fp_count = 20;
  std::size_t test_missed_count = 0;  // known objects the detector never found
  double rho_train = 0.05;
  double rho_id = 0.05;
  double rho_ood = 0.3;
  ScoreRange train_scores{0.3, 0.99};
  ScoreRange id_scores{0.5, 0.99};
  ScoreRange ood_scores{0.3, 0.9};
  ScoreRange fp_scores{0.25, 0.6};
  double image_size = 800;
  std::size_t boxes_per_image = 16;
  double min_match_iou = 0.55;  // matched boxes get IOU drawn from [this, 1]
  bool map_mode = false;        // emit feature maps instead of vectors

  void validate() const {
    if (class_count < 1) throw ConfigError("class_count must be >= 1");
    if (unknown_class_count < 0) throw ConfigError("unknown_class_count must be >= 0");
    if (test_ood_count > 0 && unknown_class_count == 0)
      throw ConfigError("OOD detections need at least one unknown class");
    if (pattern_length < 1) throw ConfigError("pattern_length must be >= 1");
    for (double r : {rho_train, rho_id, rho_ood})
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("flip rates must lie in [0, 1]");
    const double floor_prob = 1.0 / class_count;
    for (const auto& s : {train_scores, id_scores, ood_scores, fp_scores})
      if (!(s.lo <= s.hi && s.lo >= floor_prob && s.hi < 1.0))
        throw ConfigError("score ranges must satisfy 1/class_count <= lo <= hi < 1");
    if (!(min_match_iou > 0.5 && min_match_iou <= 1.0))
      throw ConfigError("min_match_iou must lie in (0.5, 1]");
    if (!(image_size >= 16)) throw ConfigError("image_size must be >= 16");
    if (boxes_per_image < 1) throw ConfigError("boxes_per_image must be >= 1");
    if (cell_size() < 8.0)
      throw ConfigError("unsatisfiable geometry: " + std::to_string(boxes_per_image) +
                        " boxes do not fit a " + std::to_string(image_size) + " px image");
  }

  std::size_t grid() const {
    return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(boxes_per_image))));
  }
  double cell_size() const { return image_size / static_cast<double>(grid()); }
};

/// Copy of `values` with each sign flipped independently with probability
/// `rho`. One uniform is drawn per element whatever `rho` is, so equal seeds
/// give nested flip sets across rates.
inline std::vector<double> flip_signs(std::span<const double> values, double rho, Rng& rng) {
  std::vector<double> out(values.begin(), values.end());
  for (auto& v : out)
    if (rng.uniform() < rho) v = -v;
  return out;
}

/// Random +-magnitude vector; bit i of its pattern is the sign of entry i.
inline std::vector<double> random_prototype(std::size_t length, Rng& rng) {
  std::vector<double> v(length);
  for (auto& x : v) {
    const double mag = rng.uniform(0.1, 1.0);
    x = rng.coin() ? mag : -mag;
  }
  return v;
}

struct SplitTruth {
  std::filesystem::path dir;
  std::map<DetId, SampleKind> intended;  // label each detection was built to get
};

struct GeneratedDataset {
  SplitTruth train;
  SplitTruth test;
  std::vector<std::vector<double>> prototypes;  // per known class
};

namespace detail {

enum class Item { Tp, Ood, Fp, Missed };

struct Planned {
  Item kind;
  int cls;          // predicted (or GT) known class
  int unknown_cls;  // GT class for OOD
  double rho;
  ScoreRange scores;
};

inline void write_split(const SynthConfig& cfg, const std::filesystem::path& dir,
                        const std::vector<Planned>& plan,
                        const std::vector<std::vector<double>>& prototypes, Rng& rng,
                        SplitTruth& truth) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  truth.dir = dir;

  const std::size_t per_image = cfg.boxes_per_image;
  const std::size_t image_count = std::max<std::size_t>(1, (plan.size() + per_image - 1) / per_image);
  const std::size_t g = cfg.grid();
  const double cell = cfg.cell_size();
  const double side = 0.6 * cell;
  const auto L = cfg.pattern_length;
  const auto C = static_cast<std::size_t>(cfg.class_count);

  io::Manifest manifest;
  for (int c = 0; c < cfg.class_count; ++c) manifest.classes.push_back({c, "class_" + std::to_string(c)});
  for (std::size_t i = 0; i < image_count; ++i)
    manifest.images.push_back({static_cast<ImageId>(i), cfg.image_size, cfg.image_size});
  manifest.layout.layer_count = 1;
  if (cfg.map_mode) {
    manifest.layout.mode = io::ActivationMode::Map;
    manifest.layout.channels = {L};
    manifest.layout.reductions = {io::MapReduction::Cell};
  } else {
    manifest.layout.mode = io::ActivationMode::Vector;
    manifest.layout.lengths = {L};
  }

  std::ofstream dets(dir / io::kDetectionsFile, std::ios::trunc);
  std::ofstream gts(dir / io::kAnnotationsFile, std::ios::trunc);
  std::ofstream acts(dir / io::kActivationsFile, std::ios::binary | std::ios::trunc);
  std::ofstream maps;
  if (cfg.map_mode) maps.open(dir / io::kFeatureMapsFile, std::ios::binary | std::ios::trunc);

  std::uint64_t act_bytes = 0, map_bytes = 0;
  DetId next_det = 0;
  std::int64_t next_gt = 0;
  std::vector<std::vector<double>> cells;  // map mode: current image's per-cell vectors
  std::uint64_t map_offset = 0;

  auto flush_map = [&]() {
    map_offset = map_bytes;
    ::naptron::detail::put_u32(maps, static_cast<std::uint32_t>(g));
    ::naptron::detail::put_u32(maps, static_cast<std::uint32_t>(g));
    ::naptron::detail::put_u32(maps, static_cast<std::uint32_t>(L));
    for (const auto& v : cells)
      for (double x : v) ::naptron::detail::put_f32(maps, static_cast<float>(x));
    map_bytes += io::kMapHeaderBytes + 4 * g * g * L;
  };

  std::vector<DetectionRecord> pending;  // map mode: wait for the map offset
  for (std::size_t img = 0; img < image_count; ++img) {
    if (cfg.map_mode) {
      cells.assign(g * g, {});
      for (auto& v : cells) v = random_prototype(L, rng);
    }
    pending.clear();
    for (std::size_t slot = 0; slot < per_image; ++slot) {
      const std::size_t idx = img * per_image + slot;
      if (idx >= plan.size()) break;
      const Planned& p = plan[idx];
      const double cx = (static_cast<double>(slot % g) + 0.5) * cell;
      const double cy = (static_cast<double>(slot / g) + 0.5) * cell;
      const BoxGeometry gt_box = BoxGeometry::from_center(cx, cy, side, side);

      if (p.kind == Item::Tp || p.kind == Item::Ood || p.kind == Item::Missed) {
        GroundTruthRecord gt{static_cast<ImageId>(img), next_gt++, gt_box,
                             p.kind == Item::Ood ? p.unknown_cls : p.cls, p.kind != Item::Ood};
        gts << io::ground_truth_to_json(gt).dump() << '\n';
      }
      if (p.kind == Item::Missed) continue;

      DetectionRecord d;
      d.image_id = static_cast<ImageId>(img);
      d.det_id = next_det++;
      d.label = p.cls;
      if (p.kind == Item::Fp) {
        d.box = gt_box;  // the slot has no ground truth
      } else {
        const double u = rng.uniform(cfg.min_match_iou, 1.0);
        const double shift = side * (1.0 - u) / (1.0 + u);
        d.box = BoxGeometry::from_center(cx + shift, cy, side, side);
      }
      d.score = rng.uniform(p.scores.lo, p.scores.hi);
      std::vector<double> sm(C, C > 1 ? (1.0 - d.score) / static_cast<double>(C - 1) : 0.0);
      sm[static_cast<std::size_t>(p.cls)] = d.score;
      std::vector<double> lg(C);
      for (std::size_t c = 0; c < C; ++c) lg[c] = std::log(std::max(sm[c], 1e-12));
      d.softmax = std::move(sm);
      d.logits = std::move(lg);

      const auto act = flip_signs(prototypes[static_cast<std::size_t>(p.cls)], p.rho, rng);
      if (cfg.map_mode) {
        cells[slot] = act;
        d.activations = {{0, 0, g * g * L}};
      } else {
        d.activations = {{0, act_bytes, L}};
        for (double x : act) ::naptron::detail::put_f32(acts, static_cast<float>(x));
        act_bytes += 4 * L;
      }
      truth.intended[d.det_id] = p.kind == Item::Tp    ? SampleKind::IdTruePositive
                                 : p.kind == Item::Ood ? SampleKind::OutOfDistribution
                                                       : SampleKind::FalsePositiveBackground;
      pending.push_back(std::move(d));
    }
    if (cfg.map_mode) {
      flush_map();
      for (auto& d : pending) d.activations[0].offset = map_offset;
    }
    for (const auto& d : pending) dets << io::detection_to_json(d).dump() << '\n';
  }

  std::ofstream(dir / io::kManifestFile, std::ios::trunc) << io::manifest_to_json(manifest).dump(2) << '\n';
  if (!dets || !gts || !acts) throw DataError("failed writing synthetic dataset to " + dir.string());
}

}  // namespace detail

/// Writes `<out>/train` and `<out>/test` interchange datasets. Each known
/// class gets a random prototype activation vector; every detection is a
/// sign-flipped copy of its predicted class's prototype. Geometry places one
/// box per grid slot so labeling reproduces the intended labels exactly.
inline GeneratedDataset generate(const SynthConfig& cfg, const std::filesystem::path& out) {
  cfg.validate();
  using detail::Item;
  using detail::Planned;
  Rng rng(cfg.seed);
  GeneratedDataset result;
  for (int c = 0; c < cfg.class_count; ++c)
    result.prototypes.push_back(random_prototype(cfg.pattern_length, rng));

  std::vector<Planned> train;
  for (int c = 0; c < cfg.class_count; ++c)
    for (std::size_t i = 0; i < cfg.train_tps_per_class; ++i)
      train.push_back({Item::Tp, c, -1, cfg.rho_train, cfg.train_scores});
  for (std::size_t i = 0; i < cfg.train_fp_count; ++i)
    train.push_back({Item::Fp, static_cast<int>(i % cfg.class_count), -1, cfg.rho_ood, cfg.fp_scores});

  std::vector<Planned> test;
  for (std::size_t i = 0; i < cfg.test_id_count; ++i)
    test.push_back({Item::Tp, static_cast<int>(i % cfg.class_count), -1, cfg.rho_id, cfg.id_scores});
  for (std::size_t i = 0; i < cfg.test_ood_count; ++i)
    test.push_back({Item::Ood, static_cast<int>(i % cfg.class_count),
                    cfg.class_count + static_cast<int>(i % std::max(1, cfg.unknown_class_count)),
                    cfg.rho_ood, cfg.ood_scores});
  for (std::size_t i = 0; i < cfg.test_fp_count; ++i)
    test.push_back({Item::Fp, static_cast<int>(i % cfg.class_count), -1, cfg.rho_ood, cfg.fp_scores});
  for (std::size_t i = 0; i < cfg.test_missed_count; ++i)
    test.push_back({Item::Missed, static_cast<int>(i % cfg.class_count), -1, 0.0, cfg.id_scores});

  detail::write_split(cfg, out / "train", train, result.prototypes, rng, result.train);
  detail::write_split(cfg, out / "test", test, result.prototypes, rng, result.test);
  return result;
}

}  // namespace naptron::synth
