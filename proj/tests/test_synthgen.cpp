#include <naptron/io/dataset.hpp>
#include <naptron/pipeline.hpp>
#include <naptron/synthgen.hpp>

#include <gtest/gtest.h>

#include "test_util.hpp"

#include <cmath>

using namespace naptron;
using testutil::read_file;
using testutil::TempDir;

TEST(Synthgen, ZeroFlipRatesGiveZeroIdScores) {
  TempDir dir;
  synth::SynthConfig cfg;
  cfg.rho_train = 0.0;
  cfg.rho_id = 0.0;
  const auto out = synth::generate(cfg, dir.path());
  const auto train = io::load_dataset(out.train.dir);
  const auto test = io::load_dataset(out.test.dir);
  const auto store = pipeline::build(train, {});
  pipeline::EvalOptions opts;
  opts.nms_threshold = 0.0;
  const auto res = pipeline::score_dataset(test, &store, opts);
  std::size_t checked = 0;
  for (const auto& s : res.scores)
    if (s.label.kind == SampleKind::IdTruePositive) {
      EXPECT_EQ(s.uncertainty, 0.0);
      ++checked;
    }
  EXPECT_EQ(checked, cfg.test_id_count);
}

TEST(Synthgen, FlipDistanceMatchesBinomialMean) {
  synth::Rng rng(5);
  const std::size_t L = 512;
  const double rho = 0.1;
  const auto proto = synth::random_prototype(L, rng);
  const auto base = binarize(proto, 0.0);
  double sum = 0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i)
    sum += static_cast<double>(hamming(base, binarize(synth::flip_signs(proto, rho, rng), 0.0)));
  const double sigma = std::sqrt(L * rho * (1 - rho) / draws);
  EXPECT_NEAR(sum / draws, rho * L, 3 * sigma);
}

TEST(Synthgen, FlipSetsAreNestedAcrossRates) {
  const std::vector<double> proto(200, 1.0);
  std::vector<double> prev;
  for (double rho : {0.0, 0.1, 0.3, 0.6, 1.0}) {
    synth::Rng rng(8);
    const auto flipped = synth::flip_signs(proto, rho, rng);
    if (!prev.empty())
      for (std::size_t i = 0; i < proto.size(); ++i)
        if (prev[i] < 0) EXPECT_LT(flipped[i], 0);
    prev = flipped;
  }
  EXPECT_TRUE(std::all_of(prev.begin(), prev.end(), [](double v) { return v < 0; }));
}

TEST(Synthgen, SameSeedIsByteIdentical) {
  TempDir a, b;
  synth::SynthConfig cfg;
  cfg.seed = 77;
  synth::generate(cfg, a.path());
  synth::generate(cfg, b.path());
  for (const char* split : {"train", "test"})
    for (const char* f : {"manifest.json", "detections.jsonl", "annotations.jsonl", "activations.bin"})
      EXPECT_EQ(read_file(a.path() / split / f), read_file(b.path() / split / f)) << split << "/" << f;
  cfg.seed = 78;
  TempDir c;
  synth::generate(cfg, c.path());
  EXPECT_NE(read_file(a.path() / "test/activations.bin"), read_file(c.path() / "test/activations.bin"));
}

TEST(Synthgen, LabelerReproducesIntendedLabels) {
  TempDir dir;
  synth::SynthConfig cfg;
  cfg.test_missed_count = 5;
  for (bool map_mode : {false, true}) {
    cfg.map_mode = map_mode;
    const auto out = synth::generate(cfg, dir.path() / (map_mode ? "m" : "v"));
    for (const auto* split : {&out.train, &out.test}) {
      const auto ds = io::load_dataset(split->dir);
      const auto labels = label_predictions(ds.detections, ds.ground_truths);
      ASSERT_EQ(labels.size(), split->intended.size());
      for (std::size_t i = 0; i < labels.size(); ++i)
        EXPECT_EQ(labels[i].kind, split->intended.at(ds.detections[i].det_id));
    }
  }
  const auto ds = io::load_dataset(dir.path() / "v/test");
  EXPECT_EQ(ds.known_object_count(), cfg.test_id_count + cfg.test_missed_count);
}

TEST(Synthgen, ConfigErrors) {
  TempDir dir;
  synth::SynthConfig cfg;
  cfg.boxes_per_image = 100000;
  EXPECT_THROW(synth::generate(cfg, dir.path()), ConfigError);
  cfg = {};
  cfg.rho_ood = 1.5;
  EXPECT_THROW(synth::generate(cfg, dir.path()), ConfigError);
  cfg = {};
  cfg.unknown_class_count = 0;
  EXPECT_THROW(synth::generate(cfg, dir.path()), ConfigError);
  cfg = {};
  cfg.class_count = 20;
  cfg.fp_scores = {0.01, 0.5};  // below 1 / class_count
  EXPECT_THROW(synth::generate(cfg, dir.path()), ConfigError);
}

TEST(Synthgen, TrainIousVaryAboveLambda) {
  TempDir dir;
  synth::SynthConfig cfg;
  const auto out = synth::generate(cfg, dir.path());
  const auto ds = io::load_dataset(out.train.dir);
  const auto labels = label_predictions(ds.detections, ds.ground_truths);
  double lo = 1, hi = 0;
  for (const auto& l : labels)
    if (l.kind == SampleKind::IdTruePositive) {
      lo = std::min(lo, l.iou);
      hi = std::max(hi, l.iou);
    }
  EXPECT_GT(lo, cfg.min_match_iou - 1e-9);
  EXPECT_LT(lo, 0.7);
  EXPECT_GT(hi, 0.9);
}
