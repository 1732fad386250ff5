#include <naptron/metrics.hpp>

#include <gtest/gtest.h>

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace naptron;

namespace {

std::vector<double> range(int lo, int hi) {
  std::vector<double> v;
  for (int i = lo; i <= hi; ++i) v.push_back(i);
  return v;
}

ScoredSample sample(double u, SampleKind kind, int cls, double softmax = 0.5) {
  return {u, kind, cls, softmax};
}

constexpr auto ID = SampleKind::IdTruePositive;
constexpr auto OOD = SampleKind::OutOfDistribution;
constexpr auto FP = SampleKind::FalsePositiveBackground;

}  // namespace

TEST(Auroc, Examples) {
  EXPECT_EQ(auroc(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{0.1, 0.4}, std::vector<double>{0.3, 0.5}), 0.75);
  const std::vector<double> same{0.2, 0.2, 0.7, 1.0};
  EXPECT_EQ(auroc(same, same), 0.5);
  EXPECT_THROW(auroc(std::vector<double>{}, same), UndefinedMetricError);
}

TEST(Auroc, MatchesPairwiseOracleWithTies) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> id(1 + rng() % 80), ood(1 + rng() % 80);
    for (auto& x : id) x = static_cast<double>(rng() % 12);
    for (auto& x : ood) x = static_cast<double>(rng() % 12) + 1.5 * (trial % 3);
    ASSERT_NEAR(auroc(id, ood), oracle::auroc(id, ood), 1e-12);
  }
}

TEST(Auroc, ComplementAndMonotoneInvariance) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> val;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> id(30), ood(40);
    for (auto& x : id) x = std::round(val(rng) * 4) / 4;
    for (auto& x : ood) x = std::round((val(rng) + 0.5) * 4) / 4;
    EXPECT_NEAR(auroc(id, ood) + auroc(ood, id), 1.0, 1e-15);
    std::vector<double> tid = id, tood = ood;
    for (auto& x : tid) x = std::exp(3 * x) + 7;
    for (auto& x : tood) x = std::exp(3 * x) + 7;
    EXPECT_EQ(auroc(tid, tood), auroc(id, ood));
  }
}

TEST(FprAtTpr, Examples) {
  EXPECT_EQ(fpr_at_tpr(range(1, 10), range(20, 30)), 0.0);
  EXPECT_DOUBLE_EQ(fpr_at_tpr(range(1, 100), range(51, 150)), 0.45);
  EXPECT_EQ(fpr_at_tpr(range(10, 20), range(1, 5)), 1.0);
  EXPECT_THROW(fpr_at_tpr(std::vector<double>{}, range(1, 2)), UndefinedMetricError);
}

TEST(FprAtTpr, MatchesCountingOracle) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> id(1 + rng() % 300), ood(1 + rng() % 300);
    for (auto& x : id) x = static_cast<double>(rng() % 50);
    for (auto& x : ood) x = static_cast<double>(rng() % 50) + static_cast<double>(trial % 20);
    ASSERT_DOUBLE_EQ(fpr_at_tpr(id, ood), oracle::fpr95(id, ood));
  }
}

TEST(FprAtTpr, OodAsPositiveConvention) {
  // OOD {51..150} descending: the 95th value is 56, so tau = 56; ID >= 56 is 56..100.
  EXPECT_DOUBLE_EQ(fpr_at_tpr(range(1, 100), range(51, 150), 0.95, FprPositive::OutOfDistribution), 0.45);
  EXPECT_EQ(fpr_at_tpr(range(1, 10), range(20, 30), 0.95, FprPositive::OutOfDistribution), 0.0);
}

TEST(FprAtTpr, IdenticalContinuousDistributionsNear95) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> val;
  std::vector<double> id(10000), ood(10000);
  for (auto& x : id) x = val(rng);
  for (auto& x : ood) x = val(rng);
  EXPECT_NEAR(fpr_at_tpr(id, ood), 0.95, 0.03);
}

TEST(PerClassMacro, SingleClassEqualsItsValue) {
  const std::vector<ScoredSample> s{sample(0.1, ID, 4), sample(0.4, ID, 4), sample(0.3, OOD, 4),
                                    sample(0.5, OOD, 4)};
  const auto t = per_class_macro(s, [](auto a, auto b) { return auroc(a, b); });
  EXPECT_EQ(t.included, 1u);
  EXPECT_EQ(t.macro, 0.75);
}

TEST(PerClassMacro, UnweightedMeanAndExclusion) {
  std::vector<ScoredSample> s{sample(0, ID, 0), sample(1, OOD, 0),             // AUROC 1
                              sample(1, ID, 1), sample(1, ID, 1), sample(1, OOD, 1),  // AUROC 0.5
                              sample(3, ID, 2)};                                // no OOD
  const auto t = per_class_macro(s, [](auto a, auto b) { return auroc(a, b); });
  EXPECT_EQ(t.macro, 0.75);
  ASSERT_EQ(t.classes.size(), 3u);
  EXPECT_FALSE(t.classes[2].value);
  EXPECT_EQ(t.classes[2].excluded_reason, "no OOD samples");
}

TEST(PerClassMacro, Errors) {
  EXPECT_THROW(per_class_macro({}, [](auto a, auto b) { return auroc(a, b); }), UndefinedMetricError);
  const std::vector<ScoredSample> only_id{sample(0, ID, 0)};
  EXPECT_THROW(per_class_macro(only_id, [](auto a, auto b) { return auroc(a, b); }), UndefinedMetricError);
  const std::vector<ScoredSample> with_fp{sample(0, FP, 0)};
  EXPECT_THROW(per_class_macro(with_fp, [](auto a, auto b) { return auroc(a, b); }), InputError);
}

TEST(PerClassMacro, MacroEqualsIndependentRecomputation) {
  std::mt19937_64 rng(31);
  std::vector<ScoredSample> s;
  for (int i = 0; i < 2000; ++i)
    s.push_back(sample(static_cast<double>(rng() % 40), rng() % 3 ? ID : OOD, static_cast<int>(rng() % 7)));
  const auto m = evaluate_ood(s);
  double au = 0, fp = 0;
  int n = 0;
  for (int c = 0; c < 7; ++c) {
    std::vector<double> id, ood;
    for (const auto& x : s)
      if (x.predicted_class == c) (x.kind == ID ? id : ood).push_back(x.uncertainty);
    if (id.empty() || ood.empty()) continue;
    au += oracle::auroc(id, ood);
    fp += oracle::fpr95(id, ood);
    ++n;
  }
  EXPECT_NEAR(*m.auroc, au / n, 1e-12);
  EXPECT_NEAR(*m.fpr95, fp / n, 1e-12);
}

TEST(EvaluateOod, UndefinedIsFlagged) {
  const std::vector<ScoredSample> s{sample(0, ID, 0), sample(0, FP, 0)};
  const auto m = evaluate_ood(s);
  EXPECT_FALSE(m.auroc);
  EXPECT_FALSE(m.fpr95);
  EXPECT_FALSE(m.undefined_reason.empty());
  ASSERT_EQ(m.classes.size(), 1u);
  EXPECT_EQ(m.classes[0].id_count, 1u);
}

TEST(TprFpCurve, AllTruePositives) {
  const std::vector<CurveInput> d{{0.9, ID}, {0.8, ID}, {0.7, ID}};
  const auto c = tpr_fp_curve(d, 3);
  EXPECT_EQ(c.back(), (CurvePoint{0, 1.0}));
  EXPECT_EQ(auc_limited(c, 6), 1.0);
}

TEST(TprFpCurve, NoTruePositives) {
  const std::vector<CurveInput> d{{0.9, FP}, {0.8, OOD}};
  for (const auto& p : tpr_fp_curve(d, 5)) EXPECT_EQ(p.tpr, 0.0);
  EXPECT_THROW(tpr_fp_curve(d, 0), InputError);
}

TEST(TprFpCurve, ToyPrefixCounts) {
  // Sorted by softmax: TP(0.9), FP(0.8), TP(0.7); N = 2.
  const std::vector<CurveInput> d{{0.7, ID}, {0.9, ID}, {0.8, OOD}};
  const auto c = tpr_fp_curve(d, 2);
  const std::vector<CurvePoint> expected{{0, 0.0}, {0, 0.5}, {1, 0.5}, {1, 1.0}};
  EXPECT_EQ(c, expected);
  // x normalized by 2N = 4: segments [0,0.25] at 0.5, then flat 1.0 up to x = 1.
  const double hand = 0.25 * (0.5 + 0.5) / 2 + 0.75 * 1.0;
  EXPECT_NEAR(auc_2n(c, 2), hand, 1e-12);
}

TEST(TprFpCurve, TiedScoresEnterTogether) {
  const std::vector<CurveInput> d{{0.5, ID}, {0.5, FP}, {0.5, ID}};
  const auto c = tpr_fp_curve(d, 4);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[1], (CurvePoint{1, 0.5}));
}

TEST(TprFpCurve, RepeatHitsOnOneObjectRecallItOnce) {
  std::vector<CurveInput> d{{0.9, ID, 1, 7}, {0.8, ID, 1, 7}, {0.7, ID, 2, 7}, {0.6, ID}};
  const auto c = tpr_fp_curve(d, 4);
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c[2], (CurvePoint{0, 0.25}));
  EXPECT_EQ(c[3], (CurvePoint{0, 0.5}));
  EXPECT_EQ(c[4], (CurvePoint{0, 0.75}));
  EXPECT_THROW(tpr_fp_curve(d, 2), InputError);
}

TEST(AucLimited, TruncatesAtCapWithInterpolation) {
  // (0, 0) -> (8 FPs, 1.0) with cap 4 is y = x / 2 in normalized units; cut at x = 1.
  const std::vector<CurvePoint> c{{0, 0.0}, {8, 1.0}};
  EXPECT_NEAR(auc_limited(c, 4), 0.25, 1e-12);
}

TEST(AucLimited, TrapezoidOracleOnRandomCurves) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<CurveInput> d(1 + rng() % 200);
    for (auto& x : d) x = {static_cast<double>(rng() % 50) / 50.0, rng() % 3 == 0 ? FP : (rng() % 2 ? ID : OOD)};
    const auto ids = static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [](auto& x) { return x.kind == ID; }));
    const std::size_t n = ids + 1 + rng() % 60;
    const auto curve = tpr_fp_curve(d, n);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      ASSERT_GE(curve[i].fp_count, curve[i - 1].fp_count);
      ASSERT_GE(curve[i].tpr, curve[i - 1].tpr);
    }
    // Oracle: integrate the piecewise-linear curve numerically on a fine grid.
    const double cap = 2.0 * static_cast<double>(n);
    auto y_at = [&](double x) {
      double fx = x * cap;
      for (std::size_t i = 1; i < curve.size(); ++i) {
        const double x0 = static_cast<double>(curve[i - 1].fp_count), x1 = static_cast<double>(curve[i].fp_count);
        if (fx <= x1 && x1 > x0 && fx >= x0)
          return curve[i - 1].tpr + (curve[i].tpr - curve[i - 1].tpr) * (fx - x0) / (x1 - x0);
      }
      // Past the last FP count or in a vertical run: the highest TPR at that x.
      double y = 0;
      for (const auto& p : curve)
        if (static_cast<double>(p.fp_count) <= fx) y = p.tpr;
      return y;
    };
    const int steps = 20000;
    double area = 0;
    for (int k = 0; k < steps; ++k) area += y_at((k + 0.5) / steps) / steps;
    const double got = auc_limited(curve, 2 * n);
    EXPECT_GE(got, 0.0);
    EXPECT_LE(got, 1.0);
    EXPECT_NEAR(got, area, 2e-3);
  }
}

TEST(NmsSweep, ZeroThresholdMatchesUnswept) {
  std::mt19937_64 rng(5);
  std::vector<ScoredSample> s;
  for (int i = 0; i < 500; ++i)
    s.push_back(sample(static_cast<double>(rng() % 30), i % 3 == 0 ? OOD : (i % 3 == 1 ? ID : FP),
                       static_cast<int>(rng() % 4), static_cast<double>(rng() % 100) / 100.0));
  const std::vector<double> ts{0.0, 0.1, 0.5, 0.9, 1.0};
  const auto rows = nms_sweep(s, ts);
  ASSERT_EQ(rows.size(), ts.size());
  const auto base = evaluate_ood(s);
  EXPECT_EQ(rows[0].metrics.auroc, base.auroc);
  EXPECT_EQ(rows[0].metrics.fpr95, base.fpr95);
  EXPECT_EQ(rows[0].retained, s.size());
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].retained, rows[i - 1].retained);
  // Nothing scores 1.0 here, so the last row is undefined rather than zero.
  EXPECT_EQ(rows.back().retained, 0u);
  EXPECT_FALSE(rows.back().metrics.auroc);
}

TEST(NmsSweep, RejectsBadThresholds) {
  const std::vector<ScoredSample> s{sample(0, ID, 0)};
  EXPECT_THROW(nms_sweep(s, std::vector<double>{0.5, 0.1}), ConfigError);
  EXPECT_THROW(nms_sweep(s, std::vector<double>{-0.1}), ConfigError);
  EXPECT_THROW(nms_sweep(s, std::vector<double>{1.5}), ConfigError);
}

TEST(ScatterExport, OneRowPerDetection) {
  const std::vector<ScoredSample> s{sample(1, ID, 0, 0.9), sample(2, OOD, 0, 0.5), sample(3, FP, 1, 0.2)};
  const auto rows = scatter_export(s);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].kind, ID);
  EXPECT_EQ(rows[1].kind, OOD);
  EXPECT_EQ(rows[2].kind, FP);
  EXPECT_EQ(rows[2].softmax, 0.2);
  EXPECT_TRUE(scatter_export({}).empty());
}
