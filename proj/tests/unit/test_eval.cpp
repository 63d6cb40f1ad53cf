#include <doctest.h>

#include <random>
#include <sstream>

#include "error_check.hpp"
#include "retina/eval.hpp"

using namespace retina;

namespace {

BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double p) {
  std::bernoulli_distribution coin(p);
  BinaryMask m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, coin(rng));
  return m;
}

// Mann-Whitney statistic: P(pos > neg) + 0.5 P(pos == neg).
double rank_auc(const GrayPlane& r, const BinaryMask& gt, const BinaryMask& fov) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!fov[i] || !gt[i]) continue;
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!fov[j] || gt[j]) continue;
      pairs += 1.0;
      if (r[i] > r[j]) wins += 1.0;
      if (r[i] == r[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

}  // namespace

TEST_CASE("confusion counts equal a per-pixel tally") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryMask pred = random_mask(rng, 10, 10, 0.3);
    const BinaryMask gt = random_mask(rng, 10, 10, 0.2);
    const BinaryMask fov = random_mask(rng, 10, 10, 0.8);
    ConfusionCounts ref;
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 10; ++x) {
        if (!fov.at(x, y)) continue;
        const bool p = pred.at(x, y), g = gt.at(x, y);
        ref.tp += p && g;
        ref.fp += p && !g;
        ref.tn += !p && !g;
        ref.fn += !p && g;
      }
    }
    const ConfusionCounts c = confusion(pred, gt, fov);
    CHECK(c == ref);
    CHECK(c.total() == fov.count());
    const ConfusionCounts self = confusion(gt, gt, fov);
    CHECK(self.fp == 0);
    CHECK(self.fn == 0);
    if (self.total() > 0) CHECK(measures(self).accuracy == 1.0);
    BinaryMask inv(10, 10);
    for (std::size_t i = 0; i < inv.size(); ++i) inv.set(i, !gt[i]);
    const ConfusionCounts flipped = confusion(inv, gt, fov);
    CHECK(flipped.tp == 0);
    CHECK(flipped.tn == 0);
  }
  CHECK_ERROR_KIND(confusion(BinaryMask(2, 2), BinaryMask(2, 3), BinaryMask(2, 2)),
                   ErrorKind::contract);
}

TEST_CASE("measures from stated counts") {
  const MeasureRow r = measures({.tp = 75, .fp = 3, .tn = 97, .fn = 25}, "x");
  CHECK(*r.tp_rate == doctest::Approx(0.75));
  CHECK(*r.fp_rate == doctest::Approx(0.03));
  CHECK(r.accuracy == doctest::Approx(0.86));
  CHECK(r.id == "x");
  const MeasureRow none = measures({.tp = 0, .fp = 2, .tn = 8, .fn = 0});
  CHECK_FALSE(none.tp_rate.has_value());
  CHECK(*none.fp_rate == doctest::Approx(0.2));
}

TEST_CASE("aggregation is an unweighted mean") {
  MeasureRow a = measures({.tp = 9, .fp = 0, .tn = 81, .fn = 10});
  MeasureRow b = measures({.tp = 49, .fp = 1, .tn = 49, .fn = 1});
  a.accuracy = 0.90;
  b.accuracy = 0.98;
  const EvalReport r = aggregate({a, b});
  CHECK(r.mean.accuracy == doctest::Approx(0.94));
  CHECK(*r.mean.tp_rate == doctest::Approx((9.0 / 19.0 + 49.0 / 50.0) / 2.0));
  CHECK(r.mean.counts.tp == 58);
  CHECK(r.rows.size() == 2);
  const EvalReport one = aggregate({b});
  CHECK(one.mean.accuracy == b.accuracy);
  CHECK(*one.mean.tp_rate == *b.tp_rate);
  CHECK_ERROR_KIND(aggregate({}), ErrorKind::contract);
}

TEST_CASE("threshold grid") {
  const auto t = roc_thresholds();
  REQUIRE(t.size() == 121);
  CHECK(t.front() == -2.0);
  CHECK(t.back() == 4.0);
  CHECK(t[20] == doctest::Approx(-1.0));
}

TEST_CASE("separable responses give AUC 1") {
  std::mt19937_64 rng(8);
  const BinaryMask gt = random_mask(rng, 20, 20, 0.3);
  const BinaryMask fov(20, 20, true);
  GrayPlane r(20, 20);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = gt[i] ? 3.0 : -1.0;
  const RocCurve c = roc_curve(std::span(&r, 1), std::span(&gt, 1), std::span(&fov, 1));
  CHECK(std::abs(c.auc - 1.0) <= 1e-9);
  CHECK(c.points.front() == std::pair(0.0, 0.0));
  CHECK(c.points.back() == std::pair(1.0, 1.0));
}

TEST_CASE("a constant response gives AUC one half") {
  std::mt19937_64 rng(9);
  const BinaryMask gt = random_mask(rng, 12, 12, 0.4);
  const BinaryMask fov(12, 12, true);
  const GrayPlane r(12, 12, 0.37);
  const RocCurve c = roc_curve(std::span(&r, 1), std::span(&gt, 1), std::span(&fov, 1));
  CHECK(c.auc == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("AUC matches the rank statistic on quantized responses") {
  std::mt19937_64 rng(77);
  const auto grid = roc_thresholds();
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  int checked = 0;
  while (checked < 50) {
    const BinaryMask gt = random_mask(rng, 10, 10, 0.3);
    const BinaryMask fov = random_mask(rng, 10, 10, 0.9);
    GrayPlane r(10, 10);
    // Positives lean high so the AUC spans a useful range.
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::size_t k = pick(rng);
      if (gt[i]) k = std::max(k, pick(rng));
      r[i] = grid[k];
    }
    const ConfusionCounts c = confusion(gt, gt, fov);
    if (c.tp == 0 || c.tn == 0) continue;
    const RocCurve curve =
        roc_curve(std::span(&r, 1), std::span(&gt, 1), std::span(&fov, 1));
    CHECK(std::abs(curve.auc - rank_auc(r, gt, fov)) <= 1e-6);
    CHECK(curve.auc >= 0.0);
    CHECK(curve.auc <= 1.0);
    for (std::size_t t = 1; t < curve.samples.size(); ++t) {
      CHECK(curve.samples[t].tp_rate <= curve.samples[t - 1].tp_rate);
      CHECK(curve.samples[t].fp_rate <= curve.samples[t - 1].fp_rate);
    }
    for (std::size_t p = 1; p < curve.points.size(); ++p) {
      CHECK(curve.points[p].first >= curve.points[p - 1].first);
    }
    ++checked;
  }
}

TEST_CASE("rates are averaged per threshold and vessel-free images skip the tp mean") {
  const BinaryMask fov(2, 1, true);
  BinaryMask gt1(2, 1), gt2(2, 1);
  gt1.set(0, true);
  const GrayPlane r1(2, 1, std::vector<double>{1.0, -1.0});
  const GrayPlane r2(2, 1, std::vector<double>{1.0, 1.0});
  const std::vector<GrayPlane> rs{r1, r2};
  const std::vector<BinaryMask> gts{gt1, gt2};
  const std::vector<BinaryMask> fovs{fov, fov};
  const RocCurve c = roc_curve(rs, gts, fovs, {0.0});
  REQUIRE(c.samples.size() == 1);
  CHECK(c.samples[0].tp_rate == 1.0);
  // Image 1: 0 of 1 negatives above; image 2: 2 of 2.
  CHECK(c.samples[0].fp_rate == doctest::Approx(0.5));
  CHECK_ERROR_KIND(roc_curve({}, {}, {}), ErrorKind::contract);
  CHECK_ERROR_KIND(roc_curve(rs, std::span(gts).first(1), fovs), ErrorKind::contract);
}

TEST_CASE("calibration picks the nearest mean FN rate with documented ties") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  const BinaryMask gt = random_mask(rng, 30, 30, 0.2);
  const BinaryMask fov(30, 30, true);
  GrayPlane r(30, 30);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = g(rng) + (gt[i] ? 1.5 : 0.0);
  const RocCurve c = roc_curve(std::span(&r, 1), std::span(&gt, 1), std::span(&fov, 1));
  const auto fn = mean_fn_rates(c);
  const std::size_t k = calibrate_threshold(c, 0.3);
  for (double v : fn) CHECK(std::abs(fn[k] - 0.3) <= std::abs(v - 0.3));
  CHECK(calibrate_threshold(c, 0.0) == 0);
  CHECK(calibrate_threshold(c, 1.0) == c.samples.size() - 1);
}

TEST_CASE("CSV layouts") {
  const EvalReport rep = aggregate(
      {measures({.tp = 1, .fp = 1, .tn = 2, .fn = 0}, "01"),
       measures({.tp = 0, .fp = 0, .tn = 4, .fn = 0}, "02")});
  std::ostringstream m;
  write_metrics_csv(m, rep);
  CHECK(m.str() ==
        "id,tp,fp,tn,fn,tp_rate,fp_rate,accuracy,auc\n"
        "01,1,1,2,0,1.000000,0.333333,0.750000,NA\n"
        "02,0,0,4,0,NA,0.000000,1.000000,NA\n"
        "mean,1,1,6,0,1.000000,0.166667,0.875000,NA\n");

  RocCurve c;
  c.samples = {{-2.0, 1.0, 1.0}, {4.0, 0.0, 0.25}};
  std::ostringstream o;
  write_roc_csv(o, c);
  CHECK(o.str() ==
        "threshold,fp_rate,tp_rate\n"
        "-2.000000,1.000000,1.000000\n"
        "4.000000,0.000000,0.250000\n");
}
