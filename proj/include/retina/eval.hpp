#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "retina/raster.hpp"

namespace retina {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&,
                         const ConfusionCounts&) = default;
};

// Pixel counts restricted to the FOV.
ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt,
                          const BinaryMask& fov);

// One row of measures. A rate is empty when its denominator is zero.
struct MeasureRow {
  std::string id;
  ConfusionCounts counts;
  std::optional<double> tp_rate;
  std::optional<double> fp_rate;
  double accuracy = 0.0;
  std::optional<double> auc;
};

MeasureRow measures(const ConfusionCounts& c, std::string id = {});

struct EvalReport {
  std::vector<MeasureRow> rows;
  MeasureRow mean;  // unweighted mean of the per-image measures
};

// Empty input is a contract error. Counts of the mean row are summed.
EvalReport aggregate(std::vector<MeasureRow> rows);

inline constexpr int kRocThresholdCount = 121;
inline constexpr double kRocMinThreshold = -2.0;
inline constexpr double kRocMaxThreshold = 4.0;

// Evenly spaced thresholds, ascending.
std::vector<double> roc_thresholds(int count = kRocThresholdCount,
                                   double lo = kRocMinThreshold,
                                   double hi = kRocMaxThreshold);

struct RocSample {
  double threshold;
  double fp_rate;
  double tp_rate;
};

struct RocCurve {
  std::vector<RocSample> samples;  // one per threshold, ascending threshold
  // (fp, tp) sorted by fp, anchored at (0,0) and (1,1).
  std::vector<std::pair<double, double>> points;
  double auc = 0.0;
};

// Per-threshold rates averaged over images (images without vessels do not
// contribute to the tp average), then anchored and integrated by trapezoids.
RocCurve roc_curve(std::span<const GrayPlane> norm_responses,
                   std::span<const BinaryMask> gts,
                   std::span<const BinaryMask> fovs,
                   const std::vector<double>& thresholds = roc_thresholds());

// Trapezoid area of an fp-sorted point list.
double trapezoid_auc(const std::vector<std::pair<double, double>>& points);

// Mean false-negative rate (1 - tp rate) for each threshold.
std::vector<double> mean_fn_rates(const RocCurve& curve);
// Index of the threshold whose mean FN rate is nearest `target`. Ties go to
// the lower threshold when target <= 0.5, the higher one otherwise.
std::size_t calibrate_threshold(const RocCurve& curve, double target);

// CSV: id,tp,fp,tn,fn,tp_rate,fp_rate,accuracy,auc (mean row id "mean").
void write_metrics_csv(std::ostream& out, const EvalReport& report);
// CSV: threshold,fp_rate,tp_rate
void write_roc_csv(std::ostream& out, const RocCurve& curve);

}  // namespace retina
