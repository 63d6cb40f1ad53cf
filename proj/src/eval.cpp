#include "retina/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "retina/error.hpp"

namespace retina {

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt,
                          const BinaryMask& fov) {
  require_same_shape(pred, gt, "confusion");
  require_same_shape(pred, fov, "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < fov.size(); ++i) {
    if (!fov[i]) continue;
    const bool p = pred[i];
    const bool g = gt[i];
    if (p && g) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (g) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

MeasureRow measures(const ConfusionCounts& c, std::string id) {
  MeasureRow row;
  row.id = std::move(id);
  row.counts = c;
  if (c.tp + c.fn > 0) {
    row.tp_rate = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  if (c.fp + c.tn > 0) {
    row.fp_rate = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
  }
  if (c.total() == 0) {
    throw Error(ErrorKind::degenerate, "measures: FOV has no pixels");
  }
  row.accuracy =
      static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return row;
}

namespace {

std::optional<double> mean_of(const std::vector<MeasureRow>& rows,
                              std::optional<double> MeasureRow::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const MeasureRow& r : rows) {
    if (const auto& v = r.*field) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

EvalReport aggregate(std::vector<MeasureRow> rows) {
  if (rows.empty()) {
    throw Error(ErrorKind::contract, "aggregate: no rows");
  }
  EvalReport report;
  report.mean.id = "mean";
  double acc = 0.0;
  for (const MeasureRow& r : rows) {
    acc += r.accuracy;
    report.mean.counts.tp += r.counts.tp;
    report.mean.counts.fp += r.counts.fp;
    report.mean.counts.tn += r.counts.tn;
    report.mean.counts.fn += r.counts.fn;
  }
  report.mean.accuracy = acc / static_cast<double>(rows.size());
  report.mean.tp_rate = mean_of(rows, &MeasureRow::tp_rate);
  report.mean.fp_rate = mean_of(rows, &MeasureRow::fp_rate);
  report.mean.auc = mean_of(rows, &MeasureRow::auc);
  report.rows = std::move(rows);
  return report;
}

std::vector<double> roc_thresholds(int count, double lo, double hi) {
  if (count < 2 || !(hi > lo)) {
    throw Error(ErrorKind::contract, "roc_thresholds: bad range");
  }
  std::vector<double> t(static_cast<std::size_t>(count));
  const double step = (hi - lo) / (count - 1);
  for (int i = 0; i < count; ++i) t[i] = lo + step * i;
  t.back() = hi;
  return t;
}

double trapezoid_auc(const std::vector<std::pair<double, double>>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto [x0, y0] = points[i - 1];
    const auto [x1, y1] = points[i];
    area += (x1 - x0) * (y0 + y1) * 0.5;
  }
  return area;
}

RocCurve roc_curve(std::span<const GrayPlane> norm_responses,
                   std::span<const BinaryMask> gts,
                   std::span<const BinaryMask> fovs,
                   const std::vector<double>& thresholds) {
  if (norm_responses.empty()) {
    throw Error(ErrorKind::contract, "roc_curve: no images");
  }
  if (gts.size() != norm_responses.size() ||
      fovs.size() != norm_responses.size()) {
    throw Error(ErrorKind::contract, "roc_curve: lists are not aligned");
  }
  if (thresholds.empty()) {
    throw Error(ErrorKind::contract, "roc_curve: no thresholds");
  }
  const std::size_t nt = thresholds.size();
  std::vector<double> tp_sum(nt, 0.0);
  std::vector<double> fp_sum(nt, 0.0);
  std::size_t tp_images = 0;
  std::size_t fp_images = 0;

  // Each image: sort FOV responses per class once, then count by bisection.
  std::vector<double> pos;
  std::vector<double> neg;
  for (std::size_t k = 0; k < norm_responses.size(); ++k) {
    const GrayPlane& r = norm_responses[k];
    require_same_shape(r, gts[k], "roc_curve");
    require_same_shape(r, fovs[k], "roc_curve");
    pos.clear();
    neg.clear();
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!fovs[k][i]) continue;
      (gts[k][i] ? pos : neg).push_back(r[i]);
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    for (std::size_t t = 0; t < nt; ++t) {
      auto above = [&](const std::vector<double>& v) {
        const auto it = std::lower_bound(v.begin(), v.end(), thresholds[t]);
        return static_cast<double>(v.end() - it) /
               static_cast<double>(v.size());
      };
      if (!pos.empty()) tp_sum[t] += above(pos);
      if (!neg.empty()) fp_sum[t] += above(neg);
    }
    if (!pos.empty()) ++tp_images;
    if (!neg.empty()) ++fp_images;
  }

  RocCurve curve;
  curve.samples.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    curve.samples.push_back(
        {thresholds[t], fp_images ? fp_sum[t] / fp_images : 0.0,
         tp_images ? tp_sum[t] / tp_images : 0.0});
  }
  std::sort(curve.samples.begin(), curve.samples.end(),
            [](const RocSample& a, const RocSample& b) {
              return a.threshold < b.threshold;
            });
  curve.points.reserve(nt + 2);
  curve.points.emplace_back(0.0, 0.0);
  for (const RocSample& s : curve.samples) {
    curve.points.emplace_back(s.fp_rate, s.tp_rate);
  }
  curve.points.emplace_back(1.0, 1.0);
  std::sort(curve.points.begin(), curve.points.end());
  curve.auc = trapezoid_auc(curve.points);
  return curve;
}

std::vector<double> mean_fn_rates(const RocCurve& curve) {
  std::vector<double> fn;
  fn.reserve(curve.samples.size());
  for (const RocSample& s : curve.samples) fn.push_back(1.0 - s.tp_rate);
  return fn;
}

std::size_t calibrate_threshold(const RocCurve& curve, double target) {
  if (curve.samples.empty()) {
    throw Error(ErrorKind::contract, "calibrate_threshold: empty curve");
  }
  const std::vector<double> fn = mean_fn_rates(curve);
  const bool prefer_low = target <= 0.5;
  std::size_t best = 0;
  double best_d = std::abs(fn[0] - target);
  for (std::size_t i = 1; i < fn.size(); ++i) {
    const double d = std::abs(fn[i] - target);
    if (d < best_d || (d == best_d && !prefer_low)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string("NA");
}

void write_row(std::ostream& out, const MeasureRow& r) {
  out << r.id << ',' << r.counts.tp << ',' << r.counts.fp << ','
      << r.counts.tn << ',' << r.counts.fn << ',' << fmt(r.tp_rate) << ','
      << fmt(r.fp_rate) << ',' << fmt(r.accuracy) << ',' << fmt(r.auc)
      << '\n';
}

}  // namespace

void write_metrics_csv(std::ostream& out, const EvalReport& report) {
  out << "id,tp,fp,tn,fn,tp_rate,fp_rate,accuracy,auc\n";
  for (const MeasureRow& r : report.rows) write_row(out, r);
  write_row(out, report.mean);
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
  out << "threshold,fp_rate,tp_rate\n";
  for (const RocSample& s : curve.samples) {
    out << fmt(s.threshold) << ',' << fmt(s.fp_rate) << ',' << fmt(s.tp_rate)
        << '\n';
  }
}

}  // namespace retina
