#include "retina/lineop.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "retina/error.hpp"

namespace retina {

void validate(const LineOpParams& params) {
  if (params.window_sizes.empty()) {
    throw Error(ErrorKind::contract, "LineOpParams: no window sizes");
  }
  for (int s : params.window_sizes) {
    if (s < 3 || s % 2 == 0) {
      throw Error(ErrorKind::contract,
                  "LineOpParams: window size must be odd and >= 3, got " +
                      std::to_string(s));
    }
  }
  if (params.n_angles < 2) {
    throw Error(ErrorKind::contract, "LineOpParams: n_angles must be >= 2");
  }
}

std::vector<Direction> line_directions(int n_angles) {
  std::vector<Direction> dirs(static_cast<std::size_t>(n_angles));
  for (int i = 0; i < n_angles; ++i) {
    // 0 and 90 degrees are set exactly so axis lines read whole pixels.
    if (2 * i % n_angles == 0) {
      dirs[i] = i == 0 ? Direction{1.0, 0.0} : Direction{0.0, 1.0};
      continue;
    }
    const double theta = std::numbers::pi * i / n_angles;
    dirs[i] = {std::cos(theta), std::sin(theta)};
  }
  return dirs;
}

double sample_bilinear(const GrayPlane& plane, double x, double y) {
  const double max_x = plane.width() - 1;
  const double max_y = plane.height() - 1;
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = std::min(x0 + 1, plane.width() - 1);
  const int y1 = std::min(y0 + 1, plane.height() - 1);
  const double top = (1.0 - fx) * plane.at(x0, y0) + fx * plane.at(x1, y0);
  const double bottom = (1.0 - fx) * plane.at(x0, y1) + fx * plane.at(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

namespace {

// Sum of samples along the line through (cx, cy) with direction d.
double line_sum(const GrayPlane& plane, double cx, double cy,
                const Direction& d, int half) {
  double s = 0.0;
  for (int t = -half; t <= half; ++t) {
    s += sample_bilinear(plane, cx + t * d.cos, cy + t * d.sin);
  }
  return s;
}

}  // namespace

ResponseMap line_response(const GrayPlane& plane, int size,
                          const LineOpParams& params) {
  LineOpParams single = params;
  single.window_sizes = {size};
  validate(single);
  if (size > plane.width() || size > plane.height()) {
    throw Error(ErrorKind::contract,
                "line_response: window " + std::to_string(size) +
                    " larger than plane " +
                    shape_string(plane.width(), plane.height()));
  }
  const auto dirs = line_directions(params.n_angles);
  const int half = size / 2;
  const double inv_line = 1.0 / size;
  const double inv_square = 1.0 / (static_cast<double>(size) * size);
  // Directions a and a + n/2 share one square, so ties are broken on a mod n/2
  // first: a quarter turn then maps tied winners to the same square.
  const int period = params.n_angles % 2 ? params.n_angles : params.n_angles / 2;
  std::vector<int> order;
  for (int r = 0; r < period; ++r)
    for (int a = r; a < params.n_angles; a += period) order.push_back(a);

  ResponseMap out;
  out.response = GrayPlane(plane.width(), plane.height());
  out.winner.assign(plane.size(), 0);
  for (int y = 0; y < plane.height(); ++y) {
    for (int x = 0; x < plane.width(); ++x) {
      int best = order[0];
      double best_mean = line_sum(plane, x, y, dirs[best], half) * inv_line;
      for (int a : order) {
        const double mean = line_sum(plane, x, y, dirs[a], half) * inv_line;
        // Means within rounding of each other are ties.
        if (mean > best_mean + 1e-12 * std::max(std::abs(mean), std::abs(best_mean))) {
          best_mean = mean;
          best = a;
        }
      }
      // Parallel lines offset along the normal (-sin, cos).
      const Direction& d = dirs[best];
      double square = 0.0;
      for (int s = -half; s <= half; ++s) {
        square += line_sum(plane, x - s * d.sin, y + s * d.cos, d, half);
      }
      const std::size_t i = plane.index(x, y);
      out.response[i] = best_mean - square * inv_square;
      out.winner[i] = best;
    }
  }
  return out;
}

ResponseMap multi_scale_response(const GrayPlane& plane,
                                 const LineOpParams& params) {
  validate(params);
  ResponseMap out;
  out.response = GrayPlane(plane.width(), plane.height());
  for (int size : params.window_sizes) {
    const ResponseMap r = line_response(plane, size, params);
    for (std::size_t i = 0; i < out.response.size(); ++i) {
      out.response[i] += r.response[i];
    }
  }
  return out;
}

}  // namespace retina
