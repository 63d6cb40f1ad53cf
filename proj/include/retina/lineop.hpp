#pragma once

#include <vector>

#include "retina/raster.hpp"

namespace retina {

struct LineOpParams {
  std::vector<int> window_sizes{5, 11, 15};  // odd, >= 3
  int n_angles = 12;                         // spacing 180 / n_angles degrees
};

void validate(const LineOpParams& params);

struct ResponseMap {
  GrayPlane response;
  // Winner direction per pixel; empty for multi-scale sums.
  std::vector<int> winner;
};

// Unit direction of angle index `i` (i * 180 / n degrees). Axis-aligned
// angles are exact.
struct Direction {
  double cos;
  double sin;
};
std::vector<Direction> line_directions(int n_angles);

// Bilinear sample with clamp-to-edge.
double sample_bilinear(const GrayPlane& plane, double x, double y);

// R = L_w - N_w with L_theta the mean of `size` unit-spaced bilinear samples
// along a line through the pixel, L_w the largest of them and N_w the mean of
// the size x size square aligned with the winner direction. Means equal to
// 1e-12 relative are ties; they go to the lowest index modulo n/2, then the
// lowest index, which keeps the response exactly quarter-turn equivariant.
ResponseMap line_response(const GrayPlane& plane, int size,
                          const LineOpParams& params = {});

// Pixelwise sum of line_response over params.window_sizes.
ResponseMap multi_scale_response(const GrayPlane& plane,
                                 const LineOpParams& params = {});

}  // namespace retina
