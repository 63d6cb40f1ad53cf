#pragma once

#include "retina/raster.hpp"

namespace retina {

struct WeberParams {
  double k = 1.0;  // must be > 0
};

// out = ln(1 + in) / k. For k = 1 and 8-bit input the range is [0, ln 256].
GrayPlane weber_transform(const GrayPlane& plane, const WeberParams& params = {});

inline constexpr int kDefaultExpansionIterations = 50;

// Grows the FOV outward one ring per iteration. Each background pixel that
// touches the current region (8-neighborhood) takes the mean of its region
// neighbors from the previous generation. FOV pixels are never written.
// `grown`, when given, receives the final region.
GrayPlane expand_fov_boundary(const GrayPlane& plane, const BinaryMask& fov,
                              int iterations,
                              BinaryMask* grown = nullptr);

}  // namespace retina
