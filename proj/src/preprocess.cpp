#include "retina/preprocess.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "retina/error.hpp"

namespace retina {

GrayPlane weber_transform(const GrayPlane& plane, const WeberParams& params) {
  if (!(params.k > 0.0) || !std::isfinite(params.k)) {
    throw Error(ErrorKind::contract,
                "weber_transform: k must be positive, got " +
                    std::to_string(params.k));
  }
  GrayPlane out(plane.width(), plane.height());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const double v = plane[i];
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::domain,
                  "weber_transform: input must be finite and >= 0, got " +
                      std::to_string(v) + " at index " + std::to_string(i));
    }
    out[i] = std::log1p(v) / params.k;
  }
  return out;
}

GrayPlane expand_fov_boundary(const GrayPlane& plane, const BinaryMask& fov,
                              int iterations, BinaryMask* grown) {
  require_same_shape(plane, fov, "expand_fov_boundary");
  if (iterations < 0) {
    throw Error(ErrorKind::contract,
                "expand_fov_boundary: negative iteration count");
  }
  GrayPlane out = plane;
  BinaryMask region = fov;
  if (iterations > 0) {
    const std::size_t inside = fov.count();
    if (inside == 0 || inside == fov.size()) {
      throw Error(ErrorKind::degenerate,
                  "expand_fov_boundary: FOV must have both foreground and "
                  "background pixels");
    }
  }

  const int w = plane.width();
  const int h = plane.height();
  struct Fill {
    std::size_t index;
    double value;
  };
  std::vector<Fill> ring;
  for (int it = 0; it < iterations; ++it) {
    ring.clear();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (region.at(x, y)) continue;
        double sum = 0.0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dx == 0 && dy == 0) || !region.contains(x + dx, y + dy)) {
              continue;
            }
            if (region.at(x + dx, y + dy)) {
              sum += out.at(x + dx, y + dy);
              ++n;
            }
          }
        }
        if (n > 0) ring.push_back({out.index(x, y), sum / n});
      }
    }
    if (ring.empty()) break;
    for (const Fill& f : ring) {
      out[f.index] = f.value;
      region.set(f.index, true);
    }
  }
  if (grown) *grown = std::move(region);
  return out;
}

}  // namespace retina
