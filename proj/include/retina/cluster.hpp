#pragma once

#include <span>

#include "retina/raster.hpp"

namespace retina {

// Means of the vessel (dark), background and foreground (bright) clusters.
struct ClusterState {
  double vessel = 0.0;
  double background = 0.0;
  double foreground = 0.0;
  int iterations = 0;
  bool converged = false;
  bool reseeded = false;  // the empty-cluster repair fired at least once
};

inline constexpr int kDefaultKMeansMaxIter = 100;

// Seeds at m - s, m, m + s from the population mean and deviation.
ClusterState kmeans3_init(std::span<const double> samples);
// One assign + update pass. `converged` is set when no mean moved.
ClusterState kmeans3_step(std::span<const double> samples,
                          const ClusterState& current);

// Three-cluster Lloyd iteration on scalar samples, seeded at m - s, m, m + s
// (population mean and deviation). Ties go to the lower mean. An empty cluster
// is re-seeded to the sample farthest from the other two means.
ClusterState kmeans3(std::span<const double> samples,
                     int max_iter = kDefaultKMeansMaxIter);
// Same, over the FOV pixels of `plane`.
ClusterState kmeans3(const GrayPlane& plane, const BinaryMask& fov,
                     int max_iter = kDefaultKMeansMaxIter);

// Index (0 vessel, 1 background, 2 foreground) of the nearest mean.
int nearest_cluster(double value, const ClusterState& state);
// Sum over samples of the squared distance to the nearest mean.
double cluster_sse(std::span<const double> samples, const ClusterState& state);

struct DfOptions {
  // Pixels brighter than the foreground mean are flattened to zero.
  bool clip_negative = true;
};

// df = c_f - I at every pixel (clipped at 0 by default).
GrayPlane df_plane(const GrayPlane& plane, const ClusterState& state,
                   const DfOptions& options = {});

}  // namespace retina
