#include "retina/cluster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "retina/error.hpp"

namespace retina {

namespace {

std::array<double, 3> means_of(const ClusterState& s) {
  return {s.vessel, s.background, s.foreground};
}

void store_means(ClusterState& s, std::array<double, 3> m) {
  std::sort(m.begin(), m.end());
  s.vessel = m[0];
  s.background = m[1];
  s.foreground = m[2];
}

int nearest(double v, const std::array<double, 3>& means) {
  int best = 0;
  double best_d = std::abs(v - means[0]);
  for (int i = 1; i < 3; ++i) {
    const double d = std::abs(v - means[i]);
    if (d < best_d || (d == best_d && means[i] < means[best])) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

int nearest_cluster(double value, const ClusterState& state) {
  return nearest(value, means_of(state));
}

double cluster_sse(std::span<const double> samples, const ClusterState& state) {
  const auto means = means_of(state);
  double sse = 0.0;
  for (double v : samples) {
    const double d = v - means[nearest(v, means)];
    sse += d * d;
  }
  return sse;
}

ClusterState kmeans3_init(std::span<const double> samples) {
  if (samples.empty()) {
    throw Error(ErrorKind::degenerate, "kmeans3: no samples");
  }
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double n = static_cast<double>(samples.size());
  const double m = sum / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - m) * (v - m);
  const double sigma = std::sqrt(ss / n);

  ClusterState state;
  state.vessel = m - sigma;
  state.background = m;
  state.foreground = m + sigma;
  return state;
}

ClusterState kmeans3_step(std::span<const double> samples,
                          const ClusterState& current) {
  const std::array<double, 3> means = means_of(current);
  std::array<double, 3> sums{};
  std::array<std::size_t, 3> counts{};
  for (double v : samples) {
    const int c = nearest(v, means);
    sums[c] += v;
    ++counts[c];
  }
  ClusterState state = current;
  std::array<double, 3> next = means;
  for (int c = 0; c < 3; ++c) {
    if (counts[c] > 0) next[c] = sums[c] / static_cast<double>(counts[c]);
  }
  for (int c = 0; c < 3; ++c) {
    if (counts[c] > 0) continue;
    // Farthest sample from the two other (already updated) means.
    double best_v = samples.front();
    double best_d = -1.0;
    for (double v : samples) {
      double d = std::numeric_limits<double>::infinity();
      for (int o = 0; o < 3; ++o) {
        if (o != c) d = std::min(d, std::abs(v - next[o]));
      }
      if (d > best_d) {
        best_d = d;
        best_v = v;
      }
    }
    next[c] = best_v;
    state.reseeded = true;
  }
  store_means(state, next);
  state.iterations = current.iterations + 1;
  state.converged = means_of(state) == means;
  return state;
}

ClusterState kmeans3(std::span<const double> samples, int max_iter) {
  if (max_iter < 1) {
    throw Error(ErrorKind::contract, "kmeans3: max_iter must be >= 1");
  }
  ClusterState state = kmeans3_init(samples);
  while (state.iterations < max_iter) {
    state = kmeans3_step(samples, state);
    if (state.converged) break;
  }
  return state;
}

ClusterState kmeans3(const GrayPlane& plane, const BinaryMask& fov,
                     int max_iter) {
  require_same_shape(plane, fov, "kmeans3");
  std::vector<double> samples;
  samples.reserve(fov.count());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    if (fov[i]) samples.push_back(plane[i]);
  }
  if (samples.empty()) {
    throw Error(ErrorKind::degenerate, "kmeans3: FOV is empty");
  }
  return kmeans3(samples, max_iter);
}

GrayPlane df_plane(const GrayPlane& plane, const ClusterState& state,
                   const DfOptions& options) {
  GrayPlane out(plane.width(), plane.height());
  const double cf = state.foreground;
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const double d = cf - plane[i];
    out[i] = options.clip_negative ? std::max(d, 0.0) : d;
  }
  return out;
}

}  // namespace retina
