#include "retina/tvfilter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "retina/error.hpp"

namespace retina {

namespace {

struct Offset {
  int dx;
  int dy;
};

constexpr Offset kFour[] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
constexpr Offset kEight[] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1},
                             {1, 1},  {-1, -1}, {1, -1}, {-1, 1}};

std::span<const Offset> offsets(Neighborhood nb) {
  if (nb == Neighborhood::four) return kFour;
  return kEight;
}

double median_in_place(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(
        v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

bool in_region(const BinaryMask* region, std::size_t i) {
  return region == nullptr || (*region)[i];
}

}  // namespace

void validate(const TvParams& p) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorKind::contract, "TvParams: " + msg);
  };
  if (!(p.a > 0.0) || !std::isfinite(p.a)) fail("a must be > 0");
  if (p.iterations < 1) fail("iterations must be >= 1");
  if (p.lambda_mode == LambdaMode::fixed &&
      (!(p.lambda > 0.0) || !std::isfinite(p.lambda))) {
    fail("fixed lambda must be > 0");
  }
  if (p.lambda_update_period < 1) fail("lambda_update_period must be >= 1");
  if (!(p.lambda_floor > 0.0)) fail("lambda_floor must be > 0");
  if (p.early_stop < 0.0) fail("early_stop must be >= 0");
}

double local_variation(const GrayPlane& u, int x, int y, double a,
                       Neighborhood nb) {
  const double center = u.at(x, y);
  double s = 0.0;
  for (const Offset& o : offsets(nb)) {
    if (!u.contains(x + o.dx, y + o.dy)) continue;
    const double d = u.at(x + o.dx, y + o.dy) - center;
    s += d * d;
  }
  return std::sqrt(s + a * a);
}

GrayPlane local_variations(const GrayPlane& u, double a, Neighborhood nb) {
  GrayPlane g(u.width(), u.height());
  for (int y = 0; y < u.height(); ++y) {
    for (int x = 0; x < u.width(); ++x) g.at(x, y) = local_variation(u, x, y, a, nb);
  }
  return g;
}

double tv_energy(const GrayPlane& u, const GrayPlane& u0, double a,
                 double lambda, Neighborhood nb) {
  require_same_shape(u, u0, "tv_energy");
  double variation = 0.0;
  double fit = 0.0;
  for (int y = 0; y < u.height(); ++y) {
    for (int x = 0; x < u.width(); ++x) {
      variation += local_variation(u, x, y, a, nb);
      const double r = u.at(x, y) - u0.at(x, y);
      fit += r * r;
    }
  }
  return variation + 0.5 * lambda * fit;
}

FilterCoefficients filter_coefficients(const GrayPlane& variations, int x,
                                       int y, double lambda, Neighborhood nb) {
  FilterCoefficients c;
  const double inv_center = 1.0 / variations.at(x, y);
  double total = 0.0;
  for (const Offset& o : offsets(nb)) {
    const int nx = x + o.dx;
    const int ny = y + o.dy;
    if (!variations.contains(nx, ny)) continue;
    const double w = inv_center + 1.0 / variations.at(nx, ny);
    c.neighbor_index[c.count] = variations.index(nx, ny);
    c.neighbor_weight[c.count] = w;
    ++c.count;
    total += w;
  }
  const double denom = lambda + total;
  for (int k = 0; k < c.count; ++k) c.neighbor_weight[k] /= denom;
  c.self_weight = lambda / denom;
  return c;
}

TvState initial_tv_state(const GrayPlane& u0, const TvParams& params) {
  validate(params);
  TvState s;
  s.u = u0;
  s.iteration = 0;
  s.lambda = params.lambda_mode == LambdaMode::fixed ? params.lambda
                                                     : params.lambda_floor;
  s.energy = tv_energy(u0, u0, params.a, s.lambda, params.neighborhood);
  return s;
}

TvState tv_step(const TvState& state, const GrayPlane& u0,
                const TvParams& params) {
  require_same_shape(state.u, u0, "tv_step");
  const GrayPlane g = local_variations(state.u, params.a, params.neighborhood);
  TvState next;
  next.u = GrayPlane(u0.width(), u0.height());
  next.iteration = state.iteration + 1;
  next.lambda = state.lambda;
  for (int y = 0; y < u0.height(); ++y) {
    for (int x = 0; x < u0.width(); ++x) {
      const FilterCoefficients c =
          filter_coefficients(g, x, y, state.lambda, params.neighborhood);
      // Increment form of sum h_ab u_b + h_aa u0_a: exact on flat input.
      const double ua = state.u.at(x, y);
      double delta = c.self_weight * (u0.at(x, y) - ua);
      for (int k = 0; k < c.count; ++k) {
        delta += c.neighbor_weight[k] * (state.u[c.neighbor_index[k]] - ua);
      }
      next.u.at(x, y) = ua + delta;
    }
  }
  next.energy =
      tv_energy(next.u, u0, params.a, next.lambda, params.neighborhood);
  return next;
}

LambdaEstimate estimate_lambda(const GrayPlane& u, const GrayPlane& u0,
                               double sigma2, const GrayPlane& variations,
                               Neighborhood nb, double floor,
                               const BinaryMask* region) {
  require_same_shape(u, u0, "estimate_lambda");
  require_same_shape(u, variations, "estimate_lambda");
  if (region) require_same_shape(u, *region, "estimate_lambda");
  if (!(sigma2 > 0.0)) {
    throw Error(ErrorKind::contract, "estimate_lambda: sigma2 must be > 0");
  }
  double sum = 0.0;
  std::size_t nodes = 0;
  for (int y = 0; y < u.height(); ++y) {
    for (int x = 0; x < u.width(); ++x) {
      const std::size_t i = u.index(x, y);
      if (!in_region(region, i)) continue;
      ++nodes;
      const double residual = u[i] - u0[i];
      const double inv_center = 1.0 / variations[i];
      for (const Offset& o : offsets(nb)) {
        const int nx = x + o.dx;
        const int ny = y + o.dy;
        if (!u.contains(nx, ny)) continue;
        const std::size_t j = u.index(nx, ny);
        const double w = inv_center + 1.0 / variations[j];
        sum += w * (u[j] - u[i]) * residual;
      }
    }
  }
  LambdaEstimate e;
  e.raw = nodes > 0 ? sum / (sigma2 * static_cast<double>(nodes)) : 0.0;
  e.floored = !(e.raw > floor);
  e.value = e.floored ? floor : e.raw;
  return e;
}

double estimate_noise_variance(const GrayPlane& u0, const BinaryMask* region) {
  if (region) require_same_shape(u0, *region, "estimate_noise_variance");
  std::vector<double> lap;
  lap.reserve(u0.size());
  for (int y = 1; y + 1 < u0.height(); ++y) {
    for (int x = 1; x + 1 < u0.width(); ++x) {
      if (!in_region(region, u0.index(x, y))) continue;
      lap.push_back(4.0 * u0.at(x, y) - u0.at(x - 1, y) - u0.at(x + 1, y) -
                    u0.at(x, y - 1) - u0.at(x, y + 1));
    }
  }
  if (lap.empty()) {
    if (region && region->count() == 0) {
      throw Error(ErrorKind::degenerate, "estimate_noise_variance: empty FOV");
    }
    return kMinNoiseVariance;
  }
  const double med = median_in_place(lap);
  for (double& v : lap) v = std::abs(v - med);
  const double mad = median_in_place(lap);
  // Gaussian consistency factor; the stencil multiplies the noise variance
  // by 4^2 + 4 = 20.
  const double sigma_lap = 1.482602218505602 * mad;
  return std::max(sigma_lap * sigma_lap / 20.0, kMinNoiseVariance);
}

TvRun run_tv_detailed(const GrayPlane& u0, const TvParams& params,
                      const BinaryMask* region, const TvObserver& observer) {
  validate(params);
  if (region) require_same_shape(u0, *region, "run_tv");
  TvRun run;
  TvState state = initial_tv_state(u0, params);
  const bool automatic = params.lambda_mode == LambdaMode::automatic;
  if (automatic) run.noise_variance = estimate_noise_variance(u0, region);

  for (int k = 0; k < params.iterations; ++k) {
    if (automatic && k % params.lambda_update_period == 0) {
      const GrayPlane g =
          local_variations(state.u, params.a, params.neighborhood);
      state.lambda = estimate_lambda(state.u, u0, run.noise_variance, g,
                                     params.neighborhood, params.lambda_floor,
                                     region)
                         .value;
    }
    TvState next = tv_step(state, u0, params);
    for (std::size_t i = 0; i < next.u.size(); ++i) {
      if (!std::isfinite(next.u[i])) {
        throw Error(ErrorKind::numerical,
                    "run_tv: non-finite value at iteration " +
                        std::to_string(next.iteration));
      }
    }
    run.lambda_trace.push_back(state.lambda);
    run.energy_trace.push_back(next.energy);
    double change = 0.0;
    double norm = 0.0;
    if (params.early_stop > 0.0) {
      for (std::size_t i = 0; i < next.u.size(); ++i) {
        const double d = next.u[i] - state.u[i];
        change += d * d;
        norm += state.u[i] * state.u[i];
      }
    }
    state = std::move(next);
    if (observer) observer(state);
    if (params.early_stop > 0.0 && norm > 0.0 &&
        std::sqrt(change / norm) < params.early_stop) {
      break;
    }
  }
  run.iterations = state.iteration;
  run.u = std::move(state.u);
  return run;
}

GrayPlane run_tv(const GrayPlane& u0, const TvParams& params,
                 const BinaryMask* region) {
  return run_tv_detailed(u0, params, region).u;
}

GrayPlane sd_plane(const GrayPlane& v_sd, const GrayPlane& v0) {
  require_same_shape(v_sd, v0, "sd_plane");
  GrayPlane out(v0.width(), v0.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v_sd[i] - v0[i];
  return out;
}

}  // namespace retina
