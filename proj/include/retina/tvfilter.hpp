#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "retina/raster.hpp"

namespace retina {

enum class Neighborhood { four, eight };
enum class LambdaMode { fixed, automatic };

struct TvParams {
  double a = 1e-4;  // regularization of the local variation, > 0
  LambdaMode lambda_mode = LambdaMode::automatic;
  double lambda = 1.0;  // fitting weight used in fixed mode
  int lambda_update_period = 2;
  int iterations = 100;
  Neighborhood neighborhood = Neighborhood::four;
  double lambda_floor = 1e-3;
  // Stop once ||u_k - u_{k-1}|| / ||u_{k-1}|| drops below this; 0 disables.
  double early_stop = 0.0;
};

// Throws Error(contract) on out-of-range parameters.
void validate(const TvParams& params);

// sqrt(sum over in-plane neighbors of (u_b - u_a)^2 + a^2).
double local_variation(const GrayPlane& u, int x, int y, double a,
                       Neighborhood nb);
GrayPlane local_variations(const GrayPlane& u, double a, Neighborhood nb);

// Discrete energy whose stationary point the filter iterates towards:
//   sum_a |grad_a u|_a  +  (lambda / 2) * sum_a (u_a - u0_a)^2
double tv_energy(const GrayPlane& u, const GrayPlane& u0, double a,
                 double lambda, Neighborhood nb);

// Filter weights at one pixel: h_ab for each in-plane neighbor and h_aa.
struct FilterCoefficients {
  std::array<std::size_t, 8> neighbor_index{};
  std::array<double, 8> neighbor_weight{};
  int count = 0;
  double self_weight = 0.0;
};

FilterCoefficients filter_coefficients(const GrayPlane& variations, int x,
                                       int y, double lambda, Neighborhood nb);

struct TvState {
  GrayPlane u;
  int iteration = 0;
  double lambda = 1.0;  // fitting weight applied by the next step
  double energy = 0.0;  // energy of u under `lambda`
};

TvState initial_tv_state(const GrayPlane& u0, const TvParams& params);

// One Jacobi sweep: every output pixel is computed from the previous iterate.
TvState tv_step(const TvState& state, const GrayPlane& u0,
                const TvParams& params);

struct LambdaEstimate {
  double value = 0.0;  // raw clamped to the floor
  double raw = 0.0;
  bool floored = false;
};

// lambda = 1/(sigma2 |O|) sum_{a in O} sum_{b~a} w_ab (u_b - u_a)(u_a - u0_a)
// over the pixels O of `region` (whole plane when null).
LambdaEstimate estimate_lambda(const GrayPlane& u, const GrayPlane& u0,
                               double sigma2, const GrayPlane& variations,
                               Neighborhood nb, double floor,
                               const BinaryMask* region = nullptr);

inline constexpr double kMinNoiseVariance = 1e-12;

// Robust noise variance from the median absolute deviation of the 4-neighbor
// Laplacian over `region` (whole plane when null).
double estimate_noise_variance(const GrayPlane& u0,
                               const BinaryMask* region = nullptr);

struct TvRun {
  GrayPlane u;
  int iterations = 0;
  double noise_variance = 0.0;
  std::vector<double> lambda_trace;  // lambda used by each step
  std::vector<double> energy_trace;  // energy after each step
};

using TvObserver = std::function<void(const TvState&)>;

TvRun run_tv_detailed(const GrayPlane& u0, const TvParams& params,
                      const BinaryMask* region = nullptr,
                      const TvObserver& observer = {});
GrayPlane run_tv(const GrayPlane& u0, const TvParams& params,
                 const BinaryMask* region = nullptr);

// C_SD = v_sd - v0.
GrayPlane sd_plane(const GrayPlane& v_sd, const GrayPlane& v0);

}  // namespace retina
