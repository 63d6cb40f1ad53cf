#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "error_check.hpp"
#include "phantom.hpp"
#include "retina/preprocess.hpp"
#include "retina/tvfilter.hpp"

using namespace retina;

namespace {

GrayPlane random_plane(std::mt19937_64& rng, int w, int h, double lo = 0.0,
                       double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  GrayPlane p(w, h);
  for (double& v : p.values()) v = u(rng);
  return p;
}

TvParams fixed_params(double lambda, Neighborhood nb = Neighborhood::four) {
  TvParams p;
  p.lambda_mode = LambdaMode::fixed;
  p.lambda = lambda;
  p.neighborhood = nb;
  return p;
}

// Neighbors in a fixed order for the scalar oracle (4-connected).
std::vector<std::pair<int, int>> nbrs4(const GrayPlane& u, int x, int y) {
  std::vector<std::pair<int, int>> out;
  const int d[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (auto& o : d) {
    if (u.contains(x + o[0], y + o[1])) out.emplace_back(x + o[0], y + o[1]);
  }
  return out;
}

double grad_a(const GrayPlane& u, int x, int y, double a) {
  double s = a * a;
  for (auto [nx, ny] : nbrs4(u, x, y)) {
    s += (u.at(nx, ny) - u.at(x, y)) * (u.at(nx, ny) - u.at(x, y));
  }
  return std::sqrt(s);
}

double fov_variance(const GrayPlane& p) {
  double m = 0.0;
  for (double v : p.values()) m += v;
  m /= static_cast<double>(p.size());
  double s = 0.0;
  for (double v : p.values()) s += (v - m) * (v - m);
  return s / static_cast<double>(p.size());
}

}  // namespace

TEST_CASE("local variation examples") {
  CHECK(local_variation(GrayPlane(5, 5, 3.0), 2, 2, 0.25, Neighborhood::four) == 0.25);
  CHECK(local_variation(GrayPlane(5, 5, 3.0), 0, 0, 0.25, Neighborhood::four) == 0.25);
  GrayPlane p(3, 3);
  p.at(1, 1) = 1.0;
  CHECK(local_variation(p, 1, 1, 0.01, Neighborhood::four) ==
        doctest::Approx(2.000025).epsilon(1e-9));
  CHECK(local_variation(p, 1, 1, 0.01, Neighborhood::eight) ==
        doctest::Approx(std::sqrt(8.0001)).epsilon(1e-12));
  CHECK(local_variation(p, 0, 0, 0.0, Neighborhood::four) == 0.0);
  CHECK(local_variation(p, 0, 0, 0.0, Neighborhood::eight) == 1.0);
}

TEST_CASE("one step matches a scalar evaluation of the filter formula") {
  std::mt19937_64 rng(17);
  const GrayPlane u0 = random_plane(rng, 3, 3);
  const GrayPlane u = random_plane(rng, 3, 3);
  const double a = 0.01;
  const double lambda = 1.0;
  TvParams params = fixed_params(lambda);
  params.a = a;
  TvState s;
  s.u = u;
  s.lambda = lambda;
  const TvState next = tv_step(s, u0, params);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      double wsum = 0.0;
      double acc = 0.0;
      for (auto [nx, ny] : nbrs4(u, x, y)) {
        const double w = 1.0 / grad_a(u, x, y, a) + 1.0 / grad_a(u, nx, ny, a);
        wsum += w;
        acc += w * u.at(nx, ny);
      }
      const double expected = (acc + lambda * u0.at(x, y)) / (wsum + lambda);
      CHECK(next.u.at(x, y) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  CHECK(next.iteration == 1);
}

TEST_CASE("constant plane is an exact fixed point") {
  const GrayPlane c(6, 4, 2.5);
  TvState s = initial_tv_state(c, fixed_params(0.3));
  for (int k = 0; k < 5; ++k) s = tv_step(s, c, fixed_params(0.3));
  CHECK(s.u == c);
}

TEST_CASE("huge lambda returns the data") {
  std::mt19937_64 rng(4);
  const GrayPlane u0 = random_plane(rng, 12, 12, 1.0, 2.0);
  const GrayPlane out = run_tv(u0, fixed_params(1e9));
  for (std::size_t i = 0; i < u0.size(); ++i) {
    CHECK(std::abs(out[i] - u0[i]) <= 1e-6 * std::abs(u0[i]));
  }
}

TEST_CASE("filter weights are a convex combination") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> log_lambda(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const GrayPlane u0 = random_plane(rng, 16, 16);
    const GrayPlane u = random_plane(rng, 16, 16);
    const Neighborhood nb = trial % 2 ? Neighborhood::eight : Neighborhood::four;
    const double lambda = std::pow(10.0, log_lambda(rng));
    TvParams params = fixed_params(lambda, nb);
    const GrayPlane g = local_variations(u, params.a, nb);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        const FilterCoefficients c = filter_coefficients(g, x, y, lambda, nb);
        double total = c.self_weight;
        CHECK(c.self_weight > 0.0);
        for (int k = 0; k < c.count; ++k) {
          CHECK(c.neighbor_weight[k] > 0.0);
          total += c.neighbor_weight[k];
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
      }
    }
    TvState s;
    s.u = u;
    s.lambda = lambda;
    const TvState next = tv_step(s, u0, params);
    double lo = 1e9, hi = -1e9;
    for (std::size_t i = 0; i < u.size(); ++i) {
      lo = std::min({lo, u[i], u0[i]});
      hi = std::max({hi, u[i], u0[i]});
    }
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        double plo = u0.at(x, y), phi = u0.at(x, y);
        const FilterCoefficients c = filter_coefficients(g, x, y, lambda, nb);
        for (int k = 0; k < c.count; ++k) {
          plo = std::min(plo, u[c.neighbor_index[k]]);
          phi = std::max(phi, u[c.neighbor_index[k]]);
        }
        CHECK(next.u.at(x, y) >= plo - 1e-15);
        CHECK(next.u.at(x, y) <= phi + 1e-15);
        CHECK(next.u.at(x, y) >= lo - 1e-15);
        CHECK(next.u.at(x, y) <= hi + 1e-15);
      }
    }
  }
}

TEST_CASE("energy does not increase under fixed lambda") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> log_lambda(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const GrayPlane u0 = random_plane(rng, 16, 16);
    TvParams params =
        fixed_params(std::pow(10.0, log_lambda(rng)),
                     trial % 2 ? Neighborhood::eight : Neighborhood::four);
    params.a = trial % 3 == 0 ? 1e-2 : 1e-4;
    TvState s = initial_tv_state(u0, params);
    for (int k = 0; k < 20; ++k) {
      const TvState next = tv_step(s, u0, params);
      CHECK(next.energy <= s.energy + 1e-9);
      CHECK(next.energy == doctest::Approx(tv_energy(next.u, u0, params.a,
                                                     params.lambda,
                                                     params.neighborhood)));
      s = next;
    }
  }
}

TEST_CASE("vanishing lambda flattens every step") {
  std::mt19937_64 rng(21);
  const GrayPlane u0 = random_plane(rng, 12, 12);
  TvParams params = fixed_params(1e-9);
  TvState s = initial_tv_state(u0, params);
  double var = fov_variance(u0);
  for (int k = 0; k < 10; ++k) {
    s = tv_step(s, u0, params);
    const double v = fov_variance(s.u);
    CHECK(v < var);
    var = v;
  }
}

TEST_CASE("noisy step edge keeps the edge and loses the noise") {
  const int n = 48;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 0.05);
  GrayPlane u0(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) u0.at(x, y) = (x < n / 2 ? 0.0 : 1.0) + noise(rng);
  }
  const GrayPlane out = run_tv(u0, TvParams{});
  auto flat_var = [&](const GrayPlane& p) {
    double s = 0.0, s2 = 0.0;
    int cnt = 0;
    for (int y = 0; y < n; ++y) {
      for (int x = 2; x < n / 2 - 3; ++x) {
        s += p.at(x, y);
        s2 += p.at(x, y) * p.at(x, y);
        ++cnt;
      }
    }
    return s2 / cnt - (s / cnt) * (s / cnt);
  };
  double max_jump = 0.0;
  for (int y = 0; y < n; ++y) {
    max_jump = std::max(max_jump, out.at(n / 2, y) - out.at(n / 2 - 1, y));
  }
  CHECK(max_jump >= 0.5);
  CHECK(flat_var(out) * 10.0 <= flat_var(u0));
}

TEST_CASE("a dim smooth dark bump is largely smoothed out") {
  const int n = 32;
  GrayPlane u0(n, n, 1.0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double r2 = (x - 15.5) * (x - 15.5) + (y - 15.5) * (y - 15.5);
      u0.at(x, y) -= 0.1 * std::exp(-r2 / 8.0);
    }
  }
  const GrayPlane out = run_tv(u0, fixed_params(1.0));
  auto depth = [&](const GrayPlane& p) {
    return p.at(0, 0) - std::min({p.at(15, 15), p.at(16, 16), p.at(15, 16), p.at(16, 15)});
  };
  CHECK(depth(out) <= 0.5 * depth(u0));
}

TEST_CASE("parameter validation") {
  TvParams p;
  p.iterations = 0;
  CHECK_ERROR_KIND(run_tv(GrayPlane(3, 3), p), ErrorKind::contract);
  p = TvParams{};
  p.a = 0.0;
  CHECK_ERROR_KIND(validate(p), ErrorKind::contract);
  p = fixed_params(0.0);
  CHECK_ERROR_KIND(validate(p), ErrorKind::contract);
  p = TvParams{};
  p.lambda_update_period = 0;
  CHECK_ERROR_KIND(validate(p), ErrorKind::contract);
}

TEST_CASE("non-finite iterate is a numerical error naming the iteration") {
  GrayPlane u0(4, 4, 1.0);
  u0.at(1, 1) = INFINITY;
  try {
    run_tv(u0, fixed_params(1.0));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numerical);
    CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
  }
}

TEST_CASE("lambda estimate equals the hand-evaluated sum") {
  const GrayPlane u(3, 3, std::vector<double>{0.1, 0.4, 0.2, 0.9, 0.5, 0.3, 0.0, 0.7, 0.6});
  const GrayPlane u0(3, 3, std::vector<double>{0.0, 0.5, 0.2, 1.0, 0.2, 0.3, 0.1, 0.8, 0.4});
  const double a = 0.1;
  const double sigma2 = 0.01;
  double sum = 0.0;
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      for (auto [nx, ny] : nbrs4(u, x, y)) {
        const double w = 1.0 / grad_a(u, x, y, a) + 1.0 / grad_a(u, nx, ny, a);
        sum += w * (u.at(nx, ny) - u.at(x, y)) * (u.at(x, y) - u0.at(x, y));
      }
    }
  }
  const double expected = sum / (sigma2 * 9.0);
  const LambdaEstimate e = estimate_lambda(
      u, u0, sigma2, local_variations(u, a, Neighborhood::four), Neighborhood::four, 1e-3);
  CHECK(e.raw == doctest::Approx(expected).epsilon(1e-12));
  if (expected > 1e-3) {
    CHECK(e.value == e.raw);
  } else {
    CHECK(e.floored);
  }

  // Restricting to a region averages over its pixels only.
  BinaryMask region(3, 3);
  region.set(1, 1, true);
  double centre = 0.0;
  for (auto [nx, ny] : nbrs4(u, 1, 1)) {
    const double w = 1.0 / grad_a(u, 1, 1, a) + 1.0 / grad_a(u, nx, ny, a);
    centre += w * (u.at(nx, ny) - u.at(1, 1)) * (u.at(1, 1) - u0.at(1, 1));
  }
  const LambdaEstimate r = estimate_lambda(
      u, u0, sigma2, local_variations(u, a, Neighborhood::four), Neighborhood::four,
      1e-3, &region);
  CHECK(r.raw == doctest::Approx(centre / sigma2).epsilon(1e-12));
}

TEST_CASE("lambda estimate with zero residual returns the floor") {
  std::mt19937_64 rng(1);
  const GrayPlane u = random_plane(rng, 8, 8);
  const LambdaEstimate e =
      estimate_lambda(u, u, 0.01, local_variations(u, 1e-4, Neighborhood::four),
                      Neighborhood::four, 1e-3);
  CHECK(e.raw == 0.0);
  CHECK(e.floored);
  CHECK(e.value == 1e-3);
  CHECK_ERROR_KIND(estimate_lambda(u, u, 0.0, u, Neighborhood::four, 1e-3),
                   ErrorKind::contract);
}

TEST_CASE("noise variance estimate") {
  CHECK(estimate_noise_variance(GrayPlane(20, 20, 3.0)) == kMinNoiseVariance);

  const double sigma = 0.05;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    GrayPlane p(64, 64);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) p.at(x, y) = 0.01 * x + noise(rng);
    }
    const double s2 = estimate_noise_variance(p);
    CHECK(s2 >= 0.5 * sigma * sigma);
    CHECK(s2 <= 2.0 * sigma * sigma);
  }

  GrayPlane checker(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) checker.at(x, y) = (x + y) % 2 ? 1.0 : 0.0;
  }
  const double c = estimate_noise_variance(checker);
  CHECK(std::isfinite(c));
  CHECK(c > 0.1);

  const BinaryMask empty(16, 16);
  CHECK_ERROR_KIND(estimate_noise_variance(checker, &empty), ErrorKind::degenerate);
}

TEST_CASE("automatic lambda trace is finite and positive on a phantom") {
  const auto ph = retina::testing::make_fundus_phantom({.size = 96});
  const GrayPlane v0 = weber_transform(green_channel(ph.image));
  const TvRun run = run_tv_detailed(v0, TvParams{}, &ph.fov);
  REQUIRE(run.lambda_trace.size() == 100);
  CHECK(run.iterations == 100);
  CHECK(run.noise_variance > 0.0);
  for (std::size_t k = 0; k < run.lambda_trace.size(); ++k) {
    CHECK(std::isfinite(run.lambda_trace[k]));
    CHECK(run.lambda_trace[k] > 0.0);
    // Updated on even iterations only.
    if (k % 2 == 1) CHECK(run.lambda_trace[k] == run.lambda_trace[k - 1]);
  }
  // The residual starts at zero, so the first update sits on the floor.
  CHECK(run.lambda_trace[0] == TvParams{}.lambda_floor);
  CHECK(run.lambda_trace[2] > run.lambda_trace[0]);
}

TEST_CASE("observer sees every iterate and early stop ends the run") {
  std::mt19937_64 rng(2);
  const GrayPlane u0 = random_plane(rng, 10, 10);
  int seen = 0;
  run_tv_detailed(u0, fixed_params(1.0), nullptr, [&](const TvState& s) {
    ++seen;
    CHECK(s.iteration == seen);
  });
  CHECK(seen == 100);
  TvParams p = fixed_params(1.0);
  p.early_stop = 1e-3;
  CHECK(run_tv_detailed(u0, p).iterations < 100);
}

TEST_CASE("SD plane arithmetic and antisymmetry") {
  const GrayPlane a(2, 1, std::vector<double>{2.0, 0.25});
  const GrayPlane b(2, 1, std::vector<double>{0.5, 0.25});
  const GrayPlane d = sd_plane(a, b);
  CHECK(d[0] == 1.5);
  CHECK(d[1] == 0.0);
  const GrayPlane r = sd_plane(b, a);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(r[i] == -d[i]);
  const GrayPlane zero = sd_plane(a, a);
  for (double v : zero.values()) CHECK(v == 0.0);
  CHECK_ERROR_KIND(sd_plane(a, GrayPlane(1, 2)), ErrorKind::contract);
}

TEST_CASE("dim line outscores a bright blob in the SD plane") {
  const int n = 64;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0.0, 0.01);
  GrayPlane v0(n, n);
  BinaryMask line(n, n), blob(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double v = 4.8 + noise(rng);
      if (std::abs(y - 16) <= 1) {
        v -= 0.2;
        line.set(x, y, true);
      }
      if (std::hypot(x - 32.0, y - 42.0) <= 10.0) {
        v += 0.4;
        blob.set(x, y, true);
      }
      v0.at(x, y) = v;
    }
  }
  const GrayPlane c = sd_plane(run_tv(v0, TvParams{}), v0);
  double ls = 0, bs = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (line[i]) ls += c[i];
    if (blob[i]) bs += c[i];
  }
  CHECK(ls / line.count() > bs / blob.count());
}
