#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "phasetrack/simulate.hpp"

using namespace phasetrack;

namespace {

ModelParams base(double horizon, double dt) {
  ModelParams p;
  p.horizon = horizon;
  p.dt = dt;
  return p;
}

double mean(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

// Standard error of a time-series mean via 100 batch means.
double batch_se(const std::vector<double>& xs) {
  const std::size_t nb = 100;
  const std::size_t len = xs.size() / nb;
  std::vector<double> bm(nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t k = 0; k < len; ++k) bm[b] += xs[b * len + k];
    bm[b] /= static_cast<double>(len);
  }
  const double m = mean(bm);
  double var = 0.0;
  for (double x : bm) var += (x - m) * (x - m);
  var /= static_cast<double>(nb - 1);
  return std::sqrt(var / static_cast<double>(nb));
}

}  // namespace

TEST_CASE("identical (seed, stream) reproduces bit-identical output") {
  const ModelParams p = base(50.0, 1e-3);
  RngStream r1(7, 3), r2(7, 3), r3(7, 4);
  const auto t1 = simulate_ou(p, r1);
  const auto t2 = simulate_ou(p, r2);
  const auto t3 = simulate_ou(p, r3);
  REQUIRE(t1.values == t2.values);
  REQUIRE(t1.values != t3.values);

  RngStream m1(7, 11), m2(7, 11);
  const auto a = simulate_measurements(t1, p, NoiseConvention::LinearizedHomodyne, m1);
  const auto b = simulate_measurements(t1, p, NoiseConvention::LinearizedHomodyne, m2);
  REQUIRE(a.values == b.values);
}

TEST_CASE("grid integrity: floor(T/dt)+1 samples, all finite") {
  ModelParams p = base(3.0, 0.3);
  RngStream rng(1, 0);
  auto t = simulate_ou(p, rng);
  REQUIRE(t.values.size() == 11);

  p = base(200.0, 1e-3);
  t = simulate_ou(p, rng);
  REQUIRE(t.values.size() == 200001);
  for (double v : t.values) REQUIRE(std::isfinite(v));
}

TEST_CASE("long-run sample variance matches kappa/(2 lambda)") {
  ModelParams p = base(1000.0, 1e-3);  // 1e6 steps
  RngStream rng(2024, 0);
  const auto t = simulate_ou(p, rng);
  std::vector<double> sq(t.values.size());
  for (std::size_t k = 0; k < t.values.size(); ++k)
    sq[k] = t.values[k] * t.values[k];
  const double est = mean(sq);
  const double se = batch_se(sq);
  REQUIRE(std::abs(est - 0.5) < 3.0 * se);
}

TEST_CASE("stationary autocovariance decays as (kappa/2 lambda) e^{-lambda tau}") {
  ModelParams p = base(2000.0, 1e-3);
  RngStream rng(99, 0);
  const auto t = simulate_ou(p, rng);
  const double scale = p.kappa / (2.0 * p.lambda);
  for (double tau : {0.5, 1.0, 2.0, 3.0}) {
    const std::size_t lag = static_cast<std::size_t>(tau / p.dt);
    double acc = 0.0;
    const std::size_t n = t.values.size() - lag;
    for (std::size_t k = 0; k < n; ++k)
      acc += t.values[k] * t.values[k + lag];
    const double est = acc / static_cast<double>(n);
    const double expected = scale * std::exp(-p.lambda * tau);
    // within 5% of the stationary-variance scale
    REQUIRE(std::abs(est - expected) < 0.05 * scale);
  }
}

TEST_CASE("kappa -> 0: the recursion becomes the deterministic decay") {
  ModelParams p = base(5.0, 1e-3);
  p.kappa = 1e-20;
  RngStream rng(5, 0);
  const auto t = simulate_ou(p, rng);
  const double a = std::exp(-p.lambda * p.dt);
  const double noise_bound = 10.0 * std::sqrt(p.kappa * p.dt);
  for (std::size_t k = 0; k + 1 < t.values.size(); ++k)
    REQUIRE(std::abs(t.values[k + 1] - a * t.values[k]) < noise_bound);
}

TEST_CASE("lambda = 0: Wiener increments with variance kappa dt") {
  ModelParams p = base(1000.0, 1e-3);
  p.lambda = 0.0;
  RngStream rng(31, 0);
  const auto t = simulate_ou(p, rng);
  REQUIRE(t.values.front() == 0.0);
  std::vector<double> inc2(t.values.size() - 1);
  for (std::size_t k = 0; k + 1 < t.values.size(); ++k) {
    const double d = t.values[k + 1] - t.values[k];
    inc2[k] = d * d;
  }
  const double est = mean(inc2);
  REQUIRE(std::abs(est - p.kappa * p.dt) < 0.01 * p.kappa * p.dt);
}

TEST_CASE("measurement noise variance matches R/dt per convention") {
  ModelParams p = base(1000.0, 1e-3);
  p.alpha = 1.3;
  RngStream traj_rng(8, 0), m1(8, 1), m2(8, 2);
  const auto t = simulate_ou(p, traj_rng);

  const auto lin =
      simulate_measurements(t, p, NoiseConvention::LinearizedHomodyne, m1);
  const auto dual =
      simulate_measurements(t, p, NoiseConvention::DualHomodyne, m2);

  auto noise_var = [&](const MeasurementRecord& rec) {
    std::vector<double> sq(rec.values.size());
    for (std::size_t k = 0; k < rec.values.size(); ++k) {
      const double d = rec.values[k] - t.values[k];
      sq[k] = d * d;
    }
    return mean(sq);
  };
  const double rl = 1.0 / (4.0 * p.alpha * p.alpha * p.dt);
  const double rd = 1.0 / (2.0 * p.alpha * p.alpha * p.dt);
  REQUIRE(std::abs(noise_var(lin) - rl) < 0.01 * rl);
  REQUIRE(std::abs(noise_var(dual) - rd) < 0.01 * rd);
  REQUIRE(noise_var(dual) / noise_var(lin) == Catch::Approx(2.0).margin(0.02));
}

TEST_CASE("alpha -> infinity: measurements become noiseless") {
  ModelParams p = base(1.0, 1e-3);
  p.alpha = 1e9;
  RngStream traj_rng(9, 0), meas_rng(9, 1);
  const auto t = simulate_ou(p, traj_rng);
  const auto rec =
      simulate_measurements(t, p, NoiseConvention::LinearizedHomodyne, meas_rng);
  for (std::size_t k = 0; k < t.values.size(); ++k)
    REQUIRE(std::abs(rec.values[k] - t.values[k]) < 1e-6);
}

TEST_CASE("nonlinear convention is rejected by the Gaussian synthesizer") {
  const ModelParams p = base(1.0, 1e-3);
  RngStream traj_rng(10, 0), meas_rng(10, 1);
  const auto t = simulate_ou(p, traj_rng);
  REQUIRE_THROWS_WITH(
      simulate_measurements(t, p, NoiseConvention::DualHomodyneNonlinear,
                            meas_rng),
      Catch::Matchers::ContainsSubstring("unknown convention"));
}

TEST_CASE("dual-homodyne arctan: zero noise recovers phi, wrapped to (-pi, pi]") {
  for (double phi : {0.0, 0.3, -0.3, 1.2, -2.8, 3.0})
    REQUIRE(dual_homodyne_arctan(phi, 0, 0, 0, 0, 2.0) ==
            Catch::Approx(phi).margin(1e-14));
  // Beyond pi the output wraps.
  REQUIRE(dual_homodyne_arctan(3.5, 0, 0, 0, 0, 2.0) ==
          Catch::Approx(3.5 - 2.0 * M_PI).margin(1e-14));
}

TEST_CASE("linearization improves with |alpha|: matched-noise comparison") {
  ModelParams p = base(200.0, 1e-2);
  double prev = std::numeric_limits<double>::infinity();
  for (double alpha : {10.0, 30.0, 100.0}) {
    p.alpha = alpha;
    RngStream traj_rng(11, 0), nl_rng(11, 1);
    const auto t = simulate_ou(p, traj_rng);
    const auto recs = simulate_dual_homodyne_nonlinear(t, p, nl_rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < t.values.size(); ++k) {
      const double d = recs.nonlinear.values[k] - recs.linearized.values[k];
      acc += d * d;
    }
    const double ms = acc / static_cast<double>(t.values.size());
    REQUIRE(ms < prev);
    prev = ms;
  }
  // At stationary phase spread the residual is dominated by the
  // phi-dependence of the first-order coefficients and scales as 1/alpha^2.
  REQUIRE(prev < 0.01);
}

TEST_CASE("small-angle nonlinear variance approaches 1/(2 alpha^2 dt)") {
  ModelParams p = base(1000.0, 1e-2);
  p.alpha = 100.0;  // keeps the denominator many sigma away from zero
  p.lambda = 1.0;
  p.kappa = 1e-4;  // keep phi small so the first-order regime holds
  RngStream traj_rng(12, 0), nl_rng(12, 1);
  const auto t = simulate_ou(p, traj_rng);
  const auto recs = simulate_dual_homodyne_nonlinear(t, p, nl_rng);
  std::vector<double> sq(t.values.size());
  for (std::size_t k = 0; k < t.values.size(); ++k) {
    const double d = recs.nonlinear.values[k] - t.values[k];
    sq[k] = d * d;
  }
  const double est = mean(sq);
  const double expected = 1.0 / (2.0 * p.alpha * p.alpha * p.dt);
  REQUIRE(std::abs(est - expected) < 0.05 * expected);
}

TEST_CASE("RngStream reports its identity and draw count") {
  RngStream rng(123, 45);
  REQUIRE(rng.master_seed() == 123);
  REQUIRE(rng.stream() == 45);
  rng.gaussian();
  rng.gaussian();
  rng.gaussian();
  REQUIRE(rng.count() == 3);
}
