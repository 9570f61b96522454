#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <random>
#include <stdexcept>

#include "phasetrack/model.hpp"

namespace phasetrack {

/// Counter-tracked Gaussian stream. Distinct (seed, stream) pairs are
/// statistically independent; the same pair reproduces the sequence
/// bit-identically. The Box-Muller transform is used instead of
/// std::normal_distribution because the latter's algorithm is
/// implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream)
      : master_(master_seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  /// One standard normal draw.
  double gaussian() {
    ++count_;
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - unit();  // (0, 1], keeps log finite
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  std::uint64_t master_seed() const { return master_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t count() const { return count_; }

 private:
  double unit() { return (engine_() >> 11) * 0x1.0p-53; }  // [0, 1)

  std::uint64_t master_;
  std::uint64_t stream_;
  std::uint64_t count_ = 0;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Exact-discretization sample path of the OU phase
/// phi' = -lambda phi + sqrt(kappa) v. The initial sample is drawn from the
/// stationary law N(0, kappa/2 lambda) when lambda > 0 and is 0 in the
/// Wiener limit lambda = 0.
inline Trajectory simulate_ou(const ModelParams& p, RngStream& rng) {
  validate_params(p);
  const std::size_t n = sample_count(p.horizon, p.dt);
  const double a = std::exp(-p.lambda * p.dt);
  const double step_sd =
      p.lambda > 0.0
          ? std::sqrt(p.kappa * (1.0 - a * a) / (2.0 * p.lambda))
          : std::sqrt(p.kappa * p.dt);

  Trajectory traj;
  traj.t0 = 0.0;
  traj.dt = p.dt;
  traj.values.resize(n);
  traj.values[0] = p.lambda > 0.0
                       ? std::sqrt(p.kappa / (2.0 * p.lambda)) * rng.gaussian()
                       : 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k)
    traj.values[k + 1] = a * traj.values[k] + step_sd * rng.gaussian();
  return traj;
}

/// Gaussian measurement record theta_k = phi_k + n_k with per-sample noise
/// variance R/dt, R = 1/(4 alpha^2) (linearized homodyne) or 1/(2 alpha^2)
/// (dual homodyne). The 1/dt scaling realizes unit-amplitude continuous-time
/// white noise on the discrete grid.
inline MeasurementRecord simulate_measurements(const Trajectory& traj,
                                               const ModelParams& p,
                                               NoiseConvention convention,
                                               RngStream& rng) {
  double psd;
  switch (convention) {
    case NoiseConvention::LinearizedHomodyne:
      psd = 1.0 / (4.0 * p.alpha * p.alpha);
      break;
    case NoiseConvention::DualHomodyne:
      psd = 1.0 / (2.0 * p.alpha * p.alpha);
      break;
    default:
      throw std::invalid_argument(
          "unknown convention for Gaussian measurement synthesis");
  }
  const double sd = std::sqrt(psd / traj.dt);
  MeasurementRecord rec;
  rec.dt = traj.dt;
  rec.convention = convention;
  rec.values.resize(traj.values.size());
  for (std::size_t k = 0; k < traj.values.size(); ++k)
    rec.values[k] = traj.values[k] + sd * rng.gaussian();
  return rec;
}

/// arctan output of the dual-homodyne detector pair for one sample; the
/// common 1/sqrt(2) beamsplitter factor cancels in the ratio. Output lies in
/// (-pi, pi].
inline double dual_homodyne_arctan(double phi, double n1, double n2, double n3,
                                   double n4, double alpha) {
  return std::atan2(2.0 * alpha * std::sin(phi) + n1 + n2,
                    2.0 * alpha * std::cos(phi) + n3 - n4);
}

struct DualHomodyneRecords {
  MeasurementRecord nonlinear;   ///< arctan of the two photocurrents
  MeasurementRecord linearized;  ///< first-order expansion, same noise draws
};

/// Nonlinear dual-homodyne record with four independent N(0, 1/dt) detector
/// noises per sample, plus the matched linearized record
/// theta = phi + (n1 + n2)/(2 alpha) built from the same draws so that their
/// difference isolates the Taylor remainder.
inline DualHomodyneRecords simulate_dual_homodyne_nonlinear(
    const Trajectory& traj, const ModelParams& p, RngStream& rng) {
  const double sd = 1.0 / std::sqrt(traj.dt);
  if (2.0 * p.alpha < 6.0 * std::sqrt(2.0) * sd)
    std::cerr << "warning: dual-homodyne denominator may vanish at alpha="
              << p.alpha << ", dt=" << traj.dt << "\n";

  DualHomodyneRecords out;
  out.nonlinear.dt = traj.dt;
  out.nonlinear.convention = NoiseConvention::DualHomodyneNonlinear;
  out.nonlinear.values.resize(traj.values.size());
  out.linearized.dt = traj.dt;
  out.linearized.convention = NoiseConvention::DualHomodyne;
  out.linearized.values.resize(traj.values.size());

  for (std::size_t k = 0; k < traj.values.size(); ++k) {
    const double n1 = sd * rng.gaussian();
    const double n2 = sd * rng.gaussian();
    const double n3 = sd * rng.gaussian();
    const double n4 = sd * rng.gaussian();
    const double phi = traj.values[k];
    out.nonlinear.values[k] =
        dual_homodyne_arctan(phi, n1, n2, n3, n4, p.alpha);
    out.linearized.values[k] = phi + (n1 + n2) / (2.0 * p.alpha);
  }
  return out;
}

}  // namespace phasetrack
