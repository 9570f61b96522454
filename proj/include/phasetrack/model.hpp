#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace phasetrack {

/// Numerical failures as opposed to configuration errors: non-Hurwitz
/// dynamics, tripped integration guards, nonstationary truth processes.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Full parameter set shared by simulation, estimation and analysis.
///
/// All rates are in 1/time with one consistent time unit; phases are in
/// radians. `chi` left unset resolves to the optimal low-pass bandwidth
/// 2|alpha|*sqrt(kappa).
struct ModelParams {
  double lambda = 1.0;        ///< mean-reversion rate, >= 0
  double kappa = 1.0;         ///< inverse coherence time (process-noise power), > 0
  double alpha = 1.0;         ///< field amplitude |alpha|, > 0
  std::optional<double> chi;  ///< low-pass bandwidth; defaults to 2|alpha|sqrt(kappa)
  double mu = 0.0;            ///< uncertainty level, 0 <= mu < 1
  double delta = 0.0;         ///< uncertainty realization, |delta| <= 1
  double horizon = 100.0;     ///< total simulated time T
  double dt = 1e-3;           ///< integration step
  std::uint64_t seed = 1;     ///< RNG master seed

  double resolved_chi() const {
    return chi ? *chi : 2.0 * alpha * std::sqrt(kappa);
  }

  /// Mean-reversion rate of the true process under the uncertainty model
  /// lambda -> lambda*(1 - mu*delta).
  double lambda_true() const { return lambda * (1.0 - mu * delta); }
};

inline std::vector<std::string> param_violations(const ModelParams& p) {
  std::vector<std::string> v;
  auto finite = [&v](double x, const char* name) {
    if (!std::isfinite(x)) {
      v.push_back(std::string(name) + " must be finite");
      return false;
    }
    return true;
  };
  if (finite(p.lambda, "lambda") && !(p.lambda >= 0.0))
    v.push_back("lambda must be >= 0");
  if (finite(p.kappa, "kappa") && !(p.kappa > 0.0))
    v.push_back("kappa must be > 0");
  if (finite(p.alpha, "alpha") && !(p.alpha > 0.0))
    v.push_back("alpha must be > 0");
  if (p.chi && finite(*p.chi, "chi") && !(*p.chi > 0.0))
    v.push_back("chi must be > 0");
  if (finite(p.mu, "mu") && !(p.mu >= 0.0 && p.mu < 1.0))
    v.push_back("mu must satisfy 0 <= mu < 1");
  if (finite(p.delta, "delta") && !(std::abs(p.delta) <= 1.0))
    v.push_back("delta must satisfy |delta| <= 1");
  if (finite(p.dt, "dt") && !(p.dt > 0.0))
    v.push_back("dt must be > 0");
  if (finite(p.horizon, "horizon") && std::isfinite(p.dt) && p.dt > 0.0 &&
      !(p.horizon >= 10.0 * p.dt))
    v.push_back("horizon must be >= 10*dt");
  return v;
}

/// Returns the parameters unchanged when every invariant holds; otherwise
/// throws std::invalid_argument naming each violated bound.
inline ModelParams validate_params(const ModelParams& p) {
  const auto v = param_violations(p);
  if (!v.empty()) {
    std::string msg = v.front();
    for (std::size_t i = 1; i < v.size(); ++i) msg += "; " + v[i];
    throw std::invalid_argument(msg);
  }
  return p;
}

/// Number of grid samples covering [0, horizon] at step dt.
inline std::size_t sample_count(double horizon, double dt) {
  return static_cast<std::size_t>(std::floor(horizon / dt + 1e-9)) + 1;
}

enum class NoiseConvention {
  LinearizedHomodyne,    ///< per-sample noise variance 1/(4|alpha|^2 dt)
  DualHomodyne,          ///< per-sample noise variance 1/(2|alpha|^2 dt)
  DualHomodyneNonlinear  ///< arctan of the two quadrature photocurrents
};

inline std::string to_string(NoiseConvention c) {
  switch (c) {
    case NoiseConvention::LinearizedHomodyne: return "linearized-homodyne";
    case NoiseConvention::DualHomodyne: return "dual-homodyne";
    case NoiseConvention::DualHomodyneNonlinear: return "dual-homodyne-nonlinear";
  }
  return "unknown";
}

/// Uniformly sampled true phase.
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> values;
};

/// Measurement samples on the same grid as their source trajectory.
struct MeasurementRecord {
  double dt = 0.0;
  NoiseConvention convention = NoiseConvention::LinearizedHomodyne;
  std::vector<double> values;
};

enum class Scheme {
  TwFilter,
  TwBackward,
  TwSmoother,
  Kalman,
  InfoBackward,
  Rts,
  TwoFilter,
  Robust
};

inline const std::vector<Scheme>& all_schemes() {
  static const std::vector<Scheme> v{
      Scheme::TwFilter,  Scheme::TwBackward,   Scheme::TwSmoother,
      Scheme::Kalman,    Scheme::InfoBackward, Scheme::Rts,
      Scheme::TwoFilter, Scheme::Robust};
  return v;
}

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::TwFilter: return "tw-filter";
    case Scheme::TwBackward: return "tw-backward";
    case Scheme::TwSmoother: return "tw-smoother";
    case Scheme::Kalman: return "kalman";
    case Scheme::InfoBackward: return "info-backward";
    case Scheme::Rts: return "rts";
    case Scheme::TwoFilter: return "two-filter";
    case Scheme::Robust: return "robust";
  }
  return "unknown";
}

inline Scheme scheme_from_string(const std::string& name) {
  for (Scheme s : all_schemes())
    if (to_string(s) == name) return s;
  throw std::invalid_argument(
      "unknown scheme '" + name +
      "' (expected one of tw-filter, tw-backward, tw-smoother, kalman, "
      "info-backward, rts, two-filter, robust)");
}

/// Output of one estimation scheme on one measurement record. `burn_in`
/// samples are excluded at both ends when forming steady-state statistics
/// (backward passes have terminal transients).
struct EstimateSeries {
  Scheme scheme = Scheme::Kalman;
  double dt = 0.0;
  std::size_t burn_in = 0;
  std::vector<double> values;
};

/// Analytic steady-state error covariances keyed by scheme name, with
/// auxiliary entries for gains, Riccati roots, weights and cross-covariances.
struct CovarianceReport {
  std::map<std::string, double> covariance;
  std::map<std::string, double> aux;
};

/// Default steady-state burn-in: ten time constants of the slowest decay
/// mode among lambda+K_f, chi and the robust rate L, in samples.
inline std::size_t default_burn_in(const ModelParams& p) {
  const double s =
      std::sqrt(p.lambda * p.lambda + 4.0 * p.alpha * p.alpha * p.kappa);
  const double l = std::sqrt(p.lambda * p.lambda * (1.0 - p.mu * p.mu) +
                             4.0 * p.alpha * p.alpha * p.kappa);
  const double rate = std::min({s, p.resolved_chi(), l});
  return static_cast<std::size_t>(std::ceil(10.0 / rate / p.dt));
}

}  // namespace phasetrack
