#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "phasetrack/analytic.hpp"
#include "phasetrack/model.hpp"

// Trajectory-level implementations of the estimation schemes. All are
// steady-state (constant-gain) designs integrated with forward Euler;
// initial transients are excluded through burn-in rather than time-varying
// gains.

namespace phasetrack {

/// Sign convention of the reverse-time xi recursion in the robust smoother.
/// As printed, eta and xi carry the same measurement drive and the combined
/// weights on the two filtered estimates do not sum to one; flipping the
/// drive sign of xi restores the unit-sum combination and is what reduces to
/// the two-filter smoother at mu = 0. Flipped is the validated default.
enum class RobustSign { Flipped, AsPrinted };

/// Resolved gains for one scheme at nominal parameters.
struct EstimatorConfig {
  Scheme scheme = Scheme::Kalman;
  ModelParams params;
  double chi = 0.0;
  double k_f = 0.0;
  double k_b = 0.0;
  double f_gain = 0.0;
  double p_f = 0.0;
  double p_b = 0.0;
  double l_rate = 0.0;
  double x_rob = 0.0;
  double y_rob = 0.0;
  RobustSign robust_sign = RobustSign::Flipped;
  std::size_t burn_in = 0;

  static EstimatorConfig make(Scheme scheme, const ModelParams& params,
                              RobustSign sign = RobustSign::Flipped) {
    validate_params(params);
    EstimatorConfig c;
    c.scheme = scheme;
    c.params = params;
    c.chi = params.resolved_chi();
    const auto kf = analytic::kalman_cov_gain(params);
    const auto kb = analytic::backward_cov_gain(params);
    const auto rob = analytic::robust_riccati(params);
    c.k_f = kf.gain;
    c.p_f = kf.cov;
    c.k_b = kb.gain;
    c.p_b = kb.cov;
    c.f_gain = analytic::rts_cov_gain(params).gain;
    c.l_rate = rob.l;
    c.x_rob = rob.x;
    c.y_rob = rob.y;
    c.robust_sign = sign;
    c.burn_in = default_burn_in(params);
    return c;
  }

  /// Gains must match a recomputation from the nominal parameters.
  bool gains_consistent(double rel_tol = 1e-12) const {
    const auto fresh = make(scheme, params, robust_sign);
    auto close = [rel_tol](double a, double b) {
      return std::abs(a - b) <= rel_tol * std::max({std::abs(a), std::abs(b), 1.0});
    };
    return close(chi, fresh.chi) && close(k_f, fresh.k_f) &&
           close(k_b, fresh.k_b) && close(f_gain, fresh.f_gain) &&
           close(p_f, fresh.p_f) && close(p_b, fresh.p_b) &&
           close(l_rate, fresh.l_rate) && close(x_rob, fresh.x_rob) &&
           close(y_rob, fresh.y_rob);
  }
};

namespace detail {

inline void require_linearized(const MeasurementRecord& meas,
                               const char* who) {
  if (meas.convention != NoiseConvention::LinearizedHomodyne)
    throw std::invalid_argument(std::string(who) +
                                " expects linearized-homodyne measurements");
}

inline void require_step_stable(double rate, double dt, const char* what) {
  if (!(rate * dt < 0.5))
    throw NumericalError(std::string("step-size instability: ") + what +
                         "*dt >= 0.5");
}

inline EstimateSeries make_series(Scheme scheme, const MeasurementRecord& meas,
                                  const EstimatorConfig& cfg) {
  if (meas.values.empty())
    throw std::invalid_argument("measurement record must be non-empty");
  EstimateSeries s;
  s.scheme = scheme;
  s.dt = meas.dt;
  s.burn_in = cfg.burn_in;
  s.values.resize(meas.values.size());
  return s;
}

/// Forward Euler of est' = drift*est + gain*theta from est[0] = init.
inline void integrate_forward(const std::vector<double>& theta, double dt,
                              double drift, double gain, double init,
                              std::vector<double>& out) {
  out[0] = init;
  for (std::size_t k = 0; k + 1 < theta.size(); ++k)
    out[k + 1] = out[k] + dt * (drift * out[k] + gain * theta[k]);
}

/// Reverse-time Euler from est[n-1] = init, driven by the sample at the
/// step's departure point: literally reverse the sequence, integrate
/// forward, reverse back.
inline void integrate_reversed(const std::vector<double>& theta, double dt,
                               double drift, double gain, double init,
                               std::vector<double>& out) {
  const std::size_t n = theta.size();
  out[n - 1] = init;
  for (std::size_t k = n - 1; k-- > 0;)
    out[k] = out[k + 1] + dt * (drift * out[k + 1] + gain * theta[k + 1]);
}

/// Reverse-time Euler driven by the sample at the step's arrival point, so
/// the noise increment covering [t_k, t_{k+1}] enters the backward pass with
/// the same assignment as the forward pass. Backward outputs then stay
/// pathwise first-order consistent with the forward-pass discretization;
/// with the departure-point drive the forward/backward combination differs
/// from the RTS sweep at O(sqrt(dt)) instead of O(dt).
inline void integrate_backward(const std::vector<double>& theta, double dt,
                               double drift, double gain, double init,
                               std::vector<double>& out) {
  const std::size_t n = theta.size();
  out[n - 1] = init;
  for (std::size_t k = n - 1; k-- > 0;)
    out[k] = out[k + 1] + dt * (drift * out[k + 1] + gain * theta[k]);
}

}  // namespace detail

/// First-order low-pass forward filter Theta' = -chi (Theta - theta).
inline EstimateSeries run_tw_forward(const MeasurementRecord& meas,
                                     const EstimatorConfig& cfg) {
  detail::require_linearized(meas, "run_tw_forward");
  auto s = detail::make_series(Scheme::TwFilter, meas, cfg);
  detail::integrate_forward(meas.values, meas.dt, -cfg.chi, cfg.chi,
                            meas.values.front(), s.values);
  return s;
}

/// The same lag run against the reversed record (tau = T - t substitution).
inline EstimateSeries run_tw_backward(const MeasurementRecord& meas,
                                      const EstimatorConfig& cfg) {
  detail::require_linearized(meas, "run_tw_backward");
  auto s = detail::make_series(Scheme::TwBackward, meas, cfg);
  detail::integrate_reversed(meas.values, meas.dt, -cfg.chi, cfg.chi,
                             meas.values.back(), s.values);
  return s;
}

/// Pointwise combination k1 Theta_- + k2 Theta_+ with the optimal unbiased
/// weights; with equal forward/backward covariances this is the midpoint.
inline EstimateSeries run_tw_smoother(const MeasurementRecord& meas,
                                      const EstimatorConfig& cfg) {
  const auto fwd = run_tw_forward(meas, cfg);
  const auto bwd = run_tw_backward(meas, cfg);
  const auto w = analytic::combine_unbiased(
      analytic::tw_forward_cov(cfg.params, cfg.chi),
      analytic::tw_backward_cov(cfg.params, cfg.chi),
      analytic::tw_cross_cov(cfg.params, cfg.chi));
  auto s = detail::make_series(Scheme::TwSmoother, meas, cfg);
  for (std::size_t k = 0; k < s.values.size(); ++k)
    s.values[k] = w.k1 * fwd.values[k] + w.k2 * bwd.values[k];
  return s;
}

/// Steady-state Kalman filter  phi_f' = -(lambda + K_f) phi_f + K_f theta.
inline EstimateSeries run_kalman(const MeasurementRecord& meas,
                                 const EstimatorConfig& cfg) {
  detail::require_linearized(meas, "run_kalman");
  const double lam = cfg.params.lambda;
  detail::require_step_stable(lam + cfg.k_f, meas.dt, "(lambda+K_f)");
  auto s = detail::make_series(Scheme::Kalman, meas, cfg);
  detail::integrate_forward(meas.values, meas.dt, -(lam + cfg.k_f), cfg.k_f,
                            meas.values.front(), s.values);
  return s;
}

/// Backward information filter  phi_b' = (lambda - K_b) phi_b + K_b theta
/// integrated in reverse time, where lambda - K_b < 0.
inline EstimateSeries run_info_backward(const MeasurementRecord& meas,
                                        const EstimatorConfig& cfg) {
  detail::require_linearized(meas, "run_info_backward");
  const double lam = cfg.params.lambda;
  detail::require_step_stable(cfg.k_b - lam, meas.dt, "(K_b-lambda)");
  auto s = detail::make_series(Scheme::InfoBackward, meas, cfg);
  detail::integrate_backward(meas.values, meas.dt, lam - cfg.k_b, cfg.k_b,
                             meas.values.back(), s.values);
  return s;
}

/// RTS smoother: Kalman forward pass, then reverse-time integration of
/// phi' = (lambda - F) phi + F phi_f from phi(T) = phi_f(T).
inline EstimateSeries run_rts(const MeasurementRecord& meas,
                              const EstimatorConfig& cfg) {
  const double lam = cfg.params.lambda;
  detail::require_step_stable(cfg.f_gain - lam, meas.dt, "(F-lambda)");
  const auto fwd = run_kalman(meas, cfg);
  auto s = detail::make_series(Scheme::Rts, meas, cfg);
  detail::integrate_reversed(fwd.values, meas.dt, lam - cfg.f_gain, cfg.f_gain,
                             fwd.values.back(), s.values);
  return s;
}

/// Mayne-Fraser combination of the forward Kalman and backward information
/// estimates with weights P_b/(P_f+P_b), P_f/(P_f+P_b); the cross term is
/// zero for this pair.
inline EstimateSeries run_two_filter(const MeasurementRecord& meas,
                                     const EstimatorConfig& cfg) {
  const auto fwd = run_kalman(meas, cfg);
  const auto bwd = run_info_backward(meas, cfg);
  const double w_f = cfg.p_b / (cfg.p_f + cfg.p_b);
  const double w_b = cfg.p_f / (cfg.p_f + cfg.p_b);
  auto s = detail::make_series(Scheme::TwoFilter, meas, cfg);
  for (std::size_t k = 0; k < s.values.size(); ++k)
    s.values[k] = w_f * fwd.values[k] + w_b * bwd.values[k];
  return s;
}

/// Robust fixed-interval smoother: eta' = -L eta + 4 alpha^2 theta forward
/// from eta(0) = 0 (no a-priori state information, X0 = 0), xi integrated in
/// reverse time from xi(T) = 0, output (eta - xi)/(X + Y). Under the
/// validated Flipped convention xi's measurement drive is negated.
inline EstimateSeries run_robust(const MeasurementRecord& meas,
                                 const EstimatorConfig& cfg) {
  detail::require_linearized(meas, "run_robust");
  detail::require_step_stable(cfg.l_rate, meas.dt, "L");
  const double drive = 4.0 * cfg.params.alpha * cfg.params.alpha;
  const double xi_drive =
      cfg.robust_sign == RobustSign::Flipped ? -drive : drive;

  const std::size_t n = meas.values.size();
  std::vector<double> eta(n), xi(n);
  detail::integrate_forward(meas.values, meas.dt, -cfg.l_rate, drive, 0.0, eta);
  detail::integrate_backward(meas.values, meas.dt, -cfg.l_rate, xi_drive, 0.0,
                             xi);

  auto s = detail::make_series(Scheme::Robust, meas, cfg);
  const double norm = cfg.x_rob + cfg.y_rob;
  for (std::size_t k = 0; k < n; ++k)
    s.values[k] = (eta[k] - xi[k]) / norm;
  return s;
}

inline EstimateSeries run_estimator(const MeasurementRecord& meas,
                                    const EstimatorConfig& cfg) {
  switch (cfg.scheme) {
    case Scheme::TwFilter: return run_tw_forward(meas, cfg);
    case Scheme::TwBackward: return run_tw_backward(meas, cfg);
    case Scheme::TwSmoother: return run_tw_smoother(meas, cfg);
    case Scheme::Kalman: return run_kalman(meas, cfg);
    case Scheme::InfoBackward: return run_info_backward(meas, cfg);
    case Scheme::Rts: return run_rts(meas, cfg);
    case Scheme::TwoFilter: return run_two_filter(meas, cfg);
    case Scheme::Robust: return run_robust(meas, cfg);
  }
  throw std::invalid_argument("unknown scheme");
}

/// Half-open index range [burn_in, n - burn_in) used for steady-state
/// statistics; both ends are excluded since backward passes carry terminal
/// transients.
inline std::pair<std::size_t, std::size_t> interior_window(
    const EstimateSeries& s) {
  const std::size_t n = s.values.size();
  if (2 * s.burn_in >= n)
    throw NumericalError("burn-in consumes the whole series");
  return {s.burn_in, n - s.burn_in};
}

}  // namespace phasetrack
