#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "phasetrack/model.hpp"
#include "phasetrack/solvers.hpp"

// Closed-form steady-state error covariances and gains for every estimation
// scheme, each with an independent solver route (scalar Riccati root or
// 2-state Lyapunov solve) so the two can be cross-checked.
//
// Two measurement-noise conventions coexist and must not be mixed:
//   dual-homodyne      PSD 1/(2|alpha|^2)  (SQL analysis, non-adaptive)
//   linearized homodyne PSD 1/(4|alpha|^2) (all adaptive filters/smoothers)

namespace phasetrack::analytic {

inline double chi_opt(const ModelParams& p) {
  return 2.0 * p.alpha * std::sqrt(p.kappa);
}

/// sqrt(lambda^2 + 4 kappa alpha^2): closed-loop rate of the optimal filter
/// (= lambda + K_f = K_b - lambda = F - lambda).
inline double optimal_rate(const ModelParams& p) {
  return std::sqrt(p.lambda * p.lambda + 4.0 * p.alpha * p.alpha * p.kappa);
}

/// L = sqrt(lambda^2 - mu^2 lambda^2 + 4 alpha^2 kappa), the robust
/// filter/smoother decay rate. Reduces to optimal_rate at mu = 0.
inline double robust_rate(const ModelParams& p) {
  return std::sqrt(p.lambda * p.lambda * (1.0 - p.mu * p.mu) +
                   4.0 * p.alpha * p.alpha * p.kappa);
}

inline double linearized_noise_psd(const ModelParams& p) {
  return 1.0 / (4.0 * p.alpha * p.alpha);
}

inline double dual_homodyne_noise_psd(const ModelParams& p) {
  return 1.0 / (2.0 * p.alpha * p.alpha);
}

// ---------------------------------------------------------------------------
// Standard quantum limit (dual-homodyne channel)
// ---------------------------------------------------------------------------

/// Minimum filtering error without feedback: stabilizing solution of
/// -2 lambda P - 2 alpha^2 P^2 + kappa = 0.
inline double sql_ou(const ModelParams& p) {
  const double a2 = p.alpha * p.alpha;
  return (-p.lambda + std::sqrt(p.lambda * p.lambda + 2.0 * p.kappa * a2)) /
         (2.0 * a2);
}

inline double sql_ou_riccati(const ModelParams& p) {
  const double a2 = p.alpha * p.alpha;
  return solvers::stabilizing_root(
      {-2.0 * a2, -2.0 * p.lambda, p.kappa},
      [&](double root) { return -p.lambda - 2.0 * a2 * root; });
}

// ---------------------------------------------------------------------------
// Sub-optimal low-pass filter and smoother
// ---------------------------------------------------------------------------

/// Error covariance of the first-order low-pass filter on the dual-homodyne
/// channel: kappa/(2(lambda+chi)) + chi/(4 alpha^2).
inline double tw_filter_cov(const ModelParams& p, double chi) {
  return p.kappa / (2.0 * (p.lambda + chi)) +
         chi / (4.0 * p.alpha * p.alpha);
}

/// Same quantity through the augmented (phi, estimate) Lyapunov equation.
/// Requires lambda > 0 for the augmented system to be Hurwitz.
inline double tw_filter_cov_lyap(const ModelParams& p, double chi) {
  Eigen::Matrix2d a;
  a << -p.lambda, 0.0, chi, -chi;
  Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
  q(0, 0) = p.kappa;
  q(1, 1) = chi * chi * dual_homodyne_noise_psd(p);
  const Eigen::Matrix2d ps = solvers::solve_lyapunov({a, q});
  return ps(0, 0) - 2.0 * ps(0, 1) + ps(1, 1);
}

/// Forward low-pass filter on the adaptive (linearized homodyne) channel,
/// general bandwidth.
inline double tw_forward_cov(const ModelParams& p, double chi) {
  return p.kappa / (2.0 * (p.lambda + chi)) +
         chi / (8.0 * p.alpha * p.alpha);
}

/// Forward filter covariance at chi = chi_opt, as printed:
/// sqrt(kappa)(lambda + 4 alpha sqrt(kappa)) / (4 alpha (lambda + 2 alpha sqrt(kappa))).
inline double tw_forward_cov(const ModelParams& p) {
  const double rk = std::sqrt(p.kappa);
  return rk * (p.lambda + 4.0 * p.alpha * rk) /
         (4.0 * p.alpha * (p.lambda + 2.0 * p.alpha * rk));
}

inline double tw_forward_cov_lyap(const ModelParams& p, double chi) {
  Eigen::Matrix2d a;
  a << -p.lambda, 0.0, chi, -chi;
  Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
  q(0, 0) = p.kappa;
  q(1, 1) = chi * chi * linearized_noise_psd(p);
  const Eigen::Matrix2d ps = solvers::solve_lyapunov({a, q});
  return ps(0, 0) - 2.0 * ps(0, 1) + ps(1, 1);
}

/// The backward filter sees the time-reversed output process, which has the
/// same statistics, so its covariance equals the forward one.
inline double tw_backward_cov(const ModelParams& p, double chi) {
  return tw_forward_cov(p, chi);
}
inline double tw_backward_cov(const ModelParams& p) { return tw_forward_cov(p); }
inline double tw_backward_cov_lyap(const ModelParams& p, double chi) {
  return tw_forward_cov_lyap(p, chi);
}

/// Cross-covariance of forward and backward filter errors,
/// kappa lambda / (2 (lambda + chi)^2).
inline double tw_cross_cov(const ModelParams& p, double chi) {
  const double lc = p.lambda + chi;
  return p.kappa * p.lambda / (2.0 * lc * lc);
}
inline double tw_cross_cov(const ModelParams& p) {
  return tw_cross_cov(p, chi_opt(p));
}

/// Cross-covariance assembled from the Lyapunov entries as
/// Sigma - M_f - M_b + M_f Sigma^-1 M_b (past and future are conditionally
/// independent given phi(t)). Requires lambda > 0 so Sigma is finite.
inline double tw_cross_cov_lyap(const ModelParams& p, double chi) {
  if (!(p.lambda > 0.0))
    throw NumericalError("Lyapunov cross-covariance route requires lambda > 0");
  Eigen::Matrix2d a;
  a << -p.lambda, 0.0, chi, -chi;
  Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
  q(0, 0) = p.kappa;
  q(1, 1) = chi * chi * linearized_noise_psd(p);
  const Eigen::Matrix2d fwd = solvers::solve_lyapunov({a, q});
  const Eigen::Matrix2d bwd = fwd;  // reversed output process, same statistics
  const double sigma = fwd(0, 0);
  const double m_f = fwd(0, 1);
  const double m_b = bwd(0, 1);
  return sigma - m_f - m_b + m_f * m_b / sigma;
}

/// Optimal unbiased linear combination of two estimates with error
/// covariances e1, e2 and cross-covariance e12.
struct Combination {
  double k1 = 0.0;
  double k2 = 0.0;
  double cov = 0.0;
};

inline Combination combine_unbiased(double e1, double e2, double e12) {
  const double denom = e1 + e2 - 2.0 * e12;
  if (!(denom > 0.0)) throw NumericalError("estimates perfectly correlated");
  const double k1 = (e2 - e12) / denom;
  return {k1, 1.0 - k1, (e1 * e2 - e12 * e12) / denom};
}

/// Smoothed covariance at chi = chi_opt, as printed.
inline double tw_smoothed_cov(const ModelParams& p) {
  const double rk = std::sqrt(p.kappa);
  const double lc = p.lambda + 2.0 * p.alpha * rk;
  return rk *
         (p.lambda * p.lambda + 8.0 * p.alpha * p.lambda * rk +
          8.0 * p.alpha * p.alpha * p.kappa) /
         (8.0 * p.alpha * lc * lc);
}

/// Smoothed covariance assembled from the combination formula.
inline double tw_smoothed_cov_combined(const ModelParams& p, double chi) {
  return combine_unbiased(tw_forward_cov(p, chi), tw_backward_cov(p, chi),
                          tw_cross_cov(p, chi))
      .cov;
}

// ---------------------------------------------------------------------------
// Kalman filter, RTS smoother, backward information filter
// ---------------------------------------------------------------------------

struct FilterDesign {
  double cov = 0.0;
  double gain = 0.0;
};

/// Forward Kalman design: P_f from -2 lambda P_f - 4 alpha^2 P_f^2 + kappa = 0,
/// K_f = 4 alpha^2 P_f.
inline FilterDesign kalman_cov_gain(const ModelParams& p) {
  const double s = optimal_rate(p);
  return {(-p.lambda + s) / (4.0 * p.alpha * p.alpha), -p.lambda + s};
}

inline double kalman_riccati_root(const ModelParams& p) {
  const double a2 = p.alpha * p.alpha;
  return solvers::stabilizing_root(
      {-4.0 * a2, -2.0 * p.lambda, p.kappa},
      [&](double root) { return -p.lambda - 4.0 * a2 * root; });
}

/// RTS smoother design: P from -2 lambda P + 2 kappa P_f^-1 P - kappa = 0,
/// F = kappa / P_f.
inline FilterDesign rts_cov_gain(const ModelParams& p) {
  const double s = optimal_rate(p);
  return {p.kappa / (2.0 * s),
          4.0 * p.alpha * p.alpha * p.kappa / (-p.lambda + s)};
}

inline double rts_root(const ModelParams& p) {
  const double p_f = kalman_cov_gain(p).cov;
  const double f = p.kappa / p_f;
  // Linear in P; the closed loop runs in reverse time with drift lambda - F.
  return solvers::stabilizing_root(
      {0.0, -2.0 * p.lambda + 2.0 * p.kappa / p_f, -p.kappa},
      [&](double) { return p.lambda - f; });
}

/// Backward information filter design: P_b from
/// 2 lambda P_b - 4 alpha^2 P_b^2 + kappa = 0, K_b = 4 alpha^2 P_b.
inline FilterDesign backward_cov_gain(const ModelParams& p) {
  const double s = optimal_rate(p);
  return {(p.lambda + s) / (4.0 * p.alpha * p.alpha), p.lambda + s};
}

inline double backward_riccati_root(const ModelParams& p) {
  const double a2 = p.alpha * p.alpha;
  // Reverse-time closed loop: lambda - K_b must be negative.
  return solvers::stabilizing_root(
      {-4.0 * a2, 2.0 * p.lambda, p.kappa},
      [&](double root) { return p.lambda - 4.0 * a2 * root; });
}

// ---------------------------------------------------------------------------
// Robust fixed-interval smoother (IQC uncertainty in lambda)
// ---------------------------------------------------------------------------

struct RobustGains {
  double x = 0.0;  ///< forward Riccati root, X = (lambda + L)/kappa
  double y = 0.0;  ///< backward Riccati root, Y = (-lambda + L)/kappa
  double l = 0.0;  ///< decay rate L
};

inline RobustGains robust_riccati(const ModelParams& p) {
  const double l = robust_rate(p);
  return {(p.lambda + l) / p.kappa, (-p.lambda + l) / p.kappa, l};
}

inline RobustGains robust_riccati_roots(const ModelParams& p) {
  const double a2 = p.alpha * p.alpha;
  const double ml = p.mu * p.lambda;
  // -2 lambda X + kappa X^2 + mu^2 lambda^2 / kappa - 4 alpha^2 = 0
  const double x = solvers::stabilizing_root(
      {p.kappa, -2.0 * p.lambda, ml * ml / p.kappa - 4.0 * a2},
      [&](double root) { return p.lambda - p.kappa * root; });
  // -2 lambda Y - kappa Y^2 - mu^2 lambda^2 / kappa + 4 alpha^2 = 0
  const double y = solvers::stabilizing_root(
      {-p.kappa, -2.0 * p.lambda, 4.0 * a2 - ml * ml / p.kappa},
      [&](double root) { return -p.lambda - p.kappa * root; });
  return {x, y, robust_rate(p)};
}

/// Measurement drive of the robust forward filter, 4 alpha^2 kappa / (lambda + L).
/// Equals K_f at mu = 0.
inline double robust_forward_gain(const ModelParams& p) {
  return 4.0 * p.alpha * p.alpha * p.kappa / (p.lambda + robust_rate(p));
}

/// Measurement drive of the robust backward filter, 4 alpha^2 kappa / (L - lambda).
/// Equals K_b at mu = 0.
inline double robust_backward_gain(const ModelParams& p) {
  return 4.0 * p.alpha * p.alpha * p.kappa / (robust_rate(p) - p.lambda);
}

// ---------------------------------------------------------------------------
// Steady-state MSE of fixed designs driven by a mismatched true process
// ---------------------------------------------------------------------------

/// Stationary covariance of the pair (phi, estimate) where phi is OU with
/// rate lambda_true and the estimate obeys est' = drift*est + gain*theta,
/// theta = phi + white noise of PSD noise_psd.
struct PairStats {
  double sigma = 0.0;  ///< E[phi^2]
  double m = 0.0;      ///< E[phi est]
  double n = 0.0;      ///< E[est^2]
  double mse = 0.0;    ///< E[(phi - est)^2]
};

inline PairStats filter_pair_stats(double lambda_true, double kappa,
                                   double gain, double drift,
                                   double noise_psd) {
  if (!(lambda_true > 0.0))
    throw NumericalError("true process nonstationary");
  Eigen::Matrix2d a;
  a << -lambda_true, 0.0, gain, drift;
  Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
  q(0, 0) = kappa;
  q(1, 1) = gain * gain * noise_psd;
  const Eigen::Matrix2d ps = solvers::solve_lyapunov({a, q});
  return {ps(0, 0), ps(0, 1), ps(1, 1),
          ps(0, 0) - 2.0 * ps(0, 1) + ps(1, 1)};
}

/// Error moments of a scheme's forward/backward pair under mismatch, plus the
/// fixed nominal combination weights.
struct MismatchComponents {
  double e1 = 0.0;   ///< forward error covariance
  double e2 = 0.0;   ///< backward error covariance
  double e12 = 0.0;  ///< cross-covariance of the two errors
  double k1 = 1.0;   ///< weight on the forward estimate
  double k2 = 0.0;   ///< weight on the backward estimate
};

/// The backward filter is modeled through time reversal: the reversed output
/// process has the same generator, so one Lyapunov template serves both
/// directions with the estimator's own reverse-time drift. The cross term is
/// assembled as Sigma - M_f - M_b + M_f Sigma^-1 M_b.
inline MismatchComponents mismatch_components(Scheme scheme,
                                              const ModelParams& p,
                                              double delta) {
  ModelParams shifted = p;
  shifted.delta = delta;
  const double lam_t = shifted.lambda_true();
  const double r = linearized_noise_psd(p);
  const double chi = p.resolved_chi();

  auto cross = [](const PairStats& f, const PairStats& b) {
    return (f.sigma - f.m) * (b.sigma - b.m) / f.sigma;
  };

  switch (scheme) {
    case Scheme::TwFilter: {
      const auto f = filter_pair_stats(lam_t, p.kappa, chi, -chi, r);
      return {f.mse, 0.0, 0.0, 1.0, 0.0};
    }
    case Scheme::TwBackward: {
      const auto b = filter_pair_stats(lam_t, p.kappa, chi, -chi, r);
      return {0.0, b.mse, 0.0, 0.0, 1.0};
    }
    case Scheme::Kalman: {
      const double k_f = kalman_cov_gain(p).gain;
      const auto f =
          filter_pair_stats(lam_t, p.kappa, k_f, -(p.lambda + k_f), r);
      return {f.mse, 0.0, 0.0, 1.0, 0.0};
    }
    case Scheme::InfoBackward: {
      const double k_b = backward_cov_gain(p).gain;
      const auto b =
          filter_pair_stats(lam_t, p.kappa, k_b, p.lambda - k_b, r);
      return {0.0, b.mse, 0.0, 0.0, 1.0};
    }
    case Scheme::TwSmoother: {
      const auto f = filter_pair_stats(lam_t, p.kappa, chi, -chi, r);
      const auto b = f;  // identical reverse-time pair
      const auto w = combine_unbiased(tw_forward_cov(p, chi),
                                      tw_backward_cov(p, chi),
                                      tw_cross_cov(p, chi));
      return {f.mse, b.mse, cross(f, b), w.k1, w.k2};
    }
    case Scheme::Rts:
    case Scheme::TwoFilter: {
      const auto kf = kalman_cov_gain(p);
      const auto kb = backward_cov_gain(p);
      const auto f =
          filter_pair_stats(lam_t, p.kappa, kf.gain, -(p.lambda + kf.gain), r);
      const auto b =
          filter_pair_stats(lam_t, p.kappa, kb.gain, p.lambda - kb.gain, r);
      const double k1 = kb.cov / (kf.cov + kb.cov);
      return {f.mse, b.mse, cross(f, b), k1, 1.0 - k1};
    }
    case Scheme::Robust: {
      const auto g = robust_riccati(p);
      const auto f = filter_pair_stats(lam_t, p.kappa, robust_forward_gain(p),
                                       -g.l, r);
      const auto b = filter_pair_stats(lam_t, p.kappa, robust_backward_gain(p),
                                       -g.l, r);
      const double k1 = g.x / (g.x + g.y);
      return {f.mse, b.mse, cross(f, b), k1, 1.0 - k1};
    }
  }
  throw std::invalid_argument("unknown scheme");
}

/// Steady MSE of a fixed nominal design driven by the true process at
/// lambda_true = lambda (1 - mu delta). At delta = 0 this reproduces the
/// scheme's nominal analytic covariance.
inline double mismatch_mse(Scheme scheme, const ModelParams& p, double delta) {
  const auto c = mismatch_components(scheme, p, delta);
  return c.k1 * c.k1 * c.e1 + c.k2 * c.k2 * c.e2 + 2.0 * c.k1 * c.k2 * c.e12;
}

/// Nominal covariance of the robust smoother. No closed form is printed for
/// it; for lambda > 0 it comes from the mismatch machinery at delta = 0, and
/// at lambda = 0 the uncertainty vanishes and the smoother is optimal, so the
/// value is sqrt(kappa)/(4 alpha).
inline double robust_nominal_cov(const ModelParams& p) {
  if (p.lambda > 0.0) return mismatch_mse(Scheme::Robust, p, 0.0);
  return std::sqrt(p.kappa) / (4.0 * p.alpha);
}

/// Nominal analytic covariance of each runnable scheme (closed forms).
inline double scheme_cov(Scheme scheme, const ModelParams& p) {
  const double chi = p.resolved_chi();
  switch (scheme) {
    case Scheme::TwFilter: return tw_forward_cov(p, chi);
    case Scheme::TwBackward: return tw_backward_cov(p, chi);
    case Scheme::TwSmoother: return tw_smoothed_cov_combined(p, chi);
    case Scheme::Kalman: return kalman_cov_gain(p).cov;
    case Scheme::InfoBackward: return backward_cov_gain(p).cov;
    case Scheme::Rts: return rts_cov_gain(p).cov;
    case Scheme::TwoFilter: return rts_cov_gain(p).cov;
    case Scheme::Robust: return robust_nominal_cov(p);
  }
  throw std::invalid_argument("unknown scheme");
}

/// Analytic reference for an ensemble at uncertainty realization delta.
inline double scheme_analytic(Scheme scheme, const ModelParams& p,
                              double delta) {
  if (delta == 0.0 || p.mu == 0.0) return scheme_cov(scheme, p);
  return mismatch_mse(scheme, p, delta);
}

// ---------------------------------------------------------------------------
// Full report with dual-route residual checks
// ---------------------------------------------------------------------------

namespace detail {
inline void check_close(double a, double b, double rel_tol,
                        const std::string& what) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  if (!(std::abs(a - b) <= rel_tol * scale))
    throw NumericalError("dual-route mismatch for " + what);
}
}  // namespace detail

/// Every analytic steady-state quantity at the given parameters. Each value
/// with a second route is cross-checked to 1e-10 relative before the report
/// is returned; covariances are verified nonnegative.
inline CovarianceReport covariance_report(const ModelParams& p) {
  const double chi = p.resolved_chi();
  CovarianceReport rep;

  const double sql = sql_ou(p);
  detail::check_close(sql, sql_ou_riccati(p), 1e-10, "sql");

  const auto kf = kalman_cov_gain(p);
  detail::check_close(kf.cov, kalman_riccati_root(p), 1e-10, "P_f");
  const auto kb = backward_cov_gain(p);
  detail::check_close(kb.cov, backward_riccati_root(p), 1e-10, "P_b");
  const auto rts = rts_cov_gain(p);
  detail::check_close(rts.cov, rts_root(p), 1e-10, "P");
  detail::check_close(rts.cov,
                      combine_unbiased(kf.cov, kb.cov, 0.0).cov, 1e-10,
                      "P vs two-filter combination");

  const auto rob = robust_riccati(p);
  const auto rob2 = robust_riccati_roots(p);
  detail::check_close(rob.x, rob2.x, 1e-10, "X");
  detail::check_close(rob.y, rob2.y, 1e-10, "Y");

  const double sf = tw_forward_cov(p, chi);
  const double sb = tw_backward_cov(p, chi);
  const double sfb = tw_cross_cov(p, chi);
  const double ss = tw_smoothed_cov_combined(p, chi);
  if (p.lambda > 0.0) {
    detail::check_close(sf, tw_forward_cov_lyap(p, chi), 1e-10, "sigma_f^2");
    detail::check_close(sb, tw_backward_cov_lyap(p, chi), 1e-10, "sigma_b^2");
    detail::check_close(sfb, tw_cross_cov_lyap(p, chi), 1e-10, "sigma_fb^2");
    detail::check_close(tw_filter_cov(p, chi), tw_filter_cov_lyap(p, chi),
                        1e-10, "sigma^2");
  }

  rep.covariance["sql"] = sql;
  rep.covariance["lpf-dual"] = tw_filter_cov(p, chi);
  rep.covariance["tw-filter"] = sf;
  rep.covariance["tw-backward"] = sb;
  rep.covariance["tw-smoother"] = ss;
  rep.covariance["kalman"] = kf.cov;
  rep.covariance["info-backward"] = kb.cov;
  rep.covariance["rts"] = rts.cov;
  rep.covariance["two-filter"] = rts.cov;
  rep.covariance["robust"] = robust_nominal_cov(p);

  rep.aux["chi"] = chi;
  rep.aux["chi_opt"] = chi_opt(p);
  rep.aux["K_f"] = kf.gain;
  rep.aux["K_b"] = kb.gain;
  rep.aux["F"] = rts.gain;
  rep.aux["P_f"] = kf.cov;
  rep.aux["P_b"] = kb.cov;
  rep.aux["L"] = rob.l;
  rep.aux["X"] = rob.x;
  rep.aux["Y"] = rob.y;
  rep.aux["sigma_fb"] = sfb;
  rep.aux["k1_tw"] = combine_unbiased(sf, sb, sfb).k1;
  rep.aux["k1_two_filter"] = kb.cov / (kf.cov + kb.cov);
  rep.aux["k1_robust"] = rob.x / (rob.x + rob.y);

  for (const auto& [name, value] : rep.covariance)
    if (!(value >= 0.0))
      throw NumericalError("negative covariance for " + name);
  return rep;
}

}  // namespace phasetrack::analytic
