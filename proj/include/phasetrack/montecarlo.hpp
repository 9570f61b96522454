#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "phasetrack/analytic.hpp"
#include "phasetrack/estimators.hpp"
#include "phasetrack/model.hpp"
#include "phasetrack/simulate.hpp"

// Ensemble experiment engine. Trials are independent work items: trial i
// draws its own RNG streams from (seed, 4i) and (seed, 4i+1), so results are
// identical under any parallel schedule, and aggregation runs in trial order.

namespace phasetrack {

struct EnsembleConfig {
  ModelParams params;  ///< nominal parameters; params.delta drives mismatch
  std::vector<Scheme> schemes = all_schemes();
  std::size_t trials = 200;
  std::optional<std::size_t> burn_in;  ///< override of the model default
  unsigned jobs = 1;
  RobustSign robust_sign = RobustSign::Flipped;
};

struct MseRow {
  Scheme scheme = Scheme::Kalman;
  double analytic = 0.0;  ///< matching analytic covariance (NaN if undefined)
  double mse = 0.0;
  double se = 0.0;
  double z = 0.0;  ///< (mse - analytic)/se
  std::size_t trials = 0;
  std::size_t interior_samples = 0;  ///< per trial
};

/// Empirical cross-covariance of forward Kalman and backward information
/// filter errors (zero in theory).
struct CrossStat {
  double mean = 0.0;
  double se = 0.0;
};

struct MseReport {
  std::vector<MseRow> rows;
  std::optional<CrossStat> forward_backward_cross;
};

namespace detail {

struct TrialOut {
  std::vector<double> scheme_mse;  // per requested scheme
  double cross = 0.0;
  bool has_cross = false;
};

inline TrialOut run_trial(const EnsembleConfig& cfg,
                          const std::vector<EstimatorConfig>& estimators,
                          std::size_t trial) {
  ModelParams truth = cfg.params;
  truth.lambda = cfg.params.lambda_true();

  RngStream traj_rng(cfg.params.seed, 4 * trial);
  RngStream meas_rng(cfg.params.seed, 4 * trial + 1);
  const Trajectory traj = simulate_ou(truth, traj_rng);
  const MeasurementRecord meas = simulate_measurements(
      traj, cfg.params, NoiseConvention::LinearizedHomodyne, meas_rng);

  TrialOut out;
  out.scheme_mse.reserve(estimators.size());
  const EstimateSeries* kalman_series = nullptr;
  const EstimateSeries* backward_series = nullptr;
  std::vector<EstimateSeries> kept;
  kept.reserve(estimators.size());

  for (const auto& est : estimators) {
    kept.push_back(run_estimator(meas, est));
    const EstimateSeries& s = kept.back();
    const auto [lo, hi] = interior_window(s);
    double acc = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      const double e = s.values[k] - traj.values[k];
      acc += e * e;
    }
    out.scheme_mse.push_back(acc / static_cast<double>(hi - lo));
  }
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    if (estimators[i].scheme == Scheme::Kalman) kalman_series = &kept[i];
    if (estimators[i].scheme == Scheme::InfoBackward)
      backward_series = &kept[i];
  }
  if (kalman_series && backward_series) {
    const auto [lo, hi] = interior_window(*kalman_series);
    double acc = 0.0;
    for (std::size_t k = lo; k < hi; ++k)
      acc += (traj.values[k] - kalman_series->values[k]) *
             (traj.values[k] - backward_series->values[k]);
    out.cross = acc / static_cast<double>(hi - lo);
    out.has_cross = true;
  }
  return out;
}

inline void mean_se(const std::vector<double>& xs, double& mean, double& se) {
  const double n = static_cast<double>(xs.size());
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1.0);
  se = std::sqrt(var / n);
}

}  // namespace detail

/// Runs cfg.trials independent trials and aggregates interior-window MSE per
/// scheme with between-trial standard errors. Reproducible for a given
/// (params, seed) at any jobs count.
inline MseReport run_ensemble(const EnsembleConfig& cfg) {
  validate_params(cfg.params);
  if (cfg.trials < 2) throw std::invalid_argument("trials must be >= 2");
  if (cfg.schemes.empty()) throw std::invalid_argument("schemes must be non-empty");

  std::vector<EstimatorConfig> estimators;
  estimators.reserve(cfg.schemes.size());
  for (Scheme s : cfg.schemes) {
    auto est = EstimatorConfig::make(s, cfg.params, cfg.robust_sign);
    if (cfg.burn_in) est.burn_in = *cfg.burn_in;
    estimators.push_back(est);
  }
  const std::size_t n = sample_count(cfg.params.horizon, cfg.params.dt);
  const std::size_t burn = estimators.front().burn_in;
  if (2 * burn >= n)
    throw std::invalid_argument("horizon too short for the burn-in window");

  const std::size_t n_trials = cfg.trials;
  std::vector<detail::TrialOut> results(n_trials);
  std::vector<std::exception_ptr> errors(n_trials);

  auto work = [&](std::size_t i) {
    try {
      results[i] = detail::run_trial(cfg, estimators, i);
    } catch (const std::exception& e) {
      errors[i] = std::make_exception_ptr(NumericalError(
          "trial " + std::to_string(i) + ": " + e.what()));
    }
  };

  const unsigned jobs = std::max(1u, cfg.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < n_trials; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (unsigned w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n_trials;
             i = next.fetch_add(1))
          work(i);
      });
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n_trials; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);

  MseReport report;
  for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
    std::vector<double> per_trial(n_trials);
    for (std::size_t i = 0; i < n_trials; ++i)
      per_trial[i] = results[i].scheme_mse[s];
    MseRow row;
    row.scheme = cfg.schemes[s];
    detail::mean_se(per_trial, row.mse, row.se);
    row.trials = n_trials;
    row.interior_samples = n - 2 * burn;
    try {
      row.analytic =
          analytic::scheme_analytic(cfg.schemes[s], cfg.params, cfg.params.delta);
      row.z = (row.mse - row.analytic) / row.se;
    } catch (const NumericalError&) {
      row.analytic = std::numeric_limits<double>::quiet_NaN();
      row.z = std::numeric_limits<double>::quiet_NaN();
    }
    report.rows.push_back(row);
  }
  if (!results.empty() && results.front().has_cross) {
    std::vector<double> per_trial(n_trials);
    for (std::size_t i = 0; i < n_trials; ++i) per_trial[i] = results[i].cross;
    CrossStat cs;
    detail::mean_se(per_trial, cs.mean, cs.se);
    report.forward_backward_cross = cs;
  }
  return report;
}

enum class SweepAxis { Lambda, Delta };

inline std::string to_string(SweepAxis a) {
  return a == SweepAxis::Lambda ? "lambda" : "delta";
}

struct SweepPoint {
  double value = 0.0;
  std::map<std::string, double> analytic;
  std::vector<MseRow> empirical;
  std::string error;  ///< non-empty when the point failed
};

struct SweepReport {
  SweepAxis axis = SweepAxis::Lambda;
  std::vector<SweepPoint> points;
};

/// Lambda sweeps compare the nominal schemes; delta sweeps use mismatch
/// semantics, with the truth at lambda (1 - mu delta) and all estimators
/// fixed at the nominal design. Invalid grid points are recorded as
/// row-level errors and the sweep continues.
inline SweepReport sweep(SweepAxis axis, const std::vector<double>& grid,
                         const EnsembleConfig& cfg) {
  if (grid.empty()) throw std::invalid_argument("grid must be non-empty");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i] < grid[i + 1]))
      throw std::invalid_argument("grid must be strictly increasing");

  SweepReport report;
  report.axis = axis;
  for (double v : grid) {
    SweepPoint point;
    point.value = v;
    EnsembleConfig point_cfg = cfg;
    if (axis == SweepAxis::Lambda) {
      point_cfg.params.lambda = v;
      point_cfg.params.delta = 0.0;
      point_cfg.schemes = {Scheme::TwFilter, Scheme::TwSmoother, Scheme::Kalman,
                           Scheme::Rts};
    } else {
      point_cfg.params.delta = v;
      point_cfg.schemes = {Scheme::Rts, Scheme::Robust};
    }
    try {
      validate_params(point_cfg.params);
      const ModelParams& p = point_cfg.params;
      if (axis == SweepAxis::Lambda) {
        point.analytic["sql"] = analytic::sql_ou(p);
        point.analytic["tw_filter"] = analytic::scheme_cov(Scheme::TwFilter, p);
        point.analytic["tw_smoother"] =
            analytic::scheme_cov(Scheme::TwSmoother, p);
        point.analytic["kalman"] = analytic::scheme_cov(Scheme::Kalman, p);
        point.analytic["rts"] = analytic::scheme_cov(Scheme::Rts, p);
      } else {
        point.analytic["rts_mse"] = analytic::mismatch_mse(Scheme::Rts, p, v);
        point.analytic["robust_mse"] =
            analytic::mismatch_mse(Scheme::Robust, p, v);
      }
      if (cfg.trials > 0)
        point.empirical = run_ensemble(point_cfg).rows;
    } catch (const std::exception& e) {
      point.error = e.what();
    }
    report.points.push_back(std::move(point));
  }
  return report;
}

}  // namespace phasetrack
