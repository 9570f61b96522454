#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "phasetrack/analytic.hpp"
#include "phasetrack/model.hpp"
#include "phasetrack/montecarlo.hpp"
#include "phasetrack/report.hpp"

#ifndef PHASETRACK_VERSION
#define PHASETRACK_VERSION "0.1.0"
#endif

// Command-line front end. Exit codes: 0 success, 2 usage/config error,
// 3 numerical failure, 4 |z| > 5 regression tripwire. Output files are
// byte-identical for a given config + seed at any --jobs value, so the
// comment header records everything needed for reproduction except
// execution-only knobs (jobs, output path).

namespace phasetrack::cli {

/// "start:stop:steps" (inclusive, steps = point count) or an explicit
/// comma-separated list.
inline std::vector<double> parse_grid(const std::string& spec) {
  if (spec.empty()) throw std::invalid_argument("grid must be non-empty");
  std::vector<double> grid;
  auto parse_num = [](const std::string& tok) {
    std::size_t pos = 0;
    double v;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("grid: cannot parse '" + tok + "'");
    }
    if (pos != tok.size())
      throw std::invalid_argument("grid: cannot parse '" + tok + "'");
    return v;
  };
  if (spec.find(':') != std::string::npos) {
    std::stringstream ss(spec);
    std::string a, b, c;
    if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') ||
        !std::getline(ss, c))
      throw std::invalid_argument("grid: expected start:stop:steps");
    const double start = parse_num(a);
    const double stop = parse_num(b);
    const long steps = std::lround(parse_num(c));
    if (steps < 1) throw std::invalid_argument("grid: steps must be >= 1");
    if (steps == 1) {
      grid.push_back(start);
    } else {
      for (long i = 0; i < steps; ++i)
        grid.push_back(start + (stop - start) * static_cast<double>(i) /
                                   static_cast<double>(steps - 1));
    }
  } else {
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) grid.push_back(parse_num(tok));
  }
  if (grid.empty()) throw std::invalid_argument("grid must be non-empty");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i] < grid[i + 1]))
      throw std::invalid_argument("grid must be strictly increasing");
  return grid;
}

namespace detail {

struct Options {
  ModelParams params;
  bool chi_set = false;
  bool mu_set = false;
  bool grid_set = false;
  std::int64_t trials = -1;  // -1: per-command default
  unsigned jobs = 0;         // 0: hardware concurrency
  std::string grid_spec;
  std::string axis;
  std::string out;
  std::string format = "csv";
  std::string schemes_csv;
  std::int64_t burn_in = -1;
};

inline report::Meta base_meta(const std::string& command, const Options& o) {
  report::Meta m;
  m.emplace_back("artifact", std::string("phasetrack ") + PHASETRACK_VERSION);
  m.emplace_back("command", command);
  m.emplace_back("lambda", report::fmt(o.params.lambda));
  m.emplace_back("kappa", report::fmt(o.params.kappa));
  m.emplace_back("alpha", report::fmt(o.params.alpha));
  m.emplace_back("chi", o.params.chi ? report::fmt(*o.params.chi) : "auto");
  m.emplace_back("mu", report::fmt(o.params.mu));
  m.emplace_back("delta", report::fmt(o.params.delta));
  m.emplace_back("dt", report::fmt(o.params.dt));
  m.emplace_back("horizon", report::fmt(o.params.horizon));
  m.emplace_back("seed", std::to_string(o.params.seed));
  m.emplace_back("format", o.format);
  return m;
}

inline void write_table(const std::string& path, const std::string& format,
                        const report::Meta& meta,
                        const std::vector<std::string>& columns,
                        const std::vector<report::Row>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::invalid_argument("cannot open output path '" + path + "'");
  if (format == "json")
    report::write_json(os, meta, columns, rows);
  else
    report::write_csv(os, meta, columns, rows);
}

inline std::vector<Scheme> parse_schemes(const std::string& csv) {
  if (csv.empty()) return all_schemes();
  std::vector<Scheme> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(scheme_from_string(tok));
  if (out.empty()) throw std::invalid_argument("schemes must be non-empty");
  return out;
}

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// --- analytic: one row per scheme with covariance, gains and lambda->0 limit

inline int cmd_analytic(const Options& o, const std::string& out_path) {
  const ModelParams p = validate_params(o.params);
  const CovarianceReport rep = analytic::covariance_report(p);
  ModelParams p0 = p;
  p0.lambda = 0.0;

  const std::vector<std::string> columns = {
      "scheme", "covariance", "gain_f", "gain_b",
      "gain_s", "weight_f",   "lambda0_limit"};
  const double chi = p.resolved_chi();
  std::vector<report::Row> rows;
  auto aux = [&](const char* key) { return rep.aux.at(key); };
  auto cov = [&](const char* key) { return rep.covariance.at(key); };

  rows.push_back({"sql", cov("sql"), nan(), nan(), nan(), nan(),
                  analytic::sql_ou(p0)});
  rows.push_back({"lpf-dual", cov("lpf-dual"), chi, nan(), nan(), nan(),
                  analytic::tw_filter_cov(p0, chi)});
  rows.push_back({"tw-filter", cov("tw-filter"), chi, nan(), nan(), nan(),
                  analytic::scheme_cov(Scheme::TwFilter, p0)});
  rows.push_back({"tw-backward", cov("tw-backward"), nan(), chi, nan(), nan(),
                  analytic::scheme_cov(Scheme::TwBackward, p0)});
  rows.push_back({"tw-smoother", cov("tw-smoother"), chi, chi, nan(),
                  aux("k1_tw"), analytic::scheme_cov(Scheme::TwSmoother, p0)});
  rows.push_back({"kalman", cov("kalman"), aux("K_f"), nan(), nan(), nan(),
                  analytic::scheme_cov(Scheme::Kalman, p0)});
  rows.push_back({"info-backward", cov("info-backward"), nan(), aux("K_b"),
                  nan(), nan(), analytic::scheme_cov(Scheme::InfoBackward, p0)});
  rows.push_back({"rts", cov("rts"), aux("K_f"), nan(), aux("F"), nan(),
                  analytic::scheme_cov(Scheme::Rts, p0)});
  rows.push_back({"two-filter", cov("two-filter"), aux("K_f"), aux("K_b"),
                  nan(), aux("k1_two_filter"),
                  analytic::scheme_cov(Scheme::TwoFilter, p0)});
  rows.push_back({"robust", cov("robust"), aux("X"), aux("Y"), aux("L"),
                  aux("k1_robust"), analytic::scheme_cov(Scheme::Robust, p0)});

  write_table(out_path, o.format, base_meta("analytic", o), columns, rows);
  return 0;
}

// --- compare: lambda sweep of the five analytic error-covariance curves

inline int cmd_compare(const Options& o, const std::string& out_path) {
  validate_params(o.params);
  const std::string grid_spec = o.grid_set ? o.grid_spec : "0.2:10:50";
  const auto grid = parse_grid(grid_spec);
  EnsembleConfig ens;
  ens.params = o.params;
  ens.trials = o.trials < 0 ? 0 : static_cast<std::size_t>(o.trials);
  ens.jobs = o.jobs;
  if (o.burn_in >= 0) ens.burn_in = static_cast<std::size_t>(o.burn_in);
  const SweepReport rep = sweep(SweepAxis::Lambda, grid, ens);

  std::vector<std::string> columns = {"lambda", "sql",    "tw_filter",
                                      "tw_smoother", "kalman", "rts"};
  const std::vector<std::string> emp_schemes = {"tw_filter", "tw_smoother",
                                                "kalman", "rts"};
  if (ens.trials > 0)
    for (const auto& s : emp_schemes) {
      columns.push_back(s + "_mse");
      columns.push_back(s + "_se");
    }

  std::vector<report::Row> rows;
  for (const auto& pt : rep.points) {
    report::Row row = {pt.value};
    if (!pt.error.empty()) {
      while (row.size() < columns.size()) row.push_back(nan());
    } else {
      for (const char* key :
           {"sql", "tw_filter", "tw_smoother", "kalman", "rts"})
        row.push_back(pt.analytic.at(key));
      if (ens.trials > 0)
        for (const auto& mr : pt.empirical) {
          row.push_back(mr.mse);
          row.push_back(mr.se);
        }
    }
    rows.push_back(std::move(row));
  }

  report::Meta meta = base_meta("compare", o);
  meta.emplace_back("axis", "lambda");
  meta.emplace_back("grid", grid_spec);
  meta.emplace_back("trials", std::to_string(ens.trials));
  write_table(out_path, o.format, meta, columns, rows);
  return 0;
}

// --- robust: delta sweep of RTS vs robust mismatch MSE at fixed mu

inline int cmd_robust_single(const Options& o, double mu,
                             const std::string& out_path) {
  Options local = o;
  local.params.mu = mu;
  validate_params(local.params);
  const std::string grid_spec = o.grid_set ? o.grid_spec : "-1:0.99:40";
  const auto grid = parse_grid(grid_spec);
  EnsembleConfig ens;
  ens.params = local.params;
  ens.trials = o.trials < 0 ? 0 : static_cast<std::size_t>(o.trials);
  ens.jobs = o.jobs;
  if (o.burn_in >= 0) ens.burn_in = static_cast<std::size_t>(o.burn_in);
  const SweepReport rep = sweep(SweepAxis::Delta, grid, ens);

  std::vector<std::string> columns = {"delta", "rts_mse", "robust_mse"};
  if (ens.trials > 0)
    for (const char* s : {"rts", "robust"}) {
      columns.push_back(std::string(s) + "_emp");
      columns.push_back(std::string(s) + "_emp_se");
    }

  std::vector<report::Row> rows;
  for (const auto& pt : rep.points) {
    report::Row row = {pt.value};
    if (!pt.error.empty()) {
      while (row.size() < columns.size()) row.push_back(nan());
    } else {
      row.push_back(pt.analytic.at("rts_mse"));
      row.push_back(pt.analytic.at("robust_mse"));
      if (ens.trials > 0)
        for (const auto& mr : pt.empirical) {
          row.push_back(mr.mse);
          row.push_back(mr.se);
        }
    }
    rows.push_back(std::move(row));
  }

  report::Meta meta = base_meta("robust", local);
  meta.emplace_back("axis", "delta");
  meta.emplace_back("grid", grid_spec);
  meta.emplace_back("trials", std::to_string(ens.trials));
  write_table(out_path, o.format, meta, columns, rows);
  return 0;
}

inline int cmd_robust(const Options& o, const std::string& out_path) {
  if (o.mu_set) return cmd_robust_single(o, o.params.mu, out_path);
  // Default: one file per uncertainty level.
  const std::string ext = o.format == "json" ? ".json" : ".csv";
  std::string stem = out_path;
  if (stem.size() >= ext.size() &&
      stem.compare(stem.size() - ext.size(), ext.size(), ext) == 0)
    stem.resize(stem.size() - ext.size());
  int rc = 0;
  for (const auto& [mu, tag] : std::vector<std::pair<double, std::string>>{
           {0.5, "_mu0.5"}, {0.8, "_mu0.8"}, {0.9, "_mu0.9"}})
    rc = std::max(rc, cmd_robust_single(o, mu, stem + tag + ext));
  return rc;
}

// --- ensemble: empirical MSE vs analytic per scheme with z-scores

inline int cmd_ensemble(const Options& o, const std::string& out_path) {
  EnsembleConfig ens;
  ens.params = validate_params(o.params);
  ens.schemes = parse_schemes(o.schemes_csv);
  ens.trials = o.trials < 0 ? 200 : static_cast<std::size_t>(o.trials);
  ens.jobs = o.jobs;
  if (o.burn_in >= 0) ens.burn_in = static_cast<std::size_t>(o.burn_in);
  const MseReport rep = run_ensemble(ens);

  const std::vector<std::string> columns = {"scheme", "analytic", "empirical",
                                            "se",     "z",        "n_trials"};
  std::vector<report::Row> rows;
  for (const auto& r : rep.rows)
    rows.push_back({to_string(r.scheme), r.analytic, r.mse, r.se, r.z,
                    static_cast<double>(r.trials)});

  report::Meta meta = base_meta("ensemble", o);
  meta.emplace_back("trials", std::to_string(ens.trials));
  meta.emplace_back("schemes", [&] {
    std::string s;
    for (const auto& sch : ens.schemes)
      s += (s.empty() ? "" : ",") + to_string(sch);
    return s;
  }());
  if (rep.forward_backward_cross)
    meta.emplace_back("cross_kalman_info_backward",
                      report::fmt(rep.forward_backward_cross->mean) + " se=" +
                          report::fmt(rep.forward_backward_cross->se));
  write_table(out_path, o.format, meta, columns, rows);

  for (const auto& r : rep.rows)
    if (std::isfinite(r.z) && std::abs(r.z) > 5.0) return 4;
  return 0;
}

}  // namespace detail

inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  detail::Options o;
  double chi_value = 0.0;
  std::int64_t seed = 1;

  CLI::App app{"Continuous optical-phase tracking: analytic covariances, "
               "simulation and Monte Carlo verification"};
  app.set_version_flag("--version", PHASETRACK_VERSION);
  app.set_config("--config", "", "Config file, one key=value per line");
  app.require_subcommand(1);

  app.add_option("--lambda", o.params.lambda, "Mean-reversion rate");
  app.add_option("--kappa", o.params.kappa, "Inverse coherence time");
  app.add_option("--alpha", o.params.alpha, "Field amplitude |alpha|");
  auto* chi_opt_flag =
      app.add_option("--chi", chi_value, "Low-pass bandwidth (default chi_opt)");
  auto* mu_flag = app.add_option("--mu", o.params.mu, "Uncertainty level");
  app.add_option("--delta", o.params.delta, "Uncertainty realization");
  app.add_option("--dt", o.params.dt, "Integration step");
  app.add_option("--horizon", o.params.horizon, "Total simulated time T");
  app.add_option("--trials", o.trials, "Monte Carlo trial count")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "RNG master seed");
  app.add_option("--jobs", o.jobs, "Worker cap (0 = hardware)");
  auto* grid_flag =
      app.add_option("--grid", o.grid_spec, "start:stop:steps or comma list");
  app.add_option("--axis", o.axis, "Sweep axis (lambda|delta)");
  app.add_option("--out", o.out, "Output path");
  app.add_option("--format", o.format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--schemes", o.schemes_csv, "Comma list of scheme names");
  app.add_option("--burn-in", o.burn_in, "Burn-in override, samples")
      ->check(CLI::NonNegativeNumber);

  auto* cmd_analytic = app.add_subcommand(
      "analytic", "Closed-form covariances and gains per scheme");
  auto* cmd_compare = app.add_subcommand(
      "compare", "Lambda sweep: SQL, low-pass filter/smoother, Kalman, RTS");
  auto* cmd_robust = app.add_subcommand(
      "robust", "Delta sweep: RTS vs robust smoother under mismatch");
  auto* cmd_ensemble = app.add_subcommand(
      "ensemble", "Monte Carlo MSE vs analytic with z-scores");
  for (auto* c : {cmd_analytic, cmd_compare, cmd_robust, cmd_ensemble})
    c->fallthrough();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << PHASETRACK_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  o.chi_set = chi_opt_flag->count() > 0;
  o.mu_set = mu_flag->count() > 0;
  o.grid_set = grid_flag->count() > 0;
  if (o.chi_set) o.params.chi = chi_value;
  o.params.seed = static_cast<std::uint64_t>(seed);
  if (o.jobs == 0)
    o.jobs = std::max(1u, std::thread::hardware_concurrency());

  const std::string command = app.get_subcommands().front()->get_name();
  if (!o.axis.empty()) {
    if (command == "compare" && o.axis != "lambda") {
      err << "error: compare sweeps axis=lambda\n";
      return 2;
    }
    if (command == "robust" && o.axis != "delta") {
      err << "error: robust sweeps axis=delta\n";
      return 2;
    }
  }
  const std::string out_path =
      o.out.empty() ? command + (o.format == "json" ? ".json" : ".csv")
                    : o.out;

  try {
    if (command == "analytic") return detail::cmd_analytic(o, out_path);
    if (command == "compare") return detail::cmd_compare(o, out_path);
    if (command == "robust") return detail::cmd_robust(o, out_path);
    if (command == "ensemble") return detail::cmd_ensemble(o, out_path);
    err << "error: unknown command\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

inline int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace phasetrack::cli
