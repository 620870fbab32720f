// Rate fitting, the cross-model comparison experiments, and the config-driven
// experiment runner behind the CLI.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace asgdlab {

struct RateFit {
  double rate = 0.0;       // lambda in y ~ c exp(-lambda t)
  double intercept = 0.0;  // log c
  double r_squared = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  int n_points = 0;
};

// Least squares on (t, log y) restricted to t in [t_lo, t_hi]; rate = -slope.
// Throws std::domain_error("nonpositive sample in window") and
// std::invalid_argument("insufficient points") (< 3 in window).
RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& y,
                 double t_lo, double t_hi);

// One matched-time comparison row: ASGD ensemble vs the OU moment oracle at
// t = k delta_t with k = round(1/delta_t).
struct CompareRow {
  double eta = 0.0;
  long k = 0;
  double t = 0.0;
  double mean_asgd = 0.0;
  double mean_oracle = 0.0;
  double mean_err = 0.0;
  double se = 0.0;       // standard error of the ASGD ensemble mean
  double var_asgd = 0.0;
  double var_oracle = 0.0;
  double cov_err = 0.0;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  bool nonincreasing_within_3se = false;
};

CompareReport compare_asgd_sme(const std::vector<double>& etas, double kappa,
                               double omega0, double sigma, double theta0,
                               long n_paths, std::uint64_t seed);

// One learning-rate point of the threshold sweep. The empirical column is the
// per-step decay exponent of the slow-mode amplitude |w . m(k delta_t)| of the
// OU-oracle mean (w the slow left eigenvector, so the fit is exact in every
// regime); norm_fit is a plain fit on ||m|| trimmed to whole oscillation
// periods, reported but never asserted.
struct ThresholdRow {
  double kappa = 0.0;
  double eta = 0.0;
  double theory_thm = 0.0;     // params::per_step_exponent (theorem convention)
  double theory_matrix = 0.0;  // half of it (matrix convention)
  double empirical = 0.0;
  double norm_fit = 0.0;
  double ratio_thm = 0.0;      // empirical / theory_thm
  double ratio_matrix = 0.0;   // empirical / theory_matrix
};

std::vector<ThresholdRow> threshold_sweep(const std::vector<double>& etas,
                                          double kappa, double omega0,
                                          int steps = 200);

// Wall-clock time-to-target grid: m workers commit m gradients per unit time,
// SGD commits one. Decay observable is the ensemble mean of theta^2 with
// Sigma = 0 (randomness from the staleness draws); crossings are interpolated
// linearly on the log.
struct SpeedupCell {
  int m = 0;
  double kappa = 0.0;
  double commits_to_target = 0.0;  // interpolated commit count
  double time_asgd = 0.0;          // commits / m
  double time_sgd = 0.0;
  double rate_per_commit = 0.0;    // implied -log(target)/commits
  bool predicate = false;          // (1-kappa) m > 1
  bool observed_faster = false;    // time_asgd < time_sgd
  bool boundary = false;           // |(1-kappa) m - 1| <= 0.2
  bool agree = false;              // predicate == observed_faster (non-boundary)
};

struct SpeedupReport {
  double eta = 0.0;
  double target = 0.0;
  long n_paths = 0;
  long horizon = 0;
  double sgd_commits = 0.0;
  std::vector<SpeedupCell> cells;
  bool all_nonboundary_agree = false;
};

// Throws std::runtime_error("target not reached") when a cell's mean-square
// trace never crosses the target within the horizon.
SpeedupReport speedup_experiment(const std::vector<int>& ms,
                                 const std::vector<double>& kappas, double eta,
                                 double target, long n_paths, long horizon,
                                 std::uint64_t seed);

// CLI-level overrides applied on top of the JSON config.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;  // "csv" or "json"
};

// Loads and validates the JSON config (strict schema: unknown keys rejected),
// runs the experiment kind, writes report.json and series_*.csv into the
// output directory, prints a summary, and returns the process exit status.
// `expected_kind` (from the CLI subcommand) must match the config when both
// are present.
int run_experiment(const std::string& config_path, const CliOverrides& ov = {},
                   const std::string& expected_kind = "");

}  // namespace asgdlab
