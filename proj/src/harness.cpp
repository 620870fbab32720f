#include "asgdlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "asgdlab/asgd.hpp"
#include "asgdlab/hypo.hpp"
#include "asgdlab/kfp.hpp"
#include "asgdlab/loss.hpp"
#include "asgdlab/params.hpp"
#include "asgdlab/rng.hpp"
#include "asgdlab/sme.hpp"
#include "asgdlab/staleness.hpp"

namespace asgdlab {

using ordered_json = nlohmann::ordered_json;

RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& y,
                 double t_lo, double t_hi) {
  if (t.size() != y.size())
    throw std::invalid_argument("fit_rate: length mismatch");
  std::vector<double> ts, ls;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    if (!(y[i] > 0.0)) throw std::domain_error("nonpositive sample in window");
    ts.push_back(t[i]);
    ls.push_back(std::log(y[i]));
  }
  if (ts.size() < 3) throw std::invalid_argument("insufficient points");
  double n = static_cast<double>(ts.size());
  double st = 0.0, sl = 0.0;
  for (size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sl += ls[i];
  }
  double mt = st / n, ml = sl / n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < ts.size(); ++i) {
    sxx += (ts[i] - mt) * (ts[i] - mt);
    sxy += (ts[i] - mt) * (ls[i] - ml);
  }
  RateFit f;
  f.t_lo = t_lo;
  f.t_hi = t_hi;
  f.n_points = static_cast<int>(ts.size());
  double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.rate = -slope;
  f.intercept = ml - slope * mt;
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < ts.size(); ++i) {
    double pred = f.intercept + slope * ts[i];
    ss_res += (ls[i] - pred) * (ls[i] - pred);
    ss_tot += (ls[i] - ml) * (ls[i] - ml);
  }
  f.r_squared = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;
  return f;
}

CompareReport compare_asgd_sme(const std::vector<double>& etas, double kappa,
                               double omega0, double sigma, double theta0,
                               long n_paths, std::uint64_t seed) {
  CompareReport rep;
  for (size_t idx = 0; idx < etas.size(); ++idx) {
    Params p;
    p.eta = etas[idx];
    p.kappa = kappa;
    p.omega0 = omega0;
    p.sigma_grad = sigma;
    p.d = 1;
    p.m = 1;
    validate(p);
    DerivedParams dp = derive_params(p);
    long k = std::lround(1.0 / dp.dt_map);
    if (k < 1) k = 1;
    double t = k * dp.dt_map;

    GradientOracle oracle = make_oracle(omega0, EpsilonModel::zero, 0.0, sigma);
    StalenessModel model = StalenessModel::geometric(kappa);
    EnsembleMoments mom =
        run_asgd_ensemble(p, oracle, model, k, n_paths,
                          substream_seed(seed, idx), static_cast<int>(k),
                          false, 10000, theta0);
    double mean_asgd = mom.mean.back()[0];
    double var_asgd = mom.cov.back()[0];

    Eigen::VectorXd m0(2);
    m0 << theta0, -std::sqrt(p.eta / (1.0 - kappa)) * omega0 * omega0 * theta0;
    MomentState ms = ou_moment_oracle(m0, Eigen::MatrixXd::Zero(2, 2), t,
                                      dp.gamma, omega0, dp.tau_noise);
    CompareRow row;
    row.eta = p.eta;
    row.k = k;
    row.t = t;
    row.mean_asgd = mean_asgd;
    row.mean_oracle = ms.mean(0);
    row.mean_err = std::abs(mean_asgd - ms.mean(0));
    row.se = std::sqrt(std::max(0.0, var_asgd) / static_cast<double>(n_paths));
    row.var_asgd = var_asgd;
    row.var_oracle = ms.cov(0, 0);
    row.cov_err = std::abs(var_asgd - ms.cov(0, 0));
    rep.rows.push_back(row);
  }
  rep.nonincreasing_within_3se = true;
  for (size_t i = 0; i + 1 < rep.rows.size(); ++i) {
    double band = 3.0 * std::sqrt(rep.rows[i].se * rep.rows[i].se +
                                  rep.rows[i + 1].se * rep.rows[i + 1].se);
    if (rep.rows[i + 1].mean_err > rep.rows[i].mean_err + band)
      rep.nonincreasing_within_3se = false;
  }
  return rep;
}

std::vector<ThresholdRow> threshold_sweep(const std::vector<double>& etas,
                                          double kappa, double omega0,
                                          int steps) {
  if (steps < 8) throw std::invalid_argument("threshold_sweep: steps >= 8");
  std::vector<ThresholdRow> rows;
  double w2 = omega0 * omega0;
  for (double eta : etas) {
    if (!(eta > 0.0)) throw std::invalid_argument("threshold_sweep: eta > 0");
    double gamma = std::sqrt((1.0 - kappa) / eta);
    double dtm = std::sqrt(eta * (1.0 - kappa));

    // slow eigenvalue of the drift A = [[0,1],[-w2,-gamma]] and its left
    // eigenvector w = (-w2/s, 1); |w . m(t)| decays exactly like e^{Re(s) t}
    std::complex<double> disc(gamma * gamma - 4.0 * w2, 0.0);
    std::complex<double> s = (-gamma + std::sqrt(disc)) / 2.0;
    std::complex<double> w1 = -w2 / s;

    std::vector<double> ks(steps + 1), amp(steps + 1), nrm(steps + 1);
    for (int k = 0; k <= steps; ++k) {
      Eigen::Matrix2d E = expm_drift2(gamma, omega0, k * dtm);
      double m0 = E(0, 0), m1 = E(1, 0);  // exp(At) (1,0)^T
      ks[k] = static_cast<double>(k);
      amp[k] = std::abs(w1 * m0 + m1);
      nrm[k] = std::sqrt(m0 * m0 + m1 * m1);
    }
    double emp = fit_rate(ks, amp, 0.0, static_cast<double>(steps)).rate;

    double nfit;
    if (gamma * gamma < 4.0 * w2) {
      // trim to whole oscillation periods of ||m|| (period pi/nu in t)
      double nu = std::sqrt(w2 - gamma * gamma / 4.0);
      double period_steps = 3.14159265358979323846 / (nu * dtm);
      double n_per = std::floor(steps / period_steps);
      double hi = n_per >= 1.0 ? n_per * period_steps : steps;
      nfit = fit_rate(ks, nrm, 0.0, hi).rate;
    } else {
      nfit = fit_rate(ks, nrm, steps / 2.0, static_cast<double>(steps)).rate;
    }

    ThresholdRow row;
    row.kappa = kappa;
    row.eta = eta;
    row.theory_thm = per_step_exponent(eta, kappa, omega0);
    row.theory_matrix = 0.5 * row.theory_thm;
    row.empirical = emp;
    row.norm_fit = nfit;
    row.ratio_thm = emp / row.theory_thm;
    row.ratio_matrix = emp / row.theory_matrix;
    rows.push_back(row);
  }
  return rows;
}

namespace {

// first index (interpolated on the log) where the series crosses the target
double log_crossing(const std::vector<double>& e, double target) {
  if (e.empty()) throw std::runtime_error("target not reached");
  if (e[0] <= target) return 0.0;
  for (size_t k = 1; k < e.size(); ++k) {
    if (e[k] <= target) {
      if (!(e[k] > 0.0)) return static_cast<double>(k);
      double l0 = std::log(e[k - 1]);
      double l1 = std::log(e[k]);
      return (k - 1) + (l0 - std::log(target)) / (l0 - l1);
    }
  }
  throw std::runtime_error("target not reached");
}

}  // namespace

SpeedupReport speedup_experiment(const std::vector<int>& ms,
                                 const std::vector<double>& kappas, double eta,
                                 double target, long n_paths, long horizon,
                                 std::uint64_t seed) {
  if (!(target > 0.0) || !(target < 1.0))
    throw std::invalid_argument("speedup: target must be in (0,1)");
  if (horizon < 2) throw std::invalid_argument("speedup: horizon >= 2");
  SpeedupReport rep;
  rep.eta = eta;
  rep.target = target;
  rep.n_paths = n_paths;
  rep.horizon = horizon;

  GradientOracle oracle = make_oracle(1.0, EpsilonModel::zero, 0.0, 0.0);
  auto msq_trace = [&](double kappa, std::uint64_t s) {
    Params p;
    p.eta = eta;
    p.kappa = kappa;
    p.omega0 = 1.0;
    p.sigma_grad = 0.0;
    p.d = 1;
    p.m = 1;
    validate(p);
    StalenessModel model = StalenessModel::geometric(kappa);
    EnsembleMoments mom =
        run_asgd_ensemble(p, oracle, model, horizon, n_paths, s, 1);
    std::vector<double> e(mom.size());
    double n = static_cast<double>(mom.n);
    for (size_t r = 0; r < mom.size(); ++r)
      e[r] = mom.cov[r][0] * (n - 1.0) / n + mom.mean[r][0] * mom.mean[r][0];
    return e;
  };

  std::vector<double> sgd = msq_trace(0.0, substream_seed(seed, 9999));
  rep.sgd_commits = log_crossing(sgd, target);

  // The staleness dynamics do not depend on m (m only rescales wall time),
  // so one mean-square trace per kappa serves the whole m column.
  std::vector<double> commits(kappas.size());
  for (size_t j = 0; j < kappas.size(); ++j)
    commits[j] = log_crossing(msq_trace(kappas[j], substream_seed(seed, j)), target);

  rep.all_nonboundary_agree = true;
  for (int m : ms) {
    for (size_t j = 0; j < kappas.size(); ++j) {
      SpeedupCell cell;
      cell.m = m;
      cell.kappa = kappas[j];
      cell.commits_to_target = commits[j];
      cell.time_asgd = commits[j] / static_cast<double>(m);
      cell.time_sgd = rep.sgd_commits;
      cell.rate_per_commit = -std::log(target) / commits[j];
      cell.predicate = speedup_predicate(m, kappas[j]);
      cell.observed_faster = cell.time_asgd < cell.time_sgd;
      cell.boundary = std::abs((1.0 - kappas[j]) * m - 1.0) <= 0.2;
      cell.agree = cell.predicate == cell.observed_faster;
      if (!cell.boundary && !cell.agree) rep.all_nonboundary_agree = false;
      rep.cells.push_back(cell);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// config-driven runner

namespace {

namespace fs = std::filesystem;

struct Series {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct RunCtx {
  Params p;
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string outdir;
  bool csv = true;
  ordered_json controls;
  std::vector<std::string> summary;
};

[[noreturn]] void schema_error(const std::string& msg) {
  throw std::invalid_argument("config schema violation: " + msg);
}

void check_keys(const ordered_json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      schema_error("unknown key '" + it.key() + "' in " + where);
}

double ctl_num(const ordered_json& c, const std::string& k, double def) {
  if (!c.contains(k)) return def;
  if (!c.at(k).is_number()) schema_error("control '" + k + "' must be a number");
  return c.at(k).get<double>();
}

long ctl_int(const ordered_json& c, const std::string& k, long def) {
  if (!c.contains(k)) return def;
  if (!c.at(k).is_number_integer())
    schema_error("control '" + k + "' must be an integer");
  return c.at(k).get<long>();
}

bool ctl_bool(const ordered_json& c, const std::string& k, bool def) {
  if (!c.contains(k)) return def;
  if (!c.at(k).is_boolean()) schema_error("control '" + k + "' must be a boolean");
  return c.at(k).get<bool>();
}

std::string ctl_str(const ordered_json& c, const std::string& k,
                    const std::string& def) {
  if (!c.contains(k)) return def;
  if (!c.at(k).is_string()) schema_error("control '" + k + "' must be a string");
  return c.at(k).get<std::string>();
}

std::vector<double> ctl_num_array(const ordered_json& c, const std::string& k,
                                  const std::vector<double>& def) {
  if (!c.contains(k)) return def;
  if (!c.at(k).is_array()) schema_error("control '" + k + "' must be an array");
  std::vector<double> out;
  for (const auto& v : c.at(k)) {
    if (!v.is_number()) schema_error("control '" + k + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<int> ctl_int_array(const ordered_json& c, const std::string& k,
                               const std::vector<int>& def) {
  if (!c.contains(k)) return def;
  if (!c.at(k).is_array()) schema_error("control '" + k + "' must be an array");
  std::vector<int> out;
  for (const auto& v : c.at(k)) {
    if (!v.is_number_integer())
      schema_error("control '" + k + "' must hold integers");
    out.push_back(v.get<int>());
  }
  return out;
}

void write_series_csv(const std::string& path, const Series& s) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write " + path);
  for (size_t i = 0; i < s.columns.size(); ++i)
    std::fprintf(f, "%s%s", s.columns[i].c_str(),
                 i + 1 < s.columns.size() ? "," : "\n");
  for (const auto& row : s.rows) {
    for (size_t i = 0; i < row.size(); ++i)
      std::fprintf(f, "%.17g%s", row[i], i + 1 < row.size() ? "," : "\n");
  }
  std::fclose(f);
}

void emit_series(RunCtx& ctx, const Series& s, ordered_json& report) {
  if (ctx.csv) {
    std::string fname = "series_" + s.name + ".csv";
    write_series_csv(ctx.outdir + "/" + fname, s);
    report["series_files"].push_back(fname);
  } else {
    ordered_json js;
    js["columns"] = s.columns;
    js["rows"] = s.rows;
    report["series"][s.name] = js;
  }
}

StalenessModel model_from_controls(const RunCtx& ctx) {
  std::string kind = ctl_str(ctx.controls, "model", "geometric");
  if (kind == "geometric") return StalenessModel::geometric(ctx.p.kappa);
  if (kind == "fixed")
    return StalenessModel::fixed(
        static_cast<int>(ctl_int(ctx.controls, "fixed_l", 0)));
  if (kind == "worker_queue") {
    std::string law = ctl_str(ctx.controls, "service", "exponential");
    if (law != "exponential" && law != "deterministic")
      schema_error("control 'service' must be exponential or deterministic");
    return StalenessModel::worker_queue(
        static_cast<int>(ctl_int(ctx.controls, "workers", ctx.p.m)),
        law == "exponential" ? ServiceLaw::exponential : ServiceLaw::deterministic,
        ctl_num(ctx.controls, "mean_service", 1.0));
  }
  schema_error("control 'model' must be geometric, fixed, or worker_queue");
}

GradientOracle oracle_from_controls(const RunCtx& ctx) {
  double a = ctl_num(ctx.controls, "a", 0.0);
  return make_oracle(ctx.p.omega0,
                     a == 0.0 ? EpsilonModel::zero : EpsilonModel::scaled_bounded,
                     a, ctx.p.sigma_grad);
}

ordered_json moments_to_series(RunCtx& ctx, const EnsembleMoments& mom,
                               const std::string& name, double time_scale,
                               ordered_json& report) {
  Series s;
  s.name = name;
  s.columns.push_back(time_scale == 1.0 ? "t" : "k");
  if (time_scale != 1.0) s.columns.push_back("t");
  for (int a = 0; a < mom.dim; ++a)
    s.columns.push_back("mean_" + std::to_string(a));
  for (int a = 0; a < mom.dim; ++a)
    for (int b = 0; b < mom.dim; ++b)
      s.columns.push_back("cov_" + std::to_string(a) + "_" + std::to_string(b));
  for (size_t r = 0; r < mom.size(); ++r) {
    std::vector<double> row;
    row.push_back(mom.times[r]);
    if (time_scale != 1.0) row.push_back(mom.times[r] * time_scale);
    for (int a = 0; a < mom.dim; ++a) row.push_back(mom.mean[r][a]);
    for (int a = 0; a < mom.dim * mom.dim; ++a) row.push_back(mom.cov[r][a]);
    s.rows.push_back(std::move(row));
  }
  emit_series(ctx, s, report);
  ordered_json last;
  last["t"] = mom.times.back() * (time_scale == 1.0 ? 1.0 : time_scale);
  last["mean"] = mom.mean.back();
  last["cov"] = mom.cov.back();
  return last;
}

ordered_json run_analyze(RunCtx& ctx, ordered_json& report) {
  double a = ctl_num(ctx.controls, "a", 0.0);
  double delta = ctl_num(ctx.controls, "delta", 0.0);
  double box_l = ctl_num(ctx.controls, "box_L", 6.0);
  long gp = ctl_int(ctx.controls, "grid_points", 401);
  (void)report;

  DerivedParams dp = derive_params(ctx.p);
  GradientOracle oracle =
      make_oracle(ctx.p.omega0,
                  a == 0.0 ? EpsilonModel::zero : EpsilonModel::scaled_bounded,
                  a, ctx.p.sigma_grad);
  RateCase rc = theorem_rate(dp.gamma, ctx.p.omega0, delta);
  PerturbationBounds bounds = perturbation_bounds(
      oracle, dp.gamma, box_l, static_cast<int>(gp), ctx.p.d);

  double C = rc.C, Chat = rc.C_hat;
  double delta_eff = delta;
  if (rc.regime == Regime::critical) {
    if (!(delta_eff > 0.0)) delta_eff = 0.25 * rc.mu_matrix;
    CriticalPair pair = find_C_Chat(dp.gamma, ctx.p.omega0, delta_eff);
    C = pair.C;
    Chat = pair.C_hat;
  }
  HypoMatrices mats = build_matrices(dp.gamma, ctx.p.omega0, C, Chat);
  double mu_cert = rc.regime == Regime::critical ? rc.mu_matrix - delta_eff
                                                 : rc.mu_matrix;
  double margin = check_certificate(mats, mu_cert);
  double sup_mu = certificate_sup_mu(mats);

  ordered_json res;
  res["derived"] = {{"gamma", dp.gamma},
                    {"tau_noise", dp.tau_noise},
                    {"dt_map", dp.dt_map}};
  if (dp.has_beta())
    res["derived"]["beta"] = dp.beta();
  else
    res["derived"]["beta"] = nullptr;
  res["rate"] = {{"regime", regime_name(rc.regime)},
                 {"mu_thm", rc.mu_thm},
                 {"mu_matrix", rc.mu_matrix},
                 {"C", C},
                 {"C_hat", Chat},
                 {"delta", delta_eff}};
  res["certificate"] = {{"mu_checked", mu_cert},
                        {"psd_margin", margin},
                        {"sup_mu", sup_mu}};
  if (dp.has_beta()) {
    HypoConstants hc =
        constants(dp.gamma, dp.beta(), ctx.p.omega0, C, Chat, bounds.eps0, 0.0);
    res["constants"] = {{"C2", hc.C2},
                        {"eps0", bounds.eps0},
                        {"eps_shift", hc.eps_shift},
                        {"net_rate_matrix", 2.0 * (rc.mu_matrix - hc.eps_shift)},
                        {"net_rate_thm", 2.0 * (rc.mu_thm - hc.eps_shift)}};
  } else {
    res["constants"] = nullptr;
  }
  double eta_star = lr_threshold(ctx.p.kappa, ctx.p.omega0);
  res["threshold"] = {{"eta_star", eta_star},
                      {"per_step_exponent",
                       per_step_exponent(ctx.p.eta, ctx.p.kappa, ctx.p.omega0)},
                      {"above_threshold", ctx.p.eta >= eta_star}};
  res["speedup"] = {{"m", ctx.p.m},
                    {"kappa", ctx.p.kappa},
                    {"predicate", speedup_predicate(ctx.p.m, ctx.p.kappa)}};

  ctx.summary.push_back("regime " + regime_name(rc.regime) +
                        ", mu_matrix = " + std::to_string(rc.mu_matrix) +
                        ", mu_thm = " + std::to_string(rc.mu_thm));
  ctx.summary.push_back("certificate margin = " + std::to_string(margin) +
                        ", sup_mu = " + std::to_string(sup_mu));
  return res;
}

ordered_json run_sample_staleness(RunCtx& ctx, ordered_json& report) {
  long n = ctl_int(ctx.controls, "n", 100000);
  if (n < 1) schema_error("control 'n' must be >= 1");
  StalenessModel model = model_from_controls(ctx);
  validate(model);

  Rng rng(ctx.seed);
  StalenessSampler sampler(model);
  std::vector<int> trace(n);
  for (long k = 0; k < n; ++k) trace[k] = sampler.next(rng);
  StalenessStats stats = staleness_stats(trace);

  Series s;
  s.name = "trace";
  s.columns = {"k", "tau"};
  for (long k = 0; k < n; ++k)
    s.rows.push_back({static_cast<double>(k), static_cast<double>(trace[k])});
  emit_series(ctx, s, report);

  ordered_json res;
  res["model"] = ctl_str(ctx.controls, "model", "geometric");
  res["n"] = n;
  res["mean"] = stats.mean;
  res["mean_plus_one"] = stats.mean_plus_one;
  res["kappa_hat"] = stats.kappa_hat;
  res["chi_square"] = stats.chi_square;
  res["dof"] = stats.dof;
  res["p_value"] = stats.p_value;
  res["pmf"] = stats.pmf;
  ctx.summary.push_back("kappa_hat = " + std::to_string(stats.kappa_hat) +
                        ", p_value = " + std::to_string(stats.p_value));
  return res;
}

ordered_json run_sim_asgd(RunCtx& ctx, ordered_json& report) {
  long K = ctl_int(ctx.controls, "steps", 1000);
  long n_paths = ctl_int(ctx.controls, "n_paths", 1000);
  long stride = ctl_int(ctx.controls, "stride", std::max<long>(1, K / 200));
  bool record_y = ctl_bool(ctx.controls, "record_y", false);
  bool trace = ctl_bool(ctx.controls, "trace", true);
  long cap = ctl_int(ctx.controls, "history_cap", 10000);
  double theta0 = ctl_num(ctx.controls, "theta0", 1.0);
  GradientOracle oracle = oracle_from_controls(ctx);
  StalenessModel model = model_from_controls(ctx);
  validate(model);
  DerivedParams dp = derive_params(ctx.p);

  EnsembleMoments mom = run_asgd_ensemble(
      ctx.p, oracle, model, K, n_paths, ctx.seed, static_cast<int>(stride),
      record_y, static_cast<int>(cap), theta0);
  ordered_json res;
  res["steps"] = K;
  res["n_paths"] = n_paths;
  res["dt_map"] = dp.dt_map;
  res["final"] = moments_to_series(ctx, mom, "moments", dp.dt_map, report);

  if (trace) {
    std::vector<double> t0(ctx.p.d, theta0);
    Trajectory tr = run_asgd(ctx.p, oracle, model, K,
                             substream_seed(ctx.seed, 1000003), t0,
                             static_cast<int>(cap));
    Series st;
    st.name = "trace";
    st.columns = {"k", "tau"};
    for (long k = 0; k < tr.steps(); ++k)
      st.rows.push_back({static_cast<double>(k), static_cast<double>(tr.tau[k])});
    emit_series(ctx, st, report);

    Series sj;
    sj.name = "trajectory";
    sj.columns = {"k"};
    for (int i = 0; i < tr.d; ++i) sj.columns.push_back("theta_" + std::to_string(i));
    for (int i = 0; i < tr.d; ++i) sj.columns.push_back("y_" + std::to_string(i));
    for (long k = 0; k <= tr.steps(); ++k) {
      std::vector<double> row{static_cast<double>(k)};
      for (int i = 0; i < tr.d; ++i) row.push_back(tr.theta[k * tr.d + i]);
      for (int i = 0; i < tr.d; ++i) row.push_back(tr.y[k * tr.d + i]);
      sj.rows.push_back(std::move(row));
    }
    emit_series(ctx, sj, report);
  }
  ctx.summary.push_back("final mean_0 = " + std::to_string(mom.mean.back()[0]));
  return res;
}

ordered_json run_sim_sme(RunCtx& ctx, ordered_json& report) {
  DerivedParams dp = derive_params(ctx.p);
  double T = ctl_num(ctx.controls, "T", 1.0);
  double dt = ctl_num(ctx.controls, "dt", 0.0);
  if (dt <= 0.0) dt = std::min(0.05 / dp.gamma, dp.dt_map);
  long n_paths = ctl_int(ctx.controls, "n_paths", 1000);
  long n_steps = static_cast<long>(std::ceil(T / dt - 1e-9));
  long stride =
      ctl_int(ctx.controls, "stride", std::max<long>(1, n_steps / 200));
  double theta0 = ctl_num(ctx.controls, "theta0", 1.0);
  GradientOracle oracle = oracle_from_controls(ctx);

  SmeState init;
  init.theta.assign(ctx.p.d, theta0);
  init.t = 0.0;
  if (ctx.controls.contains("y0")) {
    init.y.assign(ctx.p.d, ctl_num(ctx.controls, "y0", 0.0));
  } else {
    std::vector<double> Theta;
    asgd_to_sme_state(init.theta, ctx.p, oracle, Theta, init.y);
  }

  EnsembleMoments mom = run_sme_ensemble(init, T, dt, n_paths, dp, oracle,
                                         ctx.seed, static_cast<int>(stride));
  EnsembleMoments phase = phase_moments(mom, dp.gamma, ctx.p.omega0);

  ordered_json res;
  res["T"] = T;
  res["dt"] = dt;
  res["n_paths"] = n_paths;
  res["final"] = moments_to_series(ctx, mom, "moments", 1.0, report);
  moments_to_series(ctx, phase, "phase", 1.0, report);

  if (dp.has_beta()) {
    double beta = dp.beta();
    int twod = 2 * ctx.p.d;
    double var_x = phase.cov.back()[0];
    double var_v = phase.cov.back()[ctx.p.d * twod + ctx.p.d];
    double tx = 1.0 / (beta * ctx.p.omega0 * ctx.p.omega0);
    double tv = 1.0 / beta;
    res["stationary"] = {{"var_x", var_x},
                         {"var_v", var_v},
                         {"var_x_target", tx},
                         {"var_v_target", tv},
                         {"rel_err_x", std::abs(var_x - tx) / tx},
                         {"rel_err_v", std::abs(var_v - tv) / tv}};
    ctx.summary.push_back("var_x = " + std::to_string(var_x) + " (target " +
                          std::to_string(tx) + "), var_v = " +
                          std::to_string(var_v) + " (target " +
                          std::to_string(tv) + ")");
  } else {
    res["stationary"] = nullptr;
  }
  return res;
}

ordered_json run_solve_pde(RunCtx& ctx, ordered_json& report) {
  long N = ctl_int(ctx.controls, "N", 16);
  double a = ctl_num(ctx.controls, "a", 0.0);
  DerivedParams dp = derive_params(ctx.p);
  double gamma = ctl_num(ctx.controls, "gamma", dp.gamma);
  double omega0 = ctl_num(ctx.controls, "omega0", ctx.p.omega0);
  double beta;
  if (ctx.controls.contains("beta")) {
    beta = ctl_num(ctx.controls, "beta", 0.0);
  } else if (dp.has_beta()) {
    beta = dp.beta();
  } else {
    schema_error("solve-pde: beta undefined (sigma_grad = 0); set controls.beta");
  }
  double T = ctl_num(ctx.controls, "T", 10.0);
  double dt = ctl_num(ctx.controls, "dt", 0.0);
  long n_quad = ctl_int(ctx.controls, "n_quad", 0);
  std::string scheme_str = ctl_str(ctx.controls, "scheme", "rk4");
  if (scheme_str != "rk4" && scheme_str != "trapezoidal")
    schema_error("control 'scheme' must be rk4 or trapezoidal");
  Scheme scheme = scheme_str == "rk4" ? Scheme::rk4 : Scheme::trapezoidal;
  bool with_h = ctl_bool(ctx.controls, "with_H", true);
  double delta = ctl_num(ctx.controls, "delta", 0.0);

  GradientOracle oracle =
      make_oracle(omega0, a == 0.0 ? EpsilonModel::zero : EpsilonModel::scaled_bounded,
                  a, ctx.p.sigma_grad);
  RateCase rc = theorem_rate(gamma, omega0, delta);
  double C = rc.C, Chat = rc.C_hat;
  if (rc.regime == Regime::critical) {
    double de = delta > 0.0 ? delta : 0.25 * rc.mu_matrix;
    CriticalPair pair = find_C_Chat(gamma, omega0, de);
    C = pair.C;
    Chat = pair.C_hat;
  }
  C = ctl_num(ctx.controls, "C", C);
  Chat = ctl_num(ctx.controls, "C_hat", Chat);

  GeneratorMatrix gen = assemble_generator(static_cast<int>(N), gamma, beta,
                                           omega0, oracle,
                                           static_cast<int>(n_quad));

  GaussianMeasure meas = gen.meas;
  HermiteField h0 = make_field(static_cast<int>(N), meas);
  std::string h0_mode = ctl_str(ctx.controls, "h0", "default");
  long h0_degree = ctl_int(ctx.controls, "h0_degree", 6);
  if (h0_mode == "default") {
    for (int i = 0; i <= h0.N; ++i)
      for (int j = 0; j <= h0.N; ++j)
        if (i + j >= 1 && i + j <= h0_degree) h0.c(i, j) = 1.0 / (1.0 + i + 2.0 * j);
  } else if (h0_mode == "random") {
    std::uint64_t hs;
    if (ctx.controls.contains("h0_seed"))
      hs = static_cast<std::uint64_t>(ctl_int(ctx.controls, "h0_seed", 0));
    else if (ctx.has_seed)
      hs = ctx.seed;
    else
      schema_error("solve-pde: h0 = random needs h0_seed or seed");
    Rng rng(hs);
    for (int i = 0; i <= h0.N; ++i)
      for (int j = 0; j <= h0.N; ++j)
        if (i + j >= 1 && i + j <= h0_degree) h0.c(i, j) = rng.next_gauss();
  } else {
    schema_error("control 'h0' must be default or random");
  }
  double nrm = std::sqrt(h0.norm_sq());
  if (!(nrm > 0.0)) schema_error("solve-pde: empty initial data");
  h0.c /= nrm;

  long stride = ctl_int(ctx.controls, "stride", 0);
  if (stride <= 0) {
    double dt_eff = dt > 0.0 ? dt : 0.1 / spectral_radius_estimate(gen.A);
    stride = std::max<long>(1, std::lround(T / dt_eff / 400.0));
  }
  EvolveResult ev = evolve(h0, gen, T, dt, static_cast<int>(stride), C, Chat,
                           with_h, scheme);

  double t_lo = ctl_num(ctx.controls, "t_lo", 0.25 * T);
  double t_hi = ctl_num(ctx.controls, "t_hi", T);
  RateFit fit = fit_rate(ev.times, ev.norm_h_sq, t_lo, t_hi);

  Series s;
  s.name = "decay";
  s.columns = {"t", "norm_h_sq"};
  if (with_h) s.columns.push_back("H");
  for (size_t r = 0; r < ev.times.size(); ++r) {
    std::vector<double> row{ev.times[r], ev.norm_h_sq[r]};
    if (with_h) row.push_back(ev.H[r]);
    s.rows.push_back(std::move(row));
  }
  emit_series(ctx, s, report);

  ordered_json res;
  res["N"] = N;
  res["gamma"] = gamma;
  res["beta"] = beta;
  res["omega0"] = omega0;
  res["scheme"] = scheme_str;
  res["C"] = C;
  res["C_hat"] = Chat;
  res["fit"] = {{"rate", fit.rate},
                {"r_squared", fit.r_squared},
                {"t_lo", fit.t_lo},
                {"t_hi", fit.t_hi},
                {"n_points", fit.n_points}};
  res["two_mu_matrix"] = 2.0 * rc.mu_matrix;
  res["two_mu_thm"] = 2.0 * rc.mu_thm;
  res["ratio_to_two_mu_matrix"] = fit.rate / (2.0 * rc.mu_matrix);
  res["ratio_to_two_mu_thm"] = fit.rate / (2.0 * rc.mu_thm);

  if (with_h) {
    double worst = -std::numeric_limits<double>::infinity();
    for (size_t r = 0; r + 1 < ev.times.size(); ++r) {
      if (!(ev.H[r] > 0.0)) continue;
      double dtr = ev.times[r + 1] - ev.times[r];
      double bound = ev.H[r] * std::exp(-2.0 * rc.mu_matrix * dtr);
      worst = std::max(worst, ev.H[r + 1] / bound - 1.0);
    }
    res["gronwall_max_excess"] = worst;
  }

  if (ctl_bool(ctx.controls, "spectrum", false)) {
    auto spec = generator_spectrum(gen);
    std::sort(spec.begin(), spec.end(), [](auto x, auto y) {
      if (x.real() != y.real()) return x.real() > y.real();
      return x.imag() < y.imag();
    });
    ordered_json head = ordered_json::array();
    for (size_t i = 0; i < spec.size() && i < 8; ++i)
      head.push_back({spec[i].real(), spec[i].imag()});
    res["spectrum_head"] = head;
  }
  if (ctl_bool(ctx.controls, "steady_state", false)) {
    HermiteField F = compute_steady_state(gen);
    Eigen::VectorXd flatc(
        Eigen::Map<const Eigen::VectorXd>(F.c.data(), F.c.size()));
    Eigen::VectorXd Av = gen.A * flatc;
    res["steady_state"] = {{"c00", F.c(0, 0)},
                           {"residual", Av.norm()},
                           {"norm", std::sqrt(F.norm_sq())}};
  }
  ctx.summary.push_back(
      "fitted rate = " + std::to_string(fit.rate) + " vs 2 mu_matrix = " +
      std::to_string(2.0 * rc.mu_matrix) + " (ratio " +
      std::to_string(fit.rate / (2.0 * rc.mu_matrix)) + ")");
  return res;
}

ordered_json run_fit_rate(RunCtx& ctx, ordered_json& report) {
  (void)report;
  std::string path = ctl_str(ctx.controls, "series_csv", "");
  if (path.empty()) schema_error("fit-rate needs control 'series_csv'");
  long tcol = ctl_int(ctx.controls, "t_column", 0);
  long ycol = ctl_int(ctx.controls, "y_column", 1);

  std::ifstream in(path);
  if (!in) throw std::invalid_argument("series file not found: " + path);
  std::vector<double> ts, ys;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    bool ok = true;
    size_t pos = 0;
    while (pos <= line.size()) {
      size_t comma = line.find(',', pos);
      std::string tok = line.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      char* end = nullptr;
      double val = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || (end && *end != '\0' && *end != '\r')) ok = false;
      fields.push_back(val);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (!ok) {
      if (first) {
        first = false;
        continue;  // header row
      }
      throw std::invalid_argument("malformed row in " + path);
    }
    first = false;
    if (tcol >= static_cast<long>(fields.size()) ||
        ycol >= static_cast<long>(fields.size()))
      throw std::invalid_argument("column out of range in " + path);
    ts.push_back(fields[tcol]);
    ys.push_back(fields[ycol]);
  }
  if (ts.empty()) throw std::invalid_argument("no data rows in " + path);

  double lo = ctl_num(ctx.controls, "t_lo", *std::min_element(ts.begin(), ts.end()));
  double hi = ctl_num(ctx.controls, "t_hi", *std::max_element(ts.begin(), ts.end()));
  RateFit fit = fit_rate(ts, ys, lo, hi);
  ordered_json res;
  res["series_csv"] = path;
  res["rate"] = fit.rate;
  res["intercept"] = fit.intercept;
  res["r_squared"] = fit.r_squared;
  res["t_lo"] = fit.t_lo;
  res["t_hi"] = fit.t_hi;
  res["n_points"] = fit.n_points;
  ctx.summary.push_back("rate = " + std::to_string(fit.rate) +
                        ", r^2 = " + std::to_string(fit.r_squared));
  return res;
}

ordered_json run_sweep_threshold(RunCtx& ctx, ordered_json& report) {
  std::vector<double> kappas =
      ctl_num_array(ctx.controls, "kappas", {ctx.p.kappa});
  long steps = ctl_int(ctx.controls, "steps", 200);
  bool explicit_etas = ctx.controls.contains("etas");
  std::vector<double> etas = ctl_num_array(ctx.controls, "etas", {});

  Series s;
  s.name = "threshold";
  s.columns = {"kappa",     "eta",      "theory_thm", "theory_matrix",
               "empirical", "norm_fit", "ratio_thm",  "ratio_matrix"};
  ordered_json per_kappa = ordered_json::array();
  std::vector<double> plateau_x, plateau_y;

  for (double kappa : kappas) {
    double eta_star = lr_threshold(kappa, ctx.p.omega0);
    std::vector<double> grid = etas;
    if (!explicit_etas) {
      for (double f : {0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0})
        grid.push_back(f * eta_star);
    }
    auto rows = threshold_sweep(grid, kappa, ctx.p.omega0, static_cast<int>(steps));
    for (const auto& r : rows)
      s.rows.push_back({r.kappa, r.eta, r.theory_thm, r.theory_matrix,
                        r.empirical, r.norm_fit, r.ratio_thm, r.ratio_matrix});

    std::vector<const ThresholdRow*> sorted;
    for (const auto& r : rows) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const ThresholdRow* x, const ThresholdRow* y) {
                return x->eta < y->eta;
              });
    double pl_min = std::numeric_limits<double>::infinity(), pl_max = 0.0,
           pl_sum = 0.0;
    int pl_n = 0;
    bool monotone_below = true;
    const ThresholdRow* prev_below = nullptr;
    for (const ThresholdRow* r : sorted) {
      if (r->eta >= eta_star * (1.0 - 1e-12)) {
        pl_min = std::min(pl_min, r->empirical);
        pl_max = std::max(pl_max, r->empirical);
        pl_sum += r->empirical;
        ++pl_n;
      }
      if (r->eta <= eta_star * (1.0 + 1e-12)) {
        if (prev_below && !(r->empirical > prev_below->empirical))
          monotone_below = false;
        prev_below = r;
      }
    }
    ordered_json jk;
    jk["kappa"] = kappa;
    jk["eta_star"] = eta_star;
    if (pl_n > 0) {
      double mean = pl_sum / pl_n;
      jk["plateau_mean"] = mean;
      jk["plateau_variation"] = (pl_max - pl_min) / mean;
      plateau_x.push_back(1.0 - kappa);
      plateau_y.push_back(mean);
    }
    jk["monotone_below"] = monotone_below;
    per_kappa.push_back(jk);
  }
  emit_series(ctx, s, report);

  ordered_json res;
  res["per_kappa"] = per_kappa;
  if (plateau_x.size() >= 2) {
    double sxy = 0.0, sxx = 0.0, sy = 0.0;
    for (size_t i = 0; i < plateau_x.size(); ++i) {
      sxy += plateau_x[i] * plateau_y[i];
      sxx += plateau_x[i] * plateau_x[i];
      sy += plateau_y[i];
    }
    double coef = sxy / sxx;
    double ybar = sy / plateau_x.size();
    double ss_res = 0.0, ss_tot = 0.0;
    for (size_t i = 0; i < plateau_x.size(); ++i) {
      double r = plateau_y[i] - coef * plateau_x[i];
      ss_res += r * r;
      ss_tot += (plateau_y[i] - ybar) * (plateau_y[i] - ybar);
    }
    res["proportionality"] = {{"coefficient", coef},
                              {"r_squared",
                               ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0}};
    ctx.summary.push_back("plateau coefficient vs (1-kappa): " +
                          std::to_string(coef));
  }
  return res;
}

ordered_json run_speedup(RunCtx& ctx, ordered_json& report) {
  std::vector<int> ms = ctl_int_array(ctx.controls, "ms", {1, 2, 4, 8});
  std::vector<double> kappas =
      ctl_num_array(ctx.controls, "kappas", {0.25, 0.5, 0.75});
  double eta = ctl_num(ctx.controls, "eta", 0.41);
  double target = ctl_num(ctx.controls, "target", 1e-6);
  long n_paths = ctl_int(ctx.controls, "n_paths", 10000);
  long horizon = ctl_int(ctx.controls, "horizon", 400);

  SpeedupReport rep =
      speedup_experiment(ms, kappas, eta, target, n_paths, horizon, ctx.seed);

  Series s;
  s.name = "cells";
  s.columns = {"m",        "kappa",    "commits",  "time_asgd", "time_sgd",
               "rate_per_commit", "predicate", "observed_faster", "boundary",
               "agree"};
  for (const auto& c : rep.cells)
    s.rows.push_back({static_cast<double>(c.m), c.kappa, c.commits_to_target,
                      c.time_asgd, c.time_sgd, c.rate_per_commit,
                      c.predicate ? 1.0 : 0.0, c.observed_faster ? 1.0 : 0.0,
                      c.boundary ? 1.0 : 0.0, c.agree ? 1.0 : 0.0});
  emit_series(ctx, s, report);

  int boundary = 0, agree = 0;
  for (const auto& c : rep.cells) {
    if (c.boundary) ++boundary;
    if (!c.boundary && c.agree) ++agree;
  }
  ordered_json res;
  res["eta"] = rep.eta;
  res["target"] = rep.target;
  res["n_paths"] = rep.n_paths;
  res["horizon"] = rep.horizon;
  res["sgd_commits"] = rep.sgd_commits;
  res["n_cells"] = rep.cells.size();
  res["n_boundary"] = boundary;
  res["n_nonboundary_agree"] = agree;
  res["all_nonboundary_agree"] = rep.all_nonboundary_agree;
  ctx.summary.push_back(
      "non-boundary agreement: " + std::to_string(agree) + "/" +
      std::to_string(rep.cells.size() - boundary) +
      (rep.all_nonboundary_agree ? " (all agree)" : " (MISMATCH)"));
  return res;
}

ordered_json run_compare(RunCtx& ctx, ordered_json& report) {
  std::vector<double> etas =
      ctl_num_array(ctx.controls, "etas", {0.04, 0.02, 0.01});
  long n_paths = ctl_int(ctx.controls, "n_paths", 10000);
  double theta0 = ctl_num(ctx.controls, "theta0", 1.0);

  CompareReport rep = compare_asgd_sme(etas, ctx.p.kappa, ctx.p.omega0,
                                       ctx.p.sigma_grad, theta0, n_paths,
                                       ctx.seed);
  Series s;
  s.name = "compare";
  s.columns = {"eta",  "k",  "t",        "mean_asgd", "mean_oracle",
               "mean_err", "se", "var_asgd", "var_oracle", "cov_err"};
  for (const auto& r : rep.rows)
    s.rows.push_back({r.eta, static_cast<double>(r.k), r.t, r.mean_asgd,
                      r.mean_oracle, r.mean_err, r.se, r.var_asgd, r.var_oracle,
                      r.cov_err});
  emit_series(ctx, s, report);

  ordered_json res;
  res["n_paths"] = n_paths;
  res["nonincreasing_within_3se"] = rep.nonincreasing_within_3se;
  ordered_json rows = ordered_json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"eta", r.eta},
                    {"k", r.k},
                    {"t", r.t},
                    {"mean_err", r.mean_err},
                    {"se", r.se},
                    {"cov_err", r.cov_err}});
  res["rows"] = rows;
  for (const auto& r : rep.rows)
    ctx.summary.push_back("eta = " + std::to_string(r.eta) + ": mean err = " +
                          std::to_string(r.mean_err) + " (3 se = " +
                          std::to_string(3.0 * r.se) + ")");
  return res;
}

const std::set<std::string>& allowed_controls(const std::string& kind) {
  static const std::map<std::string, std::set<std::string>> table = {
      {"analyze", {"a", "delta", "box_L", "grid_points"}},
      {"sample-staleness",
       {"n", "model", "fixed_l", "workers", "service", "mean_service"}},
      {"sim-asgd",
       {"steps", "n_paths", "stride", "record_y", "a", "trace", "history_cap",
        "model", "fixed_l", "workers", "service", "mean_service", "theta0"}},
      {"sim-sme", {"T", "dt", "n_paths", "stride", "a", "theta0", "y0"}},
      {"solve-pde",
       {"N", "T", "dt", "stride", "scheme", "a", "gamma", "beta", "omega0",
        "h0", "h0_seed", "h0_degree", "with_H", "C", "C_hat", "delta",
        "n_quad", "t_lo", "t_hi", "spectrum", "steady_state"}},
      {"fit-rate", {"series_csv", "t_lo", "t_hi", "t_column", "y_column"}},
      {"sweep-threshold", {"etas", "kappas", "steps"}},
      {"speedup", {"ms", "kappas", "eta", "target", "n_paths", "horizon"}},
      {"compare", {"etas", "n_paths", "theta0"}},
  };
  auto it = table.find(kind);
  if (it == table.end()) schema_error("unknown kind '" + kind + "'");
  return it->second;
}

bool is_simulation_kind(const std::string& kind) {
  return kind == "sample-staleness" || kind == "sim-asgd" ||
         kind == "sim-sme" || kind == "speedup" || kind == "compare";
}

}  // namespace

int run_experiment(const std::string& config_path, const CliOverrides& ov,
                   const std::string& expected_kind) {
  ordered_json cfg;
  {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: config not found: " << config_path << "\n";
      return 2;
    }
    try {
      in >> cfg;
    } catch (const std::exception& e) {
      std::cerr << "error: config parse failure in " << config_path << ": "
                << e.what() << "\n";
      return 2;
    }
  }

  try {
    if (!cfg.is_object()) schema_error("config root must be an object");
    check_keys(cfg, "config",
               {"schema_version", "kind", "params", "seed", "out", "format",
                "controls"});
    if (cfg.contains("schema_version")) {
      if (!cfg.at("schema_version").is_number_integer() ||
          cfg.at("schema_version").get<long>() != 1)
        schema_error("unsupported schema_version (expected 1)");
    }

    std::string kind;
    if (cfg.contains("kind")) {
      if (!cfg.at("kind").is_string()) schema_error("'kind' must be a string");
      kind = cfg.at("kind").get<std::string>();
    }
    if (!expected_kind.empty()) {
      if (!kind.empty() && kind != expected_kind)
        schema_error("config kind '" + kind + "' does not match subcommand '" +
                     expected_kind + "'");
      kind = expected_kind;
    }
    if (kind.empty()) schema_error("missing 'kind'");

    RunCtx ctx;
    if (cfg.contains("params")) {
      const auto& jp = cfg.at("params");
      if (!jp.is_object()) schema_error("'params' must be an object");
      check_keys(jp, "params", {"eta", "kappa", "omega0", "sigma_grad", "d", "m"});
      auto num = [&](const char* k, double def) {
        if (!jp.contains(k)) return def;
        if (!jp.at(k).is_number())
          schema_error(std::string("param '") + k + "' must be a number");
        return jp.at(k).get<double>();
      };
      auto integer = [&](const char* k, int def) {
        if (!jp.contains(k)) return def;
        if (!jp.at(k).is_number_integer())
          schema_error(std::string("param '") + k + "' must be an integer");
        return jp.at(k).get<int>();
      };
      ctx.p.eta = num("eta", ctx.p.eta);
      ctx.p.kappa = num("kappa", ctx.p.kappa);
      ctx.p.omega0 = num("omega0", ctx.p.omega0);
      ctx.p.sigma_grad = num("sigma_grad", ctx.p.sigma_grad);
      ctx.p.d = integer("d", ctx.p.d);
      ctx.p.m = integer("m", ctx.p.m);
    }
    validate(ctx.p);

    if (cfg.contains("seed")) {
      if (!cfg.at("seed").is_number_unsigned())
        schema_error("'seed' must be an unsigned integer");
      ctx.seed = cfg.at("seed").get<std::uint64_t>();
      ctx.has_seed = true;
    }
    if (ov.seed) {
      ctx.seed = *ov.seed;
      ctx.has_seed = true;
    }
    if (is_simulation_kind(kind) && !ctx.has_seed)
      schema_error("seed required for kind '" + kind + "' (config or --seed)");

    if (cfg.contains("out")) {
      if (!cfg.at("out").is_string()) schema_error("'out' must be a string");
      ctx.outdir = cfg.at("out").get<std::string>();
    }
    if (ov.out) ctx.outdir = *ov.out;
    if (ctx.outdir.empty())
      schema_error("missing output directory ('out' or --out)");

    std::string format = "csv";
    if (cfg.contains("format")) {
      if (!cfg.at("format").is_string()) schema_error("'format' must be a string");
      format = cfg.at("format").get<std::string>();
    }
    if (ov.format) format = *ov.format;
    if (format != "csv" && format != "json")
      schema_error("format must be csv or json");
    ctx.csv = format == "csv";

    if (cfg.contains("controls")) {
      if (!cfg.at("controls").is_object())
        schema_error("'controls' must be an object");
      ctx.controls = cfg.at("controls");
    } else {
      ctx.controls = ordered_json::object();
    }
    check_keys(ctx.controls, "controls", allowed_controls(kind));

    fs::create_directories(ctx.outdir);

    ordered_json report;
    report["schema_version"] = 1;
    report["kind"] = kind;
    if (ctx.has_seed)
      report["seed"] = ctx.seed;
    else
      report["seed"] = nullptr;
    report["params"] = {{"eta", ctx.p.eta},         {"kappa", ctx.p.kappa},
                        {"omega0", ctx.p.omega0},   {"sigma_grad", ctx.p.sigma_grad},
                        {"d", ctx.p.d},             {"m", ctx.p.m}};
    report["controls"] = ctx.controls;
    if (ctx.csv) report["series_files"] = ordered_json::array();

    ordered_json results;
    if (kind == "analyze")
      results = run_analyze(ctx, report);
    else if (kind == "sample-staleness")
      results = run_sample_staleness(ctx, report);
    else if (kind == "sim-asgd")
      results = run_sim_asgd(ctx, report);
    else if (kind == "sim-sme")
      results = run_sim_sme(ctx, report);
    else if (kind == "solve-pde")
      results = run_solve_pde(ctx, report);
    else if (kind == "fit-rate")
      results = run_fit_rate(ctx, report);
    else if (kind == "sweep-threshold")
      results = run_sweep_threshold(ctx, report);
    else if (kind == "speedup")
      results = run_speedup(ctx, report);
    else if (kind == "compare")
      results = run_compare(ctx, report);
    report["results"] = results;

    std::string rpath = ctx.outdir + "/report.json";
    std::ofstream out(rpath, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + rpath);
    out << report.dump(2) << "\n";
    out.close();

    std::cout << kind << ": ok\n";
    for (const auto& line : ctx.summary) std::cout << "  " << line << "\n";
    std::cout << "report: " << rpath << "\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace asgdlab
