// Acceptance gate: one quantitative criterion per line, desk scale.
// Exit status is nonzero when any criterion fails its tolerance or budget.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "asgdlab/asgd.hpp"
#include "asgdlab/harness.hpp"
#include "asgdlab/hypo.hpp"
#include "asgdlab/kfp.hpp"
#include "asgdlab/loss.hpp"
#include "asgdlab/params.hpp"
#include "asgdlab/rng.hpp"
#include "asgdlab/sme.hpp"
#include "asgdlab/staleness.hpp"

using namespace asgdlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(int id, double limit_s, const std::function<Outcome()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome oc;
  try {
    oc = body();
  } catch (const std::exception& e) {
    oc = {false, std::string("exception: ") + e.what()};
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
  bool pass = oc.pass;
  std::string note = oc.detail;
  if (secs > limit_s) {
    pass = false;
    note += " [over time budget " + std::to_string(limit_s) + "s]";
  }
  std::printf("[%s] criterion %d (%.2fs): %s\n", pass ? "PASS" : "FAIL", id, secs,
              note.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// shared between criteria 3 and 4
struct DecayFit {
  double gamma = 0.0;
  double rate = 0.0;
  double mu_matrix = 0.0;
  double mu_thm = 0.0;
  double gronwall_excess = 0.0;
};
std::vector<DecayFit> g_decay;

const GradientOracle kZero = make_oracle(1.0, EpsilonModel::zero, 0.0, 0.0);

Outcome c1_certificates() {
  std::ostringstream d;
  bool ok = true;
  for (auto [g, w] : std::vector<std::pair<double, double>>{
           {1.0, 1.0}, {2.5, 1.0}, {4.0, 1.5}}) {
    RateCase rc = theorem_rate(g, w);
    HypoMatrices m = build_matrices(g, w, rc.C, rc.C_hat);
    double margin = check_certificate(m, rc.mu_matrix);
    double sup = certificate_sup_mu(m);
    bool here = margin >= -1e-10 && margin <= 1e-8 &&
                std::abs(sup - rc.mu_matrix) <= 1e-6;
    ok = ok && here;
    d << "(" << g << "," << w << ") margin=" << fmt(margin)
      << " sup-mu err=" << fmt(sup - rc.mu_matrix) << "; ";
  }
  return {ok, d.str()};
}

Outcome c2_spectrum() {
  std::ostringstream d;
  bool ok = true;
  auto nearest = [](const std::vector<std::complex<double>>& spec,
                    std::complex<double> target) {
    double best = 1e18;
    for (auto z : spec) best = std::min(best, std::abs(z - target));
    return best;
  };

  GeneratorMatrix over = assemble_generator(12, 2.5, 2.0, 1.0, kZero);
  auto so = generator_spectrum(over);
  double e1 = nearest(so, {-0.5, 0.0});
  double e2 = nearest(so, {-2.0, 0.0});
  ok = ok && e1 < 1e-8 && e2 < 1e-8;
  d << "gamma=2.5: |err(-0.5)|=" << fmt(e1) << " |err(-2)|=" << fmt(e2) << "; ";

  GeneratorMatrix under = assemble_generator(12, 1.0, 2.0, 1.0, kZero);
  auto su = generator_spectrum(under);
  double nu = std::sqrt(3.0) / 2.0;
  double u1 = nearest(su, {-0.5, nu});
  double u2 = nearest(su, {-0.5, -nu});
  double abscissa = -1e18;
  for (auto z : su)
    if (std::abs(z) > 1e-9) abscissa = std::max(abscissa, z.real());
  ok = ok && u1 < 1e-8 && u2 < 1e-8 && std::abs(abscissa + 0.5) < 1e-8;
  d << "gamma=1: |err(-0.5+-i nu)|=" << fmt(std::max(u1, u2))
    << " abscissa=" << fmt(abscissa);
  return {ok, d.str()};
}

Outcome c3_decay() {
  std::ostringstream d;
  bool ok = true;
  g_decay.clear();
  int which = 0;
  for (double gamma : {1.0, 2.5}) {
    RateCase rc = theorem_rate(gamma, 1.0);
    GeneratorMatrix gen = assemble_generator(12, gamma, 2.0, 1.0, kZero);
    Rng rng(2026 + which);
    HermiteField h0 = make_field(12, gen.meas);
    for (int i = 0; i <= 12; ++i)
      for (int j = 0; j <= 12; ++j)
        if (i + j >= 1 && i + j <= 6) h0.c(i, j) = rng.next_gauss();
    h0.c /= std::sqrt(h0.norm_sq());

    double T, dt, lo;
    int stride;
    if (gamma == 1.0) {
      double nu = std::sqrt(3.0) / 2.0;
      T = 6.0 + 8.0 * 3.14159265358979323846 / nu;  // whole periods of ||h||^2
      dt = 5e-3;
      stride = 14;
      lo = 6.0;
    } else {
      T = 20.0;
      dt = 2.5e-3;
      stride = 16;
      lo = 8.0;
    }
    EvolveResult ev =
        evolve(h0, gen, T, dt, stride, rc.C, rc.C_hat, true, Scheme::rk4);

    double excess = 0.0;
    for (size_t r = 1; r < ev.H.size(); ++r) {
      double gap = ev.times[r] - ev.times[r - 1];
      double bound = ev.H[r - 1] * std::exp(-2.0 * rc.mu_matrix * gap);
      excess = std::max(excess, ev.H[r] / bound - 1.0);
    }
    bool gron = excess <= 1e-6;

    RateFit fit = fit_rate(ev.times, ev.norm_h_sq, lo, T);
    // slowest excited mode decays at 2 Re lambda_slow = 1 for both cases
    bool rate_ok = std::abs(fit.rate - 1.0) <= 0.01;
    ok = ok && gron && rate_ok;
    d << "gamma=" << gamma << ": rate=" << fmt(fit.rate)
      << " gronwall excess=" << fmt(excess) << "; ";
    g_decay.push_back({gamma, fit.rate, rc.mu_matrix, rc.mu_thm, excess});
    ++which;
  }
  return {ok, d.str()};
}

Outcome c4_convention() {
  if (g_decay.size() != 2) return {false, "no decay fits available"};
  std::ostringstream d;
  bool ok = true;
  for (const auto& f : g_decay) {
    double r_matrix = f.rate / (2.0 * f.mu_matrix);
    double r_thm = f.rate / (2.0 * f.mu_thm);
    ok = ok && std::abs(r_matrix - 1.0) <= 0.02;
    d << "gamma=" << f.gamma << ": rate/(2 mu_matrix)=" << fmt(r_matrix)
      << ", rate/(2 mu_thm)=" << fmt(r_thm) << " (case-table convention is the"
      << " doubled one); ";
  }
  return {ok, d.str()};
}

Outcome c5_consistency() {
  CompareReport rep =
      compare_asgd_sme({0.04, 0.02, 0.01}, 0.5, 1.0, 1.0, 1.0, 10000, 20260818);
  std::ostringstream d;
  bool ok = rep.nonincreasing_within_3se;
  for (const auto& r : rep.rows)
    d << "eta=" << r.eta << ": err=" << fmt(r.mean_err) << " (3se=" << fmt(3 * r.se)
      << "); ";
  const CompareRow& last = rep.rows.back();
  ok = ok && last.mean_err <= 3.0 * last.se;
  d << (rep.nonincreasing_within_3se ? "nonincreasing" : "NOT nonincreasing");
  return {ok, d.str()};
}

Outcome c6_stationary() {
  Params p;
  p.eta = 0.5;
  p.kappa = 0.5;
  p.omega0 = 1.0;
  p.sigma_grad = 1.0;
  DerivedParams dp = derive_params(p);  // gamma = 1, beta = 4
  GradientOracle oracle = make_oracle(p.omega0, EpsilonModel::zero, 0.0, 0.0);
  std::vector<double> Theta, Y;
  asgd_to_sme_state({-1.0}, p, oracle, Theta, Y);
  SmeState init{Theta, Y, 0.0};
  EnsembleMoments mom =
      run_sme_ensemble(init, 20.0, 0.01, 10000, dp, oracle, 424242, 400);
  EnsembleMoments ph = phase_moments(mom, dp.gamma, p.omega0);

  double beta = dp.beta();
  double target_x = 1.0 / (beta * p.omega0 * p.omega0);
  double target_v = 1.0 / beta;
  double sx = 0.0, sv = 0.0;
  int n = 0;
  for (size_t r = 0; r < ph.size(); ++r) {
    if (ph.times[r] < 12.0) continue;
    sx += ph.cov[r][0];
    sv += ph.cov[r][3];
    ++n;
  }
  double vx = sx / n, vv = sv / n;
  bool ok = std::abs(vx / target_x - 1.0) <= 0.05 &&
            std::abs(vv / target_v - 1.0) <= 0.05;
  std::ostringstream d;
  d << "var_x=" << fmt(vx) << " (target " << fmt(target_x) << "), var_v=" << fmt(vv)
    << " (target " << fmt(target_v) << "), late records n=" << n;
  return {ok, d.str()};
}

Outcome c7_threshold() {
  std::ostringstream d;
  bool ok = true;
  std::vector<double> x, y;  // (1 - kappa) vs plateau mean
  for (double kappa : {0.25, 0.5, 0.75}) {
    double eta_star = lr_threshold(kappa, 1.0);
    std::vector<double> etas;
    for (double f : {0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0})
      etas.push_back(f * eta_star);
    auto rows = threshold_sweep(etas, kappa, 1.0, 200);

    bool increasing = true;
    for (int i = 0; i + 1 <= 4 && i + 1 < static_cast<int>(rows.size()); ++i)
      increasing = increasing && rows[i].empirical < rows[i + 1].empirical;

    double lo = 1e18, hi = -1e18, sum = 0.0;
    int n = 0;
    for (size_t i = 4; i < rows.size(); ++i) {
      lo = std::min(lo, rows[i].empirical);
      hi = std::max(hi, rows[i].empirical);
      sum += rows[i].empirical;
      ++n;
    }
    double mean = sum / n;
    double variation = (hi - lo) / mean;
    ok = ok && increasing && variation < 0.01;
    d << "kappa=" << kappa << ": plateau var=" << fmt(variation)
      << (increasing ? " rising below" : " NOT rising below") << "; ";
    x.push_back(1.0 - kappa);
    y.push_back(mean);
  }

  // proportional fit through the origin
  double sxy = 0.0, sxx = 0.0, ybar = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
    ybar += y[i] / x.size();
  }
  double c = sxy / sxx, ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    ss_res += (y[i] - c * x[i]) * (y[i] - c * x[i]);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  double r2 = 1.0 - ss_res / ss_tot;
  ok = ok && r2 > 0.999;
  d << "plateau ~ c (1-kappa): c=" << fmt(c) << " R^2=" << fmt(r2);
  return {ok, d.str()};
}

Outcome c8_speedup() {
  SpeedupReport rep =
      speedup_experiment({1, 2, 4, 8}, {0.25, 0.5, 0.75}, 0.41, 1e-6, 10000, 400, 31);
  std::ostringstream d;
  int boundary = 0, agree = 0, nonboundary = 0;
  for (const auto& cell : rep.cells) {
    if (cell.boundary) {
      ++boundary;
      d << "boundary m=" << cell.m << " kappa=" << cell.kappa
        << " t_asgd/t_sgd=" << fmt(cell.time_asgd / cell.time_sgd) << "; ";
      continue;
    }
    ++nonboundary;
    if (cell.agree) ++agree;
    if (!cell.agree)
      d << "MISMATCH m=" << cell.m << " kappa=" << cell.kappa
        << " predicate=" << cell.predicate << " t_asgd/t_sgd="
        << fmt(cell.time_asgd / cell.time_sgd) << "; ";
  }
  bool ok = rep.all_nonboundary_agree && nonboundary + boundary == 12;
  d << agree << "/" << nonboundary << " non-boundary cells agree, " << boundary
    << " boundary cells reported";
  return {ok, d.str()};
}

Outcome c9_appendix() {
  std::ostringstream d;
  bool ok = true;
  for (double gamma : {1.0, 2.5}) {
    IdentityReport rep = verify_identities(8, make_measure(2.0, 1.0), gamma);
    double worst = std::max({rep.max_resid_antisym, rep.max_resid_diag,
                             rep.max_resid_dissip});
    ok = ok && worst < 1e-12;
    d << "identities gamma=" << gamma << ": max resid=" << fmt(worst) << "; ";
  }

  GradientOracle o = make_oracle(1.0, EpsilonModel::scaled_bounded, 0.01, 0.0);
  PerturbationBounds b = perturbation_bounds(o, 1.0, 6.0, 401);
  auto checks = verify_perturbation_bounds(8, make_measure(2.0, 1.0), 1.0, o, b);
  int held = 0;
  for (const auto& bc : checks)
    if (bc.holds) ++held;
  ok = ok && held == static_cast<int>(checks.size());
  d << "inequalities " << held << "/" << checks.size() << " hold; ";

  GaussianMeasure meas = make_measure(2.0, 1.0);
  HermiteField x = make_field(6, meas);
  x.c(1, 0) = meas.sigma_x;
  PoincareCheck p1 = check_poincare(x, 1);
  PoincareCheck p2 = poincare_first_coordinate(2, 2.0, 1.0);
  ok = ok && p1.holds && !p2.holds;
  d << "poincare d=1 holds (" << fmt(p1.lhs) << " <= " << fmt(p1.rhs)
    << "), d=2 counterexample " << fmt(p2.lhs) << " > " << fmt(p2.rhs);
  return {ok, d.str()};
}

Outcome c10_determinism() {
  fs::path root = fs::temp_directory_path() / "asgdlab_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  nlohmann::json params = {
      {"eta", 0.05}, {"kappa", 0.5}, {"omega0", 1.0}, {"sigma_grad", 0.5}};
  std::vector<std::pair<std::string, nlohmann::json>> kinds = {
      {"sim-asgd",
       {{"steps", 200}, {"n_paths", 50}, {"stride", 20}, {"trace", true}}},
      {"sim-sme", {{"T", 1.0}, {"dt", 0.01}, {"n_paths", 200}, {"stride", 25}}},
      {"sample-staleness", {{"n", 5000}}},
      {"speedup",
       {{"ms", {1, 2}},
        {"kappas", {0.5}},
        {"eta", 0.41},
        {"target", 1e-3},
        {"n_paths", 200},
        {"horizon", 120}}},
      {"compare", {{"etas", {0.04}}, {"n_paths", 500}}},
  };

  std::ostringstream d;
  bool ok = true;
  for (const auto& [kind, controls] : kinds) {
    std::vector<std::string> dumps;
    for (int run = 0; run < 2; ++run) {
      fs::path out = root / (kind + "_" + std::to_string(run));
      nlohmann::json cfg = {{"kind", kind},      {"params", params},
                            {"seed", 777},       {"out", out.string()},
                            {"format", "csv"},   {"controls", controls}};
      fs::path cfgp = root / (kind + "_" + std::to_string(run) + ".json");
      std::ofstream(cfgp) << cfg.dump(2);
      if (run_experiment(cfgp.string()) != 0) {
        ok = false;
        d << kind << " run failed; ";
        break;
      }
      std::ostringstream all;
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(out)) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        all << f.filename().string() << "\n" << in.rdbuf() << "\n";
      }
      dumps.push_back(all.str());
    }
    if (dumps.size() == 2 && dumps[0] != dumps[1]) {
      ok = false;
      d << kind << " reruns differ; ";
    }
  }
  if (ok) d << "5 simulation kinds rerun byte-identical (report + series files)";
  return {ok, d.str()};
}

}  // namespace

int main() {
  criterion(1, 1.0, c1_certificates);
  criterion(2, 5.0, c2_spectrum);
  criterion(3, 30.0, c3_decay);
  criterion(4, 30.0, c4_convention);
  criterion(5, 120.0, c5_consistency);
  criterion(6, 120.0, c6_stationary);
  criterion(7, 30.0, c7_threshold);
  criterion(8, 300.0, c8_speedup);
  criterion(9, 10.0, c9_appendix);
  criterion(10, 60.0, c10_determinism);

  if (g_failures > 0) {
    std::printf("%d of 10 criteria failed\n", g_failures);
    return 1;
  }
  std::printf("all 10 criteria passed\n");
  return 0;
}
