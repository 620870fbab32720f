#include "asgdlab/params.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace asgdlab {

void validate(const Params& p) {
  if (!(p.eta > 0.0)) throw std::invalid_argument("params: eta must be > 0");
  if (!(p.kappa >= 0.0 && p.kappa < 1.0))
    throw std::invalid_argument("params: kappa must be in [0,1)");
  if (!(p.omega0 > 0.0)) throw std::invalid_argument("params: omega0 must be > 0");
  if (!(p.sigma_grad >= 0.0))
    throw std::invalid_argument("params: sigma_grad must be >= 0");
  if (p.d < 1) throw std::invalid_argument("params: d must be >= 1");
  if (p.m < 1) throw std::invalid_argument("params: m must be >= 1");
}

double DerivedParams::beta() const {
  if (!has_beta_)
    throw std::domain_error("degenerate diffusion: beta undefined for sigma_grad = 0");
  return beta_value_;
}

DerivedParams derive_params(const Params& p) {
  validate(p);
  double one_minus_k = 1.0 - p.kappa;
  DerivedParams dp;
  dp.gamma = std::sqrt(one_minus_k / p.eta);
  dp.tau_noise = std::pow(p.eta, 0.75) / std::pow(one_minus_k, 0.25) * p.sigma_grad;
  dp.dt_map = std::sqrt(p.eta * one_minus_k);
  if (p.sigma_grad > 0.0) {
    // evaluated via the algebraic identity 2(1-kappa)/(eta^2 Sigma^2 omega0^4),
    // which equals 2*gamma/(tau_noise^2 omega0^4) exactly
    double om4 = p.omega0 * p.omega0 * p.omega0 * p.omega0;
    dp.beta_value_ = 2.0 * one_minus_k /
                     (p.eta * p.eta * p.sigma_grad * p.sigma_grad * om4);
    dp.has_beta_ = true;
  }
  return dp;
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::underdamped: return "underdamped";
    case Regime::overdamped: return "overdamped";
    case Regime::critical: return "critical";
  }
  return "unknown";
}

RateCase theorem_rate(double gamma, double omega0, double delta) {
  if (!(gamma > 0.0) || !(omega0 > 0.0))
    throw std::invalid_argument("theorem_rate: gamma and omega0 must be > 0");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  RateCase rc;
  double gap = gamma - 2.0 * omega0;
  if (std::fabs(gap) <= 1e-9 * gamma) {
    rc.regime = Regime::critical;
    rc.mu_thm = gamma - delta;
    rc.mu_matrix = 0.5 * gamma;  // double eigenvalue of Q at gamma/2
    rc.C = nan;
    rc.C_hat = nan;
    rc.c_deferred = true;
    rc.delta = delta;
  } else if (gap < 0.0) {
    rc.regime = Regime::underdamped;
    rc.mu_thm = gamma;
    rc.mu_matrix = 0.5 * gamma;
    rc.C = omega0 * omega0;
    rc.C_hat = 0.5 * gamma;
  } else {
    rc.regime = Regime::overdamped;
    double root = std::sqrt(gamma * gamma - 4.0 * omega0 * omega0);
    rc.mu_thm = gamma - root;
    rc.mu_matrix = 0.5 * (gamma - root);
    rc.C = 0.5 * gamma * gamma - omega0 * omega0;
    rc.C_hat = 0.5 * gamma;
  }
  return rc;
}

double per_step_exponent(double eta, double kappa, double omega0) {
  double c = 1.0 - kappa;
  double disc = c * c - 4.0 * omega0 * omega0 * c * eta;
  if (disc <= 0.0) return c;
  return c - std::sqrt(disc);
}

double lr_threshold(double kappa, double omega0) {
  return (1.0 - kappa) / (4.0 * omega0 * omega0);
}

bool speedup_predicate(int m, double kappa) {
  return (1.0 - kappa) * static_cast<double>(m) > 1.0;
}

}  // namespace asgdlab
