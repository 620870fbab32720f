// Parameter algebra: algorithmic inputs (eta, kappa, omega0, Sigma, d, m),
// the derived SDE constants, and the closed-form rate formulas.
#pragma once

#include <string>

namespace asgdlab {

struct Params {
  double eta = 0.01;         // learning rate, > 0
  double kappa = 0.5;        // staleness rate, in [0,1); 0 is the SGD limit
  double omega0 = 1.0;       // curvature scale, > 0
  double sigma_grad = 1.0;   // gradient noise scale Sigma, >= 0 (isotropic)
  int d = 1;                 // parameter dimension, >= 1
  int m = 1;                 // number of workers, >= 1
};

// Throws std::invalid_argument naming the offending field.
void validate(const Params& p);

struct DerivedParams {
  double gamma = 0.0;      // friction sqrt((1-kappa)/eta)
  double tau_noise = 0.0;  // diffusion amplitude eta^{3/4}/(1-kappa)^{1/4} * Sigma
  double dt_map = 0.0;     // time scale delta_t = sqrt(eta(1-kappa))

  // Inverse temperature 2*gamma/(tau_noise^2 * omega0^4). Throws a
  // "degenerate diffusion" domain error when sigma_grad was 0.
  double beta() const;
  bool has_beta() const { return has_beta_; }

  double beta_value_ = 0.0;  // set by derive_params; use beta()
  bool has_beta_ = false;
};

DerivedParams derive_params(const Params& p);

enum class Regime { underdamped, overdamped, critical };

std::string regime_name(Regime r);

struct RateCase {
  Regime regime = Regime::underdamped;
  double mu_thm = 0.0;     // the mu of the theorem's case table
  double mu_matrix = 0.0;  // min real part of the eigenvalues of Q
  double C = 0.0;          // Lyapunov weight (NaN in the critical case)
  double C_hat = 0.0;      // cross-term weight (NaN in the critical case)
  bool c_deferred = false; // critical case: (C, C_hat) come from find_C_Chat
  double delta = 0.0;      // critical case: mu_thm = gamma - delta
};

// Case split at |gamma - 2*omega0| / gamma <= 1e-9 (relative critical band).
RateCase theorem_rate(double gamma, double omega0, double delta = 0.0);

// Per-iteration decay exponent: (1-kappa) above the learning-rate threshold,
// (1-kappa) - sqrt((1-kappa)^2 - 4 omega0^2 (1-kappa) eta) below; continuous
// at the threshold.
double per_step_exponent(double eta, double kappa, double omega0);

// eta* = (1-kappa) / (4 omega0^2)
double lr_threshold(double kappa, double omega0);

// true iff (1-kappa)*m > 1 strictly
bool speedup_predicate(int m, double kappa);

}  // namespace asgdlab
