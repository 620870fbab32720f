// Hypocoercivity certificate machinery: the 2x2 reduced matrices Q, P, K, the
// PSD margin check, the (C, C_hat) search for the critical regime, and the
// perturbation-shift constants.
#pragma once

#include <Eigen/Dense>

#include "asgdlab/params.hpp"

namespace asgdlab {

struct HypoMatrices {
  double gamma = 0.0;
  double omega0 = 0.0;
  double C = 0.0;
  double C_hat = 0.0;
  Eigen::Matrix2d Q2;  // [[0, 1], [-omega0^2, gamma]]
  Eigen::Matrix2d P2;  // [[1, C_hat], [C_hat, C]]
  Eigen::Matrix2d K2;  // Q2*P2 + P2*Q2^T
};

HypoMatrices build_matrices(double gamma, double omega0, double C, double C_hat);

// min eigenvalue of K2 - 2*mu*P2; throws if P2 is not positive definite.
double check_certificate(const HypoMatrices& mats, double mu);

// Bisection for sup{mu : check_certificate(mats, mu) >= 0}.
double certificate_sup_mu(const HypoMatrices& mats, double tol = 1e-9);

// Critical-regime search: logarithmic grid over C_hat in (0, gamma] and
// C in (C_hat^2, 4 gamma^2], refined by bisection toward the feasibility
// boundary; returns a pair certified at mu = mu_matrix - delta.
// Throws std::runtime_error("no certificate found") if nothing passes.
struct CriticalPair {
  double C = 0.0;
  double C_hat = 0.0;
  double margin = 0.0;  // check_certificate at mu = mu_matrix - delta
};
CriticalPair find_C_Chat(double gamma, double omega0, double delta);

struct HypoConstants {
  double C2 = 0.0;        // max{1, gamma, gamma^2, beta*gamma, beta*omega0^2} / min{1, omega0^2}
  double eps_shift = 0.0; // (11 + 11C + 15C_hat) eps0 C2^2 max{1,C} / (C - C_hat^2)
  double net_rate = 0.0;  // 2 (mu - eps_shift)
};

HypoConstants constants(double gamma, double beta, double omega0, double C,
                        double C_hat, double eps0, double mu);

struct HypoReport {
  Regime regime = Regime::underdamped;
  double gamma = 0.0;
  double omega0 = 0.0;
  double mu_matrix = 0.0;
  double mu_thm = 0.0;
  double C = 0.0;
  double C_hat = 0.0;
  double psd_margin = 0.0;   // min eig of K2 - 2*mu_matrix*P2
  double sup_mu = 0.0;       // bisection sup{mu : PSD}
  double C2 = 0.0;
  double eps0 = 0.0;
  double eps_shift = 0.0;
  double net_rate_matrix = 0.0;  // 2(mu_matrix - eps_shift)
  double net_rate_thm = 0.0;     // 2(mu_thm - eps_shift)
};

// Full certificate report for one (gamma, beta, omega0) triple; (C, C_hat)
// from the case table, or from find_C_Chat with `delta` in the critical case.
HypoReport hypo_report(double gamma, double beta, double omega0, double eps0,
                       double delta = 0.0);

}  // namespace asgdlab
