#include "asgdlab/hypo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asgdlab {

HypoMatrices build_matrices(double gamma, double omega0, double C, double C_hat) {
  HypoMatrices m;
  m.gamma = gamma;
  m.omega0 = omega0;
  m.C = C;
  m.C_hat = C_hat;
  double om2 = omega0 * omega0;
  m.Q2 << 0.0, 1.0, -om2, gamma;
  m.P2 << 1.0, C_hat, C_hat, C;
  m.K2 = m.Q2 * m.P2 + m.P2 * m.Q2.transpose();
  return m;
}

double check_certificate(const HypoMatrices& mats, double mu) {
  double detP = mats.C - mats.C_hat * mats.C_hat;
  if (!(detP > 0.0)) throw std::invalid_argument("P not positive definite");
  Eigen::Matrix2d S = mats.K2 - 2.0 * mu * mats.P2;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(S);
  return es.eigenvalues().minCoeff();
}

double certificate_sup_mu(const HypoMatrices& mats, double tol) {
  double lo = 0.0;
  if (check_certificate(mats, lo) < 0.0) return 0.0;
  double hi = mats.gamma;
  while (check_certificate(mats, hi) >= 0.0) hi *= 2.0;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (check_certificate(mats, mid) >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

CriticalPair find_C_Chat(double gamma, double omega0, double delta) {
  double mu_matrix = theorem_rate(gamma, omega0).mu_matrix;
  if (!(delta > 0.0 && delta < mu_matrix))
    throw std::invalid_argument("find_C_Chat: need 0 < delta < mu_matrix");
  double mu = mu_matrix - delta;

  auto margin_at = [&](double C, double C_hat) {
    return check_certificate(build_matrices(gamma, omega0, C, C_hat), mu);
  };

  const int n_chat = 64;
  const int n_c = 64;
  CriticalPair best;
  bool found = false;
  for (int i = 0; i < n_chat; ++i) {
    // logarithmic sweep of C_hat over (0, gamma]
    double C_hat = gamma * std::pow(10.0, -3.0 * (1.0 - (i + 1.0) / n_chat));
    double c_lo = C_hat * C_hat;
    double c_hi = 4.0 * gamma * gamma;
    for (int j = 0; j < n_c; ++j) {
      double f = (j + 1.0) / n_c;
      double C = c_lo + (c_hi - c_lo) * std::pow(f, 2.0);
      if (!(C > c_lo)) continue;
      double mg = margin_at(C, C_hat);
      if (mg >= 0.0 && (!found || mg > best.margin)) {
        best.C = C;
        best.C_hat = C_hat;
        best.margin = mg;
        found = true;
      }
    }
  }
  if (!found) throw std::runtime_error("no certificate found");

  // refinement: the margin is concave in C for fixed C_hat (min eigenvalue of
  // an affine matrix family), so a ternary search sharpens the grid optimum
  double lo = best.C_hat * best.C_hat * (1.0 + 1e-12);
  double hi = 4.0 * gamma * gamma;
  while (hi - lo > 1e-4) {
    double m1 = lo + (hi - lo) / 3.0;
    double m2 = hi - (hi - lo) / 3.0;
    if (margin_at(m1, best.C_hat) < margin_at(m2, best.C_hat))
      lo = m1;
    else
      hi = m2;
  }
  double c_ref = 0.5 * (lo + hi);
  double mg_ref = margin_at(c_ref, best.C_hat);
  if (mg_ref >= best.margin) {
    best.C = c_ref;
    best.margin = mg_ref;
  }
  return best;
}

HypoConstants constants(double gamma, double beta, double omega0, double C,
                        double C_hat, double eps0, double mu) {
  if (eps0 < 0.0) throw std::invalid_argument("constants: eps0 must be >= 0");
  double denom = C - C_hat * C_hat;
  if (!(denom > 0.0))
    throw std::invalid_argument("constants: C - C_hat^2 must be > 0");
  HypoConstants hc;
  double om2 = omega0 * omega0;
  hc.C2 = std::max({1.0, gamma, gamma * gamma, beta * gamma, beta * om2}) /
          std::min(1.0, om2);
  hc.eps_shift = (11.0 + 11.0 * C + 15.0 * C_hat) * eps0 * hc.C2 * hc.C2 *
                 std::max(1.0, C) / denom;
  hc.net_rate = 2.0 * (mu - hc.eps_shift);
  return hc;
}

HypoReport hypo_report(double gamma, double beta, double omega0, double eps0,
                       double delta) {
  RateCase rc = theorem_rate(gamma, omega0, delta);
  HypoReport r;
  r.regime = rc.regime;
  r.gamma = gamma;
  r.omega0 = omega0;
  r.mu_matrix = rc.mu_matrix;
  r.mu_thm = rc.mu_thm;
  if (rc.c_deferred) {
    CriticalPair cp = find_C_Chat(gamma, omega0, delta > 0.0 ? delta : 0.1 * rc.mu_matrix);
    r.C = cp.C;
    r.C_hat = cp.C_hat;
  } else {
    r.C = rc.C;
    r.C_hat = rc.C_hat;
  }
  HypoMatrices mats = build_matrices(gamma, omega0, r.C, r.C_hat);
  double mu_cert = rc.c_deferred ? rc.mu_matrix - (delta > 0.0 ? delta : 0.1 * rc.mu_matrix)
                                 : rc.mu_matrix;
  r.psd_margin = check_certificate(mats, mu_cert);
  r.sup_mu = certificate_sup_mu(mats);
  HypoConstants hc = constants(gamma, beta, omega0, r.C, r.C_hat, eps0, rc.mu_matrix);
  r.C2 = hc.C2;
  r.eps0 = eps0;
  r.eps_shift = hc.eps_shift;
  r.net_rate_matrix = 2.0 * (r.mu_matrix - hc.eps_shift);
  r.net_rate_thm = 2.0 * (r.mu_thm - hc.eps_shift);
  return r;
}

}  // namespace asgdlab
