// The objective family grad f(theta) = omega0^2 theta + eps(theta), its
// stochastic-gradient oracle, and the numerical Assumption-style seminorms of
// eps over a truncated phase-space box.
#pragma once

#include <vector>

#include "asgdlab/rng.hpp"

namespace asgdlab {

enum class EpsilonModel { zero, scaled_bounded };

struct GradientOracle {
  double omega0 = 1.0;
  EpsilonModel model = EpsilonModel::zero;
  double amplitude = 0.0;    // profile scale a; model == zero iff a == 0
  double sigma_grad = 0.0;   // isotropic noise scale of the stochastic gradient

  // componentwise perturbation a * tanh(t) * exp(-t^2) and its derivative
  double eps_scalar(double t) const;
  double eps_prime(double t) const;

  // exact gradient omega0^2 theta + eps(theta)
  void grad(const double* theta, double* out, int d) const;
  std::vector<double> grad(const std::vector<double>& theta) const;

  // grad(theta) + sigma_grad * xi, xi standard normal per component
  void stochastic_grad(const double* theta, double* out, int d, Rng& rng) const;
};

GradientOracle make_oracle(double omega0, EpsilonModel model, double amplitude,
                           double sigma_grad);

// The seven seminorms of the smallness assumption, evaluated as grid maxima
// over [-L,L]^2 (d = 1 phase space) with theta(x,v) = -(v + gamma x)/omega0^2.
struct PerturbationBounds {
  double eps_inf = 0.0;          // max_i ||eps_i||_inf
  double eps_x_inf = 0.0;        // ||eps . x||_inf
  double eps_v_inf = 0.0;        // ||eps . v||_inf
  double d_epsprime_inf = 0.0;   // d * max_i ||eps_i'||_inf
  double sum_epsprime_inf = 0.0; // sum_i ||eps_i'||_inf
  double epsprime_x_inf = 0.0;   // ||eps' . x||_inf
  double epsprime_v_inf = 0.0;   // ||eps' . v||_inf
  double eps0 = 0.0;             // max of the seven
};

PerturbationBounds perturbation_bounds(const GradientOracle& oracle, double gamma,
                                       double L, int grid_points, int d = 1);

}  // namespace asgdlab
