#include "asgdlab/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asgdlab {

double GradientOracle::eps_scalar(double t) const {
  if (model == EpsilonModel::zero) return 0.0;
  return amplitude * std::tanh(t) * std::exp(-t * t);
}

double GradientOracle::eps_prime(double t) const {
  if (model == EpsilonModel::zero) return 0.0;
  double th = std::tanh(t);
  double g = std::exp(-t * t);
  return amplitude * g * ((1.0 - th * th) - 2.0 * t * th);
}

void GradientOracle::grad(const double* theta, double* out, int d) const {
  double om2 = omega0 * omega0;
  for (int i = 0; i < d; ++i) out[i] = om2 * theta[i] + eps_scalar(theta[i]);
}

std::vector<double> GradientOracle::grad(const std::vector<double>& theta) const {
  std::vector<double> out(theta.size());
  grad(theta.data(), out.data(), static_cast<int>(theta.size()));
  return out;
}

void GradientOracle::stochastic_grad(const double* theta, double* out, int d,
                                     Rng& rng) const {
  grad(theta, out, d);
  if (sigma_grad > 0.0)
    for (int i = 0; i < d; ++i) out[i] += sigma_grad * rng.next_gauss();
}

GradientOracle make_oracle(double omega0, EpsilonModel model, double amplitude,
                           double sigma_grad) {
  if (!(omega0 > 0.0)) throw std::invalid_argument("oracle: omega0 must be > 0");
  if (amplitude < 0.0) throw std::invalid_argument("oracle: amplitude must be >= 0");
  if (sigma_grad < 0.0)
    throw std::invalid_argument("oracle: sigma_grad must be >= 0");
  if (model == EpsilonModel::zero && amplitude != 0.0)
    throw std::invalid_argument("oracle: zero model requires amplitude 0");
  if (model == EpsilonModel::scaled_bounded && amplitude == 0.0)
    throw std::invalid_argument("oracle: scaled_bounded model requires amplitude > 0");
  GradientOracle o;
  o.omega0 = omega0;
  o.model = model;
  o.amplitude = amplitude;
  o.sigma_grad = sigma_grad;
  return o;
}

PerturbationBounds perturbation_bounds(const GradientOracle& oracle, double gamma,
                                       double L, int grid_points, int d) {
  if (!(L > 0.0)) throw std::invalid_argument("perturbation_bounds: L must be > 0");
  if (grid_points < 2)
    throw std::invalid_argument("perturbation_bounds: need at least 2 grid points");
  PerturbationBounds b;
  if (oracle.model == EpsilonModel::zero) return b;

  double om2 = oracle.omega0 * oracle.omega0;
  double h = 2.0 * L / (grid_points - 1);
  for (int ix = 0; ix < grid_points; ++ix) {
    double x = -L + h * ix;
    for (int iv = 0; iv < grid_points; ++iv) {
      double v = -L + h * iv;
      double theta = -(v + gamma * x) / om2;
      double e = std::fabs(oracle.eps_scalar(theta));
      double ep = std::fabs(oracle.eps_prime(theta));
      b.eps_inf = std::max(b.eps_inf, e);
      b.eps_x_inf = std::max(b.eps_x_inf, e * std::fabs(x));
      b.eps_v_inf = std::max(b.eps_v_inf, e * std::fabs(v));
      b.d_epsprime_inf = std::max(b.d_epsprime_inf, ep);
      b.epsprime_x_inf = std::max(b.epsprime_x_inf, ep * std::fabs(x));
      b.epsprime_v_inf = std::max(b.epsprime_v_inf, ep * std::fabs(v));
    }
  }
  // componentwise profile: for d coordinates the max and the sum both scale
  // with the single-coordinate sup
  b.sum_epsprime_inf = b.d_epsprime_inf * d;
  b.d_epsprime_inf *= d;
  b.eps0 = std::max({b.eps_inf, b.eps_x_inf, b.eps_v_inf, b.d_epsprime_inf,
                     b.sum_epsprime_inf, b.epsprime_x_inf, b.epsprime_v_inf});
  return b;
}

}  // namespace asgdlab
