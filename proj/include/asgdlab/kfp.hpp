// Phase-space calculus under the Gaussian measure M and a Hermite-Galerkin
// solver in d = 1 for dh/dt = -T h + L h + R h, with
//   T = v d/dx - omega0^2 x d/dv,   L = gamma (-v d/dv + (1/beta) d^2/dv^2),
//   R h = eps(theta) (d/dx - gamma d/dv) h - beta eps(theta) (omega0^2 x - gamma v) h,
// where theta(x, v) = -(v + gamma x) / omega0^2.
//
// Basis: phi_i(x) psi_j(v), scaled probabilists' Hermite polynomials
// orthonormal under M, so <h, g> = sum c^h_ij c^g_ij (Parseval). T and L are
// sparse in this basis and the eps = 0 spectrum is known exactly.
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "asgdlab/loss.hpp"

namespace asgdlab {

struct GaussianMeasure {
  double beta = 1.0;
  double omega0 = 1.0;
  double var_x = 1.0;   // 1 / (beta omega0^2)
  double var_v = 1.0;   // 1 / beta
  double sigma_x = 1.0;
  double sigma_v = 1.0;
  double Z1 = 1.0;      // sqrt(2 pi / (beta omega0^2))
  double Z2 = 1.0;      // sqrt(2 pi / beta)
};

GaussianMeasure make_measure(double beta, double omega0);

// Density of M at (x, v); integrates to 1.
double measure_density(const GaussianMeasure& m, double x, double v);

struct HermiteField {
  int N = 0;
  GaussianMeasure meas;
  Eigen::MatrixXd c;  // (N+1) x (N+1); c(i, j) multiplies phi_i(x) psi_j(v)

  double norm_sq() const { return c.squaredNorm(); }
};

HermiteField make_field(int N, const GaussianMeasure& meas);

// Gauss-Hermite rule for the standard normal weight (probabilists',
// normalized): weights sum to 1, exact for polynomials of degree <= 2n-1.
struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadRule gauss_hermite(int n);

// Orthonormal Hermite values e_0..e_N at xi (unit-variance argument).
void hermite_values(int N, double xi, double* out);

double eval_field(const HermiteField& h, double x, double v);

// Projection of f(x, v) onto the basis; n_nodes = 0 picks 2N+1.
HermiteField field_from_function(int N, const GaussianMeasure& meas,
                                 const std::function<double(double, double)>& f,
                                 int n_nodes = 0);

// Coefficient-space inner product (Parseval form of the weighted L2 pairing).
// Throws on measure or truncation mismatch.
double weighted_inner(const HermiteField& f, const HermiteField& g);

// The same pairing by tensor Gauss-Hermite quadrature (cross-check path).
double quadrature_inner(const HermiteField& f, const HermiteField& g,
                        int n_nodes = 0);

// Exact coefficient-space derivatives d/dx and d/dv (degree lowering).
HermiteField diff_x(const HermiteField& h);
HermiteField diff_v(const HermiteField& h);

// Gradient seminorms in coefficient space (exact):
//   ||dh/dx||^2 = beta omega0^2 sum i c_ij^2,  ||dh/dv||^2 = beta sum j c_ij^2,
//   <dh/dx, dh/dv> = beta omega0 sum sqrt((i+1)(j+1)) c_(i+1)j c_i(j+1).
double grad_x_norm_sq(const HermiteField& h);
double grad_v_norm_sq(const HermiteField& h);
double grad_cross_inner(const HermiteField& h);

// One operator application; square truncation drops out-of-range modes and
// reports their mass.
struct OpResult {
  HermiteField h;
  bool truncated = false;
  double dropped_mass_sq = 0.0;
};

OpResult apply_T(const HermiteField& h);
OpResult apply_L(const HermiteField& h, double gamma);

// Dense Galerkin matrices of the eps-dependent multipliers, precomputed once
// per model: M_eps for multiplication by eps(theta(x, v)) and M_w for
// multiplication by beta eps(theta) (omega0^2 x - gamma v).
struct OperatorContext {
  int N = 0;
  GaussianMeasure meas;
  double gamma = 0.0;
  GradientOracle oracle;
  Eigen::MatrixXd M_eps;  // (N+1)^2 square, flattened index i*(N+1)+j
  Eigen::MatrixXd M_w;
};

OperatorContext make_operator_context(int N, const GaussianMeasure& meas,
                                      double gamma, const GradientOracle& oracle,
                                      int n_nodes = 0);

OpResult apply_R(const HermiteField& h, const OperatorContext& ctx);

// Generator A = -T + L + R on flattened coefficients.
struct GeneratorMatrix {
  int N = 0;
  double gamma = 0.0;
  double beta = 0.0;
  double omega0 = 0.0;
  EpsilonModel model = EpsilonModel::zero;
  double amplitude = 0.0;
  GaussianMeasure meas;
  Eigen::MatrixXd A;  // (N+1)^2 square
};

GeneratorMatrix assemble_generator(int N, double gamma, double beta,
                                   double omega0, const GradientOracle& oracle,
                                   int n_nodes = 0);

std::vector<std::complex<double>> generator_spectrum(const GeneratorMatrix& gen);

// Power-iteration estimate of the spectral radius (deterministic start),
// padded by a small safety factor.
double spectral_radius_estimate(const Eigen::MatrixXd& A);

// H(h) = ||dh/dx||^2 + C ||dh/dv||^2 + 2 C_hat <dh/dx, dh/dv>; requires C > C_hat^2.
double lyapunov_H(const HermiteField& h, double C, double C_hat);

enum class Scheme { rk4, trapezoidal };

struct EvolveResult {
  std::vector<double> times;
  std::vector<double> norm_h_sq;
  std::vector<double> H;  // filled when (C, C_hat) supplied, else empty
  HermiteField final_state;
};

// Integrate dh/dt = A h to T_final. dt = 0 picks 0.1 / rho(A) (accuracy
// driven; rk4 stability allows ~2.8 / rho). Norms recorded every `stride`
// steps. For eps = 0 a norm increase beyond 1e-8 relative aborts
// (instability detector).
EvolveResult evolve(const HermiteField& h0, const GeneratorMatrix& gen,
                    double T_final, double dt = 0.0, int stride = 1,
                    double C = 0.0, double C_hat = 0.0, bool with_H = false,
                    Scheme scheme = Scheme::rk4);

// Operator-identity residuals on a monomial battery (total degree <= 4):
//   (a) <Tg,h> + <Th,g> = 0 and <Th,h> = 0;
//   (b) <Lg,h> = -(gamma/beta) <dg/dv, dh/dv>.
struct IdentityReport {
  double max_resid_antisym = 0.0;
  double max_resid_diag = 0.0;
  double max_resid_dissip = 0.0;
  int pairs_checked = 0;
};

IdentityReport verify_identities(int N, const GaussianMeasure& meas, double gamma);

// Quadrature check of the perturbation inequalities on one battery function:
//   (c) <Rg,g>           <= eps0 C2 ||g||^2
//   (d) <dx(Rh), dx h>   <= (11/2) eps0 C2^2 ||dx h||^2 + 2 eps0 C2^2 ||dv h||^2
//   (e) <dv(Rh), dv h>   <= (11/2) eps0 C2^2 ||dv h||^2 + 2 eps0 C2^2 ||dx h||^2
//   (f) <dx(Rh), dv h> + <dv(Rh), dx h>
//                        <= (15/2) eps0 C2^2 (||dx h||^2 + ||dv h||^2)
// LHS by tensor quadrature of the analytic closures; RHS exact in
// coefficient space.
struct BoundCheck {
  std::string inequality;  // "c", "d", "e", "f"
  std::string function;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

std::vector<BoundCheck> verify_perturbation_bounds(
    int N, const GaussianMeasure& meas, double gamma,
    const GradientOracle& oracle, const PerturbationBounds& bounds,
    int n_nodes = 120);

// Poincare check under M: lhs = ||h||^2 (mean-zero h), rhs =
// (1 / (d beta min{omega0^2, 1})) (||grad_x h||^2 + ||grad_v h||^2).
struct PoincareCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

PoincareCheck check_poincare(const HermiteField& h, int d);

// Closed-form check for h = x_1 in d dimensions (no solver): lhs =
// 1/(beta omega0^2), rhs = 1/(d beta min{omega0^2, 1}). Fails for d >= 2,
// omega0 >= 1.
PoincareCheck poincare_first_coordinate(int d, double beta, double omega0);

// Smallest-|lambda| eigenpair of A, normalized to unit mass (c00 = 1).
// Throws "null space not one-dimensional within tolerance" when the spectral
// gap does not isolate a single near-null mode.
HermiteField compute_steady_state(const GeneratorMatrix& gen);

}  // namespace asgdlab
