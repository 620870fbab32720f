// The stochastic modified equation: Euler-Maruyama integration of
//   dTheta = Y dt + tau_noise dB,   dY = (-grad f(Theta) - gamma Y) dt,
// the exact Gaussian (OU) moment oracle for eps = 0, and the (theta, y) to
// (x, v) phase maps.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "asgdlab/loss.hpp"
#include "asgdlab/moments.hpp"
#include "asgdlab/params.hpp"
#include "asgdlab/rng.hpp"

namespace asgdlab {

struct SmeState {
  std::vector<double> theta;
  std::vector<double> y;
  double t = 0.0;
};

struct MomentState {
  Eigen::VectorXd mean;  // (Theta block, then Y block)
  Eigen::MatrixXd cov;
  double t = 0.0;
};

// One Euler-Maruyama step; noise enters the Theta equation only.
// Throws on a non-finite state.
SmeState em_step(const SmeState& s, double dt, const DerivedParams& dp,
                 const GradientOracle& oracle, Rng& rng);

// N paths from a common deterministic initial state; moments of the (Theta, Y)
// state (dimension 2d) recorded every `stride` steps. Deterministic per seed:
// path i uses substream_seed(seed, i) and reductions run in path order.
EnsembleMoments run_sme_ensemble(const SmeState& init, double T, double dt,
                                 long n_paths, const DerivedParams& dp,
                                 const GradientOracle& oracle,
                                 std::uint64_t seed, int stride = 1);

// exp(A t) for the 2x2 drift block A = [[0, 1], [-omega0^2, -gamma]];
// closed form with a series fallback near the defective (critical) case.
Eigen::Matrix2d expm_drift2(double gamma, double omega0, double t);

// Exact moments of the linear (eps = 0) SDE: mean via the matrix exponential,
// covariance by adaptive RK4 on the differential Lyapunov equation
// S' = A S + S A^T + D, diffusion D on the Theta block only.
MomentState ou_moment_oracle(const Eigen::VectorXd& m0, const Eigen::MatrixXd& cov0,
                             double t, double gamma, double omega0,
                             double tau_noise);

// x = y, v = -omega0^2 theta - gamma y, and the inverse map.
void to_phase(double theta, double y, double gamma, double omega0, double& x,
              double& v);
void from_phase(double x, double v, double gamma, double omega0, double& theta,
                double& y);

// Applies the phase map to recorded (Theta, Y) moments (dim = 2d).
EnsembleMoments phase_moments(const EnsembleMoments& m, double gamma,
                              double omega0);

}  // namespace asgdlab
