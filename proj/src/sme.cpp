#include "asgdlab/sme.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "asgdlab/kernels.hpp"

namespace asgdlab {

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

SmeState em_step(const SmeState& s, double dt, const DerivedParams& dp,
                 const GradientOracle& oracle, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("em_step: dt must be > 0");
  if (!all_finite(s.theta) || !all_finite(s.y))
    throw std::runtime_error("em_step: non-finite state");
  int d = static_cast<int>(s.theta.size());
  SmeState out;
  out.theta.resize(d);
  out.y.resize(d);
  out.t = s.t + dt;
  std::vector<double> g(d);
  oracle.grad(s.theta.data(), g.data(), d);
  double amp = dp.tau_noise * std::sqrt(dt);
  for (int i = 0; i < d; ++i) {
    double xi = amp > 0.0 ? rng.next_gauss() : 0.0;
    out.theta[i] = s.theta[i] + s.y[i] * dt + amp * xi;
    out.y[i] = s.y[i] + (-g[i] - dp.gamma * s.y[i]) * dt;
  }
  return out;
}

EnsembleMoments run_sme_ensemble(const SmeState& init, double T, double dt,
                                 long n_paths, const DerivedParams& dp,
                                 const GradientOracle& oracle,
                                 std::uint64_t seed, int stride) {
  if (n_paths < 2) throw std::invalid_argument("run_sme_ensemble: need N >= 2");
  if (!(dt > 0.0) || !(T > 0.0))
    throw std::invalid_argument("run_sme_ensemble: dt and T must be > 0");
  if (stride < 1) throw std::invalid_argument("run_sme_ensemble: stride >= 1");
  if (dt > 0.1 / dp.gamma)
    std::fprintf(stderr,
                 "warning: em step dt=%g above the 0.1/gamma=%g stability guard\n",
                 dt, 0.1 / dp.gamma);

  int d = static_cast<int>(init.theta.size());
  int dim = 2 * d;
  long n_steps = static_cast<long>(std::llround(T / dt));
  if (n_steps < 1) n_steps = 1;

  std::vector<long> record_steps;
  for (long k = 0; k <= n_steps; k += stride) record_steps.push_back(k);
  if (record_steps.back() != n_steps) record_steps.push_back(n_steps);

  EnsembleMoments mom;
  mom.dim = dim;
  mom.n = n_paths;
  size_t n_rec = record_steps.size();
  std::vector<std::vector<double>> sum(n_rec, std::vector<double>(dim, 0.0));
  std::vector<std::vector<double>> cross(n_rec,
                                         std::vector<double>(dim * dim, 0.0));

  bool fast = (d == 1 && oracle.model == EpsilonModel::zero);
  if (fast) {
    // structure-of-arrays ensemble stepped in lockstep through the SIMD kernel
    std::vector<double> th(n_paths, init.theta[0]);
    std::vector<double> yv(n_paths, init.y[0]);
    std::vector<double> xi(n_paths, 0.0);
    std::vector<Rng> rngs;
    rngs.reserve(n_paths);
    for (long i = 0; i < n_paths; ++i) rngs.emplace_back(substream_seed(seed, i));
    double amp = dp.tau_noise * std::sqrt(dt);
    double om2 = oracle.omega0 * oracle.omega0;

    size_t rec = 0;
    for (long k = 0; k <= n_steps; ++k) {
      if (rec < n_rec && record_steps[rec] == k) {
        auto& s = sum[rec];
        auto& c = cross[rec];
        for (long i = 0; i < n_paths; ++i) {
          s[0] += th[i];
          s[1] += yv[i];
          c[0] += th[i] * th[i];
          c[1] += th[i] * yv[i];
          c[3] += yv[i] * yv[i];
        }
        c[2] = c[1];
        ++rec;
      }
      if (k == n_steps) break;
      if (amp > 0.0)
        for (long i = 0; i < n_paths; ++i) xi[i] = rngs[i].next_gauss();
      kernels::em_step_soa(th.data(), yv.data(), xi.data(), n_paths, dt,
                           dp.gamma, om2, amp);
    }
  } else {
    for (long i = 0; i < n_paths; ++i) {
      Rng rng(substream_seed(seed, i));
      SmeState s = init;
      size_t rec = 0;
      for (long k = 0; k <= n_steps; ++k) {
        if (rec < n_rec && record_steps[rec] == k) {
          auto& sm = sum[rec];
          auto& cr = cross[rec];
          for (int a = 0; a < dim; ++a) {
            double va = a < d ? s.theta[a] : s.y[a - d];
            sm[a] += va;
            for (int b = 0; b < dim; ++b) {
              double vb = b < d ? s.theta[b] : s.y[b - d];
              cr[a * dim + b] += va * vb;
            }
          }
          ++rec;
        }
        if (k == n_steps) break;
        s = em_step(s, dt, dp, oracle, rng);
      }
    }
  }

  double n = static_cast<double>(n_paths);
  for (size_t r = 0; r < n_rec; ++r) {
    mom.times.push_back(record_steps[r] * dt);
    std::vector<double> mean(dim), cov(dim * dim);
    for (int a = 0; a < dim; ++a) mean[a] = sum[r][a] / n;
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b)
        cov[a * dim + b] =
            (cross[r][a * dim + b] - n * mean[a] * mean[b]) / (n - 1.0);
    mom.mean.push_back(std::move(mean));
    mom.cov.push_back(std::move(cov));
  }
  return mom;
}

Eigen::Matrix2d expm_drift2(double gamma, double omega0, double t) {
  // A = -g/2 I + B with B = [[g/2, 1], [-om0^2, -g/2]], B^2 = (g^2/4 - om0^2) I,
  // so exp(At) = e^{-g t/2} (c I + s B) with c, s the matching cosh/cos pair.
  double w2 = 0.25 * gamma * gamma - omega0 * omega0;
  double c, s;
  double scale = std::max(0.25 * gamma * gamma, omega0 * omega0);
  if (std::fabs(w2) < 1e-12 * scale) {
    // near-defective: series in w2 t^2
    double t2 = t * t;
    c = 1.0 + 0.5 * w2 * t2 + w2 * w2 * t2 * t2 / 24.0;
    s = t * (1.0 + w2 * t2 / 6.0 + w2 * w2 * t2 * t2 / 120.0);
  } else if (w2 > 0.0) {
    double w = std::sqrt(w2);
    c = std::cosh(w * t);
    s = std::sinh(w * t) / w;
  } else {
    double nu = std::sqrt(-w2);
    c = std::cos(nu * t);
    s = std::sin(nu * t) / nu;
  }
  Eigen::Matrix2d B;
  B << 0.5 * gamma, 1.0, -omega0 * omega0, -0.5 * gamma;
  Eigen::Matrix2d E = c * Eigen::Matrix2d::Identity() + s * B;
  return std::exp(-0.5 * gamma * t) * E;
}

namespace {

Eigen::MatrixXd lyapunov_rhs(const Eigen::MatrixXd& S, const Eigen::MatrixXd& A,
                             const Eigen::MatrixXd& D) {
  return A * S + S * A.transpose() + D;
}

Eigen::MatrixXd rk4_lyap_step(const Eigen::MatrixXd& S, double h,
                              const Eigen::MatrixXd& A, const Eigen::MatrixXd& D) {
  Eigen::MatrixXd k1 = lyapunov_rhs(S, A, D);
  Eigen::MatrixXd k2 = lyapunov_rhs(S + 0.5 * h * k1, A, D);
  Eigen::MatrixXd k3 = lyapunov_rhs(S + 0.5 * h * k2, A, D);
  Eigen::MatrixXd k4 = lyapunov_rhs(S + h * k3, A, D);
  return S + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

MomentState ou_moment_oracle(const Eigen::VectorXd& m0, const Eigen::MatrixXd& cov0,
                             double t, double gamma, double omega0,
                             double tau_noise) {
  if (m0.size() % 2 != 0)
    throw std::invalid_argument("ou_moment_oracle: state must have even dimension");
  int d = static_cast<int>(m0.size() / 2);
  if (cov0.rows() != 2 * d || cov0.cols() != 2 * d)
    throw std::invalid_argument("ou_moment_oracle: cov0 dimension mismatch");

  MomentState out;
  out.t = t;
  if (t == 0.0) {
    out.mean = m0;
    out.cov = cov0;
    return out;
  }

  // mean: exact via the 2x2 exponential applied per coordinate pair
  Eigen::Matrix2d E = expm_drift2(gamma, omega0, t);
  out.mean.resize(2 * d);
  for (int i = 0; i < d; ++i) {
    Eigen::Vector2d p(m0[i], m0[d + i]);
    Eigen::Vector2d q = E * p;
    out.mean[i] = q[0];
    out.mean[d + i] = q[1];
  }

  // covariance: adaptive step-doubling RK4 on the Lyapunov equation
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  for (int i = 0; i < d; ++i) {
    A(i, d + i) = 1.0;
    A(d + i, i) = -omega0 * omega0;
    A(d + i, d + i) = -gamma;
    D(i, i) = tau_noise * tau_noise;
  }
  Eigen::MatrixXd S = cov0;
  double remaining = t;
  double h = std::min({0.1 / std::max(gamma, 1e-300), 0.5 / std::max(omega0, 1e-300), t});
  const double tol = 1e-12;
  while (remaining > 0.0) {
    if (h > remaining) h = remaining;
    Eigen::MatrixXd full = rk4_lyap_step(S, h, A, D);
    Eigen::MatrixXd half = rk4_lyap_step(
        rk4_lyap_step(S, 0.5 * h, A, D), 0.5 * h, A, D);
    double err = (full - half).cwiseAbs().maxCoeff();
    double scale = std::max(1.0, half.cwiseAbs().maxCoeff());
    if (err <= tol * scale || h <= 1e-12 * t) {
      S = half;
      remaining -= h;
      if (err < 0.03 * tol * scale) h *= 2.0;
    } else {
      h *= 0.5;
    }
  }
  out.cov = 0.5 * (S + S.transpose());
  return out;
}

void to_phase(double theta, double y, double gamma, double omega0, double& x,
              double& v) {
  x = y;
  v = -omega0 * omega0 * theta - gamma * y;
}

void from_phase(double x, double v, double gamma, double omega0, double& theta,
                double& y) {
  if (omega0 == 0.0) throw std::invalid_argument("from_phase: omega0 must be nonzero");
  y = x;
  theta = -(v + gamma * x) / (omega0 * omega0);
}

EnsembleMoments phase_moments(const EnsembleMoments& m, double gamma,
                              double omega0) {
  if (m.dim % 2 != 0)
    throw std::invalid_argument("phase_moments: dim must be even");
  int d = m.dim / 2;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m.dim, m.dim);
  for (int i = 0; i < d; ++i) {
    G(i, d + i) = 1.0;                       // x = y
    G(d + i, i) = -omega0 * omega0;          // v = -om0^2 theta - gamma y
    G(d + i, d + i) = -gamma;
  }
  EnsembleMoments out;
  out.dim = m.dim;
  out.n = m.n;
  out.times = m.times;
  for (size_t r = 0; r < m.size(); ++r) {
    Eigen::Map<const Eigen::VectorXd> mu(m.mean[r].data(), m.dim);
    Eigen::Map<const Eigen::MatrixXd> cv(m.cov[r].data(), m.dim, m.dim);
    Eigen::VectorXd mu2 = G * mu;
    Eigen::MatrixXd cv2 = G * cv * G.transpose();
    out.mean.emplace_back(mu2.data(), mu2.data() + m.dim);
    out.cov.emplace_back(cv2.data(), cv2.data() + m.dim * m.dim);
  }
  return out;
}

}  // namespace asgdlab
