#include "asgdlab/kfp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "asgdlab/kernels.hpp"

namespace asgdlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

int flat(int i, int j, int N) { return i * (N + 1) + j; }

void require_same_space(const HermiteField& f, const HermiteField& g) {
  if (f.N != g.N) throw std::invalid_argument("truncation mismatch");
  if (f.meas.beta != g.meas.beta || f.meas.omega0 != g.meas.omega0)
    throw std::invalid_argument("measure mismatch");
}

// Basis values at quadrature nodes: B(p, i) = e_i(node_p), (n x N+1).
Eigen::MatrixXd basis_at_nodes(const QuadRule& q, int N) {
  int n = static_cast<int>(q.nodes.size());
  Eigen::MatrixXd B(n, N + 1);
  std::vector<double> e(N + 1);
  for (int p = 0; p < n; ++p) {
    hermite_values(N, q.nodes[p], e.data());
    for (int i = 0; i <= N; ++i) B(p, i) = e[i];
  }
  return B;
}

double c2_constant(double gamma, double beta, double omega0) {
  double w2 = omega0 * omega0;
  double num = std::max({1.0, gamma, gamma * gamma, beta * gamma, beta * w2});
  return num / std::min(1.0, w2);
}

}  // namespace

GaussianMeasure make_measure(double beta, double omega0) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (!(omega0 > 0.0)) throw std::invalid_argument("omega0 must be positive");
  GaussianMeasure m;
  m.beta = beta;
  m.omega0 = omega0;
  m.var_x = 1.0 / (beta * omega0 * omega0);
  m.var_v = 1.0 / beta;
  m.sigma_x = std::sqrt(m.var_x);
  m.sigma_v = std::sqrt(m.var_v);
  m.Z1 = std::sqrt(2.0 * kPi * m.var_x);
  m.Z2 = std::sqrt(2.0 * kPi * m.var_v);
  return m;
}

double measure_density(const GaussianMeasure& m, double x, double v) {
  double qx = x * x / (2.0 * m.var_x);
  double qv = v * v / (2.0 * m.var_v);
  return std::exp(-qx) / m.Z1 * std::exp(-qv) / m.Z2;
}

HermiteField make_field(int N, const GaussianMeasure& meas) {
  if (N < 0) throw std::invalid_argument("N must be nonnegative");
  HermiteField h;
  h.N = N;
  h.meas = meas;
  h.c = Eigen::MatrixXd::Zero(N + 1, N + 1);
  return h;
}

QuadRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("quadrature needs n >= 1");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double b = std::sqrt(static_cast<double>(k));
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("quadrature eigensolve failed");
  QuadRule q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int p = 0; p < n; ++p) {
    q.nodes[p] = es.eigenvalues()(p);
    double w = es.eigenvectors()(0, p);
    q.weights[p] = w * w;  // first-component rule; weights sum to 1
  }
  return q;
}

void hermite_values(int N, double xi, double* out) {
  out[0] = 1.0;
  if (N >= 1) out[1] = xi;
  for (int k = 1; k < N; ++k)
    out[k + 1] = (xi * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) /
                 std::sqrt(static_cast<double>(k + 1));
}

double eval_field(const HermiteField& h, double x, double v) {
  int N = h.N;
  std::vector<double> ex(N + 1), ev(N + 1);
  hermite_values(N, x / h.meas.sigma_x, ex.data());
  hermite_values(N, v / h.meas.sigma_v, ev.data());
  double acc = 0.0;
  for (int i = 0; i <= N; ++i) {
    double row = 0.0;
    for (int j = 0; j <= N; ++j) row += h.c(i, j) * ev[j];
    acc += ex[i] * row;
  }
  return acc;
}

HermiteField field_from_function(int N, const GaussianMeasure& meas,
                                 const std::function<double(double, double)>& f,
                                 int n_nodes) {
  int n = n_nodes > 0 ? n_nodes : 2 * N + 1;
  QuadRule q = gauss_hermite(n);
  Eigen::MatrixXd B = basis_at_nodes(q, N);
  Eigen::MatrixXd F(n, n);
  for (int p = 0; p < n; ++p)
    for (int r = 0; r < n; ++r)
      F(p, r) = f(meas.sigma_x * q.nodes[p], meas.sigma_v * q.nodes[r]) *
                q.weights[p] * q.weights[r];
  HermiteField h = make_field(N, meas);
  h.c = B.transpose() * F * B;
  return h;
}

double weighted_inner(const HermiteField& f, const HermiteField& g) {
  require_same_space(f, g);
  return (f.c.array() * g.c.array()).sum();
}

double quadrature_inner(const HermiteField& f, const HermiteField& g,
                        int n_nodes) {
  require_same_space(f, g);
  int n = n_nodes > 0 ? n_nodes : 2 * f.N + 1;
  QuadRule q = gauss_hermite(n);
  double acc = 0.0;
  for (int p = 0; p < n; ++p) {
    double x = f.meas.sigma_x * q.nodes[p];
    for (int r = 0; r < n; ++r) {
      double v = f.meas.sigma_v * q.nodes[r];
      acc += q.weights[p] * q.weights[r] * eval_field(f, x, v) * eval_field(g, x, v);
    }
  }
  return acc;
}

HermiteField diff_x(const HermiteField& h) {
  HermiteField out = make_field(h.N, h.meas);
  for (int i = 0; i < h.N; ++i)
    for (int j = 0; j <= h.N; ++j)
      out.c(i, j) = std::sqrt(i + 1.0) * h.c(i + 1, j) / h.meas.sigma_x;
  return out;
}

HermiteField diff_v(const HermiteField& h) {
  HermiteField out = make_field(h.N, h.meas);
  for (int i = 0; i <= h.N; ++i)
    for (int j = 0; j < h.N; ++j)
      out.c(i, j) = std::sqrt(j + 1.0) * h.c(i, j + 1) / h.meas.sigma_v;
  return out;
}

double grad_x_norm_sq(const HermiteField& h) {
  double s = 0.0;
  for (int i = 0; i <= h.N; ++i)
    for (int j = 0; j <= h.N; ++j) s += i * h.c(i, j) * h.c(i, j);
  return s * h.meas.beta * h.meas.omega0 * h.meas.omega0;
}

double grad_v_norm_sq(const HermiteField& h) {
  double s = 0.0;
  for (int i = 0; i <= h.N; ++i)
    for (int j = 0; j <= h.N; ++j) s += j * h.c(i, j) * h.c(i, j);
  return s * h.meas.beta;
}

double grad_cross_inner(const HermiteField& h) {
  double s = 0.0;
  for (int i = 0; i < h.N; ++i)
    for (int j = 0; j < h.N; ++j)
      s += std::sqrt((i + 1.0) * (j + 1.0)) * h.c(i + 1, j) * h.c(i, j + 1);
  return s * h.meas.beta * h.meas.omega0;
}

OpResult apply_T(const HermiteField& h) {
  // In unit-variance coordinates T = omega0 (zeta d/dxi - xi d/dzeta), so
  // T(e_i e_j) = omega0 [sqrt(i(j+1)) e_{i-1}e_{j+1} - sqrt(j(i+1)) e_{i+1}e_{j-1}].
  int N = h.N;
  double w0 = h.meas.omega0;
  OpResult r;
  r.h = make_field(N, h.meas);
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= N; ++j) {
      double c = h.c(i, j);
      if (c == 0.0) continue;
      if (i >= 1) {
        double a = w0 * std::sqrt(static_cast<double>(i) * (j + 1.0)) * c;
        if (j + 1 <= N)
          r.h.c(i - 1, j + 1) += a;
        else {
          r.truncated = true;
          r.dropped_mass_sq += a * a;
        }
      }
      if (j >= 1) {
        double a = w0 * std::sqrt(static_cast<double>(j) * (i + 1.0)) * c;
        if (i + 1 <= N)
          r.h.c(i + 1, j - 1) -= a;
        else {
          r.truncated = true;
          r.dropped_mass_sq += a * a;
        }
      }
    }
  }
  return r;
}

OpResult apply_L(const HermiteField& h, double gamma) {
  // L is the v-direction OU generator: L(e_i e_j) = -gamma j e_i e_j.
  OpResult r;
  r.h = make_field(h.N, h.meas);
  for (int i = 0; i <= h.N; ++i)
    for (int j = 0; j <= h.N; ++j) r.h.c(i, j) = -gamma * j * h.c(i, j);
  return r;
}

OperatorContext make_operator_context(int N, const GaussianMeasure& meas,
                                      double gamma, const GradientOracle& oracle,
                                      int n_nodes) {
  if (oracle.omega0 != meas.omega0)
    throw std::invalid_argument("oracle/measure omega0 mismatch");
  OperatorContext ctx;
  ctx.N = N;
  ctx.meas = meas;
  ctx.gamma = gamma;
  ctx.oracle = oracle;
  int dim = (N + 1) * (N + 1);
  ctx.M_eps = Eigen::MatrixXd::Zero(dim, dim);
  ctx.M_w = Eigen::MatrixXd::Zero(dim, dim);
  if (oracle.model == EpsilonModel::zero) return ctx;

  int n = n_nodes > 0 ? n_nodes : 2 * N + 1;
  QuadRule q = gauss_hermite(n);
  Eigen::MatrixXd B = basis_at_nodes(q, N);
  double w2 = meas.omega0 * meas.omega0;

  // M[(ij),(kl)] = sum_pq w_p w_q f(x_p, v_q) B(p,i)B(p,k) B(q,j)B(q,l),
  // accumulated one x-node at a time through the inner Gram matrix G_p.
  Eigen::MatrixXd Geps(N + 1, N + 1), Gw(N + 1, N + 1);
  Eigen::VectorXd deps(n), dw(n);
  for (int p = 0; p < n; ++p) {
    double x = meas.sigma_x * q.nodes[p];
    for (int r = 0; r < n; ++r) {
      double v = meas.sigma_v * q.nodes[r];
      double theta = -(v + gamma * x) / w2;
      double e = oracle.eps_scalar(theta);
      deps(r) = q.weights[r] * e;
      dw(r) = q.weights[r] * meas.beta * e * (w2 * x - gamma * v);
    }
    Geps = B.transpose() * deps.asDiagonal() * B;
    Gw = B.transpose() * dw.asDiagonal() * B;
    for (int i = 0; i <= N; ++i) {
      for (int k = 0; k <= N; ++k) {
        double coef = q.weights[p] * B(p, i) * B(p, k);
        if (coef == 0.0) continue;
        ctx.M_eps.block(i * (N + 1), k * (N + 1), N + 1, N + 1) += coef * Geps;
        ctx.M_w.block(i * (N + 1), k * (N + 1), N + 1, N + 1) += coef * Gw;
      }
    }
  }
  return ctx;
}

OpResult apply_R(const HermiteField& h, const OperatorContext& ctx) {
  if (h.N != ctx.N) throw std::invalid_argument("truncation mismatch");
  OpResult r;
  r.h = make_field(h.N, h.meas);
  if (ctx.oracle.model == EpsilonModel::zero) return r;

  int N = h.N;
  int dim = (N + 1) * (N + 1);
  HermiteField hx = diff_x(h);
  HermiteField hv = diff_v(h);
  Eigen::VectorXd u(dim), du(dim);
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) {
      u(flat(i, j, N)) = h.c(i, j);
      du(flat(i, j, N)) = hx.c(i, j) - ctx.gamma * hv.c(i, j);
    }
  Eigen::VectorXd out = ctx.M_eps * du - ctx.M_w * u;
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) r.h.c(i, j) = out(flat(i, j, N));

  // Mass-loss monitor: the Galerkin matrices project the product back onto
  // degree <= N; compare the quadrature norm of the pointwise image against
  // the retained coefficients.
  int n = 2 * N + 1;
  QuadRule q = gauss_hermite(n);
  double w2 = h.meas.omega0 * h.meas.omega0;
  double full = 0.0;
  for (int p = 0; p < n; ++p) {
    double x = h.meas.sigma_x * q.nodes[p];
    for (int s = 0; s < n; ++s) {
      double v = h.meas.sigma_v * q.nodes[s];
      double theta = -(v + ctx.gamma * x) / w2;
      double e = ctx.oracle.eps_scalar(theta);
      double uval = eval_field(hx, x, v) - ctx.gamma * eval_field(hv, x, v);
      double img = e * uval -
                   h.meas.beta * e * (w2 * x - ctx.gamma * v) * eval_field(h, x, v);
      full += q.weights[p] * q.weights[s] * img * img;
    }
  }
  double kept = r.h.norm_sq();
  r.dropped_mass_sq = std::max(0.0, full - kept);
  r.truncated = r.dropped_mass_sq > 1e-12;
  return r;
}

GeneratorMatrix assemble_generator(int N, double gamma, double beta,
                                   double omega0, const GradientOracle& oracle,
                                   int n_nodes) {
  if (N < 2) throw std::invalid_argument("assemble_generator needs N >= 2");
  GeneratorMatrix gen;
  gen.N = N;
  gen.gamma = gamma;
  gen.beta = beta;
  gen.omega0 = omega0;
  gen.model = oracle.model;
  gen.amplitude = oracle.amplitude;
  gen.meas = make_measure(beta, omega0);
  int dim = (N + 1) * (N + 1);
  gen.A = Eigen::MatrixXd::Zero(dim, dim);

  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= N; ++j) {
      int col = flat(i, j, N);
      // -T: negate the ladder image of T
      if (i >= 1 && j + 1 <= N)
        gen.A(flat(i - 1, j + 1, N), col) -=
            omega0 * std::sqrt(static_cast<double>(i) * (j + 1.0));
      if (j >= 1 && i + 1 <= N)
        gen.A(flat(i + 1, j - 1, N), col) +=
            omega0 * std::sqrt(static_cast<double>(j) * (i + 1.0));
      // L: diagonal
      gen.A(col, col) -= gamma * j;
    }
  }

  if (oracle.model != EpsilonModel::zero) {
    OperatorContext ctx =
        make_operator_context(N, gen.meas, gamma, oracle, n_nodes);
    Eigen::MatrixXd DX = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd DV = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i <= N; ++i)
      for (int j = 0; j <= N; ++j) {
        if (i >= 1)
          DX(flat(i - 1, j, N), flat(i, j, N)) =
              std::sqrt(static_cast<double>(i)) / gen.meas.sigma_x;
        if (j >= 1)
          DV(flat(i, j - 1, N), flat(i, j, N)) =
              std::sqrt(static_cast<double>(j)) / gen.meas.sigma_v;
      }
    gen.A += ctx.M_eps * (DX - gamma * DV) - ctx.M_w;
  }
  return gen;
}

std::vector<std::complex<double>> generator_spectrum(const GeneratorMatrix& gen) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(gen.A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("generator eigensolve failed");
  std::vector<std::complex<double>> ev(es.eigenvalues().size());
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
    ev[k] = es.eigenvalues()(k);
  return ev;
}

double spectral_radius_estimate(const Eigen::MatrixXd& A) {
  int dim = static_cast<int>(A.rows());
  Rng rng(0x5eedULL);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.next_u01() - 0.5;
  v.normalize();
  double best = 0.0;
  double prev = 0.0;
  const int iters = 300;
  for (int k = 0; k < iters; ++k) {
    Eigen::VectorXd w = A * v;
    double r = w.norm();
    if (r == 0.0) return 0.0;
    v = w / r;
    if (k >= iters - 50) best = std::max(best, r);
    prev = r;
  }
  (void)prev;
  // trailing max over the oscillation of ||Av||/||v|| plus headroom
  return best * 1.1;
}

double lyapunov_H(const HermiteField& h, double C, double C_hat) {
  if (!(C > C_hat * C_hat))
    throw std::invalid_argument("lyapunov_H requires C > C_hat^2");
  return grad_x_norm_sq(h) + C * grad_v_norm_sq(h) + 2.0 * C_hat * grad_cross_inner(h);
}

EvolveResult evolve(const HermiteField& h0, const GeneratorMatrix& gen,
                    double T_final, double dt, int stride, double C,
                    double C_hat, bool with_H, Scheme scheme) {
  if (h0.N != gen.N) throw std::invalid_argument("truncation mismatch");
  if (!(T_final > 0.0)) throw std::invalid_argument("T_final must be positive");
  if (stride < 1) throw std::invalid_argument("stride >= 1");
  int N = gen.N;
  int dim = (N + 1) * (N + 1);

  if (dt <= 0.0) dt = 0.1 / spectral_radius_estimate(gen.A);
  long n_steps = static_cast<long>(std::ceil(T_final / dt - 1e-9));
  if (n_steps < 1) n_steps = 1;
  double h = T_final / static_cast<double>(n_steps);

  // row-major copy for the runtime-dispatched matvec kernel
  std::vector<double> Arow(static_cast<size_t>(dim) * dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) Arow[static_cast<size_t>(r) * dim + c] = gen.A(r, c);

  std::vector<double> u(dim), k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) u[flat(i, j, N)] = h0.c(i, j);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::MatrixXd Mplus;
  if (scheme == Scheme::trapezoidal) {
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
    lu = Eigen::PartialPivLU<Eigen::MatrixXd>(I - 0.5 * h * gen.A);
    Mplus = I + 0.5 * h * gen.A;
  }

  EvolveResult out;
  bool conservative = gen.model == EpsilonModel::zero;
  double prev_norm = -1.0;
  auto record = [&](long step) {
    double t = step * h;
    double ns = kernels::sumsq(u.data(), u.size());
    if (conservative && prev_norm >= 0.0 && ns > prev_norm * (1.0 + 1e-8))
      throw std::runtime_error("instability: norm growth under eps = 0");
    prev_norm = ns;
    out.times.push_back(t);
    out.norm_h_sq.push_back(ns);
    if (with_H) {
      HermiteField f = make_field(N, gen.meas);
      for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j) f.c(i, j) = u[flat(i, j, N)];
      out.H.push_back(lyapunov_H(f, C, C_hat));
    }
  };

  record(0);
  for (long s = 1; s <= n_steps; ++s) {
    if (scheme == Scheme::rk4) {
      kernels::matvec(Arow.data(), u.data(), k1.data(), dim, dim);
      for (int i = 0; i < dim; ++i) tmp[i] = u[i] + 0.5 * h * k1[i];
      kernels::matvec(Arow.data(), tmp.data(), k2.data(), dim, dim);
      for (int i = 0; i < dim; ++i) tmp[i] = u[i] + 0.5 * h * k2[i];
      kernels::matvec(Arow.data(), tmp.data(), k3.data(), dim, dim);
      for (int i = 0; i < dim; ++i) tmp[i] = u[i] + h * k3[i];
      kernels::matvec(Arow.data(), tmp.data(), k4.data(), dim, dim);
      for (int i = 0; i < dim; ++i)
        u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    } else {
      Eigen::Map<Eigen::VectorXd> uv(u.data(), dim);
      Eigen::VectorXd rhs = Mplus * uv;
      uv = lu.solve(rhs);
    }
    if (s % stride == 0 || s == n_steps) record(s);
  }

  out.final_state = make_field(N, gen.meas);
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) out.final_state.c(i, j) = u[flat(i, j, N)];
  return out;
}

IdentityReport verify_identities(int N, const GaussianMeasure& meas,
                                 double gamma) {
  if (N < 6) throw std::invalid_argument("verify_identities needs N >= 6");
  std::vector<HermiteField> battery;
  for (int a = 0; a + 0 <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b)
      battery.push_back(field_from_function(
          N, meas, [a, b](double x, double v) {
            return std::pow(x, a) * std::pow(v, b);
          }));

  IdentityReport rep;
  double gb = gamma / meas.beta;
  for (const auto& g : battery) {
    OpResult Tg = apply_T(g);
    OpResult Lg = apply_L(g, gamma);
    HermiteField gv = diff_v(g);
    for (const auto& hh : battery) {
      OpResult Th = apply_T(hh);
      double antisym = weighted_inner(Tg.h, hh) + weighted_inner(Th.h, g);
      double dissip =
          weighted_inner(Lg.h, hh) + gb * weighted_inner(gv, diff_v(hh));
      rep.max_resid_antisym = std::max(rep.max_resid_antisym, std::abs(antisym));
      rep.max_resid_dissip = std::max(rep.max_resid_dissip, std::abs(dissip));
      ++rep.pairs_checked;
    }
    rep.max_resid_diag =
        std::max(rep.max_resid_diag, std::abs(weighted_inner(Tg.h, g)));
  }
  return rep;
}

std::vector<BoundCheck> verify_perturbation_bounds(
    int N, const GaussianMeasure& meas, double gamma,
    const GradientOracle& oracle, const PerturbationBounds& bounds,
    int n_nodes) {
  if (oracle.model == EpsilonModel::zero)
    throw std::invalid_argument("verify_perturbation_bounds needs eps != 0");
  struct Item {
    const char* name;
    std::function<double(double, double)> f;
  };
  const Item battery[] = {
      {"1", [](double, double) { return 1.0; }},
      {"x", [](double x, double) { return x; }},
      {"v", [](double, double v) { return v; }},
      {"x^2", [](double x, double) { return x * x; }},
      {"xv", [](double x, double v) { return x * v; }},
      {"v^2", [](double, double v) { return v * v; }},
  };

  double C2 = c2_constant(gamma, meas.beta, meas.omega0);
  double e0 = bounds.eps0;
  double w2 = meas.omega0 * meas.omega0;
  QuadRule q = gauss_hermite(n_nodes);

  std::vector<BoundCheck> rows;
  for (const auto& item : battery) {
    HermiteField hf = field_from_function(N, meas, item.f);
    HermiteField fx = diff_x(hf), fv = diff_v(hf);
    HermiteField fxx = diff_x(fx), fxv = diff_v(fx), fvv = diff_v(fv);

    double lc = 0.0, ld = 0.0, le = 0.0, lf = 0.0;
    for (int p = 0; p < n_nodes; ++p) {
      double x = meas.sigma_x * q.nodes[p];
      for (int r = 0; r < n_nodes; ++r) {
        double v = meas.sigma_v * q.nodes[r];
        double wgt = q.weights[p] * q.weights[r];
        double theta = -(v + gamma * x) / w2;
        double e = oracle.eps_scalar(theta);
        double ep = oracle.eps_prime(theta);
        double ex = ep * (-gamma / w2);
        double ev = ep * (-1.0 / w2);
        double w = w2 * x - gamma * v;
        double hval = eval_field(hf, x, v);
        double hx = eval_field(fx, x, v), hv = eval_field(fv, x, v);
        double hxx = eval_field(fxx, x, v), hxv = eval_field(fxv, x, v),
               hvv = eval_field(fvv, x, v);
        double u = hx - gamma * hv;
        double ux = hxx - gamma * hxv;
        double uv = hxv - gamma * hvv;
        double R = e * u - meas.beta * e * w * hval;
        double Rx = ex * u + e * ux -
                    meas.beta * (ex * w * hval + e * w2 * hval + e * w * hx);
        double Rv = ev * u + e * uv -
                    meas.beta * (ev * w * hval - e * gamma * hval + e * w * hv);
        lc += wgt * R * hval;
        ld += wgt * Rx * hx;
        le += wgt * Rv * hv;
        lf += wgt * (Rx * hv + Rv * hx);
      }
    }

    double nh = hf.norm_sq();
    double nx = grad_x_norm_sq(hf);
    double nv = grad_v_norm_sq(hf);
    double c22 = C2 * C2;
    rows.push_back({"c", item.name, lc, e0 * C2 * nh, false});
    rows.push_back({"d", item.name, ld, e0 * c22 * (5.5 * nx + 2.0 * nv), false});
    rows.push_back({"e", item.name, le, e0 * c22 * (5.5 * nv + 2.0 * nx), false});
    rows.push_back({"f", item.name, lf, e0 * c22 * 7.5 * (nx + nv), false});
  }
  for (auto& row : rows) row.holds = row.lhs <= row.rhs + 1e-10;
  return rows;
}

PoincareCheck check_poincare(const HermiteField& h, int d) {
  if (d < 1) throw std::invalid_argument("d >= 1");
  double scale = std::max(1.0, h.norm_sq());
  if (h.c(0, 0) * h.c(0, 0) > 1e-24 * scale)
    throw std::invalid_argument("not mean-zero");
  PoincareCheck pc;
  pc.lhs = h.norm_sq();
  double w2 = h.meas.omega0 * h.meas.omega0;
  pc.rhs = (grad_x_norm_sq(h) + grad_v_norm_sq(h)) /
           (d * h.meas.beta * std::min(w2, 1.0));
  pc.holds = pc.lhs <= pc.rhs + 1e-12;
  return pc;
}

PoincareCheck poincare_first_coordinate(int d, double beta, double omega0) {
  PoincareCheck pc;
  double w2 = omega0 * omega0;
  pc.lhs = 1.0 / (beta * w2);
  pc.rhs = 1.0 / (d * beta * std::min(w2, 1.0));
  pc.holds = pc.lhs <= pc.rhs + 1e-12;
  return pc;
}

HermiteField compute_steady_state(const GeneratorMatrix& gen) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(gen.A);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("generator eigensolve failed");
  Eigen::Index dim = gen.A.rows();
  Eigen::Index best = 0;
  double best_mag = std::abs(es.eigenvalues()(0));
  double second = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 1; k < dim; ++k) {
    double mag = std::abs(es.eigenvalues()(k));
    if (mag < best_mag) {
      second = best_mag;
      best_mag = mag;
      best = k;
    } else {
      second = std::min(second, mag);
    }
  }
  if (!(best_mag < 1e-6) || !(second > 1e-3))
    throw std::runtime_error("null space not one-dimensional within tolerance");

  Eigen::VectorXcd vec = es.eigenvectors().col(best);
  Eigen::Index imax = 0;
  vec.cwiseAbs().maxCoeff(&imax);
  std::complex<double> phase = vec(imax) / std::abs(vec(imax));
  Eigen::VectorXcd rotated = vec / phase;
  if (rotated.imag().norm() > 1e-8 * rotated.real().norm())
    throw std::runtime_error("steady state eigenvector is not real");
  Eigen::VectorXd re = rotated.real();

  int N = gen.N;
  double c00 = re(flat(0, 0, N));
  if (std::abs(c00) < 1e-12)
    throw std::runtime_error("steady state has vanishing mass");
  HermiteField F = make_field(N, gen.meas);
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) F.c(i, j) = re(flat(i, j, N)) / c00;
  return F;
}

}  // namespace asgdlab
