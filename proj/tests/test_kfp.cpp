#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "doctest.h"

#include "asgdlab/kfp.hpp"
#include "asgdlab/rng.hpp"

using namespace asgdlab;

namespace {

const GradientOracle kZeroOracle = make_oracle(1.0, EpsilonModel::zero, 0.0, 0.0);

HermiteField coord_x(int N, const GaussianMeasure& m) {
  HermiteField h = make_field(N, m);
  h.c(1, 0) = m.sigma_x;
  return h;
}

HermiteField coord_v(int N, const GaussianMeasure& m) {
  HermiteField h = make_field(N, m);
  h.c(0, 1) = m.sigma_v;
  return h;
}

}  // namespace

TEST_CASE("measure bookkeeping") {
  GaussianMeasure m = make_measure(2.0, 1.0);
  CHECK(m.var_x == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.var_v == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.sigma_x == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  // density integrates to 1 over a wide box (trapezoid sanity)
  double sum = 0.0, hstep = 0.05;
  for (double x = -6.0; x <= 6.0; x += hstep)
    for (double v = -6.0; v <= 6.0; v += hstep)
      sum += measure_density(m, x, v) * hstep * hstep;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("Gauss-Hermite rule: three-point values and moment exactness") {
  QuadRule q = gauss_hermite(3);
  REQUIRE(q.nodes.size() == 3);
  CHECK(q.nodes[0] == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-12));
  CHECK(q.nodes[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.nodes[2] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(q.weights[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(q.weights[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  // moments of the standard normal up to degree 2n-1
  QuadRule q8 = gauss_hermite(8);
  double m2 = 0.0, m4 = 0.0, m6 = 0.0, m0 = 0.0;
  for (size_t i = 0; i < q8.nodes.size(); ++i) {
    double t = q8.nodes[i], w = q8.weights[i];
    m0 += w;
    m2 += w * t * t;
    m4 += w * std::pow(t, 4);
    m6 += w * std::pow(t, 6);
  }
  CHECK(m0 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(m6 == doctest::Approx(15.0).epsilon(1e-13));
}

TEST_CASE("orthonormal Hermite values") {
  double e[4];
  double xi = 1.3;
  hermite_values(3, xi, e);
  CHECK(e[0] == doctest::Approx(1.0));
  CHECK(e[1] == doctest::Approx(xi));
  CHECK(e[2] == doctest::Approx((xi * xi - 1.0) / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(e[3] ==
        doctest::Approx((xi * xi * xi - 3.0 * xi) / std::sqrt(6.0)).epsilon(1e-14));
}

TEST_CASE("projection of simple polynomials") {
  GaussianMeasure m = make_measure(2.0, 1.0);
  HermiteField fx2 =
      field_from_function(6, m, [](double x, double) { return x * x; });
  CHECK(fx2.c(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fx2.c(2, 0) == doctest::Approx(std::sqrt(2.0) * 0.5).epsilon(1e-12));
  CHECK(std::abs(fx2.c(1, 0)) < 1e-12);
  CHECK(std::abs(fx2.c(0, 2)) < 1e-12);
  CHECK(eval_field(fx2, 0.7, -0.3) == doctest::Approx(0.49).epsilon(1e-12));
}

TEST_CASE("inner products: worked values and Parseval cross-check") {
  GaussianMeasure m = make_measure(2.0, 1.0);
  HermiteField one =
      field_from_function(8, m, [](double, double) { return 1.0; });
  HermiteField x = coord_x(8, m);
  HermiteField v = coord_v(8, m);
  CHECK(weighted_inner(one, one) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(weighted_inner(x, v) == doctest::Approx(0.0));
  CHECK(weighted_inner(x, x) == doctest::Approx(0.5).epsilon(1e-13));

  Rng rng(404);
  HermiteField f = make_field(8, m), g = make_field(8, m);
  for (int i = 0; i <= 8; ++i)
    for (int j = 0; j <= 8; ++j) {
      f.c(i, j) = rng.next_gauss();
      g.c(i, j) = rng.next_gauss();
    }
  CHECK(quadrature_inner(f, g) ==
        doctest::Approx(weighted_inner(f, g)).epsilon(1e-10));

  GaussianMeasure other = make_measure(3.0, 1.0);
  HermiteField mismatched = make_field(8, other);
  CHECK_THROWS_AS((void)weighted_inner(f, mismatched), std::invalid_argument);
}

TEST_CASE("coefficient-space derivatives") {
  GaussianMeasure m = make_measure(2.0, 1.0);
  HermiteField fx2 =
      field_from_function(6, m, [](double x, double) { return x * x; });
  HermiteField dx = diff_x(fx2);
  // d/dx x^2 = 2x
  CHECK(dx.c(1, 0) == doctest::Approx(2.0 * m.sigma_x).epsilon(1e-12));
  CHECK(dx.c.squaredNorm() == doctest::Approx(4.0 * m.var_x).epsilon(1e-12));

  HermiteField fxv = field_from_function(
      6, m, [](double x, double v) { return x * v; });
  HermiteField dv = diff_v(fxv);
  CHECK(dv.c(1, 0) == doctest::Approx(m.sigma_x).epsilon(1e-12));

  // gradient seminorms against the closed forms
  CHECK(grad_x_norm_sq(fx2) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(grad_v_norm_sq(fx2) == doctest::Approx(0.0));
  HermiteField xpv = make_field(6, m);
  xpv.c(1, 0) = m.sigma_x;
  xpv.c(0, 1) = m.sigma_v;
  CHECK(grad_cross_inner(xpv) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("transport operator on coordinates") {
  GaussianMeasure m = make_measure(2.0, 1.0);
  HermiteField x = coord_x(8, m);
  HermiteField v = coord_v(8, m);

  OpResult tx = apply_T(x);
  CHECK(!tx.truncated);
  CHECK((tx.h.c - v.c).cwiseAbs().maxCoeff() < 1e-13);  // T x = v

  OpResult tv = apply_T(v);
  CHECK((tv.h.c + x.c).cwiseAbs().maxCoeff() < 1e-13);  // T v = -omega0^2 x

  CHECK(weighted_inner(tx.h, v) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(weighted_inner(tv.h, x) == doctest::Approx(-0.5).epsilon(1e-12));

  // T(xv) = v^2 - omega0^2 x^2
  HermiteField xv =
      field_from_function(8, m, [](double a, double b) { return a * b; });
  HermiteField target = field_from_function(
      8, m, [](double a, double b) { return b * b - a * a; });
  OpResult txv = apply_T(xv);
  CHECK((txv.h.c - target.c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("collision operator on v^2") {
  GaussianMeasure m = make_measure(2.0, 1.0);
  double gamma = 1.7;
  HermiteField v2 =
      field_from_function(8, m, [](double, double b) { return b * b; });
  HermiteField target = field_from_function(8, m, [&](double, double b) {
    return -2.0 * gamma * b * b + 2.0 * gamma / 2.0;  // beta = 2
  });
  OpResult lv2 = apply_L(v2, gamma);
  CHECK((lv2.h.c - target.c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("operator identities on the monomial battery") {
  for (double gamma : {1.0, 2.5}) {
    IdentityReport rep = verify_identities(8, make_measure(2.0, 1.0), gamma);
    CHECK(rep.pairs_checked > 0);
    CHECK(rep.max_resid_antisym < 1e-12);
    CHECK(rep.max_resid_diag < 1e-12);
    CHECK(rep.max_resid_dissip < 1e-12);
  }
}

TEST_CASE("perturbation operator vanishes for the zero model") {
  GaussianMeasure m = make_measure(2.0, 1.0);
  OperatorContext ctx = make_operator_context(6, m, 1.0, kZeroOracle);
  Rng rng(5);
  HermiteField h = make_field(6, m);
  for (int i = 0; i <= 6; ++i)
    for (int j = 0; j <= 6; ++j) h.c(i, j) = rng.next_gauss();
  OpResult r = apply_R(h, ctx);
  CHECK(r.h.c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generator assembly is consistent with the operator applications") {
  GaussianMeasure m = make_measure(2.0, 1.0);
  double gamma = 1.0;
  GradientOracle o = make_oracle(1.0, EpsilonModel::scaled_bounded, 0.01, 0.0);
  GeneratorMatrix gen = assemble_generator(6, gamma, 2.0, 1.0, o);
  OperatorContext ctx = make_operator_context(6, m, gamma, o);

  Rng rng(6);
  HermiteField h = make_field(6, m);
  for (int i = 0; i <= 6; ++i)
    for (int j = 0; j <= 6; ++j) h.c(i, j) = rng.next_gauss();

  OpResult th = apply_T(h);
  OpResult lh = apply_L(h, gamma);
  OpResult rh = apply_R(h, ctx);
  Eigen::MatrixXd expected = -th.h.c + lh.h.c + rh.h.c;

  Eigen::VectorXd flat(h.c.size());
  for (int i = 0; i <= 6; ++i)
    for (int j = 0; j <= 6; ++j) flat(i * 7 + j) = h.c(i, j);
  Eigen::VectorXd av = gen.A * flat;
  double worst = 0.0;
  for (int i = 0; i <= 6; ++i)
    for (int j = 0; j <= 6; ++j)
      worst = std::max(worst, std::abs(av(i * 7 + j) - expected(i, j)));
  CHECK(worst < 1e-10);
}

TEST_CASE("unperturbed spectrum in both regimes") {
  // overdamped gamma = 2.5: rates lambda1 = 0.5, lambda2 = 2 appear exactly
  GeneratorMatrix gen = assemble_generator(8, 2.5, 2.0, 1.0, kZeroOracle);
  auto spec = generator_spectrum(gen);
  double d_half = 1e9, d_two = 1e9, d_zero = 1e9;
  for (auto z : spec) {
    d_half = std::min(d_half, std::abs(z - std::complex<double>(-0.5, 0.0)));
    d_two = std::min(d_two, std::abs(z - std::complex<double>(-2.0, 0.0)));
    d_zero = std::min(d_zero, std::abs(z));
  }
  CHECK(d_half < 1e-8);
  CHECK(d_two < 1e-8);
  CHECK(d_zero < 1e-10);  // conservation of mass

  // underdamped gamma = 1: spectral abscissa of the mean-zero sector is -1/2
  GeneratorMatrix gen1 = assemble_generator(8, 1.0, 2.0, 1.0, kZeroOracle);
  auto spec1 = generator_spectrum(gen1);
  double abscissa = -1e9;
  for (auto z : spec1)
    if (std::abs(z) > 1e-9) abscissa = std::max(abscissa, z.real());
  CHECK(abscissa == doctest::Approx(-0.5).epsilon(1e-8));
  double d_mode = 1e9;
  std::complex<double> slow(-0.5, std::sqrt(3.0) / 2.0);
  for (auto z : spec1) d_mode = std::min(d_mode, std::abs(z - slow));
  CHECK(d_mode < 1e-8);
}

TEST_CASE("slow eigenmode decays at exactly its eigenvalue") {
  GeneratorMatrix gen = assemble_generator(8, 2.5, 2.0, 1.0, kZeroOracle);
  HermiteField h0 = make_field(8, gen.meas);
  // degree-1 block of -T + L in the basis (c10, c01) is [[0, w0],[-w0, -gamma]];
  // the eigenvector for lambda = -1/2 is (1, -1/2)
  h0.c(1, 0) = 1.0;
  h0.c(0, 1) = -0.5;
  h0.c /= std::sqrt(h0.norm_sq());
  EvolveResult ev = evolve(h0, gen, 1.0, 1e-3, 1000);
  double ratio = std::sqrt(ev.norm_h_sq.back() / ev.norm_h_sq.front());
  CHECK(ratio == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
}

TEST_CASE("constants are invariant under the unperturbed flow") {
  GeneratorMatrix gen = assemble_generator(6, 1.0, 2.0, 1.0, kZeroOracle);
  HermiteField h0 = make_field(6, gen.meas);
  h0.c(0, 0) = 1.0;
  EvolveResult ev = evolve(h0, gen, 1.0, 0.01, 10);
  for (double ns : ev.norm_h_sq) CHECK(ns == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("norm decreases monotonically under the unperturbed flow") {
  GeneratorMatrix gen = assemble_generator(8, 1.0, 2.0, 1.0, kZeroOracle);
  Rng rng(12);
  HermiteField h0 = make_field(8, gen.meas);
  for (int i = 0; i <= 8; ++i)
    for (int j = 0; j <= 8; ++j)
      if (i + j >= 1) h0.c(i, j) = rng.next_gauss();
  h0.c /= std::sqrt(h0.norm_sq());
  EvolveResult ev = evolve(h0, gen, 5.0, 0.0, 5);
  for (size_t r = 1; r < ev.norm_h_sq.size(); ++r)
    CHECK(ev.norm_h_sq[r] <= ev.norm_h_sq[r - 1] * (1.0 + 1e-10));
}

TEST_CASE("instability detector aborts a divergent run") {
  GeneratorMatrix gen = assemble_generator(8, 1.0, 2.0, 1.0, kZeroOracle);
  Rng rng(13);
  HermiteField h0 = make_field(8, gen.meas);
  for (int i = 0; i <= 8; ++i)
    for (int j = 0; j <= 8; ++j) h0.c(i, j) = rng.next_gauss();
  double huge_dt = 20.0 / spectral_radius_estimate(gen.A);
  CHECK_THROWS_AS((void)evolve(h0, gen, 50.0 * huge_dt, huge_dt, 1),
                  std::runtime_error);
}

TEST_CASE("trapezoidal and RK4 agree on a smooth run") {
  GeneratorMatrix gen = assemble_generator(6, 1.0, 2.0, 1.0, kZeroOracle);
  HermiteField h0 = make_field(6, gen.meas);
  h0.c(1, 0) = 0.8;
  h0.c(0, 1) = 0.6;
  EvolveResult a = evolve(h0, gen, 2.0, 1e-3, 2000, 0, 0, false, Scheme::rk4);
  EvolveResult b =
      evolve(h0, gen, 2.0, 1e-3, 2000, 0, 0, false, Scheme::trapezoidal);
  CHECK(a.norm_h_sq.back() ==
        doctest::Approx(b.norm_h_sq.back()).epsilon(1e-6));
}

TEST_CASE("Lyapunov functional worked values") {
  GaussianMeasure m = make_measure(2.0, 1.0);
  HermiteField xpv = make_field(6, m);
  xpv.c(1, 0) = m.sigma_x;
  xpv.c(0, 1) = m.sigma_v;
  CHECK(lyapunov_H(xpv, 1.0, 0.5) == doctest::Approx(3.0).epsilon(1e-12));

  HermiteField x2 =
      field_from_function(6, m, [](double x, double) { return x * x; });
  CHECK(lyapunov_H(x2, 1.0, 0.0) == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS((void)lyapunov_H(xpv, 0.25, 1.0), std::invalid_argument);
}

TEST_CASE("Poincare inequality on the first coordinate") {
  GaussianMeasure m = make_measure(2.0, 1.0);
  HermiteField x = coord_x(6, m);
  PoincareCheck pc = check_poincare(x, 1);
  CHECK(pc.holds);
  CHECK(pc.lhs == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pc.rhs == doctest::Approx(0.5).epsilon(1e-12));  // equality case

  GaussianMeasure m2 = make_measure(2.0, 2.0);
  HermiteField x2 = coord_x(6, m2);
  PoincareCheck pc2 = check_poincare(x2, 1);
  CHECK(pc2.holds);
  CHECK(pc2.lhs == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
  CHECK(pc2.rhs == doctest::Approx(0.5).epsilon(1e-12));

  // mean-zero precondition
  HermiteField one = make_field(6, m);
  one.c(0, 0) = 1.0;
  CHECK_THROWS_AS((void)check_poincare(one, 1), std::invalid_argument);

  // the d = 2 extension with the same constant fails
  PoincareCheck bad = poincare_first_coordinate(2, 2.0, 1.0);
  CHECK(!bad.holds);
  CHECK(bad.lhs == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(bad.rhs == doctest::Approx(0.25).epsilon(1e-12));
  PoincareCheck good = poincare_first_coordinate(1, 2.0, 1.0);
  CHECK(good.holds);
}

TEST_CASE("perturbation inequalities hold on the quadrature battery") {
  GradientOracle o = make_oracle(1.0, EpsilonModel::scaled_bounded, 0.01, 0.0);
  PerturbationBounds b = perturbation_bounds(o, 1.0, 6.0, 401);
  auto checks =
      verify_perturbation_bounds(8, make_measure(2.0, 1.0), 1.0, o, b);
  REQUIRE(checks.size() >= 20);
  for (const auto& bc : checks) {
    INFO("inequality ", bc.inequality, " on ", bc.function, ": lhs=", bc.lhs,
         " rhs=", bc.rhs);
    CHECK(bc.holds);
  }
}

TEST_CASE("steady state: unperturbed and perturbed") {
  GeneratorMatrix gen0 = assemble_generator(8, 1.0, 2.0, 1.0, kZeroOracle);
  HermiteField f0 = compute_steady_state(gen0);
  CHECK(f0.c(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i <= 8; ++i)
    for (int j = 0; j <= 8; ++j)
      if (i + j > 0) CHECK(std::abs(f0.c(i, j)) < 1e-12);

  GradientOracle o = make_oracle(1.0, EpsilonModel::scaled_bounded, 0.01, 0.0);
  GeneratorMatrix gen = assemble_generator(12, 1.0, 2.0, 1.0, o);
  HermiteField f = compute_steady_state(gen);
  CHECK(f.c(0, 0) == doctest::Approx(1.0));
  Eigen::VectorXd flat(f.c.size());
  for (int i = 0; i <= 12; ++i)
    for (int j = 0; j <= 12; ++j) flat(i * 13 + j) = f.c(i, j);
  CHECK((gen.A * flat).norm() < 1e-8);

  // O(a) departure from the unperturbed state
  GradientOracle o_half = make_oracle(1.0, EpsilonModel::scaled_bounded, 0.005, 0.0);
  GeneratorMatrix gen_half = assemble_generator(12, 1.0, 2.0, 1.0, o_half);
  HermiteField fh = compute_steady_state(gen_half);
  HermiteField base = make_field(12, gen.meas);
  base.c(0, 0) = 1.0;
  double dist_a = std::sqrt((f.c - base.c).squaredNorm());
  double dist_half = std::sqrt((fh.c - base.c).squaredNorm());
  CHECK(dist_a / dist_half == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("truncation refinement leaves the fitted rate unchanged") {
  GradientOracle o = make_oracle(1.0, EpsilonModel::scaled_bounded, 0.01, 0.0);
  auto fitted_rate = [&](int N) {
    GeneratorMatrix gen = assemble_generator(N, 1.0, 2.0, 1.0, o);
    HermiteField h0 = make_field(N, gen.meas);
    for (int i = 0; i <= N; ++i)
      for (int j = 0; j <= N; ++j)
        if (i + j >= 1 && i + j <= 6) h0.c(i, j) = 1.0 / (1.0 + i + 2.0 * j);
    h0.c /= std::sqrt(h0.norm_sq());
    EvolveResult ev = evolve(h0, gen, 11.3, 0.02, 5);
    // window trimmed to two whole oscillation periods: nu = sqrt(3)/2
    double period = 3.14159265358979323846 / (std::sqrt(3.0) / 2.0);
    double lo = 4.0, hi = 4.0 + 2.0 * period;
    // plain least squares on (t, log norm^2)
    double st = 0.0, sl = 0.0, n = 0.0;
    std::vector<std::pair<double, double>> pts;
    for (size_t r = 0; r < ev.times.size(); ++r) {
      if (ev.times[r] < lo || ev.times[r] > hi) continue;
      pts.push_back({ev.times[r], std::log(ev.norm_h_sq[r])});
      st += ev.times[r];
      sl += pts.back().second;
      n += 1.0;
    }
    double mt = st / n, ml = sl / n, sxx = 0.0, sxy = 0.0;
    for (auto& [t, l] : pts) {
      sxx += (t - mt) * (t - mt);
      sxy += (t - mt) * (l - ml);
    }
    return -sxy / sxx;
  };
  double r12 = fitted_rate(12);
  double r16 = fitted_rate(16);
  CHECK(std::abs(r16 - r12) / r16 < 0.005);
}
