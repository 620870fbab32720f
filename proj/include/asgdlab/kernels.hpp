// Scalar reference kernels with an AVX2+FMA variant selected at runtime.
// The two variants are equivalence-tested (not bitwise: FMA contraction and
// lane reassociation); force_scalar() pins the reference path.
#pragma once

#include <cstddef>

namespace asgdlab::kernels {

// true when the AVX2 path is compiled in and the CPU supports it
bool avx2_available();

// test hook: route every dispatch to the scalar reference implementation
void force_scalar(bool on);
bool scalar_forced();

// dot product <x, y>
double dot(const double* x, const double* y, std::size_t n);

// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);

double sum(const double* x, std::size_t n);
double sumsq(const double* x, std::size_t n);

// y = A x, A row-major (rows x cols)
void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols);

// One Euler-Maruyama step over an ensemble in structure-of-arrays layout,
// d = 1, eps = 0 fast path:
//   theta_i' = theta_i + y_i dt + noise_amp * xi_i
//   y_i'     = y_i - (om2 * theta_i + gamma * y_i) dt
void em_step_soa(double* theta, double* y, const double* xi, std::size_t n,
                 double dt, double gamma, double om2, double noise_amp);

}  // namespace asgdlab::kernels
