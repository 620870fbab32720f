#include "asgdlab/kernels.hpp"

#include <atomic>

#if defined(__x86_64__) || defined(_M_X64)
#define ASGDLAB_X86 1
#include <immintrin.h>
#else
#define ASGDLAB_X86 0
#endif

namespace asgdlab::kernels {

namespace {

std::atomic<bool> g_force_scalar{false};

bool cpu_has_avx2() {
#if ASGDLAB_X86 && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const bool g_avx2 = cpu_has_avx2();

// ---------------- scalar reference ----------------

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sumsq_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void matvec_scalar(const double* a, const double* x, double* y,
                   std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    y[r] = dot_scalar(a + r * cols, x, cols);
}

void em_step_soa_scalar(double* theta, double* y, const double* xi,
                        std::size_t n, double dt, double gamma, double om2,
                        double noise_amp) {
  for (std::size_t i = 0; i < n; ++i) {
    double th = theta[i];
    double yv = y[i];
    theta[i] = th + yv * dt + noise_amp * xi[i];
    y[i] = yv - (om2 * th + gamma * yv) * dt;
  }
}

// ---------------- AVX2 + FMA variants ----------------

#if ASGDLAB_X86

__attribute__((target("avx2,fma"))) double dot_avx2(const double* x,
                                                    const double* y,
                                                    std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4),
                           acc1);
  }
  __m256d acc = _mm256_add_pd(acc0, acc1);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double r = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

__attribute__((target("avx2,fma"))) void axpy_avx2(double a, const double* x,
                                                   double* y, std::size_t n) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

__attribute__((target("avx2,fma"))) double sum_avx2(const double* x,
                                                    std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double r = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) r += x[i];
  return r;
}

__attribute__((target("avx2,fma"))) double sumsq_avx2(const double* x,
                                                      std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double r = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) r += x[i] * x[i];
  return r;
}

__attribute__((target("avx2,fma"))) void matvec_avx2(const double* a,
                                                     const double* x, double* y,
                                                     std::size_t rows,
                                                     std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(a + r * cols, x, cols);
}

__attribute__((target("avx2,fma"))) void em_step_soa_avx2(
    double* theta, double* y, const double* xi, std::size_t n, double dt,
    double gamma, double om2, double noise_amp) {
  __m256d vdt = _mm256_set1_pd(dt);
  __m256d vg = _mm256_set1_pd(gamma);
  __m256d vo = _mm256_set1_pd(om2);
  __m256d vamp = _mm256_set1_pd(noise_amp);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d th = _mm256_loadu_pd(theta + i);
    __m256d yv = _mm256_loadu_pd(y + i);
    __m256d th2 = _mm256_fmadd_pd(yv, vdt, th);
    th2 = _mm256_fmadd_pd(vamp, _mm256_loadu_pd(xi + i), th2);
    __m256d drift = _mm256_fmadd_pd(vo, th, _mm256_mul_pd(vg, yv));
    __m256d y2 = _mm256_fnmadd_pd(drift, vdt, yv);
    _mm256_storeu_pd(theta + i, th2);
    _mm256_storeu_pd(y + i, y2);
  }
  for (; i < n; ++i) {
    double th = theta[i];
    double yv = y[i];
    theta[i] = th + yv * dt + noise_amp * xi[i];
    y[i] = yv - (om2 * th + gamma * yv) * dt;
  }
}

#endif  // ASGDLAB_X86

inline bool use_simd() {
#if ASGDLAB_X86
  return g_avx2 && !g_force_scalar.load(std::memory_order_relaxed);
#else
  return false;
#endif
}

}  // namespace

bool avx2_available() { return g_avx2; }

void force_scalar(bool on) {
  g_force_scalar.store(on, std::memory_order_relaxed);
}

bool scalar_forced() { return g_force_scalar.load(std::memory_order_relaxed); }

double dot(const double* x, const double* y, std::size_t n) {
#if ASGDLAB_X86
  if (use_simd()) return dot_avx2(x, y, n);
#endif
  return dot_scalar(x, y, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
#if ASGDLAB_X86
  if (use_simd()) return axpy_avx2(a, x, y, n);
#endif
  axpy_scalar(a, x, y, n);
}

double sum(const double* x, std::size_t n) {
#if ASGDLAB_X86
  if (use_simd()) return sum_avx2(x, n);
#endif
  return sum_scalar(x, n);
}

double sumsq(const double* x, std::size_t n) {
#if ASGDLAB_X86
  if (use_simd()) return sumsq_avx2(x, n);
#endif
  return sumsq_scalar(x, n);
}

void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
#if ASGDLAB_X86
  if (use_simd()) return matvec_avx2(a, x, y, rows, cols);
#endif
  matvec_scalar(a, x, y, rows, cols);
}

void em_step_soa(double* theta, double* y, const double* xi, std::size_t n,
                 double dt, double gamma, double om2, double noise_amp) {
#if ASGDLAB_X86
  if (use_simd()) return em_step_soa_avx2(theta, y, xi, n, dt, gamma, om2, noise_amp);
#endif
  em_step_soa_scalar(theta, y, xi, n, dt, gamma, om2, noise_amp);
}

}  // namespace asgdlab::kernels
