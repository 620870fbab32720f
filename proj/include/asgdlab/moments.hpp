// Ensemble moment records shared by the discrete simulator and the SDE
// integrator: per-time mean vectors and covariance matrices.
#pragma once

#include <cstddef>
#include <vector>

namespace asgdlab {

struct EnsembleMoments {
  int dim = 0;     // state dimension per sample
  long n = 0;      // ensemble size
  std::vector<double> times;              // output grid
  std::vector<std::vector<double>> mean;  // times.size() x dim
  std::vector<std::vector<double>> cov;   // times.size() x (dim*dim), row-major

  std::size_t size() const { return times.size(); }
};

// Sample mean and covariance (denominator n-1) of `n` states of dimension
// `dim` stored contiguously sample-major; reduction order is by sample index.
void accumulate_moments(const double* states, long n, int dim,
                        std::vector<double>& mean_out,
                        std::vector<double>& cov_out);

}  // namespace asgdlab
