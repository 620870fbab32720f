// Discrete ASGD: theta_{k+1} = theta_k - eta * stochastic_grad(theta_{k - tau_k}),
// with delayed reads clamped to theta_0 before step 0, trajectory recording,
// and deterministic ensembles.
#pragma once

#include <cstdint>
#include <vector>

#include "asgdlab/loss.hpp"
#include "asgdlab/moments.hpp"
#include "asgdlab/params.hpp"
#include "asgdlab/rng.hpp"
#include "asgdlab/staleness.hpp"

namespace asgdlab {

struct Trajectory {
  int d = 0;
  std::vector<double> theta;  // (K+1) x d, flattened
  std::vector<double> y;      // (K+1) x d; the initialization map applied at each k
  std::vector<int> tau;       // K entries, the staleness trace

  long steps() const { return static_cast<long>(tau.size()); }
  const double* theta_at(long k) const { return theta.data() + k * d; }
};

// One update given the history of iterates (flattened k_next x d, oldest
// first). Reads clamp to theta_0 when k - tau < 0.
std::vector<double> asgd_step(const std::vector<double>& history, int d,
                              double eta, int tau, const GradientOracle& oracle,
                              Rng& rng);

// K steps from theta0 with tau_k drawn from the model. Deterministic per seed.
// Throws "history cap exceeded" when a sampled tau reaches `history_cap`.
Trajectory run_asgd(const Params& p, const GradientOracle& oracle,
                    const StalenessModel& model, long K, std::uint64_t seed,
                    const std::vector<double>& theta0, int history_cap = 10000);

// N independent trajectories started at theta0 (broadcast over coordinates);
// moments of theta (dim = d), or of (theta, y) when record_y is set
// (dim = 2d), recorded every `stride` steps in path-index order. Path i uses
// substream_seed(seed, i).
EnsembleMoments run_asgd_ensemble(const Params& p, const GradientOracle& oracle,
                                  const StalenessModel& model, long K, long n_paths,
                                  std::uint64_t seed, int stride = 1,
                                  bool record_y = false, int history_cap = 10000,
                                  double theta0 = 1.0);

// Initialization map to the SDE state: Theta = theta,
// Y = -sqrt(eta/(1-kappa)) * grad(theta).
void asgd_to_sme_state(const std::vector<double>& theta, const Params& p,
                       const GradientOracle& oracle, std::vector<double>& Theta,
                       std::vector<double>& Y);

}  // namespace asgdlab
