#include "asgdlab/asgd.hpp"

#include <cmath>
#include <stdexcept>

namespace asgdlab {

void accumulate_moments(const double* states, long n, int dim,
                        std::vector<double>& mean_out,
                        std::vector<double>& cov_out) {
  mean_out.assign(dim, 0.0);
  cov_out.assign(static_cast<size_t>(dim) * dim, 0.0);
  for (long i = 0; i < n; ++i) {
    const double* s = states + i * dim;
    for (int a = 0; a < dim; ++a) mean_out[a] += s[a];
  }
  for (int a = 0; a < dim; ++a) mean_out[a] /= n;
  for (long i = 0; i < n; ++i) {
    const double* s = states + i * dim;
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b)
        cov_out[a * dim + b] += (s[a] - mean_out[a]) * (s[b] - mean_out[b]);
  }
  double denom = n > 1 ? n - 1.0 : 1.0;
  for (auto& c : cov_out) c /= denom;
}

std::vector<double> asgd_step(const std::vector<double>& history, int d,
                              double eta, int tau, const GradientOracle& oracle,
                              Rng& rng) {
  long k_next = static_cast<long>(history.size()) / d;  // steps taken so far + 1
  if (k_next < 1) throw std::invalid_argument("asgd_step: empty history");
  long k = k_next - 1;
  long read = k - tau;
  if (read < 0) read = 0;  // clamp to theta_0
  std::vector<double> g(d);
  oracle.stochastic_grad(history.data() + read * d, g.data(), d, rng);
  std::vector<double> out(d);
  const double* cur = history.data() + k * d;
  for (int i = 0; i < d; ++i) out[i] = cur[i] - eta * g[i];
  return out;
}

namespace {

// Sliding window of the last (cap+1) iterates; reads older than the window
// are a contract violation, reads before step 0 clamp to theta_0.
class RingHistory {
 public:
  RingHistory(int d, int cap, const double* theta0)
      : d_(d), cap_(cap), buf_(static_cast<size_t>(cap) * d), theta0_(theta0, theta0 + d) {
    write(0, theta0);
  }

  void write(long k, const double* v) {
    double* slot = buf_.data() + (k % cap_) * d_;
    for (int i = 0; i < d_; ++i) slot[i] = v[i];
    newest_ = k;
  }

  const double* read(long k) const {
    if (k <= 0) return theta0_.data();
    if (newest_ - k >= cap_) throw std::runtime_error("history cap exceeded");
    return buf_.data() + (k % cap_) * d_;
  }

 private:
  int d_;
  long cap_;
  std::vector<double> buf_;
  std::vector<double> theta0_;
  long newest_ = 0;
};

}  // namespace

Trajectory run_asgd(const Params& p, const GradientOracle& oracle,
                    const StalenessModel& model, long K, std::uint64_t seed,
                    const std::vector<double>& theta0, int history_cap) {
  validate(p);
  if (static_cast<int>(theta0.size()) != p.d)
    throw std::invalid_argument("run_asgd: theta0 dimension mismatch");
  Trajectory tr;
  tr.d = p.d;
  tr.theta.resize((K + 1) * p.d);
  tr.y.resize((K + 1) * p.d);
  tr.tau.resize(K);
  for (int i = 0; i < p.d; ++i) tr.theta[i] = theta0[i];

  Rng rng(seed);
  StalenessSampler sampler(model);
  std::vector<double> g(p.d);
  for (long k = 0; k < K; ++k) {
    int tau = sampler.next(rng);
    if (tau >= history_cap) throw std::runtime_error("history cap exceeded");
    tr.tau[k] = tau;
    long read = k - tau;
    if (read < 0) read = 0;
    oracle.stochastic_grad(tr.theta_at(read), g.data(), p.d, rng);
    const double* cur = tr.theta_at(k);
    double* nxt = tr.theta.data() + (k + 1) * p.d;
    for (int i = 0; i < p.d; ++i) nxt[i] = cur[i] - p.eta * g[i];
  }

  // y_k: the initialization map applied pointwise along the trajectory
  double c = -std::sqrt(p.eta / (1.0 - p.kappa));
  for (long k = 0; k <= K; ++k) {
    oracle.grad(tr.theta_at(k), g.data(), p.d);
    for (int i = 0; i < p.d; ++i) tr.y[k * p.d + i] = c * g[i];
  }
  return tr;
}

EnsembleMoments run_asgd_ensemble(const Params& p, const GradientOracle& oracle,
                                  const StalenessModel& model, long K, long n_paths,
                                  std::uint64_t seed, int stride, bool record_y,
                                  int history_cap, double theta0_value) {
  validate(p);
  if (n_paths < 2) throw std::invalid_argument("run_asgd_ensemble: need N >= 2");
  if (stride < 1) throw std::invalid_argument("run_asgd_ensemble: stride >= 1");
  int d = p.d;
  int dim = record_y ? 2 * d : d;

  std::vector<long> record_steps;
  for (long k = 0; k <= K; k += stride) record_steps.push_back(k);
  if (record_steps.back() != K) record_steps.push_back(K);
  size_t n_rec = record_steps.size();

  std::vector<std::vector<double>> sum(n_rec, std::vector<double>(dim, 0.0));
  std::vector<std::vector<double>> cross(n_rec,
                                         std::vector<double>(dim * dim, 0.0));

  std::vector<double> theta0(d, theta0_value);
  double ymap = -std::sqrt(p.eta / (1.0 - p.kappa));
  std::vector<double> g(d), state(dim), cur(d), nxt(d);

  for (long i = 0; i < n_paths; ++i) {
    Rng rng(substream_seed(seed, i));
    StalenessSampler sampler(model);
    RingHistory hist(d, history_cap, theta0.data());
    for (int a = 0; a < d; ++a) cur[a] = theta0[a];
    size_t rec = 0;
    for (long k = 0; k <= K; ++k) {
      if (rec < n_rec && record_steps[rec] == k) {
        for (int a = 0; a < d; ++a) state[a] = cur[a];
        if (record_y) {
          oracle.grad(cur.data(), g.data(), d);
          for (int a = 0; a < d; ++a) state[d + a] = ymap * g[a];
        }
        auto& sm = sum[rec];
        auto& cr = cross[rec];
        for (int a = 0; a < dim; ++a) {
          sm[a] += state[a];
          for (int b = 0; b < dim; ++b) cr[a * dim + b] += state[a] * state[b];
        }
        ++rec;
      }
      if (k == K) break;
      int tau = sampler.next(rng);
      if (tau >= history_cap) throw std::runtime_error("history cap exceeded");
      long read = k - tau;
      const double* src = read <= 0 ? theta0.data() : hist.read(read);
      oracle.stochastic_grad(src, g.data(), d, rng);
      for (int a = 0; a < d; ++a) nxt[a] = cur[a] - p.eta * g[a];
      hist.write(k + 1, nxt.data());
      cur.swap(nxt);
    }
  }

  EnsembleMoments mom;
  mom.dim = dim;
  mom.n = n_paths;
  double n = static_cast<double>(n_paths);
  for (size_t r = 0; r < n_rec; ++r) {
    mom.times.push_back(static_cast<double>(record_steps[r]));
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

void asgd_to_sme_state(const std::vector<double>& theta, const Params& p,
                       const GradientOracle& oracle, std::vector<double>& Theta,
                       std::vector<double>& Y) {
  validate(p);
  int d = static_cast<int>(theta.size());
  Theta = theta;
  Y.resize(d);
  oracle.grad(theta.data(), Y.data(), d);
  double c = -std::sqrt(p.eta / (1.0 - p.kappa));
  for (int i = 0; i < d; ++i) Y[i] *= c;
}

}  // namespace asgdlab
