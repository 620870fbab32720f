#include "asgdlab/staleness.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace asgdlab {

StalenessModel StalenessModel::geometric(double kappa) {
  StalenessModel m;
  m.kind = Kind::geometric;
  m.kappa = kappa;
  return m;
}

StalenessModel StalenessModel::fixed(int l) {
  StalenessModel m;
  m.kind = Kind::fixed;
  m.fixed_l = l;
  return m;
}

StalenessModel StalenessModel::worker_queue(int workers, ServiceLaw law,
                                            double mean_service) {
  StalenessModel m;
  m.kind = Kind::worker_queue;
  m.m = workers;
  m.law = law;
  m.mean_service = mean_service;
  return m;
}

void validate(const StalenessModel& model) {
  switch (model.kind) {
    case StalenessModel::Kind::geometric:
      if (!(model.kappa >= 0.0 && model.kappa < 1.0))
        throw std::invalid_argument("staleness: geometric kappa must be in [0,1)");
      break;
    case StalenessModel::Kind::fixed:
      if (model.fixed_l < 0)
        throw std::invalid_argument("staleness: fixed l must be >= 0");
      break;
    case StalenessModel::Kind::worker_queue:
      if (model.m < 1)
        throw std::invalid_argument("staleness: worker_queue m must be >= 1");
      if (!(model.mean_service > 0.0))
        throw std::invalid_argument("staleness: mean service time must be > 0");
      break;
  }
}

int sample_staleness(const StalenessModel& model, Rng& rng) {
  validate(model);
  switch (model.kind) {
    case StalenessModel::Kind::geometric: {
      if (model.kappa == 0.0) return 0;
      // CDF inversion: floor(log(u)/log(kappa)) is geometric(1-kappa) on {0,1,...}
      double u = rng.next_u01();
      return static_cast<int>(std::floor(std::log(u) / std::log(model.kappa)));
    }
    case StalenessModel::Kind::fixed:
      return model.fixed_l;
    case StalenessModel::Kind::worker_queue:
      throw std::invalid_argument(
          "staleness: worker_queue sampling requires a StalenessSampler");
  }
  return 0;
}

StalenessSampler::StalenessSampler(const StalenessModel& model) : model_(model) {
  validate(model_);
}

double StalenessSampler::service_time(Rng& rng) {
  if (model_.law == ServiceLaw::deterministic) return model_.mean_service;
  return -model_.mean_service * std::log(rng.next_u01());
}

int StalenessSampler::next(Rng& rng) {
  if (model_.kind != StalenessModel::Kind::worker_queue)
    return sample_staleness(model_, rng);

  if (!queue_started_) {
    // all workers read the initial parameter at time 0
    for (int w = 0; w < model_.m; ++w)
      pending_.push(Job{service_time(rng), w, commit_counter_});
    queue_started_ = true;
  }
  Job job = pending_.top();
  pending_.pop();
  int tau = static_cast<int>(commit_counter_ - job.read_counter);
  ++commit_counter_;
  // the committing worker immediately reads the fresh parameter and starts over
  pending_.push(Job{job.completion + service_time(rng), job.worker, commit_counter_});
  return tau;
}

StalenessStats staleness_stats(const std::vector<int>& trace) {
  if (trace.empty()) throw std::invalid_argument("staleness_stats: empty trace");
  StalenessStats st;
  long long sum = 0;
  int max_l = 0;
  for (int tau : trace) {
    sum += tau;
    if (tau > max_l) max_l = tau;
  }
  double n = static_cast<double>(trace.size());
  st.mean = static_cast<double>(sum) / n;
  st.mean_plus_one = st.mean + 1.0;
  st.kappa_hat = st.mean / (1.0 + st.mean);

  std::vector<double> counts(static_cast<size_t>(max_l) + 1, 0.0);
  for (int tau : trace) counts[static_cast<size_t>(tau)] += 1.0;
  st.pmf.resize(counts.size());
  for (size_t l = 0; l < counts.size(); ++l) st.pmf[l] = counts[l] / n;

  // chi-square vs geometric(kappa_hat) over bins l = 0..L with the tail pooled
  // so every expected count stays >= 5
  if (st.kappa_hat <= 0.0) {
    st.chi_square = 0.0;
    st.dof = 0;
    st.p_value = 1.0;
    return st;
  }
  double k = st.kappa_hat;
  std::vector<double> observed, expected;
  double tail_obs = n, tail_exp = n;
  for (int l = 0; l <= max_l; ++l) {
    double e = n * (1.0 - k) * std::pow(k, l);
    double tail_after = tail_exp - e;
    if (tail_after < 5.0 || l == max_l) {
      observed.push_back(tail_obs);
      expected.push_back(tail_exp);
      tail_obs = 0.0;
      tail_exp = 0.0;
      break;
    }
    observed.push_back(counts[static_cast<size_t>(l)]);
    expected.push_back(e);
    tail_obs -= counts[static_cast<size_t>(l)];
    tail_exp = tail_after;
  }
  double chi2 = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    double d = observed[i] - expected[i];
    chi2 += d * d / expected[i];
  }
  st.chi_square = chi2;
  // one parameter (kappa_hat) was fitted from the data
  st.dof = static_cast<int>(observed.size()) - 2;
  if (st.dof < 1) {
    st.dof = 0;
    st.p_value = 1.0;
  } else {
    st.p_value = boost::math::gamma_q(0.5 * st.dof, 0.5 * chi2);
  }
  return st;
}

void write_trace_csv(const std::vector<int>& trace, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  std::fputs("k,tau\n", f);
  for (size_t k = 0; k < trace.size(); ++k)
    std::fprintf(f, "%zu,%d\n", k, trace[k]);
  std::fclose(f);
}

}  // namespace asgdlab
