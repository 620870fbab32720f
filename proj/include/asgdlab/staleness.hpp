// Staleness models: the geometric law P(tau = l) = (1-kappa) kappa^l, a fixed
// delay, and a discrete-event worker-queue model for validating the geometric
// assumption empirically.
#pragma once

#include <cstdint>
#include <queue>
#include <string>
#include <vector>

#include "asgdlab/rng.hpp"

namespace asgdlab {

enum class ServiceLaw { deterministic, exponential };

struct StalenessModel {
  enum class Kind { geometric, fixed, worker_queue };
  Kind kind = Kind::geometric;
  double kappa = 0.0;        // geometric
  int fixed_l = 0;           // fixed
  int m = 1;                 // worker_queue: worker count
  ServiceLaw law = ServiceLaw::exponential;
  double mean_service = 1.0; // worker_queue: mean gradient compute time

  static StalenessModel geometric(double kappa);
  static StalenessModel fixed(int l);
  static StalenessModel worker_queue(int m, ServiceLaw law, double mean_service);
};

// Throws std::invalid_argument on a malformed model.
void validate(const StalenessModel& model);

// Draws from the memoryless variants. Worker-queue sampling carries queue
// state and must go through StalenessSampler.
int sample_staleness(const StalenessModel& model, Rng& rng);

// Stateful sampler covering all variants. For worker_queue each call pops the
// earliest completion (worker index breaks ties), commits it, and reschedules
// that worker; tau is the number of commits between the worker's read and its
// commit.
class StalenessSampler {
 public:
  explicit StalenessSampler(const StalenessModel& model);
  int next(Rng& rng);
  const StalenessModel& model() const { return model_; }

 private:
  struct Job {
    double completion;
    int worker;
    std::uint64_t read_counter;
    bool operator>(const Job& o) const {
      if (completion != o.completion) return completion > o.completion;
      return worker > o.worker;
    }
  };
  double service_time(Rng& rng);

  StalenessModel model_;
  std::priority_queue<Job, std::vector<Job>, std::greater<Job>> pending_;
  std::uint64_t commit_counter_ = 0;
  bool queue_started_ = false;
};

struct StalenessStats {
  double mean = 0.0;            // arithmetic mean of the trace
  double mean_plus_one = 0.0;   // read-to-commit gap convention, 1/(1-kappa) for geometric
  double kappa_hat = 0.0;       // fitted mean/(1+mean)
  std::vector<double> pmf;      // empirical pmf over l = 0..L
  double chi_square = 0.0;      // distance to geometric(kappa_hat), pooled tail
  int dof = 0;
  double p_value = 1.0;
};

// Throws std::invalid_argument on an empty trace.
StalenessStats staleness_stats(const std::vector<int>& trace);

// CSV export, columns (k, tau).
void write_trace_csv(const std::vector<int>& trace, const std::string& path);

}  // namespace asgdlab
