#pragma once

// Closed-form M/G/1 predictions used to validate the simulator: the
// Pollaczek-Khinchine mean wait, the head-of-line mixing penalty of a
// two-point service distribution, and normalized latency.

#include <stdexcept>

namespace prefillsim {

struct UnstableQueue : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidMoments : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two-point service mix: service is s_short_ms w.p. p_short, else s_long_ms.
struct ServiceMix {
  double lambda_per_ms = 0;
  double p_short = 0;
  double s_short_ms = 0;
  double s_long_ms = 0;

  double mean_service() const {
    return p_short * s_short_ms + (1.0 - p_short) * s_long_ms;
  }
  double second_moment() const {
    return p_short * s_short_ms * s_short_ms +
           (1.0 - p_short) * s_long_ms * s_long_ms;
  }
  double utilization() const { return lambda_per_ms * mean_service(); }
};

// W = lambda * E[S^2] / (2 * (1 - rho)), rho = lambda * E[S].
// Throws UnstableQueue when rho >= 1, InvalidMoments when E[S^2] < E[S]^2.
double pk_wait(double lambda_per_ms, double mean_service_ms,
               double second_moment);

// Extra mean wait caused by mixing two service classes in one FCFS queue:
// dW = lambda * p * (1-p) * (s_long - s_short)^2 / (2 * (1 - rho)).
// The explicit-rho form evaluates the formula as given; the mix form
// derives rho from the mix and checks stability.
double hol_penalty(double lambda_per_ms, double p_short, double s_short_ms,
                   double s_long_ms, double rho);
double hol_penalty(const ServiceMix& mix);

// 1 + wait / service: the slowdown a request of a given size experiences.
double normalized_latency(double service_ms, double wait_ms);

}  // namespace prefillsim
