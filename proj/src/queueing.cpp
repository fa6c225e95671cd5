#include "prefillsim/queueing.hpp"

#include <string>

namespace prefillsim {

double pk_wait(double lambda, double es, double es2) {
  if (es2 < es * es) {
    throw InvalidMoments("E[S^2]=" + std::to_string(es2) +
                         " below E[S]^2=" + std::to_string(es * es));
  }
  const double rho = lambda * es;
  if (rho >= 1.0) {
    throw UnstableQueue("utilization " + std::to_string(rho) + " >= 1");
  }
  return lambda * es2 / (2.0 * (1.0 - rho));
}

double hol_penalty(double lambda, double p, double s_short, double s_long,
                   double rho) {
  if (rho >= 1.0) {
    throw UnstableQueue("utilization " + std::to_string(rho) + " >= 1");
  }
  const double gap = s_long - s_short;
  return lambda * p * (1.0 - p) * gap * gap / (2.0 * (1.0 - rho));
}

double hol_penalty(const ServiceMix& mix) {
  return hol_penalty(mix.lambda_per_ms, mix.p_short, mix.s_short_ms,
                     mix.s_long_ms, mix.utilization());
}

double normalized_latency(double service, double wait) {
  return 1.0 + wait / service;
}

}  // namespace prefillsim
