#pragma once

#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "prefillsim/cost_model.hpp"

namespace prefillsim {

// Load snapshot for one instance over the last control period.
struct InstanceStats {
  double q = 0;  // queue backlog (requests; fractional pool shares allowed)
  double e = 0;  // mean positive (TTFT - SLO) of the period's completions, ms
  double u = 0;  // busy fraction of the period, in [0, 1]
};

struct ControllerConfig {
  double dt_ms = 100;
  double t_cool_ms = 500;
  double tau_hyst = 0.25;
  int n_min = 1;
  double w_q = 1.0;   // per queued request
  double w_e = 10.0;  // per ms of lateness
  double w_u = 5.0;   // per unit of utilization
  int aggregator_percentile = 90;
};

enum class PoolKind { kShort, kLong };

struct PoolState {
  std::vector<PoolKind> assignment;  // instance id -> pool
  double t_last_ms = -std::numeric_limits<double>::infinity();

  int n_short() const;
  int n_long() const;
};

enum class MigrationDir { kLongToShort, kShortToLong };

const char* to_string(MigrationDir d);

struct EmptyPool : std::runtime_error {
  EmptyPool() : std::runtime_error("pool has no instances to aggregate") {}
};

void validate(const ControllerConfig& cfg, int n_instances);

// psi = w_q*q + w_e*e - w_u*u; may be negative.
double pressure(const InstanceStats& s, const ControllerConfig& cfg);

// Nearest-rank percentile: value at rank ceil(p/100 * n) of the
// ascending sort (1-based).
double aggregate(std::span<const double> scores, int percentile);

// Single-step migration gate. Cool-down silences everything; otherwise
// pull one instance toward the pool whose pressure exceeds the other's
// by the hysteresis factor, never shrinking a pool below n_min. Updates
// t_last_ms when a migration fires. The caller picks the donor instance
// and rewrites the assignment.
std::optional<MigrationDir> decide(double p_s, double p_l, PoolState& state,
                                   const ControllerConfig& cfg, double now_ms);

}  // namespace prefillsim
