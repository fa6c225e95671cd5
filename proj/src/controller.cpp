#include "prefillsim/controller.hpp"

#include <algorithm>

namespace prefillsim {

int PoolState::n_short() const {
  return static_cast<int>(
      std::count(assignment.begin(), assignment.end(), PoolKind::kShort));
}

int PoolState::n_long() const {
  return static_cast<int>(assignment.size()) - n_short();
}

const char* to_string(MigrationDir d) {
  return d == MigrationDir::kLongToShort ? "long_to_short" : "short_to_long";
}

void validate(const ControllerConfig& cfg, int n_instances) {
  if (!(cfg.dt_ms > 0)) throw ConfigError("control period must be > 0");
  if (cfg.t_cool_ms < 0) throw ConfigError("cool-down must be >= 0");
  if (cfg.tau_hyst < 0) throw ConfigError("hysteresis must be >= 0");
  if (cfg.n_min < 0) throw ConfigError("n_min must be >= 0");
  if (2 * cfg.n_min > n_instances) {
    throw ConfigError("n_min * 2 exceeds the instance count");
  }
  for (double w : {cfg.w_q, cfg.w_e, cfg.w_u}) {
    if (w < 0) throw ConfigError("pressure weights must be >= 0");
  }
  if (cfg.aggregator_percentile < 1 || cfg.aggregator_percentile > 100) {
    throw ConfigError("aggregator percentile must be in [1, 100]");
  }
}

double pressure(const InstanceStats& s, const ControllerConfig& cfg) {
  return cfg.w_q * s.q + cfg.w_e * s.e - cfg.w_u * s.u;
}

double aggregate(std::span<const double> scores, int percentile) {
  if (scores.empty()) throw EmptyPool();
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  // Integer ceil keeps rank exact (0.9 * 10 in doubles is not 9.0).
  const size_t n = sorted.size();
  size_t rank = (static_cast<size_t>(percentile) * n + 99) / 100;
  rank = std::clamp<size_t>(rank, 1, n);
  return sorted[rank - 1];
}

std::optional<MigrationDir> decide(double p_s, double p_l, PoolState& state,
                                   const ControllerConfig& cfg,
                                   double now_ms) {
  if (now_ms - state.t_last_ms < cfg.t_cool_ms) return std::nullopt;
  const double gain = 1.0 + cfg.tau_hyst;
  if (p_s > gain * p_l && state.n_long() > cfg.n_min) {
    state.t_last_ms = now_ms;
    return MigrationDir::kLongToShort;
  }
  if (p_l > gain * p_s && state.n_short() > cfg.n_min) {
    state.t_last_ms = now_ms;
    return MigrationDir::kShortToLong;
  }
  return std::nullopt;
}

}  // namespace prefillsim
