#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefillsim/controller.hpp"
#include "prefillsim/cost_model.hpp"
#include "prefillsim/event_log.hpp"
#include "prefillsim/metrics.hpp"
#include "prefillsim/scheduler.hpp"
#include "prefillsim/workload.hpp"

namespace prefillsim {

enum class Policy { kLaps, kFcfsUnified, kBucketNoDisagg };
enum class Disagg { kTemporal, kSpatial };

Policy parse_policy(const std::string& s);
Disagg parse_disagg(const std::string& s);
const char* to_string(Policy p);
const char* to_string(Disagg d);

struct SimConfig {
  int n_instances = 1;
  Policy policy = Policy::kLaps;
  Disagg disagg = Disagg::kTemporal;
  bool controller_on = false;
  std::uint64_t seed = 1;
  double duration_ms = 10000;  // arrival horizon; the run drains past it
  double slo_ms = 400;
  int initial_short_instances = -1;    // spatial: -1 = half, rounded up
  Tokens unified_token_budget = 8192;  // fcfs_unified packing budget
  int unified_max_batch = 64;          // fcfs_unified batch size cap
  double startup_delay_ms = 0;         // one-shot shape-capture cost
};

void validate(const SimConfig& c);

struct RunResult {
  std::vector<LogRecord> log;
  MetricsReport report;
};

// Deterministic discrete-event run over an arrival-ordered request list.
// Identical inputs give byte-identical logs.
RunResult run(const SimConfig& sim, const std::vector<Request>& requests,
              const CostParams& cost, const ExecOverheads& overheads,
              const SchedConfig& sched, const GraphGrid& grid,
              const ControllerConfig& ctrl);

}  // namespace prefillsim
