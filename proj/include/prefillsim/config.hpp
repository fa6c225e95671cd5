#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefillsim/sim.hpp"

namespace prefillsim {

// Flat dotted-key configuration, e.g. "sched.w_max_ms=50". '#' starts a
// comment; blank lines are skipped; later files/overrides win.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);
void apply_overrides(ConfigMap& base, const ConfigMap& overrides);

struct Scenario {
  SimConfig sim;
  CostParams cost;
  ExecOverheads overheads;
  RooflineParams roofline;
  SchedConfig sched;
  GraphGrid grid;
  ControllerConfig ctrl;
  SynthConfig workload;
  std::optional<SynthConfig> workload2;
  double workload2_shift_ms = 0;
  std::optional<std::string> trace_path;
};

// Unknown keys are errors. grid.model_preset (7b/14b/32b) selects the
// per-shape memory footprint and is applied before explicit grid keys.
Scenario build_scenario(const ConfigMap& cfg);

// trace.path wins over synthetic settings; otherwise stream 1 (and the
// optional shifted stream 2) is generated over sim.duration_ms.
std::vector<Request> build_workload(const Scenario& sc);

// Sweep parameter application on a fresh copy of the base map (the
// scaling aliases read the base value). "short_concurrency" and
// "long_concurrency" scale the stream-1/stream-2 arrival rates; any
// other name is treated as a literal config key.
void apply_sweep_param(ConfigMap& cfg, const std::string& param,
                       double value);

RunResult run_scenario(const Scenario& sc);

}  // namespace prefillsim
