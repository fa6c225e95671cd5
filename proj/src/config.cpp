#include "prefillsim/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace prefillsim {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double to_double(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + v + "'");
  }
  if (pos != v.size()) {
    throw ConfigError(key + ": trailing junk in number: '" + v + "'");
  }
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  size_t pos = 0;
  std::int64_t out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not an integer: '" + v + "'");
  }
  if (pos != v.size()) {
    throw ConfigError(key + ": trailing junk in integer: '" + v + "'");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  size_t pos = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not an unsigned integer: '" + v + "'");
  }
  if (pos != v.size()) {
    throw ConfigError(key + ": trailing junk in integer: '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

template <typename T>
std::vector<T> to_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<T>(to_int(key, trim(item))));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

// Returns true when the key belongs to the synth-stream section and was
// consumed. `shift_ms` is stream-2 only.
bool apply_workload_key(SynthConfig& w, const std::string& sub,
                        const std::string& key, const std::string& v) {
  if (sub == "lambda_per_ms") {
    w.lambda_per_ms = to_double(key, v);
  } else if (sub == "short_fraction") {
    w.short_fraction = to_double(key, v);
  } else if (sub == "short_fraction_later") {
    w.short_fraction_later = to_double(key, v);
  } else if (sub == "short_lo") {
    w.short_len.lo = to_int(key, v);
  } else if (sub == "short_hi") {
    w.short_len.hi = to_int(key, v);
  } else if (sub == "long_lo") {
    w.long_len.lo = to_int(key, v);
  } else if (sub == "long_hi") {
    w.long_len.hi = to_int(key, v);
  } else if (sub == "turns_lo") {
    w.turns_per_session.lo = static_cast<int>(to_int(key, v));
  } else if (sub == "turns_hi") {
    w.turns_per_session.hi = static_cast<int>(to_int(key, v));
  } else if (sub == "slo_offset_ms") {
    w.slo_offset_ms = to_double(key, v);
  } else if (sub == "duration_ms") {
    w.duration_ms = to_double(key, v);
  } else if (sub == "seed") {
    w.seed = to_uint(key, v);
  } else {
    return false;
  }
  return true;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty key");
    }
    if (out.count(key)) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    }
    out[key] = value;
  }
  return out;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_overrides(ConfigMap& base, const ConfigMap& overrides) {
  for (const auto& [k, v] : overrides) base[k] = v;
}

Scenario build_scenario(const ConfigMap& cfg) {
  Scenario sc;

  // The model preset is a baseline that explicit grid keys may refine,
  // so apply it before walking the map.
  if (auto it = cfg.find("grid.model_preset"); it != cfg.end()) {
    const std::string& p = it->second;
    if (p == "7b") {
      sc.grid.mem_per_graph_bytes = 228.0 * 1024 * 1024;
    } else if (p == "14b") {
      sc.grid.mem_per_graph_bytes = 240.0 * 1024 * 1024;
    } else if (p == "32b") {
      sc.grid.mem_per_graph_bytes = 277.0 * 1024 * 1024;
    } else {
      throw ConfigError("grid.model_preset: unknown preset '" + p +
                        "' (expected 7b, 14b, or 32b)");
    }
  }

  for (const auto& [key, v] : cfg) {
    const size_t dot = key.find('.');
    const std::string sect = dot == std::string::npos ? key : key.substr(0, dot);
    const std::string sub = dot == std::string::npos ? "" : key.substr(dot + 1);

    if (key == "grid.model_preset") continue;

    if (sect == "sim") {
      if (sub == "instances") {
        sc.sim.n_instances = static_cast<int>(to_int(key, v));
      } else if (sub == "policy") {
        sc.sim.policy = parse_policy(v);
      } else if (sub == "disagg") {
        sc.sim.disagg = parse_disagg(v);
      } else if (sub == "controller") {
        sc.sim.controller_on = to_bool(key, v);
      } else if (sub == "seed") {
        sc.sim.seed = to_uint(key, v);
      } else if (sub == "duration_ms") {
        sc.sim.duration_ms = to_double(key, v);
      } else if (sub == "slo_ms") {
        sc.sim.slo_ms = to_double(key, v);
      } else if (sub == "initial_short_instances") {
        sc.sim.initial_short_instances = static_cast<int>(to_int(key, v));
      } else if (sub == "token_budget") {
        sc.sim.unified_token_budget = to_int(key, v);
      } else if (sub == "max_batch") {
        sc.sim.unified_max_batch = static_cast<int>(to_int(key, v));
      } else if (sub == "startup_delay_ms") {
        sc.sim.startup_delay_ms = to_double(key, v);
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } else if (sect == "cost") {
      if (sub == "alpha") {
        sc.cost.alpha = to_double(key, v);
      } else if (sub == "beta") {
        sc.cost.beta = to_double(key, v);
      } else if (sub == "gamma_w") {
        sc.cost.gamma_w = to_double(key, v);
      } else if (sub == "gamma_r") {
        sc.cost.gamma_r = to_double(key, v);
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } else if (sect == "exec") {
      if (sub == "kappa_graph_ms") {
        sc.overheads.kappa_graph_ms = to_double(key, v);
      } else if (sub == "kappa_std_ms") {
        sc.overheads.kappa_std_ms = to_double(key, v);
      } else if (sub == "eta") {
        sc.overheads.eta = to_double(key, v);
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } else if (sect == "roofline") {
      if (sub == "p_peak") {
        sc.roofline.p_peak = to_double(key, v);
      } else if (sub == "b_mem") {
        sc.roofline.b_mem = to_double(key, v);
      } else if (sub == "bytes_per_token") {
        sc.roofline.bytes_per_token = to_double(key, v);
      } else if (sub == "ops_per_token") {
        sc.roofline.ops_per_token = to_double(key, v);
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } else if (sect == "sched") {
      if (sub == "w_min_ms") {
        sc.sched.w_min_ms = to_double(key, v);
      } else if (sub == "w_max_ms") {
        sc.sched.w_max_ms = to_double(key, v);
      } else if (sub == "sigma_ms") {
        sc.sched.sigma_ms = to_double(key, v);
      } else if (sub == "delta_ms") {
        sc.sched.delta_ms = to_double(key, v);
      } else if (sub == "t_max_ms") {
        sc.sched.t_max_ms = to_double(key, v);
      } else if (sub == "epsilon_per_ms") {
        sc.sched.epsilon_per_ms = to_double(key, v);
      } else if (sub == "m_s_tokens") {
        sc.sched.m_s_tokens = to_int(key, v);
      } else if (sub == "c_l_tokens") {
        sc.sched.c_l_tokens = to_int(key, v);
      } else if (sub == "mode") {
        if (v == "sla") {
          sc.sched.mode = SchedMode::kSla;
        } else if (v == "deadline_free") {
          sc.sched.mode = SchedMode::kDeadlineFree;
        } else {
          throw ConfigError("sched.mode: expected sla or deadline_free");
        }
      } else if (sub == "l_m_first") {
        sc.sched.l_m_first = to_int(key, v);
      } else if (sub == "l_m_re") {
        sc.sched.l_m_re = to_int(key, v);
      } else if (sub == "s_hat_init_ms") {
        sc.sched.s_hat_init_ms = to_double(key, v);
      } else if (sub == "ewma_decay") {
        sc.sched.ewma_decay = to_double(key, v);
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } else if (sect == "grid") {
      if (sub == "lengths") {
        sc.grid.lengths = to_list<Tokens>(key, v);
      } else if (sub == "depths") {
        sc.grid.depths = to_list<int>(key, v);
      } else if (sub == "mem_per_graph_mb") {
        sc.grid.mem_per_graph_bytes = to_double(key, v) * 1024 * 1024;
      } else if (sub == "mem_budget_mb") {
        sc.grid.mem_budget_bytes = to_double(key, v) * 1024 * 1024;
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } else if (sect == "ctrl") {
      if (sub == "dt_ms") {
        sc.ctrl.dt_ms = to_double(key, v);
      } else if (sub == "t_cool_ms") {
        sc.ctrl.t_cool_ms = to_double(key, v);
      } else if (sub == "tau_hyst") {
        sc.ctrl.tau_hyst = to_double(key, v);
      } else if (sub == "n_min") {
        sc.ctrl.n_min = static_cast<int>(to_int(key, v));
      } else if (sub == "w_q") {
        sc.ctrl.w_q = to_double(key, v);
      } else if (sub == "w_e") {
        sc.ctrl.w_e = to_double(key, v);
      } else if (sub == "w_u") {
        sc.ctrl.w_u = to_double(key, v);
      } else if (sub == "percentile") {
        sc.ctrl.aggregator_percentile = static_cast<int>(to_int(key, v));
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } else if (sect == "workload") {
      if (!apply_workload_key(sc.workload, sub, key, v)) {
        throw ConfigError("unknown config key: " + key);
      }
    } else if (sect == "workload2") {
      if (!sc.workload2) sc.workload2.emplace();
      if (sub == "shift_ms") {
        sc.workload2_shift_ms = to_double(key, v);
      } else if (!apply_workload_key(*sc.workload2, sub, key, v)) {
        throw ConfigError("unknown config key: " + key);
      }
    } else if (sect == "trace") {
      if (sub == "path") {
        sc.trace_path = v;
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }
  return sc;
}

std::vector<Request> build_workload(const Scenario& sc) {
  if (sc.trace_path) return load_trace(*sc.trace_path);
  const double dur1 =
      sc.workload.duration_ms.value_or(sc.sim.duration_ms);
  std::vector<Request> reqs = synth_stream(sc.workload, dur1);
  if (sc.workload2) {
    const double shift = sc.workload2_shift_ms;
    const double dur2 = sc.workload2->duration_ms.value_or(
        std::max(0.0, sc.sim.duration_ms - shift));
    std::vector<Request> s2 =
        shift_stream(synth_stream(*sc.workload2, dur2), shift);
    reqs = merge_streams(std::move(reqs), std::move(s2));
  }
  return reqs;
}

void apply_sweep_param(ConfigMap& cfg, const std::string& param,
                       double value) {
  char buf[64];
  auto fmt = [&](double x) {
    snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  if (param == "short_concurrency" || param == "long_concurrency") {
    const std::string key = param == "short_concurrency"
                                ? "workload.lambda_per_ms"
                                : "workload2.lambda_per_ms";
    double base = SynthConfig{}.lambda_per_ms;
    if (auto it = cfg.find(key); it != cfg.end()) {
      base = to_double(key, it->second);
    }
    cfg[key] = fmt(base * value);
    return;
  }
  cfg[param] = fmt(value);
}

RunResult run_scenario(const Scenario& sc) {
  const std::vector<Request> reqs = build_workload(sc);
  return run(sc.sim, reqs, sc.cost, sc.overheads, sc.sched, sc.grid,
             sc.ctrl);
}

}  // namespace prefillsim
