// Command-line front end: run one scenario, sweep a parameter, print the
// closed-form queue predictions, fit cost coefficients from samples, or
// run the acceptance suite.

#include <CLI11.hpp>

#include <prefillsim/acceptance.hpp>
#include <prefillsim/config.hpp>
#include <prefillsim/cost_model.hpp>
#include <prefillsim/event_log.hpp>
#include <prefillsim/metrics.hpp>
#include <prefillsim/queueing.hpp>
#include <prefillsim/sim.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using prefillsim::ConfigMap;

struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::string> workload;
  std::optional<std::string> policy;
  std::optional<std::string> disagg;
  std::optional<int> instances;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration_ms;
  std::optional<double> slo_ms;
  std::string out = ".";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key=value scenario file");
  cmd->add_option("--workload", f.workload, "request trace (JSONL)");
  cmd->add_option("--policy", f.policy,
                  "laps | fcfs_unified | bucket_no_disagg");
  cmd->add_option("--disagg", f.disagg, "temporal | spatial");
  cmd->add_option("--instances", f.instances, "number of prefill instances");
  cmd->add_option("--seed", f.seed, "synthetic workload seed");
  cmd->add_option("--duration-ms", f.duration_ms, "arrival horizon, ms");
  cmd->add_option("--slo-ms", f.slo_ms, "TTFT target, ms (default 400)");
  cmd->add_option("--out", f.out, "output directory (default .)");
}

ConfigMap base_map(const CommonFlags& f) {
  ConfigMap cfg;
  if (f.config) cfg = prefillsim::parse_config_file(*f.config);
  ConfigMap ov;
  if (f.workload) ov["trace.path"] = *f.workload;
  if (f.policy) ov["sim.policy"] = *f.policy;
  if (f.disagg) ov["sim.disagg"] = *f.disagg;
  if (f.instances) ov["sim.instances"] = std::to_string(*f.instances);
  if (f.seed) ov["workload.seed"] = std::to_string(*f.seed);
  if (f.duration_ms) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *f.duration_ms);
    ov["sim.duration_ms"] = buf;
  }
  if (f.slo_ms) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *f.slo_ms);
    ov["sim.slo_ms"] = buf;
  }
  prefillsim::apply_overrides(cfg, ov);
  return cfg;
}

int cmd_simulate(const CommonFlags& f) {
  const ConfigMap cfg = base_map(f);
  const prefillsim::Scenario sc = prefillsim::build_scenario(cfg);
  const prefillsim::RunResult rr = prefillsim::run_scenario(sc);
  std::filesystem::create_directories(f.out);
  prefillsim::write_event_log(f.out + "/events.log", rr.log);
  prefillsim::write_metrics(f.out + "/metrics.json", rr.report);
  std::printf("completed %lld of %lld requests, %lld migrations\n",
              static_cast<long long>(rr.report.overall.completed),
              static_cast<long long>(rr.report.arrivals),
              static_cast<long long>(rr.report.migrations));
  std::printf(
      "overall ttft mean %.3f ms, p90 %.3f ms, slo violation %.4f,"
      " rps %.3f\n",
      rr.report.overall.ttft_mean_ms, rr.report.overall.ttft_p90_ms,
      rr.report.overall.slo_violation, rr.report.overall.rps);
  std::printf("wrote %s/events.log and %s/metrics.json\n", f.out.c_str(),
              f.out.c_str());
  return 0;
}

void csv_class(std::string& row, const prefillsim::ClassMetrics& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                ",%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%lld,%.6f,%.6f,%.6f",
                static_cast<long long>(c.completed), c.ttft_mean_ms,
                c.ttft_p50_ms, c.ttft_p90_ms, c.ttft_p99_ms, c.rps,
                c.slo_violation, c.mean_wait_ms,
                static_cast<long long>(c.batches), c.mean_depth,
                c.graph_hit_rate, c.padding_overhead);
  row += buf;
}

const char* kClassCols =
    "completed,ttft_mean_ms,ttft_p50_ms,ttft_p90_ms,ttft_p99_ms,rps,"
    "slo_violation,mean_wait_ms,batches,mean_depth,graph_hit_rate,"
    "padding_overhead";

int cmd_sweep(const CommonFlags& f, const std::string& param,
              const std::string& values_csv) {
  const ConfigMap base = base_map(f);
  std::vector<double> values;
  std::stringstream ss(values_csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  if (values.empty()) {
    std::fprintf(stderr, "sweep: --values parsed to an empty list\n");
    return 2;
  }
  std::sort(values.begin(), values.end());

  std::string csv = "param,value,arrivals,active_ms,migrations";
  for (const char* scope : {"overall_", "short_", "long_"}) {
    std::stringstream cols(kClassCols);
    std::string col;
    while (std::getline(cols, col, ',')) {
      csv += ',';
      csv += scope;
      csv += col;
    }
  }
  csv += '\n';
  for (double v : values) {
    ConfigMap cfg = base;  // fresh copy: scaling params read base values
    prefillsim::apply_sweep_param(cfg, param, v);
    const prefillsim::RunResult rr =
        prefillsim::run_scenario(prefillsim::build_scenario(cfg));
    char head[160];
    std::snprintf(head, sizeof head, "%s,%.6f,%lld,%.6f,%lld", param.c_str(),
                  v, static_cast<long long>(rr.report.arrivals),
                  rr.report.active_ms,
                  static_cast<long long>(rr.report.migrations));
    std::string row = head;
    csv_class(row, rr.report.overall);
    csv_class(row, rr.report.short_cls);
    csv_class(row, rr.report.long_cls);
    csv += row;
    csv += '\n';
  }
  std::filesystem::create_directories(f.out);
  const std::string path = f.out + "/sweep.csv";
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    std::fprintf(stderr, "sweep: cannot write %s\n", path.c_str());
    return 2;
  }
  os << csv;
  std::printf("wrote %s (%zu points)\n", path.c_str(), values.size());
  return 0;
}

int cmd_oracle(double lambda_per_ms, double p_short, double s_short_ms,
               double s_long_ms) {
  prefillsim::ServiceMix mix{lambda_per_ms, p_short, s_short_ms, s_long_ms};
  const double w =
      prefillsim::pk_wait(lambda_per_ms, mix.mean_service(),
                          mix.second_moment());
  const double dw = prefillsim::hol_penalty(mix);
  std::printf("rho %.6f\n", mix.utilization());
  std::printf("mean_service_ms %.6f\n", mix.mean_service());
  std::printf("pk_wait_ms %.6f\n", w);
  std::printf("hol_penalty_ms %.6f\n", dw);
  std::printf("normalized_latency_short %.6f\n",
              prefillsim::normalized_latency(s_short_ms, w));
  std::printf("normalized_latency_long %.6f\n",
              prefillsim::normalized_latency(s_long_ms, w));
  return 0;
}

int cmd_fit(const std::string& samples_path) {
  std::ifstream is(samples_path);
  if (!is) {
    std::fprintf(stderr, "fit: cannot read %s\n", samples_path.c_str());
    return 2;
  }
  std::vector<prefillsim::LatencySample> samples;
  std::string line;
  bool header = true;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (header) {  // expect L,H,t_comp_ms,t_mem_ms
      header = false;
      continue;
    }
    std::stringstream row(line);
    std::string cell;
    std::vector<double> nums;
    while (std::getline(row, cell, ',')) nums.push_back(std::stod(cell));
    if (nums.size() != 4) {
      std::fprintf(stderr, "fit: line %d needs 4 columns, got %zu\n", line_no,
                   nums.size());
      return 2;
    }
    samples.push_back({nums[0], nums[1], nums[2], nums[3]});
  }
  const prefillsim::CostParams p = prefillsim::fit_params(samples);
  std::printf("alpha %.10g\n", p.alpha);
  std::printf("beta %.10g\n", p.beta);
  std::printf("gamma_w %.10g\n", p.gamma_w);
  std::printf("gamma_r %.10g\n", p.gamma_r);
  std::printf("prefill_boundary_tokens %.3f\n",
              prefillsim::prefill_boundary(p));
  std::printf("reprefill_boundary_h1024_tokens %.3f\n",
              prefillsim::reprefill_boundary(p, 1024.0));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prefill-tier scheduling simulator"};
  app.require_subcommand(1);

  CommonFlags sim_f;
  CLI::App* sim = app.add_subcommand("simulate", "run one scenario");
  add_common(sim, sim_f);

  CommonFlags sweep_f;
  std::string sweep_param, sweep_values;
  CLI::App* sweep = app.add_subcommand("sweep", "vary one parameter");
  add_common(sweep, sweep_f);
  sweep->add_option("--param", sweep_param, "parameter name")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")
      ->required();

  double o_lambda = 0.25, o_p = 0.5, o_ss = 1.0, o_sl = 3.0;
  CLI::App* oracle =
      app.add_subcommand("oracle", "print closed-form queue predictions");
  oracle->add_option("--lambda-per-ms", o_lambda, "arrival rate, 1/ms");
  oracle->add_option("--p-short", o_p, "short-class probability");
  oracle->add_option("--s-short-ms", o_ss, "short service time, ms");
  oracle->add_option("--s-long-ms", o_sl, "long service time, ms");

  std::string fit_path;
  CLI::App* fit =
      app.add_subcommand("fit", "fit cost coefficients from a sample CSV");
  fit->add_option("--samples", fit_path,
                  "CSV with header L,H,t_comp_ms,t_mem_ms")
      ->required();

  CLI::App* validate =
      app.add_subcommand("validate", "run the acceptance suite");
  (void)validate;

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_f);
    if (sweep->parsed()) return cmd_sweep(sweep_f, sweep_param, sweep_values);
    if (oracle->parsed()) return cmd_oracle(o_lambda, o_p, o_ss, o_sl);
    if (fit->parsed()) return cmd_fit(fit_path);
    if (validate->parsed()) return prefillsim::acceptance_main();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
