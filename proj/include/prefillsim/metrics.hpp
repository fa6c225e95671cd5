#pragma once

#include <span>
#include <stdexcept>
#include <string>

#include "prefillsim/event_log.hpp"

namespace prefillsim {

struct EmptySamples : std::runtime_error {
  EmptySamples() : std::runtime_error("no samples") {}
};

// Nearest-rank percentile: ascending sort, value at rank ceil(q/100 * n),
// 1-based. q in (0, 100].
double percentile(std::span<const double> samples, double q);

// Fraction of samples strictly above the target.
double slo_violation_rate(std::span<const double> ttfts_ms, double slo_ms);

struct ClassMetrics {
  std::int64_t completed = 0;
  double ttft_mean_ms = 0;
  double ttft_p50_ms = 0;
  double ttft_p90_ms = 0;
  double ttft_p99_ms = 0;
  double rps = 0;                // completions per second of active interval
  double slo_violation = 0;      // fraction with TTFT > SLO
  double mean_wait_ms = 0;       // first dispatch minus arrival
  std::int64_t batches = 0;      // kernel launches (chunks count singly)
  double mean_depth = 0;         // real members per launch
  double graph_hit_rate = 0;     // graph launches / launches
  double padding_overhead = 0;   // padded tokens / real tokens - 1
};

struct MetricsReport {
  double slo_ms = 400;
  double active_ms = 0;  // first arrival to last completion
  std::int64_t arrivals = 0;
  std::int64_t migrations = 0;
  ClassMetrics overall;
  ClassMetrics short_cls;
  ClassMetrics long_cls;
};

// Single source of truth: every metric is recomputed from the records.
MetricsReport metrics_from_log(std::span<const LogRecord> log, double slo_ms);

// Stable serialization: fixed key order, %.6f numbers.
std::string to_json(const MetricsReport& m);
void write_metrics(const std::string& path, const MetricsReport& m);

}  // namespace prefillsim
