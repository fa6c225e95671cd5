#include "prefillsim/metrics.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <limits>
#include <unordered_map>
#include <vector>

namespace prefillsim {

double percentile(std::span<const double> samples, double q) {
  if (samples.empty()) throw EmptySamples();
  if (!(q > 0) || q > 100) {
    throw std::invalid_argument("percentile rank must be in (0, 100]");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  // ceil(q/100 * n), nudged down first: q*n/100 in doubles can land a
  // hair above an integer (0.9 * 10) and pull the rank one too high.
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<size_t>(std::ceil(q * n / 100.0 - 1e-9));
  rank = std::clamp<size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

double slo_violation_rate(std::span<const double> ttfts_ms, double slo_ms) {
  if (ttfts_ms.empty()) throw EmptySamples();
  std::int64_t over = 0;
  for (double t : ttfts_ms) over += t > slo_ms ? 1 : 0;
  return static_cast<double>(over) / static_cast<double>(ttfts_ms.size());
}

namespace {

struct ReqInfo {
  double arrival = 0;
  double first_dispatch = -1;
  double completion = -1;
  bool is_long = false;
};

struct BatchAccum {
  std::int64_t batches = 0;
  std::int64_t graph_launches = 0;
  std::int64_t depth_sum = 0;
  Tokens real_sum = 0;
  Tokens padded_sum = 0;

  void add(const LogRecord& r) {
    batches += 1;
    graph_launches += r.graph ? 1 : 0;
    depth_sum += static_cast<std::int64_t>(r.reqs.size());
    real_sum += r.real_tokens;
    padded_sum += r.padded_tokens;
  }
};

ClassMetrics finish_class(const std::vector<double>& ttfts,
                          const std::vector<double>& waits,
                          const BatchAccum& b, double slo_ms,
                          double active_ms) {
  ClassMetrics m;
  m.completed = static_cast<std::int64_t>(ttfts.size());
  if (!ttfts.empty()) {
    double sum = 0;
    for (double t : ttfts) sum += t;
    m.ttft_mean_ms = sum / static_cast<double>(ttfts.size());
    m.ttft_p50_ms = percentile(ttfts, 50);
    m.ttft_p90_ms = percentile(ttfts, 90);
    m.ttft_p99_ms = percentile(ttfts, 99);
    m.slo_violation = slo_violation_rate(ttfts, slo_ms);
    if (active_ms > 0) {
      m.rps = 1000.0 * static_cast<double>(m.completed) / active_ms;
    }
  }
  if (!waits.empty()) {
    double sum = 0;
    for (double w : waits) sum += w;
    m.mean_wait_ms = sum / static_cast<double>(waits.size());
  }
  m.batches = b.batches;
  if (b.batches > 0) {
    m.mean_depth =
        static_cast<double>(b.depth_sum) / static_cast<double>(b.batches);
    m.graph_hit_rate = static_cast<double>(b.graph_launches) /
                       static_cast<double>(b.batches);
  }
  if (b.real_sum > 0) {
    m.padding_overhead = static_cast<double>(b.padded_sum) /
                             static_cast<double>(b.real_sum) -
                         1.0;
  }
  return m;
}

}  // namespace

MetricsReport metrics_from_log(std::span<const LogRecord> log,
                               double slo_ms) {
  MetricsReport rep;
  rep.slo_ms = slo_ms;

  std::unordered_map<RequestId, ReqInfo> info;
  std::vector<RequestId> arrival_order;
  BatchAccum batch_all, batch_short, batch_long;
  double first_arrival = std::numeric_limits<double>::infinity();
  double last_completion = -std::numeric_limits<double>::infinity();

  for (const auto& r : log) {
    switch (r.kind) {
      case EventKind::kArrival: {
        ReqInfo ri;
        ri.arrival = r.t;
        ri.is_long = r.cls == "long";
        info[r.req] = ri;
        arrival_order.push_back(r.req);
        rep.arrivals += 1;
        first_arrival = std::min(first_arrival, r.t);
        break;
      }
      case EventKind::kDispatch: {
        for (RequestId id : r.reqs) {
          auto it = info.find(id);
          if (it != info.end() && it->second.first_dispatch < 0) {
            it->second.first_dispatch = r.t;
          }
        }
        batch_all.add(r);
        if (r.cls == "short") batch_short.add(r);
        if (r.cls == "long") batch_long.add(r);
        break;
      }
      case EventKind::kBatchComplete: {
        if (!r.final_chunk) break;
        for (RequestId id : r.reqs) {
          auto it = info.find(id);
          if (it != info.end()) {
            it->second.completion = r.t;
            last_completion = std::max(last_completion, r.t);
          }
        }
        break;
      }
      case EventKind::kControllerTick:
        break;
      case EventKind::kMigration:
        rep.migrations += 1;
        break;
    }
  }

  if (std::isfinite(first_arrival) && last_completion > first_arrival) {
    rep.active_ms = last_completion - first_arrival;
  }

  // Aggregate in arrival order so double sums are reproducible.
  std::vector<double> ttft_all, ttft_s, ttft_l;
  std::vector<double> wait_all, wait_s, wait_l;
  for (RequestId id : arrival_order) {
    const ReqInfo& ri = info.at(id);
    if (ri.completion >= 0) {
      const double ttft = ri.completion - ri.arrival;
      ttft_all.push_back(ttft);
      (ri.is_long ? ttft_l : ttft_s).push_back(ttft);
    }
    if (ri.first_dispatch >= 0) {
      const double w = ri.first_dispatch - ri.arrival;
      wait_all.push_back(w);
      (ri.is_long ? wait_l : wait_s).push_back(w);
    }
  }

  rep.overall =
      finish_class(ttft_all, wait_all, batch_all, slo_ms, rep.active_ms);
  rep.short_cls =
      finish_class(ttft_s, wait_s, batch_short, slo_ms, rep.active_ms);
  rep.long_cls =
      finish_class(ttft_l, wait_l, batch_long, slo_ms, rep.active_ms);
  return rep;
}

namespace {

void append(std::string& out, const char* fmt, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, fmt);
  vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  out += buf;
}

void append_class(std::string& out, const char* name,
                  const ClassMetrics& m) {
  append(out, "  \"%s\": {\n", name);
  append(out, "    \"completed\": %" PRId64 ",\n", m.completed);
  append(out, "    \"ttft_mean_ms\": %.6f,\n", m.ttft_mean_ms);
  append(out, "    \"ttft_p50_ms\": %.6f,\n", m.ttft_p50_ms);
  append(out, "    \"ttft_p90_ms\": %.6f,\n", m.ttft_p90_ms);
  append(out, "    \"ttft_p99_ms\": %.6f,\n", m.ttft_p99_ms);
  append(out, "    \"rps\": %.6f,\n", m.rps);
  append(out, "    \"slo_violation\": %.6f,\n", m.slo_violation);
  append(out, "    \"mean_wait_ms\": %.6f,\n", m.mean_wait_ms);
  append(out, "    \"batches\": %" PRId64 ",\n", m.batches);
  append(out, "    \"mean_depth\": %.6f,\n", m.mean_depth);
  append(out, "    \"graph_hit_rate\": %.6f,\n", m.graph_hit_rate);
  append(out, "    \"padding_overhead\": %.6f\n", m.padding_overhead);
  out += "  }";
}

}  // namespace

std::string to_json(const MetricsReport& m) {
  std::string out = "{\n";
  append(out, "  \"slo_ms\": %.6f,\n", m.slo_ms);
  append(out, "  \"active_ms\": %.6f,\n", m.active_ms);
  append(out, "  \"arrivals\": %" PRId64 ",\n", m.arrivals);
  append(out, "  \"migrations\": %" PRId64 ",\n", m.migrations);
  append_class(out, "overall", m.overall);
  out += ",\n";
  append_class(out, "short", m.short_cls);
  out += ",\n";
  append_class(out, "long", m.long_cls);
  out += "\n}\n";
  return out;
}

void write_metrics(const std::string& path, const MetricsReport& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(m);
}

}  // namespace prefillsim
