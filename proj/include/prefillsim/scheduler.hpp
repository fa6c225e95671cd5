#pragma once

// Short-prefill batching: graph-shape grid lookup, waiting-window
// arithmetic, the adaptive wait/depth dispatch rule, the deadline-free
// token-threshold rule, and fixed-size chunking for long prefills.

#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "prefillsim/cost_model.hpp"
#include "prefillsim/types.hpp"
#include "prefillsim/workload.hpp"

namespace prefillsim {

// Captured execution shapes: the cross product lengths x depths, each
// costing mem_per_graph bytes. Shapes are usable only when one graph fits
// the budget.
struct GraphGrid {
  std::vector<Tokens> lengths{8, 16, 32, 64, 128, 256};
  std::vector<int> depths{1, 2, 4, 8, 16, 32, 64};
  double mem_per_graph_bytes = 240.0 * 1024 * 1024;  // 14B-model preset
  double mem_budget_bytes = 16.0 * 1024 * 1024 * 1024;

  Tokens max_length() const { return lengths.back(); }
  int max_depth() const { return depths.back(); }
  bool graphs_enabled() const {
    return mem_per_graph_bytes <= mem_budget_bytes;
  }
};

void validate(const GraphGrid& g);

enum class SchedMode { kSla, kDeadlineFree };

struct SchedConfig {
  double w_min_ms = 1.0;
  double w_max_ms = 50.0;
  double sigma_ms = 10.0;    // slack threshold forcing dispatch
  double delta_ms = 5.0;     // safety margin inside the SLA window
  double t_max_ms = 100.0;   // head-of-line wait cap
  double epsilon_per_ms = 1e-6;  // rate floor for the graph window
  Tokens m_s_tokens = 2048;  // token threshold, deadline-free mode
  Tokens c_l_tokens = 512;   // long-prefill chunk size
  SchedMode mode = SchedMode::kSla;
  Tokens l_m_first = 256;    // Short/Long boundary, first prefill
  Tokens l_m_re = 256;       // Short/Long boundary, re-prefill
  double s_hat_init_ms = 1.0;
  double ewma_decay = 0.2;
};

void validate(const SchedConfig& c);

// Adaptive scheduler state. w/d follow the two post-dispatch update
// branches (fill target reached -> learn the fill time; under-filled ->
// lower the depth target). s_hat/r_hat are EWMA estimators fed by
// observe_service / round accounting. The round_* fields track the
// currently accumulating batch.
struct AwdState {
  double w = 0;       // learned waiting window, ms
  int d = 1;          // depth target
  double s_hat = 0;   // per-slot service estimate, ms
  double r_hat = 0;   // short arrival rate estimate, 1/ms

  bool round_open = false;
  double round_start = 0;
  int arrivals_in_round = 0;
  std::uint64_t round_id = 0;
  double next_check = 0;  // earliest time a timer should re-evaluate
};

// Fresh state: w at w_max, d at the deepest shape fitting the budget.
AwdState make_awd_state(const SchedConfig& cfg, const GraphGrid& grid);

enum class DispatchReason {
  kDepthReached,
  kWindowExpired,
  kSlaBreak,
  kHolCap,
  kTokenMax,
};

const char* to_string(DispatchReason r);

struct BatchPlan {
  std::vector<RequestId> members;
  BatchShape shape;
  double dispatch_ms = 0;
  DispatchReason reason = DispatchReason::kDepthReached;
  Tokens real_tokens = 0;  // unpadded sum of member lengths
};

// Smallest grid length >= L; empty when L exceeds the grid.
std::optional<Tokens> bucket_of(Tokens new_tokens, const GraphGrid& grid);

// Cheapest captured shape covering the candidate lengths: minimize
// length*depth - sum(L), ties to smaller depth then smaller length.
// Empty when no shape qualifies (too long, too deep, or no budget).
std::optional<BatchShape> nearest_graph(std::span<const Tokens> lengths,
                                        const GraphGrid& grid);

// Candidate batch as queue indices: the head-of-line request's bucket
// first, then larger grid buckets, FIFO within each, capped at `cap`.
// A head beyond the grid groups only with other beyond-grid requests.
std::vector<size_t> group_candidates(const std::deque<Request>& queue,
                                     const GraphGrid& grid, int cap);

// max(0, min over deadline-carrying pending requests of
// (deadline - now - s_hat) - delta); w_max when nothing constrains.
double sla_window(const std::deque<Request>& queue, double now,
                  const AwdState& st, const SchedConfig& cfg);

// max(0, d - current_depth) / max(r_hat, epsilon).
double graph_window(const AwdState& st, int current_depth,
                    const SchedConfig& cfg);

// clip(min(sla, graph), [w_min, w_max]).
double combined_window(const std::deque<Request>& queue, double now,
                       int current_depth, const AwdState& st,
                       const SchedConfig& cfg);

double clip_window(double w, const SchedConfig& cfg);

// Post-dispatch state update: depth target reached -> w <- clip(tau_fill);
// otherwise d <- depth. Also folds the round's arrival count into r_hat.
void awd_update_after_dispatch(AwdState& st, int depth, double tau_fill,
                               const SchedConfig& cfg);

// EWMA update of the per-slot service estimate from an observed batch.
void observe_service(AwdState& st, double service_ms, int depth,
                     const SchedConfig& cfg);

struct AwdDecision {
  std::optional<BatchPlan> plan;
  // When no plan: absolute time at which a timer should re-evaluate
  // (infinity when the queue is empty).
  double next_check_ms = 0;
};

// One decision epoch in sla mode. Opens a round when needed, dispatches
// when the depth target is met, a deadline is about to slip (slack <=
// sigma over candidates plus the next queued request), the head-of-line
// wait exceeds t_max, or the effective window has expired. The caller
// removes plan members from the queue.
AwdDecision awd_step(AwdState& st, const std::deque<Request>& queue,
                     double now, const GraphGrid& grid,
                     const SchedConfig& cfg);

// Deadline-free admission: dispatch once the candidate batch reaches
// m_s unpadded tokens, or unconditionally when the head-of-line request
// has waited past t_max.
AwdDecision token_max_admit(AwdState& st, const std::deque<Request>& queue,
                            double now, const GraphGrid& grid,
                            const SchedConfig& cfg);

struct ChunkDesc {
  int index = 0;      // 1-based
  Tokens tokens = 0;  // chunk length
  Tokens history = 0; // effective context: H + preceding chunk tokens
};

// Split a long prefill into ceil(L / c_l) chunks; chunk k covers tokens
// ((k-1)*c_l, min(k*c_l, L)] and sees history H + (k-1)*c_l.
std::vector<ChunkDesc> long_chunk_dispatch(const Request& r,
                                           const SchedConfig& cfg);

}  // namespace prefillsim
