#include "prefillsim/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace prefillsim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void validate(const GraphGrid& g) {
  if (g.lengths.empty() || g.depths.empty()) {
    throw ConfigError("graph grid must not be empty");
  }
  if (!std::is_sorted(g.lengths.begin(), g.lengths.end()) ||
      !std::is_sorted(g.depths.begin(), g.depths.end())) {
    throw ConfigError("graph grid axes must be ascending");
  }
  if (g.lengths.front() < 1 || g.depths.front() < 1) {
    throw ConfigError("graph grid entries must be >= 1");
  }
  if (g.mem_per_graph_bytes <= 0 || g.mem_budget_bytes < 0) {
    throw ConfigError("graph memory sizes must be positive");
  }
}

void validate(const SchedConfig& c) {
  if (!(c.w_min_ms >= 0) || c.w_max_ms < c.w_min_ms) {
    throw ConfigError("need 0 <= w_min <= w_max");
  }
  for (double v : {c.sigma_ms, c.delta_ms, c.t_max_ms}) {
    if (v < 0) throw ConfigError("scheduler thresholds must be >= 0");
  }
  if (!(c.epsilon_per_ms > 0)) throw ConfigError("epsilon must be > 0");
  if (c.m_s_tokens < 1 || c.c_l_tokens < 1) {
    throw ConfigError("token thresholds must be >= 1");
  }
  if (c.l_m_first < 1 || c.l_m_re < 1) {
    throw ConfigError("class boundaries must be >= 1");
  }
  if (c.ewma_decay <= 0 || c.ewma_decay > 1) {
    throw ConfigError("ewma decay must be in (0,1]");
  }
}

AwdState make_awd_state(const SchedConfig& cfg, const GraphGrid& grid) {
  AwdState st;
  st.w = cfg.w_max_ms;
  st.d = grid.max_depth();
  st.s_hat = cfg.s_hat_init_ms;
  st.r_hat = 0;
  st.next_check = kInf;
  return st;
}

const char* to_string(DispatchReason r) {
  switch (r) {
    case DispatchReason::kDepthReached: return "depth_reached";
    case DispatchReason::kWindowExpired: return "window_expired";
    case DispatchReason::kSlaBreak: return "sla_break";
    case DispatchReason::kHolCap: return "hol_cap";
    case DispatchReason::kTokenMax: return "token_max";
  }
  return "?";
}

std::optional<Tokens> bucket_of(Tokens L, const GraphGrid& grid) {
  auto it = std::lower_bound(grid.lengths.begin(), grid.lengths.end(), L);
  if (it == grid.lengths.end()) return std::nullopt;
  return *it;
}

std::optional<BatchShape> nearest_graph(std::span<const Tokens> lengths,
                                        const GraphGrid& grid) {
  if (lengths.empty()) return std::nullopt;
  if (!grid.graphs_enabled()) return std::nullopt;
  const Tokens max_len = *std::max_element(lengths.begin(), lengths.end());
  const int count = static_cast<int>(lengths.size());
  Tokens real = 0;
  for (Tokens l : lengths) real += l;

  // Exhaustive scan of the (<= 42-entry) grid; cheapest padding wins,
  // ties prefer smaller depth, then smaller length.
  std::optional<BatchShape> best;
  Tokens best_cost = 0;
  for (Tokens len : grid.lengths) {
    if (len < max_len) continue;
    for (int dep : grid.depths) {
      if (dep < count) continue;
      const Tokens cost = len * dep - real;
      if (!best || cost < best_cost ||
          (cost == best_cost && (dep < best->depth ||
                                 (dep == best->depth && len < best->l_pad)))) {
        best = BatchShape{len, dep, ShapeKind::kGraph};
        best_cost = cost;
      }
    }
  }
  return best;
}

std::vector<size_t> group_candidates(const std::deque<Request>& queue,
                                     const GraphGrid& grid, int cap) {
  std::vector<size_t> out;
  if (queue.empty() || cap < 1) return out;

  const auto head_bucket = bucket_of(queue.front().new_tokens, grid);
  if (!head_bucket) {
    // Beyond-grid head: batch only with other beyond-grid requests.
    for (size_t i = 0; i < queue.size(); ++i) {
      if (!bucket_of(queue[i].new_tokens, grid)) {
        out.push_back(i);
        if (static_cast<int>(out.size()) >= cap) return out;
      }
    }
    return out;
  }
  // Head's bucket first, then larger grid buckets, FIFO within each.
  for (auto b = std::lower_bound(grid.lengths.begin(), grid.lengths.end(),
                                 *head_bucket);
       b != grid.lengths.end(); ++b) {
    for (size_t i = 0; i < queue.size(); ++i) {
      const auto bk = bucket_of(queue[i].new_tokens, grid);
      if (bk && *bk == *b) {
        out.push_back(i);
        if (static_cast<int>(out.size()) >= cap) return out;
      }
    }
  }
  return out;
}

double clip_window(double w, const SchedConfig& cfg) {
  return std::clamp(w, cfg.w_min_ms, cfg.w_max_ms);
}

double sla_window(const std::deque<Request>& queue, double now,
                  const AwdState& st, const SchedConfig& cfg) {
  double min_slack = kInf;
  for (const auto& r : queue) {
    if (!r.deadline_ms) continue;
    min_slack = std::min(min_slack, *r.deadline_ms - now - st.s_hat);
  }
  if (min_slack == kInf) return cfg.w_max_ms;  // nothing constrains
  return std::max(0.0, min_slack - cfg.delta_ms);
}

double graph_window(const AwdState& st, int current_depth,
                    const SchedConfig& cfg) {
  const double deficit = std::max(0, st.d - current_depth);
  return deficit / std::max(st.r_hat, cfg.epsilon_per_ms);
}

double combined_window(const std::deque<Request>& queue, double now,
                       int current_depth, const AwdState& st,
                       const SchedConfig& cfg) {
  return clip_window(std::min(sla_window(queue, now, st, cfg),
                              graph_window(st, current_depth, cfg)),
                     cfg);
}

void awd_update_after_dispatch(AwdState& st, int depth, double tau_fill,
                               const SchedConfig& cfg) {
  if (depth >= st.d) {
    st.w = clip_window(tau_fill, cfg);
  } else {
    st.d = std::max(1, depth);
  }
  if (tau_fill > 0 && st.arrivals_in_round > 0) {
    const double rate = st.arrivals_in_round / tau_fill;
    st.r_hat = (1.0 - cfg.ewma_decay) * st.r_hat + cfg.ewma_decay * rate;
  }
  st.round_open = false;
  st.arrivals_in_round = 0;
  st.round_id += 1;
  st.next_check = kInf;
}

void observe_service(AwdState& st, double service_ms, int depth,
                     const SchedConfig& cfg) {
  if (depth < 1) return;
  const double per_slot = service_ms / depth;
  st.s_hat = (1.0 - cfg.ewma_decay) * st.s_hat + cfg.ewma_decay * per_slot;
}

namespace {

BatchPlan make_plan(const std::deque<Request>& queue,
                    std::span<const size_t> picked, double now,
                    DispatchReason reason, const GraphGrid& grid) {
  BatchPlan plan;
  plan.dispatch_ms = now;
  plan.reason = reason;
  std::vector<Tokens> lens;
  lens.reserve(picked.size());
  for (size_t i : picked) {
    plan.members.push_back(queue[i].id);
    lens.push_back(queue[i].new_tokens);
    plan.real_tokens += queue[i].new_tokens;
  }
  if (auto g = nearest_graph(lens, grid)) {
    plan.shape = *g;
  } else {
    plan.shape = BatchShape{*std::max_element(lens.begin(), lens.end()),
                            static_cast<int>(lens.size()),
                            ShapeKind::kStandard};
  }
  return plan;
}

double min_slack(const std::deque<Request>& queue,
                 std::span<const size_t> picked, double now,
                 const AwdState& st) {
  double slack = kInf;
  auto consider = [&](const Request& r) {
    if (r.deadline_ms) {
      slack = std::min(slack, *r.deadline_ms - (now + st.s_hat));
    }
  };
  for (size_t i : picked) consider(queue[i]);
  // ... plus the next queued request that would join (first index not
  // already picked; picked holds at most the depth cap, so this is cheap).
  std::vector<size_t> sorted(picked.begin(), picked.end());
  std::sort(sorted.begin(), sorted.end());
  for (size_t j = 0; j < queue.size(); ++j) {
    if (!std::binary_search(sorted.begin(), sorted.end(), j)) {
      consider(queue[j]);
      break;
    }
  }
  return slack;
}

}  // namespace

AwdDecision awd_step(AwdState& st, const std::deque<Request>& queue,
                     double now, const GraphGrid& grid,
                     const SchedConfig& cfg) {
  if (queue.empty()) {
    st.round_open = false;
    st.next_check = kInf;
    return {std::nullopt, kInf};
  }
  if (!st.round_open) {
    st.round_open = true;
    st.round_start = now;
    st.arrivals_in_round = 0;
    st.next_check = kInf;
  }

  const int cap = std::min(st.d, grid.max_depth());
  const auto picked = group_candidates(queue, grid, cap);
  const int depth = static_cast<int>(picked.size());

  auto dispatch = [&](DispatchReason reason) {
    BatchPlan plan = make_plan(queue, picked, now, reason, grid);
    const double tau = now - st.round_start;
    awd_update_after_dispatch(st, depth, tau, cfg);
    return AwdDecision{std::move(plan), kInf};
  };

  if (depth >= st.d) return dispatch(DispatchReason::kDepthReached);
  if (min_slack(queue, picked, now, st) <= cfg.sigma_ms) {
    return dispatch(DispatchReason::kSlaBreak);
  }
  const double hol_wait = now - queue.front().arrival_ms;
  if (hol_wait >= cfg.t_max_ms - 1e-9) {
    return dispatch(DispatchReason::kHolCap);
  }

  // Effective window this epoch: the two-part formula capped by the
  // learned window. The round's expiry target only tightens across
  // epochs, so a burst of arrivals cannot postpone dispatch.
  const double w_eff =
      clip_window(std::min({sla_window(queue, now, st, cfg),
                            graph_window(st, depth, cfg), st.w}),
                  cfg);
  const double target =
      std::min({st.next_check, now + w_eff,
                queue.front().arrival_ms + cfg.t_max_ms});
  if (now >= target - 1e-9) return dispatch(DispatchReason::kWindowExpired);
  st.next_check = target;
  return {std::nullopt, target};
}

AwdDecision token_max_admit(AwdState& st, const std::deque<Request>& queue,
                            double now, const GraphGrid& grid,
                            const SchedConfig& cfg) {
  if (queue.empty()) {
    st.round_open = false;
    st.next_check = kInf;
    return {std::nullopt, kInf};
  }
  if (!st.round_open) {
    st.round_open = true;
    st.round_start = now;
    st.arrivals_in_round = 0;
  }
  const auto picked = group_candidates(queue, grid, grid.max_depth());
  Tokens toks = 0;
  for (size_t i : picked) toks += queue[i].new_tokens;

  auto dispatch = [&](DispatchReason reason) {
    BatchPlan plan = make_plan(queue, picked, now, reason, grid);
    st.round_open = false;
    st.arrivals_in_round = 0;
    st.round_id += 1;
    st.next_check = kInf;
    return AwdDecision{std::move(plan), kInf};
  };

  if (toks >= cfg.m_s_tokens) return dispatch(DispatchReason::kTokenMax);
  if (now - queue.front().arrival_ms >= cfg.t_max_ms - 1e-9) {
    return dispatch(DispatchReason::kHolCap);
  }
  st.next_check = queue.front().arrival_ms + cfg.t_max_ms;
  return {std::nullopt, st.next_check};
}

std::vector<ChunkDesc> long_chunk_dispatch(const Request& r,
                                           const SchedConfig& cfg) {
  std::vector<ChunkDesc> chunks;
  const Tokens C = cfg.c_l_tokens;
  Tokens done = 0;
  int k = 1;
  while (done < r.new_tokens) {
    ChunkDesc c;
    c.index = k;
    c.tokens = std::min(C, r.new_tokens - done);
    c.history = r.history_tokens + done;
    chunks.push_back(c);
    done += c.tokens;
    ++k;
  }
  return chunks;
}

}  // namespace prefillsim
