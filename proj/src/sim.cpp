#include "prefillsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>
#include <unordered_set>

namespace prefillsim {

Policy parse_policy(const std::string& s) {
  if (s == "laps") return Policy::kLaps;
  if (s == "fcfs_unified") return Policy::kFcfsUnified;
  if (s == "bucket_no_disagg") return Policy::kBucketNoDisagg;
  throw ConfigError("unknown policy: " + s);
}

Disagg parse_disagg(const std::string& s) {
  if (s == "temporal") return Disagg::kTemporal;
  if (s == "spatial") return Disagg::kSpatial;
  throw ConfigError("unknown disaggregation mode: " + s);
}

const char* to_string(Policy p) {
  switch (p) {
    case Policy::kLaps: return "laps";
    case Policy::kFcfsUnified: return "fcfs_unified";
    case Policy::kBucketNoDisagg: return "bucket_no_disagg";
  }
  return "?";
}

const char* to_string(Disagg d) {
  return d == Disagg::kTemporal ? "temporal" : "spatial";
}

void validate(const SimConfig& c) {
  if (c.n_instances < 1) throw ConfigError("need at least one instance");
  if (c.policy == Policy::kLaps) {
    if (c.disagg == Disagg::kSpatial && c.n_instances < 2) {
      throw ConfigError("spatial disaggregation needs >= 2 instances");
    }
    if (c.disagg == Disagg::kTemporal && c.n_instances != 1) {
      throw ConfigError("temporal disaggregation runs on one instance");
    }
  }
  if (c.controller_on &&
      !(c.policy == Policy::kLaps && c.disagg == Disagg::kSpatial)) {
    throw ConfigError("the controller requires spatial pools");
  }
  if (!(c.duration_ms >= 0)) throw ConfigError("duration must be >= 0");
  if (!(c.slo_ms > 0)) throw ConfigError("slo must be > 0");
  if (c.unified_token_budget < 1) {
    throw ConfigError("token budget must be >= 1");
  }
  if (c.unified_max_batch < 1) throw ConfigError("max batch must be >= 1");
  if (c.startup_delay_ms < 0) {
    throw ConfigError("startup delay must be >= 0");
  }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class EvKind { kArrival, kWake, kComplete, kReady, kCtl };

struct Ev {
  double t = 0;
  std::int64_t seq = 0;
  EvKind kind = EvKind::kArrival;
  int inst = -1;
  size_t idx = 0;  // arrival cursor
};

struct EvAfter {
  bool operator()(const Ev& a, const Ev& b) const {
    if (a.t != b.t) return a.t > b.t;
    return a.seq > b.seq;
  }
};

struct InFlight {
  std::vector<RequestId> ids;
  double service_ms = 0;
  std::string cls;
  int chunk = 0;
  int chunks_total = 0;
  bool final_chunk = true;
  bool from_awd = false;
  int member_count = 0;
};

struct Inst {
  int id = 0;
  PoolKind pool = PoolKind::kShort;
  bool busy = false;
  double busy_until = 0;
  double service_start = 0;
  AwdState awd;
  InFlight in_flight;
  // long-prefill chunk chain in progress
  bool chaining = false;
  Request chain_req;
  std::vector<ChunkDesc> chunks;
  size_t next_chunk = 0;
  // controller accounting for the current period
  double busy_ms_period = 0;
  double late_sum_ms = 0;
  std::int64_t late_n = 0;
};

class Engine {
 public:
  Engine(const SimConfig& sim, const std::vector<Request>& requests,
         const CostParams& cost, const ExecOverheads& ov,
         const SchedConfig& sched, const GraphGrid& grid,
         const ControllerConfig& ctrl)
      : sim_(sim),
        reqs_(requests),
        cost_(cost),
        ov_(ov),
        sched_(sched),
        grid_(grid),
        ctrl_(ctrl) {}

  std::vector<LogRecord> run();

 private:
  bool is_laps() const { return sim_.policy == Policy::kLaps; }
  bool temporal() const {
    return is_laps() && sim_.disagg == Disagg::kTemporal;
  }

  const char* cls_of(const Request& r) const {
    return classify(r, sched_.l_m_first, sched_.l_m_re) == LengthClass::kLong
               ? "long"
               : "short";
  }

  std::string cls_of_members(const std::vector<Request>& members) const {
    bool any_short = false, any_long = false;
    for (const auto& r : members) {
      (classify(r, sched_.l_m_first, sched_.l_m_re) == LengthClass::kLong
           ? any_long
           : any_short) = true;
    }
    if (any_short && any_long) return "mixed";
    return any_long ? "long" : "short";
  }

  void push(double t, EvKind kind, int inst, size_t idx = 0) {
    heap_.push(Ev{t, push_seq_++, kind, inst, idx});
  }

  LogRecord fresh(EventKind kind) const {
    LogRecord r;
    r.t = now_;
    r.kind = kind;
    return r;
  }

  void commit(LogRecord r) {
    r.seq = static_cast<std::int64_t>(log_.size());
    log_.push_back(std::move(r));
  }

  std::deque<Request>& queue_for_short() {
    return is_laps() ? q_short_ : q_uni_;
  }

  void handle_arrival(size_t idx);
  void handle_complete(Inst& in);
  void handle_ctl();
  void poke(Inst& in);
  bool short_step(Inst& in);   // true when a batch was dispatched
  bool long_step(Inst& in);
  void fcfs_step(Inst& in);
  void start_awd_batch(Inst& in, const BatchPlan& plan,
                       std::deque<Request>& queue);
  void dispatch_chunk(Inst& in);
  void begin_service(Inst& in, double service_ms, InFlight fl);
  void schedule_wake(Inst& in, double t);
  bool work_remains() const;

  SimConfig sim_;
  const std::vector<Request>& reqs_;
  CostParams cost_;
  ExecOverheads ov_;
  SchedConfig sched_;
  GraphGrid grid_;
  ControllerConfig ctrl_;

  std::vector<Inst> inst_;
  std::deque<Request> q_short_, q_long_, q_uni_;
  std::priority_queue<Ev, std::vector<Ev>, EvAfter> heap_;
  std::int64_t push_seq_ = 0;
  double now_ = 0;
  size_t next_arrival_ = 0;
  std::vector<LogRecord> log_;
  std::unordered_map<RequestId, double> arrival_ms_;
  PoolState pools_;
  double period_start_ = 0;
};

bool Engine::work_remains() const {
  if (next_arrival_ < reqs_.size()) return true;
  if (!q_short_.empty() || !q_long_.empty() || !q_uni_.empty()) return true;
  for (const auto& in : inst_) {
    if (in.busy) return true;
  }
  return false;
}

void Engine::schedule_wake(Inst& in, double t) {
  if (!std::isfinite(t)) return;
  push(std::max(t, now_), EvKind::kWake, in.id);
}

void Engine::begin_service(Inst& in, double service_ms, InFlight fl) {
  in.busy = true;
  in.service_start = now_;
  in.busy_until = now_ + service_ms;
  in.in_flight = std::move(fl);
  in.in_flight.service_ms = service_ms;
  push(in.busy_until, EvKind::kComplete, in.id);
}

void Engine::start_awd_batch(Inst& in, const BatchPlan& plan,
                             std::deque<Request>& queue) {
  // Collect and remove the members in one pass over the queue.
  std::unordered_set<RequestId> mset(plan.members.begin(),
                                     plan.members.end());
  std::unordered_map<RequestId, Request> found;
  for (const auto& r : queue) {
    if (mset.count(r.id)) found.emplace(r.id, r);
  }
  std::erase_if(queue, [&](const Request& r) { return mset.count(r.id); });

  std::vector<Request> members;
  std::vector<MemberShape> shapes;
  members.reserve(plan.members.size());
  for (RequestId id : plan.members) {
    const Request& r = found.at(id);
    members.push_back(r);
    shapes.push_back({r.new_tokens, r.history_tokens});
  }
  // Graph shapes deeper than the member count run dummy rows; they cost
  // full padded-row time, which is exactly why shape choice matters.
  while (static_cast<int>(shapes.size()) < plan.shape.depth) {
    shapes.push_back({0, 0});
  }
  const double service = batch_service_time(plan.shape, shapes, cost_, ov_);
  const std::string cls = cls_of_members(members);

  LogRecord rec = fresh(EventKind::kDispatch);
  rec.inst = in.id;
  rec.reqs = plan.members;
  rec.cls = cls;
  rec.reason = to_string(plan.reason);
  rec.l_pad = plan.shape.l_pad;
  rec.depth = plan.shape.depth;
  rec.graph = plan.shape.kind == ShapeKind::kGraph;
  rec.real_tokens = plan.real_tokens;
  rec.padded_tokens = plan.shape.l_pad * plan.shape.depth;
  commit(std::move(rec));

  InFlight fl;
  fl.ids = plan.members;
  fl.cls = cls;
  fl.from_awd = true;
  fl.member_count = static_cast<int>(plan.members.size());
  begin_service(in, service, std::move(fl));
}

void Engine::dispatch_chunk(Inst& in) {
  const ChunkDesc c = in.chunks[in.next_chunk];
  in.next_chunk += 1;
  const bool last = in.next_chunk == in.chunks.size();
  const BatchShape shape{c.tokens, 1, ShapeKind::kStandard};
  const MemberShape ms{c.tokens, c.history};
  const double service = batch_service_time(shape, {&ms, 1}, cost_, ov_);

  LogRecord rec = fresh(EventKind::kDispatch);
  rec.inst = in.id;
  rec.reqs = {in.chain_req.id};
  rec.cls = "long";
  rec.reason = "long_chunk";
  rec.l_pad = c.tokens;
  rec.depth = 1;
  rec.graph = false;
  rec.real_tokens = c.tokens;
  rec.padded_tokens = c.tokens;
  rec.chunk = c.index;
  rec.chunks_total = static_cast<int>(in.chunks.size());
  commit(std::move(rec));

  InFlight fl;
  fl.ids = {in.chain_req.id};
  fl.cls = "long";
  fl.chunk = c.index;
  fl.chunks_total = static_cast<int>(in.chunks.size());
  fl.final_chunk = last;
  fl.member_count = 1;
  begin_service(in, service, std::move(fl));
}

bool Engine::long_step(Inst& in) {
  if (q_long_.empty()) return false;
  Request r = q_long_.front();
  q_long_.pop_front();
  in.chaining = true;
  in.chain_req = r;
  in.chunks = long_chunk_dispatch(r, sched_);
  in.next_chunk = 0;
  dispatch_chunk(in);
  return true;
}

bool Engine::short_step(Inst& in) {
  auto& queue = queue_for_short();
  AwdDecision dec = sched_.mode == SchedMode::kSla
                        ? awd_step(in.awd, queue, now_, grid_, sched_)
                        : token_max_admit(in.awd, queue, now_, grid_, sched_);
  if (dec.plan) {
    start_awd_batch(in, *dec.plan, queue);
    return true;
  }
  schedule_wake(in, dec.next_check_ms);
  return false;
}

void Engine::fcfs_step(Inst& in) {
  if (q_uni_.empty()) return;
  size_t count = 1;
  Tokens total = q_uni_.front().new_tokens;
  while (count < q_uni_.size() &&
         count < static_cast<size_t>(sim_.unified_max_batch)) {
    const Tokens next = q_uni_[count].new_tokens;
    if (total + next > sim_.unified_token_budget) break;
    total += next;
    count += 1;
  }
  std::vector<Request> members(q_uni_.begin(),
                               q_uni_.begin() + static_cast<long>(count));
  q_uni_.erase(q_uni_.begin(), q_uni_.begin() + static_cast<long>(count));

  std::vector<MemberShape> shapes;
  std::vector<RequestId> ids;
  Tokens max_len = 0;
  for (const auto& r : members) {
    shapes.push_back({r.new_tokens, r.history_tokens});
    ids.push_back(r.id);
    max_len = std::max(max_len, r.new_tokens);
  }
  const double service = packed_service_time(shapes, cost_, ov_);
  const std::string cls = cls_of_members(members);

  LogRecord rec = fresh(EventKind::kDispatch);
  rec.inst = in.id;
  rec.reqs = ids;
  rec.cls = cls;
  rec.reason = "fcfs_pack";
  rec.l_pad = max_len;
  rec.depth = static_cast<int>(count);
  rec.graph = false;
  rec.real_tokens = total;
  rec.padded_tokens = total;  // packed batches carry no padding
  commit(std::move(rec));

  InFlight fl;
  fl.ids = std::move(ids);
  fl.cls = cls;
  fl.member_count = static_cast<int>(count);
  begin_service(in, service, std::move(fl));
}

void Engine::poke(Inst& in) {
  if (in.busy) return;
  switch (sim_.policy) {
    case Policy::kFcfsUnified:
      fcfs_step(in);
      return;
    case Policy::kBucketNoDisagg:
      short_step(in);
      return;
    case Policy::kLaps:
      break;
  }
  if (!temporal()) {
    if (in.pool == PoolKind::kShort) {
      short_step(in);
    } else {
      long_step(in);
    }
    return;
  }
  // Temporal mode: one instance, two queues. Serve the class whose
  // head-of-line request is older; when the short scheduler prefers to
  // keep waiting, fill the gap with long work instead of idling.
  const bool hs = !q_short_.empty();
  const bool hl = !q_long_.empty();
  if (!hs && !hl) return;
  if (hs &&
      (!hl || q_short_.front().arrival_ms <= q_long_.front().arrival_ms)) {
    if (!short_step(in) && hl) long_step(in);
  } else {
    long_step(in);
  }
}

void Engine::handle_arrival(size_t idx) {
  const Request& r = reqs_[idx];
  arrival_ms_[r.id] = r.arrival_ms;
  const bool is_long =
      classify(r, sched_.l_m_first, sched_.l_m_re) == LengthClass::kLong;

  LogRecord rec = fresh(EventKind::kArrival);
  rec.req = r.id;
  rec.cls = is_long ? "long" : "short";
  rec.length = r.new_tokens;
  rec.history = r.history_tokens;
  rec.deadline_ms = r.deadline_ms;
  commit(std::move(rec));

  if (idx + 1 < reqs_.size()) {
    push(reqs_[idx + 1].arrival_ms, EvKind::kArrival, -1, idx + 1);
  }
  next_arrival_ = idx + 1;

  if (is_laps()) {
    (is_long ? q_long_ : q_short_).push_back(r);
  } else {
    q_uni_.push_back(r);
  }

  // Open rounds on the queue this request joined see one more arrival.
  const bool counts_for_awd = sim_.policy == Policy::kBucketNoDisagg ||
                              (is_laps() && !is_long);
  for (auto& in : inst_) {
    const bool serves = sim_.policy != Policy::kLaps || temporal() ||
                        (in.pool == (is_long ? PoolKind::kLong
                                             : PoolKind::kShort));
    if (counts_for_awd && serves && in.awd.round_open) {
      in.awd.arrivals_in_round += 1;
    }
  }
  for (auto& in : inst_) {
    const bool serves = sim_.policy != Policy::kLaps || temporal() ||
                        (in.pool == (is_long ? PoolKind::kLong
                                             : PoolKind::kShort));
    if (serves && !in.busy) poke(in);
  }
}

void Engine::handle_complete(Inst& in) {
  in.busy_ms_period += now_ - std::max(in.service_start, period_start_);
  const InFlight fl = std::move(in.in_flight);

  LogRecord rec = fresh(EventKind::kBatchComplete);
  rec.inst = in.id;
  rec.reqs = fl.ids;
  rec.cls = fl.cls;
  rec.service_ms = fl.service_ms;
  rec.chunk = fl.chunk;
  rec.chunks_total = fl.chunks_total;
  rec.final_chunk = fl.final_chunk;
  commit(std::move(rec));

  if (fl.from_awd) {
    observe_service(in.awd, fl.service_ms, fl.member_count, sched_);
  }
  if (fl.final_chunk) {
    for (RequestId id : fl.ids) {
      const double ttft = now_ - arrival_ms_.at(id);
      in.late_sum_ms += std::max(0.0, ttft - sim_.slo_ms);
      in.late_n += 1;
    }
  }

  in.busy = false;
  if (in.chaining) {
    if (in.next_chunk < in.chunks.size()) {
      dispatch_chunk(in);  // chunks run back to back
      return;
    }
    in.chaining = false;
    in.chunks.clear();
  }
  poke(in);
}

void Engine::handle_ctl() {
  const double dt = ctrl_.dt_ms;
  std::vector<double> psi(inst_.size(), 0.0);
  std::vector<double> psi_s, psi_l;
  const int n_s = pools_.n_short();
  const int n_l = pools_.n_long();
  for (auto& in : inst_) {
    if (in.busy) {
      in.busy_ms_period += now_ - std::max(in.service_start, period_start_);
    }
    InstanceStats st;
    st.u = std::clamp(in.busy_ms_period / dt, 0.0, 1.0);
    st.e = in.late_n > 0
               ? in.late_sum_ms / static_cast<double>(in.late_n)
               : 0.0;
    const bool is_short = in.pool == PoolKind::kShort;
    const double qlen = static_cast<double>(
        is_short ? q_short_.size() : q_long_.size());
    st.q = qlen / static_cast<double>(is_short ? n_s : n_l);
    psi[static_cast<size_t>(in.id)] = pressure(st, ctrl_);
    (is_short ? psi_s : psi_l).push_back(psi[static_cast<size_t>(in.id)]);
    in.busy_ms_period = 0;
    in.late_sum_ms = 0;
    in.late_n = 0;
  }
  const double p_s = aggregate(psi_s, ctrl_.aggregator_percentile);
  const double p_l = aggregate(psi_l, ctrl_.aggregator_percentile);
  const auto mig = decide(p_s, p_l, pools_, ctrl_, now_);

  int donor = -1;
  if (mig) {
    const PoolKind from = *mig == MigrationDir::kLongToShort
                              ? PoolKind::kLong
                              : PoolKind::kShort;
    double best = kInf;
    for (const auto& in : inst_) {
      if (in.pool != from) continue;
      if (psi[static_cast<size_t>(in.id)] < best) {
        best = psi[static_cast<size_t>(in.id)];
        donor = in.id;
      }
    }
    Inst& d = inst_[static_cast<size_t>(donor)];
    const PoolKind to = from == PoolKind::kLong ? PoolKind::kShort
                                                : PoolKind::kLong;
    d.pool = to;
    pools_.assignment[static_cast<size_t>(donor)] = to;
    // Any round on the old queue is abandoned; the in-flight batch, if
    // one is running, drains before the instance pulls new-pool work.
    d.awd.round_open = false;
    d.awd.arrivals_in_round = 0;
    d.awd.next_check = kInf;
  }

  LogRecord rec = fresh(EventKind::kControllerTick);
  rec.n_short = pools_.n_short();
  rec.n_long = pools_.n_long();
  rec.p_short = p_s;
  rec.p_long = p_l;
  rec.migrated = mig.has_value();
  commit(std::move(rec));

  if (mig) {
    LogRecord mrec = fresh(EventKind::kMigration);
    mrec.inst = donor;
    mrec.direction = to_string(*mig);
    mrec.n_short = pools_.n_short();
    mrec.n_long = pools_.n_long();
    commit(std::move(mrec));
    Inst& d = inst_[static_cast<size_t>(donor)];
    if (!d.busy) poke(d);
  }

  period_start_ = now_;
  if (work_remains()) push(now_ + dt, EvKind::kCtl, -1);
}

std::vector<LogRecord> Engine::run() {
  validate(sim_);
  validate(cost_);
  validate(ov_);
  validate(sched_);
  validate(grid_);
  if (sim_.controller_on) {
    validate(ctrl_, sim_.n_instances);
    if (ctrl_.n_min < 1) {
      throw ConfigError("the controller needs n_min >= 1 so both queues"
                        " always have a server");
    }
  }
  arrival_ms_.reserve(reqs_.size());

  const int n = sim_.n_instances;
  inst_.resize(static_cast<size_t>(n));
  pools_.assignment.assign(static_cast<size_t>(n), PoolKind::kShort);
  int n_short_init = n;
  if (is_laps() && sim_.disagg == Disagg::kSpatial) {
    n_short_init = sim_.initial_short_instances >= 0
                       ? sim_.initial_short_instances
                       : (n + 1) / 2;
    const int floor_per_pool =
        sim_.controller_on ? std::max(1, ctrl_.n_min) : 1;
    if (n_short_init < floor_per_pool ||
        n - n_short_init < floor_per_pool) {
      throw ConfigError("initial pool split leaves a pool too small");
    }
  }
  for (int i = 0; i < n; ++i) {
    Inst& in = inst_[static_cast<size_t>(i)];
    in.id = i;
    in.pool = i < n_short_init ? PoolKind::kShort : PoolKind::kLong;
    pools_.assignment[static_cast<size_t>(i)] = in.pool;
    in.awd = make_awd_state(sched_, grid_);
    if (sim_.startup_delay_ms > 0) {
      in.busy = true;
      in.service_start = 0;
      in.busy_until = sim_.startup_delay_ms;
      push(sim_.startup_delay_ms, EvKind::kReady, i);
    }
  }

  for (size_t i = 1; i < reqs_.size(); ++i) {
    if (reqs_[i].arrival_ms < reqs_[i - 1].arrival_ms) {
      throw ConfigError("requests must be sorted by arrival time");
    }
  }
  if (!reqs_.empty()) push(reqs_[0].arrival_ms, EvKind::kArrival, -1, 0);
  if (sim_.controller_on) push(ctrl_.dt_ms, EvKind::kCtl, -1);

  while (!heap_.empty()) {
    const Ev ev = heap_.top();
    heap_.pop();
    now_ = ev.t;
    switch (ev.kind) {
      case EvKind::kArrival:
        handle_arrival(ev.idx);
        break;
      case EvKind::kWake: {
        Inst& in = inst_[static_cast<size_t>(ev.inst)];
        if (!in.busy) poke(in);
        break;
      }
      case EvKind::kComplete:
        handle_complete(inst_[static_cast<size_t>(ev.inst)]);
        break;
      case EvKind::kReady: {
        Inst& in = inst_[static_cast<size_t>(ev.inst)];
        in.busy_ms_period += now_ - std::max(in.service_start, period_start_);
        in.busy = false;
        poke(in);
        break;
      }
      case EvKind::kCtl:
        handle_ctl();
        break;
    }
  }

  if (work_remains()) {
    throw std::logic_error("simulation stalled with work outstanding");
  }
  return log_;
}

}  // namespace

RunResult run(const SimConfig& sim, const std::vector<Request>& requests,
              const CostParams& cost, const ExecOverheads& overheads,
              const SchedConfig& sched, const GraphGrid& grid,
              const ControllerConfig& ctrl) {
  Engine eng(sim, requests, cost, overheads, sched, grid, ctrl);
  RunResult out;
  out.log = eng.run();
  out.report = metrics_from_log(out.log, sim.slo_ms);
  return out;
}

}  // namespace prefillsim
