#include <prefillsim/acceptance.hpp>

#include <prefillsim/controller.hpp>
#include <prefillsim/cost_model.hpp>
#include <prefillsim/event_log.hpp>
#include <prefillsim/metrics.hpp>
#include <prefillsim/queueing.hpp>
#include <prefillsim/scheduler.hpp>
#include <prefillsim/sim.hpp>
#include <prefillsim/workload.hpp>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <deque>
#include <random>
#include <string>
#include <vector>

namespace prefillsim {
namespace {

std::string strf(const char* fmt, ...) {
  char buf[768];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return std::string(buf);
}

double rel_err(double got, double want) {
  return std::fabs(got - want) / std::fabs(want);
}

bool near(double got, double want) {
  return std::fabs(got - want) <= 1e-9 * std::max(1.0, std::fabs(want));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// Sub-check accumulator for the multi-assert criteria; keeps the first
// failing description so a one-line report stays diagnosable.
struct Checker {
  int total = 0;
  int bad = 0;
  std::string first;
  void expect(bool ok, const std::string& what) {
    ++total;
    if (!ok && bad++ == 0) first = what;
  }
  std::string summary() const {
    if (bad == 0) return strf("%d/%d sub-checks ok", total, total);
    return strf("%d/%d sub-checks failed; first: %s", bad, total,
                first.c_str());
  }
};

// Uniform/normal draws over the raw 64-bit generator output so results
// do not depend on the standard library's distribution implementations.
struct Draw {
  std::mt19937_64 g;
  explicit Draw(std::uint64_t seed) : g(seed) {}
  double unit() { return static_cast<double>(g() >> 11) * 0x1.0p-53; }
  double in(double lo, double hi) { return lo + (hi - lo) * unit(); }
  double log_in(double lo, double hi) {
    return std::exp(in(std::log(lo), std::log(hi)));
  }
  double normal() {
    double u = 0;
    while (u == 0) u = unit();
    return std::sqrt(-2.0 * std::log(u)) *
           std::cos(6.283185307179586 * unit());
  }
};

// ------------------------------------------------------------- c1 / c2
// Single FCFS server whose service times form a two-point mix
// {1 ms, 3 ms}: lengths 100/300 tokens, beta = gamma_w = 5e-3 ms/token,
// every other cost switched (effectively) off, batching disabled.

struct TwoPointSetup {
  CostParams cost;
  ExecOverheads ov;
  SimConfig sim;

  TwoPointSetup() {
    cost.alpha = 1e-12;  // must be > 0; contributes ~1e-7 ms at L=300
    cost.beta = 0.005;
    cost.gamma_w = 0.005;
    cost.gamma_r = 0.0;
    ov.kappa_graph_ms = 0.0;
    ov.kappa_std_ms = 0.0;
    ov.eta = 1.0;
    sim.policy = Policy::kFcfsUnified;
    sim.n_instances = 1;
    sim.unified_token_budget = 1;  // nothing fits beside the head request
    sim.unified_max_batch = 1;     // singleton batches: a pure M/G/1 server
  }

  double service_ms(Tokens len) const {
    std::vector<MemberShape> one{{len, 0}};
    return packed_service_time(one, cost, ov);
  }

  MetricsReport run_stream(double lambda_per_ms, double p_short,
                           double duration_ms, std::uint64_t seed) const {
    SynthConfig w;
    w.lambda_per_ms = lambda_per_ms;
    w.short_fraction = p_short;
    w.short_fraction_later = p_short;
    w.short_len = {100, 100};
    w.long_len = {300, 300};
    w.seed = seed;
    SimConfig s = sim;
    s.duration_ms = duration_ms;
    auto rr = run(s, synth_stream(w, duration_ms), cost, ov, SchedConfig{},
                  GraphGrid{}, ControllerConfig{});
    return rr.report;
  }
};

CriterionResult c1_pk_oracle() {
  CriterionResult r{1, "pk_oracle_equivalence", false, ""};
  const auto t0 = std::chrono::steady_clock::now();
  TwoPointSetup s;
  const double lambda = 0.25, p = 0.5;
  ServiceMix mix{lambda, p, s.service_ms(100), s.service_ms(300)};
  const double oracle =
      pk_wait(lambda, mix.mean_service(), mix.second_moment());
  const MetricsReport m = s.run_stream(lambda, p, 440000.0, 101);
  const double got = m.overall.mean_wait_ms;
  const double elapsed = seconds_since(t0);
  const double err = rel_err(got, oracle);
  r.pass = err <= 0.05 && m.overall.completed >= 100000 && elapsed < 10.0;
  r.detail = strf(
      "wait %.4f ms vs P-K %.4f ms, rel err %.4f (tol 0.05), n=%lld, %.1f s",
      got, oracle, err, static_cast<long long>(m.overall.completed), elapsed);
  return r;
}

CriterionResult c2_hol_penalty() {
  CriterionResult r{2, "hol_mixing_penalty", false, ""};
  TwoPointSetup s;
  const double lambda = 0.25, p = 0.5;
  const double s_s = s.service_ms(100), s_l = s.service_ms(300);
  const double rho = lambda * (p * s_s + (1.0 - p) * s_l);
  const double oracle = hol_penalty(lambda, p, s_s, s_l, rho);
  // Three runs at the same utilization: the mixed stream, then each
  // class alone at the rate that reproduces rho. The mixing penalty is
  // the mixed wait minus the p-weighted homogeneous waits.
  const double w_mix =
      s.run_stream(lambda, p, 440000.0, 101).overall.mean_wait_ms;
  const double w_s =
      s.run_stream(rho / s_s, 1.0, 220000.0, 202).overall.mean_wait_ms;
  const double w_l =
      s.run_stream(rho / s_l, 0.0, 660000.0, 303).overall.mean_wait_ms;
  const double got = w_mix - (p * w_s + (1.0 - p) * w_l);
  const double err = rel_err(got, oracle);
  r.pass = err <= 0.10;
  r.detail = strf(
      "dW %.4f ms vs oracle %.4f ms at rho %.2f, rel err %.4f (tol 0.10)"
      " [W_mix %.4f W_s %.4f W_l %.4f]",
      got, oracle, rho, err, w_mix, w_s, w_l);
  return r;
}

// ------------------------------------------------------------------ c3

CriterionResult c3_cost_exactness() {
  CriterionResult r{3, "cost_model_exactness", false, ""};
  Checker ck;
  Draw d(7);
  for (int i = 0; i < 1000; ++i) {
    CostParams p;
    p.alpha = d.log_in(1e-6, 1e-3);
    p.beta = d.in(1e-3, 1e-1);
    p.gamma_w = d.in(1e-3, 1e-1);
    p.gamma_r = d.in(1e-4, 1e-2);
    const double L = d.in(1.0, 1e5);
    const double H = d.in(1.0, 1e6);
    const LatencyTerms t = compute_latency(L, H, p);
    const long double comp = static_cast<long double>(p.alpha) * L * L +
                             2.0L * p.alpha * L * H +
                             static_cast<long double>(p.beta) * L;
    const long double mem = static_cast<long double>(p.gamma_w) * L +
                            static_cast<long double>(p.gamma_r) * H;
    ck.expect(rel_err(t.comp_ms, static_cast<double>(comp)) <= 1e-9,
              strf("comp at L=%.2f H=%.2f", L, H));
    ck.expect(rel_err(t.mem_ms, static_cast<double>(mem)) <= 1e-9,
              strf("mem at L=%.2f H=%.2f", L, H));
    // Root property: both terms agree at the re-prefill boundary.
    const double lb = reprefill_boundary(p, H);
    const LatencyTerms tb = compute_latency(lb, H, p);
    ck.expect(std::fabs(tb.comp_ms - tb.mem_ms) <=
                  1e-9 * std::max(tb.comp_ms, tb.mem_ms),
              strf("root residual at H=%.2f a=%.3g", H, p.alpha));
  }
  CostParams def;
  const double lim = def.gamma_r / (2.0 * def.alpha);
  const double at6 = reprefill_boundary(def, 1e6);
  ck.expect(rel_err(at6, lim) <= 0.01,
            strf("H=1e6 boundary %.3f vs limit %.3f", at6, lim));
  r.pass = ck.bad == 0;
  r.detail =
      ck.summary() + strf("; boundary(H=1e6) %.3f vs gr/2a %.3f", at6, lim);
  return r;
}

// ------------------------------------------------------------------ c4

CriterionResult c4_fit_recovery() {
  CriterionResult r{4, "fit_parameter_recovery", false, ""};
  Checker ck;
  CostParams truth;
  truth.alpha = 3e-5;
  truth.beta = 0.004;
  truth.gamma_w = 0.012;
  truth.gamma_r = 0.0015;
  auto make = [&](int n, double noise, std::uint64_t seed) {
    Draw g(seed);
    std::vector<LatencySample> v;
    v.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      LatencySample s;
      s.new_tokens = std::floor(g.in(16.0, 4096.0));
      s.history_tokens = std::floor(g.in(0.0, 8192.0));
      const LatencyTerms t =
          compute_latency(s.new_tokens, s.history_tokens, truth);
      s.t_comp_ms = t.comp_ms * (1.0 + noise * g.normal());
      s.t_mem_ms = t.mem_ms * (1.0 + noise * g.normal());
      v.push_back(s);
    }
    return v;
  };
  auto check = [&](const CostParams& got, double tol, const char* tag) {
    ck.expect(rel_err(got.alpha, truth.alpha) <= tol, strf("%s alpha", tag));
    ck.expect(rel_err(got.beta, truth.beta) <= tol, strf("%s beta", tag));
    ck.expect(rel_err(got.gamma_w, truth.gamma_w) <= tol,
              strf("%s gamma_w", tag));
    ck.expect(rel_err(got.gamma_r, truth.gamma_r) <= tol,
              strf("%s gamma_r", tag));
  };
  check(fit_params(make(50, 0.0, 21)), 1e-6, "noiseless");
  const CostParams noisy = fit_params(make(500, 0.01, 22));
  check(noisy, 0.05, "noisy");
  bool threw = false;
  try {
    auto flat = make(16, 0.0, 23);
    for (auto& s : flat) {
      s.new_tokens = 128;  // one distinct L: rank-deficient design
      const LatencyTerms t =
          compute_latency(s.new_tokens, s.history_tokens, truth);
      s.t_comp_ms = t.comp_ms;
      s.t_mem_ms = t.mem_ms;
    }
    (void)fit_params(flat);
  } catch (const DegenerateSamples&) {
    threw = true;
  }
  ck.expect(threw, "DegenerateSamples on single-L input");
  r.pass = ck.bad == 0;
  r.detail = ck.summary() + strf("; noisy fit a=%.4g b=%.4g gw=%.4g gr=%.4g",
                                 noisy.alpha, noisy.beta, noisy.gamma_w,
                                 noisy.gamma_r);
  return r;
}

// ------------------------------------------------------------------ c5

CriterionResult c5_interference() {
  CriterionResult r{5, "interference_direction", false, ""};
  const auto t0 = std::chrono::steady_clock::now();
  Checker ck;
  const CostParams cost;
  const ExecOverheads ov;
  const double dur = 250000.0;
  const std::vector<int> grid{1, 2, 4, 8, 16, 32, 64};

  // Short load is scaled by superposing c independent unit-rate streams,
  // so the stream at concurrency c+1 contains the stream at c. Combined
  // with a shared long stream this makes the interference comparisons
  // common-random-number comparisons. The unit rate is chosen so the low
  // rungs are stable with a strong contention signal while the top rungs
  // saturate the server outright; both regimes keep the ladder monotone.
  auto unit_short = [&](int k) {
    SynthConfig w;
    w.lambda_per_ms = 0.06;
    w.short_fraction = 1.0;
    w.short_fraction_later = 1.0;
    w.short_len = {16, 64};
    w.seed = 7000 + static_cast<std::uint64_t>(k);
    return synth_stream(w, dur);
  };
  auto long_stream = [&]() {
    SynthConfig w;
    w.lambda_per_ms = 0.002;
    w.short_fraction = 0.0;
    w.short_fraction_later = 0.0;
    w.long_len = {1800, 2200};
    w.seed = 9001;
    return synth_stream(w, dur);
  };
  auto run_one = [&](std::vector<Request> reqs) {
    SimConfig s;
    s.policy = Policy::kFcfsUnified;
    s.n_instances = 1;
    s.duration_ms = dur;
    auto rr = run(s, std::move(reqs), cost, ov, SchedConfig{}, GraphGrid{},
                  ControllerConfig{});
    return rr.report;
  };

  const MetricsReport base_long = run_one(long_stream());
  std::vector<double> long_p90, short_p90, solo_p90;
  std::vector<Request> shorts;
  for (size_t i = 0; i < grid.size(); ++i) {
    for (int k = (i == 0) ? 0 : grid[i - 1]; k < grid[i]; ++k) {
      shorts = shorts.empty() ? unit_short(k)
                              : merge_streams(std::move(shorts), unit_short(k));
    }
    const MetricsReport mixed = run_one(merge_streams(shorts, long_stream()));
    const MetricsReport solo = run_one(shorts);
    long_p90.push_back(mixed.long_cls.ttft_p90_ms);
    short_p90.push_back(mixed.short_cls.ttft_p90_ms);
    solo_p90.push_back(solo.short_cls.ttft_p90_ms);
  }
  for (size_t i = 0; i + 1 < grid.size(); ++i) {
    ck.expect(long_p90[i + 1] >= long_p90[i] - 1e-9,
              strf("long P90 fell from c=%d (%.2f) to c=%d (%.2f)", grid[i],
                   long_p90[i], grid[i + 1], long_p90[i + 1]));
    ck.expect(short_p90[i + 1] >= short_p90[i] - 1e-9,
              strf("short P90 fell from c=%d (%.2f) to c=%d (%.2f)", grid[i],
                   short_p90[i], grid[i + 1], short_p90[i + 1]));
  }
  for (size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 4) continue;
    ck.expect(long_p90[i] > base_long.long_cls.ttft_p90_ms,
              strf("long P90 at c=%d (%.2f) not above long-only (%.2f)",
                   grid[i], long_p90[i], base_long.long_cls.ttft_p90_ms));
    ck.expect(short_p90[i] > solo_p90[i],
              strf("short P90 at c=%d (%.2f) not above short-only (%.2f)",
                   grid[i], short_p90[i], solo_p90[i]));
  }
  const double elapsed = seconds_since(t0);
  ck.expect(elapsed < 60.0, strf("runtime %.1f s over budget", elapsed));
  r.pass = ck.bad == 0;
  r.detail = ck.summary() +
             strf("; long P90 %.0f..%.0f ms (solo %.0f), short P90"
                  " %.1f..%.1f ms, %.1f s",
                  long_p90.front(), long_p90.back(),
                  base_long.long_cls.ttft_p90_ms, short_p90.front(),
                  short_p90.back(), elapsed);
  return r;
}

// ------------------------------------------------------------------ c6

CriterionResult c6_disagg_benefit() {
  CriterionResult r{6, "disaggregation_benefit", false, ""};
  const auto t0 = std::chrono::steady_clock::now();
  Checker ck;
  const CostParams cost;
  const ExecOverheads ov;

  // Mixed stream, 63% short. Long prefills are sized so that their service
  // time alone exceeds the 400 ms SLO: every long misses its deadline under
  // every policy, so the SLO comparison isolates the short-class violations
  // that queue separation is supposed to eliminate. Four instances run
  // spatially with one dedicated short instance; the baselines share all
  // four through their single queue, so their shorts stall behind
  // multi-hundred-ms long batches.
  SynthConfig w;
  w.lambda_per_ms = 0.016;
  w.short_fraction = 0.63;
  w.short_fraction_later = 0.63;
  w.short_len = {16, 255};
  w.long_len = {4400, 5000};
  w.slo_offset_ms = 400.0;
  w.seed = 31;
  const double dur = 180000.0;
  const int n_inst = 4;
  const auto reqs = synth_stream(w, dur);

  // Offered utilization with each request served alone, summed over the
  // whole fleet.
  double work = 0;
  for (const auto& q : reqs) {
    std::vector<MemberShape> one{{q.new_tokens, q.history_tokens}};
    work += packed_service_time(one, cost, ov);
  }
  const double rho = work / (dur * n_inst);
  ck.expect(rho >= 0.6, strf("offered rho %.3f below 0.6", rho));

  // Chunk size 1024 keeps the dedicated long pool's chunking overhead
  // (per-chunk launch cost plus re-read of accumulated context) moderate
  // at its high utilization. All policies share the scheduler config.
  SchedConfig sc;
  sc.c_l_tokens = 1024;

  auto run_policy = [&](Policy p) {
    SimConfig s;
    s.policy = p;
    s.n_instances = n_inst;
    s.disagg = Disagg::kSpatial;
    s.initial_short_instances = 1;
    s.duration_ms = dur;
    s.slo_ms = 400.0;
    auto rr =
        run(s, reqs, cost, ov, sc, GraphGrid{}, ControllerConfig{});
    return rr.report;
  };
  const MetricsReport adaptive = run_policy(Policy::kLaps);
  const MetricsReport bucketed = run_policy(Policy::kBucketNoDisagg);
  const MetricsReport unified = run_policy(Policy::kFcfsUnified);
  ck.expect(adaptive.short_cls.ttft_mean_ms < bucketed.short_cls.ttft_mean_ms,
            strf("laps short mean %.2f !< bucket_no_disagg %.2f",
                 adaptive.short_cls.ttft_mean_ms,
                 bucketed.short_cls.ttft_mean_ms));
  ck.expect(bucketed.short_cls.ttft_mean_ms < unified.short_cls.ttft_mean_ms,
            strf("bucket_no_disagg short mean %.2f !< fcfs %.2f",
                 bucketed.short_cls.ttft_mean_ms,
                 unified.short_cls.ttft_mean_ms));
  ck.expect(adaptive.overall.slo_violation <=
                bucketed.overall.slo_violation + 1e-12,
            strf("laps slo %.4f !<= bucket_no_disagg %.4f",
                 adaptive.overall.slo_violation,
                 bucketed.overall.slo_violation));
  ck.expect(adaptive.overall.slo_violation <=
                unified.overall.slo_violation + 1e-12,
            strf("laps slo %.4f !<= fcfs %.4f", adaptive.overall.slo_violation,
                 unified.overall.slo_violation));
  const double elapsed = seconds_since(t0);
  ck.expect(elapsed < 60.0, strf("runtime %.1f s over budget", elapsed));
  r.pass = ck.bad == 0;
  r.detail =
      ck.summary() +
      strf("; rho %.2f, short mean ms laps %.1f < bucket %.1f < fcfs %.1f,"
           " slo %.4f/%.4f/%.4f",
           rho, adaptive.short_cls.ttft_mean_ms,
           bucketed.short_cls.ttft_mean_ms, unified.short_cls.ttft_mean_ms,
           adaptive.overall.slo_violation, bucketed.overall.slo_violation,
           unified.overall.slo_violation);
  return r;
}

// ------------------------------------------------------------------ c7

CriterionResult c7_window_tradeoff() {
  CriterionResult r{7, "waiting_window_tradeoff", false, ""};
  Checker ck;
  SynthConfig w;
  w.lambda_per_ms = 2.0;
  w.short_fraction = 1.0;
  w.short_fraction_later = 1.0;
  w.short_len = {16, 64};
  w.seed = 41;
  const double dur = 30000.0;
  const auto reqs = synth_stream(w, dur);
  const std::vector<double> wmax{1, 5, 10, 25, 50, 100};
  std::vector<double> rps, lat;
  for (double wm : wmax) {
    SchedConfig sc;
    sc.w_min_ms = 0.1;
    sc.w_max_ms = wm;
    SimConfig s;
    s.policy = Policy::kLaps;
    s.disagg = Disagg::kTemporal;
    s.n_instances = 1;
    s.duration_ms = dur;
    auto rr =
        run(s, reqs, CostParams{}, ExecOverheads{}, sc, GraphGrid{},
            ControllerConfig{});
    rps.push_back(rr.report.overall.rps);
    lat.push_back(rr.report.overall.ttft_mean_ms);
  }
  size_t best_rps = 0, best_lat = 0;
  for (size_t i = 1; i < wmax.size(); ++i) {
    if (rps[i] > rps[best_rps]) best_rps = i;
    if (lat[i] < lat[best_lat]) best_lat = i;
  }
  ck.expect(wmax[best_rps] > wmax.front(),
            strf("best throughput at the smallest window (%.0f ms)",
                 wmax[best_rps]));
  ck.expect(wmax[best_lat] < wmax.back(),
            strf("best latency at the largest window (%.0f ms)",
                 wmax[best_lat]));
  r.pass = ck.bad == 0;
  std::string curve;
  for (size_t i = 0; i < wmax.size(); ++i) {
    curve += strf("%s%.0f:(%.0f rps, %.1f ms)", i ? " " : "", wmax[i], rps[i],
                  lat[i]);
  }
  r.detail = ck.summary() +
             strf("; best rps at w=%.0f, best latency at w=%.0f; %s",
                  wmax[best_rps], wmax[best_lat], curve.c_str());
  return r;
}

// ------------------------------------------------------------------ c8

CriterionResult c8_controller_step() {
  CriterionResult r{8, "controller_step_response", false, ""};
  Checker ck;
  // Phase A (0-30 s) puts ~80% of the work in the short class; phase B
  // (30-60 s) flips it to ~20%. Mean unbatched services: short ~2.4 ms,
  // long ~110 ms; eight instances, six initially serving shorts.
  SynthConfig a;
  a.lambda_per_ms = 1.5073;
  a.short_fraction = 0.99516;
  a.short_fraction_later = a.short_fraction;
  a.short_len = {16, 255};
  a.long_len = {1800, 2200};
  a.seed = 51;
  SynthConfig b = a;
  b.lambda_per_ms = 0.4077;
  b.short_fraction = 0.9198;
  b.short_fraction_later = b.short_fraction;
  b.seed = 52;
  auto reqs = merge_streams(synth_stream(a, 30000.0),
                            shift_stream(synth_stream(b, 30000.0), 30000.0));

  SimConfig s;
  s.policy = Policy::kLaps;
  s.disagg = Disagg::kSpatial;
  s.n_instances = 8;
  s.initial_short_instances = 6;
  s.controller_on = true;
  s.duration_ms = 60000.0;
  s.slo_ms = 400.0;
  ControllerConfig cc;
  cc.dt_ms = 100.0;
  cc.t_cool_ms = 1000.0;
  cc.tau_hyst = 1.0;
  cc.n_min = 2;
  cc.w_q = 0.0;
  cc.w_e = 10.0;
  cc.w_u = 0.0;
  auto rr = run(s, reqs, CostParams{}, ExecOverheads{}, SchedConfig{},
                GraphGrid{}, cc);

  std::vector<double> mig_t;
  struct Tick {
    int n_s, n_l;
    bool migrated;
  };
  std::vector<Tick> ticks;
  for (const auto& rec : rr.log) {
    if (rec.kind == EventKind::kMigration) mig_t.push_back(rec.t);
    if (rec.kind == EventKind::kControllerTick) {
      ticks.push_back({rec.n_short, rec.n_long, rec.migrated});
    }
  }
  const int max_mig = 5;  // ceil of the 0.6 * 8 instance-share shift
  ck.expect(!mig_t.empty(), "no migration fired");
  ck.expect(static_cast<int>(mig_t.size()) <= max_mig,
            strf("%zu migrations exceed bound %d", mig_t.size(), max_mig));
  for (size_t i = 1; i < mig_t.size(); ++i) {
    ck.expect(mig_t[i] - mig_t[i - 1] >= cc.t_cool_ms - 1e-6,
              strf("migrations %.1f and %.1f closer than t_cool", mig_t[i - 1],
                   mig_t[i]));
  }
  for (const auto& t : ticks) {
    ck.expect(t.n_s >= cc.n_min && t.n_l >= cc.n_min,
              strf("pool below n_min: %d/%d", t.n_s, t.n_l));
  }
  ck.expect(ticks.size() >= 10, "fewer than 10 control periods");
  int tail_mig = 0;
  for (size_t i = ticks.size() >= 10 ? ticks.size() - 10 : 0;
       i < ticks.size(); ++i) {
    tail_mig += ticks[i].migrated ? 1 : 0;
  }
  ck.expect(tail_mig == 0, strf("%d migrations in the final 10 periods",
                                tail_mig));
  const int final_long = ticks.empty() ? 0 : ticks.back().n_l;
  ck.expect(final_long >= 3, strf("final long pool %d, expected growth",
                                  final_long));
  r.pass = ck.bad == 0;
  std::string when;
  for (double t : mig_t) when += strf(" %.1f", t);
  r.detail = ck.summary() +
             strf("; %zu migrations at[%s] ms, final pools %d short / %d"
                  " long, %zu ticks",
                  mig_t.size(), when.c_str(),
                  ticks.empty() ? 0 : ticks.back().n_s, final_long,
                  ticks.size());
  return r;
}

// ------------------------------------------------------------------ c9

CriterionResult c9_determinism() {
  CriterionResult r{9, "byte_identical_reruns", false, ""};
  Checker ck;
  auto log_bytes = [](const std::vector<LogRecord>& log) {
    std::string out;
    for (const auto& rec : log) {
      out += serialize(rec);
      out += '\n';
    }
    return out;
  };
  size_t bytes_a = 0, bytes_b = 0;
  {
    SynthConfig w;
    w.lambda_per_ms = 0.2;
    w.short_fraction = 0.9;
    w.short_fraction_later = 0.9;
    w.short_len = {16, 255};
    w.long_len = {1800, 2200};
    w.seed = 77;
    const auto reqs = synth_stream(w, 12000.0);
    SimConfig s;
    s.policy = Policy::kLaps;
    s.disagg = Disagg::kSpatial;
    s.n_instances = 4;
    s.controller_on = true;
    s.duration_ms = 12000.0;
    auto r1 = run(s, reqs, CostParams{}, ExecOverheads{}, SchedConfig{},
                  GraphGrid{}, ControllerConfig{});
    auto r2 = run(s, reqs, CostParams{}, ExecOverheads{}, SchedConfig{},
                  GraphGrid{}, ControllerConfig{});
    const std::string l1 = log_bytes(r1.log), l2 = log_bytes(r2.log);
    bytes_a = l1.size();
    ck.expect(l1 == l2, "spatial+controller: event logs differ");
    ck.expect(to_json(r1.report) == to_json(r2.report),
              "spatial+controller: metrics differ");
  }
  {
    SynthConfig w;
    w.lambda_per_ms = 0.02;
    w.short_fraction = 0.63;
    w.short_fraction_later = 0.63;
    w.short_len = {16, 255};
    w.long_len = {1800, 2200};
    w.slo_offset_ms = 400.0;
    w.seed = 78;
    const auto reqs = synth_stream(w, 20000.0);
    SimConfig s;
    s.policy = Policy::kLaps;
    s.disagg = Disagg::kTemporal;
    s.n_instances = 1;
    s.duration_ms = 20000.0;
    auto r1 = run(s, reqs, CostParams{}, ExecOverheads{}, SchedConfig{},
                  GraphGrid{}, ControllerConfig{});
    auto r2 = run(s, reqs, CostParams{}, ExecOverheads{}, SchedConfig{},
                  GraphGrid{}, ControllerConfig{});
    const std::string l1 = log_bytes(r1.log), l2 = log_bytes(r2.log);
    bytes_b = l1.size();
    ck.expect(l1 == l2, "temporal+chunking: event logs differ");
    ck.expect(to_json(r1.report) == to_json(r2.report),
              "temporal+chunking: metrics differ");
  }
  r.pass = ck.bad == 0;
  r.detail = ck.summary() + strf("; compared %zu + %zu log bytes twice each",
                                 bytes_a, bytes_b);
  return r;
}

// ----------------------------------------------------------------- c10

CriterionResult c10_unit_conformance() {
  CriterionResult r{10, "scheduler_unit_conformance", false, ""};
  Checker ck;
  const GraphGrid g;
  const SchedConfig c;

  // Bucket selection.
  ck.expect(bucket_of(20, g) == std::optional<Tokens>(32), "bucket_of(20)");
  ck.expect(bucket_of(8, g) == std::optional<Tokens>(8), "bucket_of(8)");
  ck.expect(!bucket_of(257, g).has_value(), "bucket_of(257) beyond grid");

  // Nearest captured shape.
  {
    const std::vector<Tokens> ls{50, 10, 30, 20, 40};
    const auto s = nearest_graph(ls, g);
    ck.expect(s && s->l_pad == 64 && s->depth == 8,
              "nearest_graph five lengths <= 50");
  }
  {
    const std::vector<Tokens> ls(8, 64);
    const auto s = nearest_graph(ls, g);
    ck.expect(s && s->l_pad == 64 && s->depth == 8, "nearest_graph 8 x 64");
  }
  {
    GraphGrid tiny = g;
    tiny.mem_budget_bytes = tiny.mem_per_graph_bytes - 1;
    const std::vector<Tokens> ls{16};
    ck.expect(!nearest_graph(ls, tiny).has_value(),
              "no memory budget disables graphs");
  }

  // Window arithmetic.
  {
    AwdState st = make_awd_state(c, g);
    st.s_hat = 30.0;
    std::deque<Request> q;
    Request a;
    a.id = 0;
    a.new_tokens = 32;
    a.deadline_ms = 100.0;
    q.push_back(a);
    ck.expect(near(sla_window(q, 0.0, st, c), 65.0),
              "sla_window on slack 100/30/5");
    q.front().deadline_ms = 34.0;
    ck.expect(near(sla_window(q, 0.0, st, c), 0.0), "sla_window floors at 0");
    q.clear();
    ck.expect(near(sla_window(q, 0.0, st, c), c.w_max_ms),
              "sla_window unconstrained");
  }
  {
    AwdState st = make_awd_state(c, g);
    st.d = 32;
    st.r_hat = 2.0;
    ck.expect(near(graph_window(st, 8, c), 12.0), "graph_window (32-8)/2");
    ck.expect(near(graph_window(st, 32, c), 0.0),
              "graph_window at target depth");
    st.r_hat = 0.0;
    ck.expect(near(graph_window(st, 8, c), 24.0 / c.epsilon_per_ms),
              "graph_window rate floor");
  }
  {
    AwdState st = make_awd_state(c, g);
    st.s_hat = 30.0;
    st.d = 32;
    st.r_hat = 2.0;
    std::deque<Request> q;
    Request a;
    a.id = 0;
    a.new_tokens = 32;
    a.deadline_ms = 100.0;
    q.push_back(a);
    ck.expect(near(combined_window(q, 0.0, 8, st, c), 12.0),
              "combined min(65,12) in bounds");
    q.front().deadline_ms = 34.0;
    ck.expect(near(combined_window(q, 0.0, 8, st, c), c.w_min_ms),
              "combined clips to w_min");
    q.front().deadline_ms.reset();
    st.r_hat = 0.1;  // graph window 240 ms
    ck.expect(near(combined_window(q, 0.0, 8, st, c), c.w_max_ms),
              "combined clips to w_max");
  }

  // Post-dispatch adaptation.
  {
    AwdState st = make_awd_state(c, g);
    st.d = 8;
    st.w = 40.0;
    awd_update_after_dispatch(st, 8, 15.0, c);
    ck.expect(near(st.w, 15.0) && st.d == 8,
              "depth target met learns the fill time");
    awd_update_after_dispatch(st, 4, 3.0, c);
    ck.expect(st.d == 4 && near(st.w, 15.0), "under-fill lowers the target");
  }

  // Dispatch triggers.
  {
    AwdState st = make_awd_state(c, g);
    st.d = 8;
    std::deque<Request> q;
    for (int i = 0; i < 8; ++i) {
      Request a;
      a.id = i;
      a.new_tokens = 64;
      q.push_back(a);
    }
    const auto dec = awd_step(st, q, 0.0, g, c);
    ck.expect(dec.plan && dec.plan->reason == DispatchReason::kDepthReached &&
                  dec.plan->members.size() == 8 && dec.plan->shape.depth == 8 &&
                  dec.plan->shape.l_pad == 64,
              "depth target dispatch");
  }
  {
    AwdState st = make_awd_state(c, g);
    st.s_hat = 30.0;
    std::deque<Request> q;
    Request a;
    a.id = 5;
    a.new_tokens = 32;
    a.deadline_ms = 42.0;  // slack 7 ms at now=5 with s_hat 30
    q.push_back(a);
    const auto dec = awd_step(st, q, 5.0, g, c);
    ck.expect(dec.plan && dec.plan->reason == DispatchReason::kSlaBreak &&
                  dec.plan->members.size() == 1,
              "imminent deadline forces a singleton");
  }
  {
    SchedConfig cf = c;
    cf.mode = SchedMode::kDeadlineFree;
    cf.m_s_tokens = 512;
    std::deque<Request> q;
    Request a;
    a.id = 0;
    a.new_tokens = 100;
    q.push_back(a);
    AwdState st = make_awd_state(cf, g);
    ck.expect(!token_max_admit(st, q, 0.0, g, cf).plan.has_value(),
              "100 of 512 tokens keeps waiting");
    Request b = a;
    b.id = 1;
    b.new_tokens = 250;
    Request d2 = a;
    d2.id = 2;
    d2.new_tokens = 250;
    q.push_back(b);
    q.push_back(d2);
    AwdState st2 = make_awd_state(cf, g);
    const auto dec = token_max_admit(st2, q, 1.0, g, cf);
    ck.expect(dec.plan && dec.plan->reason == DispatchReason::kTokenMax &&
                  dec.plan->real_tokens == 600,
              "600 of 512 tokens dispatches");
    std::deque<Request> q3;
    q3.push_back(a);
    AwdState st3 = make_awd_state(cf, g);
    const auto dec3 = token_max_admit(st3, q3, 150.0, g, cf);
    ck.expect(dec3.plan && dec3.plan->reason == DispatchReason::kHolCap,
              "head waits past t_max");
  }

  // Long-prefill chunking.
  {
    Request a;
    a.id = 0;
    a.new_tokens = 1000;
    a.history_tokens = 200;
    const auto chunks = long_chunk_dispatch(a, c);
    ck.expect(chunks.size() == 2 && chunks[0].tokens == 512 &&
                  chunks[1].tokens == 488,
              "1000 tokens split 512+488");
    ck.expect(chunks.size() == 2 && chunks[1].history == 712,
              "chunk 2 history is H plus chunk 1");
    Request b;
    b.id = 1;
    b.new_tokens = 512;
    ck.expect(long_chunk_dispatch(b, c).size() == 1,
              "512 tokens stays one chunk");
  }

  // Migration gates.
  {
    const ControllerConfig cc;
    ck.expect(near(pressure(InstanceStats{}, cc), 0.0), "pressure of zeros");
    ControllerConfig unit;
    unit.w_q = 1.0;
    unit.w_e = 1.0;
    unit.w_u = 1.0;
    ck.expect(near(pressure(InstanceStats{5.0, 2.0, 1.0}, unit), 6.0),
              "pressure 5+2-1");
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    ck.expect(near(aggregate(v, 90), 9.0), "P90 of 1..10");
    const std::vector<double> one{3.5};
    ck.expect(near(aggregate(one, 90), 3.5), "P90 of a singleton");
    const std::vector<double> same(7, 2.0);
    ck.expect(near(aggregate(same, 90), 2.0), "P90 of equal scores");
  }
  {
    const ControllerConfig cc;  // tau 0.25, t_cool 500 ms, n_min 1
    PoolState ps;
    ps.assignment = {PoolKind::kShort, PoolKind::kShort, PoolKind::kShort,
                     PoolKind::kShort, PoolKind::kLong, PoolKind::kLong};
    const auto d1 = decide(10.0, 7.5, ps, cc, 1000.0);
    ck.expect(d1.has_value() && *d1 == MigrationDir::kLongToShort &&
                  near(ps.t_last_ms, 1000.0),
              "pressure gap above hysteresis migrates");
    PoolState flip;
    flip.assignment = {PoolKind::kShort, PoolKind::kShort, PoolKind::kLong,
                       PoolKind::kLong};
    const auto d2 = decide(6.0, 10.0, flip, cc, 1000.0);
    ck.expect(d2.has_value() && *d2 == MigrationDir::kShortToLong,
              "long-side pressure pulls an instance");
    ControllerConfig wide = cc;
    wide.tau_hyst = 0.5;
    PoolState held;
    held.assignment = flip.assignment;
    ck.expect(!decide(10.0, 9.0, held, wide, 1000.0).has_value(),
              "gap inside hysteresis band holds");
    PoolState cooling;
    cooling.assignment = flip.assignment;
    cooling.t_last_ms = 900.0;
    ck.expect(!decide(10.0, 7.5, cooling, cc, 1000.0).has_value(),
              "cool-down window holds");
    PoolState floor;
    floor.assignment = {PoolKind::kShort, PoolKind::kShort, PoolKind::kShort,
                        PoolKind::kLong};
    ck.expect(!decide(10.0, 7.5, floor, cc, 1000.0).has_value(),
              "n_min floor blocks the donor pool");
  }
  r.pass = ck.bad == 0;
  r.detail = ck.summary();
  return r;
}

}  // namespace

std::vector<CriterionResult> run_acceptance() {
  struct Entry {
    int id;
    const char* name;
    CriterionResult (*fn)();
  };
  const Entry entries[] = {
      {1, "pk_oracle_equivalence", c1_pk_oracle},
      {2, "hol_mixing_penalty", c2_hol_penalty},
      {3, "cost_model_exactness", c3_cost_exactness},
      {4, "fit_parameter_recovery", c4_fit_recovery},
      {5, "interference_direction", c5_interference},
      {6, "disaggregation_benefit", c6_disagg_benefit},
      {7, "waiting_window_tradeoff", c7_window_tradeoff},
      {8, "controller_step_response", c8_controller_step},
      {9, "byte_identical_reruns", c9_determinism},
      {10, "scheduler_unit_conformance", c10_unit_conformance},
  };
  std::vector<CriterionResult> out;
  for (const auto& e : entries) {
    CriterionResult r;
    try {
      r = e.fn();
    } catch (const std::exception& ex) {
      r = {e.id, e.name, false, strf("unexpected exception: %s", ex.what())};
    }
    out.push_back(std::move(r));
  }
  return out;
}

int acceptance_main() {
  const auto results = run_acceptance();
  int failed = 0;
  for (const auto& r : results) {
    std::printf("[%s] %2d %-26s %s\n", r.pass ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.detail.c_str());
    if (!r.pass) ++failed;
  }
  std::printf("%d/%d acceptance criteria passed\n",
              static_cast<int>(results.size()) - failed,
              static_cast<int>(results.size()));
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}

}  // namespace prefillsim
