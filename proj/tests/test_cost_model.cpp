#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <prefillsim/cost_model.hpp>

#include <cmath>
#include <random>
#include <vector>

using namespace prefillsim;

namespace {

CostParams example_params() {
  CostParams p;
  p.alpha = 1e-5;
  p.beta = 0.01;
  p.gamma_w = 0.02;
  p.gamma_r = 0.002;
  return p;
}

struct Draw {
  std::mt19937_64 g;
  explicit Draw(std::uint64_t seed) : g(seed) {}
  double unit() { return static_cast<double>(g() >> 11) * 0x1.0p-53; }
  double in(double lo, double hi) { return lo + (hi - lo) * unit(); }
  double log_in(double lo, double hi) {
    return std::exp(in(std::log(lo), std::log(hi)));
  }
};

std::vector<LatencySample> synth_samples(const CostParams& p, int n,
                                         std::uint64_t seed, double noise) {
  Draw d(seed);
  std::vector<LatencySample> v;
  for (int i = 0; i < n; ++i) {
    LatencySample s;
    s.new_tokens = std::floor(d.in(16, 4096));
    s.history_tokens = std::floor(d.in(0, 8192));
    const LatencyTerms t = compute_latency(s.new_tokens, s.history_tokens, p);
    double f1 = 1.0, f2 = 1.0;
    if (noise > 0) {
      // Box-Muller over raw uniform bits keeps the draw reproducible.
      double u = 0;
      while (u == 0) u = d.unit();
      const double z1 = std::sqrt(-2.0 * std::log(u)) *
                        std::cos(6.283185307179586 * d.unit());
      while (u == 0) u = d.unit();
      const double z2 = std::sqrt(-2.0 * std::log(d.unit() + 1e-300)) *
                        std::cos(6.283185307179586 * d.unit());
      f1 += noise * z1;
      f2 += noise * z2;
    }
    s.t_comp_ms = t.comp_ms * f1;
    s.t_mem_ms = t.mem_ms * f2;
    v.push_back(s);
  }
  return v;
}

}  // namespace

TEST_CASE("latency terms match the closed form") {
  const CostParams p = example_params();
  const LatencyTerms zero = compute_latency(0, 0, p);
  CHECK(zero.comp_ms == 0.0);
  CHECK(zero.mem_ms == 0.0);

  const LatencyTerms a = compute_latency(100, 0, p);
  CHECK(a.comp_ms == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(a.mem_ms == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a.total_ms() == doctest::Approx(3.1).epsilon(1e-12));

  const LatencyTerms b = compute_latency(10, 1000, p);
  CHECK(b.comp_ms == doctest::Approx(0.301).epsilon(1e-12));
  CHECK(b.mem_ms == doctest::Approx(2.2).epsilon(1e-12));
}

TEST_CASE("latency polynomials hold for random inputs") {
  Draw d(17);
  for (int i = 0; i < 500; ++i) {
    CostParams p;
    p.alpha = d.log_in(1e-7, 1e-3);
    p.beta = d.in(0, 0.1);
    p.gamma_w = d.in(0, 0.1);
    p.gamma_r = d.in(0, 0.01);
    const double L = d.in(0, 1e5);
    const double H = d.in(0, 1e6);
    const LatencyTerms t = compute_latency(L, H, p);
    const long double comp = static_cast<long double>(p.alpha) * L * L +
                             2.0L * p.alpha * L * H +
                             static_cast<long double>(p.beta) * L;
    const long double mem = static_cast<long double>(p.gamma_w) * L +
                            static_cast<long double>(p.gamma_r) * H;
    CHECK(std::fabs(t.comp_ms - static_cast<double>(comp)) <=
          1e-9 * std::max(1.0L, comp));
    CHECK(std::fabs(t.mem_ms - static_cast<double>(mem)) <=
          1e-9 * std::max(1.0L, mem));
  }
}

TEST_CASE("first-prefill boundary") {
  CostParams p = example_params();
  SUBCASE("write slower than compute => positive boundary") {
    CHECK(prefill_boundary(p) == doctest::Approx(1000.0).epsilon(1e-12));
  }
  SUBCASE("write cheaper than compute => always compute bound") {
    p.gamma_w = 0.01;
    p.beta = 0.02;
    CHECK(prefill_boundary(p) == 0.0);
  }
  SUBCASE("exact tie => zero") {
    p.gamma_w = p.beta;
    CHECK(prefill_boundary(p) == 0.0);
  }
  SUBCASE("shipped defaults put the boundary at 256 tokens") {
    CHECK(prefill_boundary(CostParams{}) ==
          doctest::Approx(256.0).epsilon(1e-9));
  }
}

TEST_CASE("re-prefill boundary") {
  const CostParams p = example_params();
  SUBCASE("no history reduces to the first-prefill boundary") {
    CHECK(reprefill_boundary(p, 0) ==
          doctest::Approx(prefill_boundary(p)).epsilon(1e-12));
  }
  SUBCASE("worked value at H=1000") {
    CHECK(reprefill_boundary(p, 1000) ==
          doctest::Approx(170.8203932).epsilon(1e-6));
  }
  SUBCASE("large-history limit approaches gamma_r / (2 alpha)") {
    const double lim = p.gamma_r / (2 * p.alpha);
    CHECK(std::fabs(reprefill_boundary(p, 1e6) - lim) <= 0.01 * lim);
  }
  SUBCASE("moves monotonically toward its large-history asymptote") {
    // dL/dH has the sign of (gamma_r - 2*alpha*L): the root always
    // approaches gamma_r / (2 alpha) from whichever side it starts on,
    // so the distance to the asymptote never grows.
    Draw d(23);
    for (int i = 0; i < 200; ++i) {
      CostParams q;
      q.alpha = d.log_in(1e-6, 1e-3);
      q.beta = d.in(1e-3, 0.1);
      q.gamma_w = d.in(1e-3, 0.1);
      q.gamma_r = d.in(1e-4, 0.01);
      const double lim = q.gamma_r / (2 * q.alpha);
      const double start = reprefill_boundary(q, 0);
      CHECK(start == doctest::Approx(prefill_boundary(q)).epsilon(1e-9));
      const double lo = std::min(start, lim);
      const double hi = std::max(start, lim);
      double prev_gap = std::fabs(start - lim);
      for (double h : {10.0, 100.0, 1000.0, 1e4, 1e5, 1e6}) {
        const double cur = reprefill_boundary(q, h);
        const double gap = std::fabs(cur - lim);
        CHECK(gap <= prev_gap + 1e-9 * std::max(1.0, prev_gap));
        CHECK(cur >= lo - 1e-9 * std::max(1.0, hi));
        CHECK(cur <= hi * (1 + 1e-9) + 1e-9);
        prev_gap = gap;
      }
    }
  }
  SUBCASE("compute and memory terms agree at the root") {
    Draw d(29);
    for (int i = 0; i < 500; ++i) {
      CostParams q;
      q.alpha = d.log_in(1e-6, 1e-3);
      q.beta = d.in(1e-3, 0.1);
      q.gamma_w = d.in(1e-3, 0.1);
      q.gamma_r = d.in(1e-4, 0.01);
      const double h = d.in(1, 1e6);
      const double root = reprefill_boundary(q, h);
      const LatencyTerms t = compute_latency(root, h, q);
      CHECK(std::fabs(t.comp_ms - t.mem_ms) <=
            1e-9 * std::max(t.comp_ms, t.mem_ms));
    }
  }
}

TEST_CASE("fitting recovers the generating coefficients") {
  const CostParams truth = example_params();
  SUBCASE("noiseless samples come back to 1e-6 relative") {
    const CostParams got = fit_params(synth_samples(truth, 50, 31, 0));
    CHECK(got.alpha == doctest::Approx(truth.alpha).epsilon(1e-6));
    CHECK(got.beta == doctest::Approx(truth.beta).epsilon(1e-6));
    CHECK(got.gamma_w == doctest::Approx(truth.gamma_w).epsilon(1e-6));
    CHECK(got.gamma_r == doctest::Approx(truth.gamma_r).epsilon(1e-6));
  }
  SUBCASE("one percent noise stays within five percent") {
    const CostParams got = fit_params(synth_samples(truth, 500, 37, 0.01));
    CHECK(got.alpha == doctest::Approx(truth.alpha).epsilon(0.05));
    CHECK(got.beta == doctest::Approx(truth.beta).epsilon(0.05));
    CHECK(got.gamma_w == doctest::Approx(truth.gamma_w).epsilon(0.05));
    CHECK(got.gamma_r == doctest::Approx(truth.gamma_r).epsilon(0.05));
  }
  SUBCASE("a vanishing true coefficient is clamped, not negative") {
    CostParams flat = truth;
    flat.gamma_r = 0.0;
    const CostParams got = fit_params(synth_samples(flat, 400, 41, 0.01));
    CHECK(got.gamma_r >= 0.0);
    CHECK(got.gamma_w == doctest::Approx(flat.gamma_w).epsilon(0.05));
  }
  SUBCASE("single distinct length is rejected") {
    auto v = synth_samples(truth, 16, 43, 0);
    for (auto& s : v) {
      s.new_tokens = 128;
      const LatencyTerms t = compute_latency(128, s.history_tokens, truth);
      s.t_comp_ms = t.comp_ms;
      s.t_mem_ms = t.mem_ms;
    }
    CHECK_THROWS_AS((void)fit_params(v), DegenerateSamples);
  }
  SUBCASE("single distinct history is rejected") {
    auto v = synth_samples(truth, 16, 47, 0);
    for (auto& s : v) {
      s.history_tokens = 64;
      const LatencyTerms t = compute_latency(s.new_tokens, 64, truth);
      s.t_comp_ms = t.comp_ms;
      s.t_mem_ms = t.mem_ms;
    }
    CHECK_THROWS_AS((void)fit_params(v), DegenerateSamples);
  }
  SUBCASE("empty and undersized inputs are rejected") {
    CHECK_THROWS_AS((void)fit_params(std::vector<LatencySample>{}), EmptyInput);
    CHECK_THROWS_AS((void)fit_params(synth_samples(truth, 3, 53, 0)),
                    DegenerateSamples);
  }
}

TEST_CASE("roofline classification") {
  const RooflineParams r;  // defaults cross at 256 tokens
  CHECK(roofline_classify(100, r) == Boundedness::kMemoryBound);
  CHECK(roofline_classify(512, r) == Boundedness::kComputeBound);
  CHECK(roofline_classify(1, r) == Boundedness::kMemoryBound);
  SUBCASE("exact crossover counts as compute bound") {
    CHECK(roofline_classify(256, r) == Boundedness::kComputeBound);
  }
}

TEST_CASE("batch service time") {
  const CostParams p = example_params();
  ExecOverheads o;
  o.kappa_graph_ms = 0.05;
  o.kappa_std_ms = 0.5;
  const double per =
      compute_latency(64, 0, p).total_ms();  // one padded row, no history

  SUBCASE("singleton ignores the efficiency exponent") {
    for (double eta : {0.3, 0.7, 1.0}) {
      ExecOverheads oe = o;
      oe.eta = eta;
      std::vector<MemberShape> m{{64, 0}};
      const BatchShape shape{64, 1, ShapeKind::kGraph};
      CHECK(batch_service_time(shape, m, p, oe) ==
            doctest::Approx(0.05 + per).epsilon(1e-12));
    }
  }
  SUBCASE("linear at eta = 1") {
    ExecOverheads oe = o;
    oe.eta = 1.0;
    std::vector<MemberShape> m(4, {64, 0});
    const BatchShape shape{64, 4, ShapeKind::kGraph};
    CHECK(batch_service_time(shape, m, p, oe) ==
          doctest::Approx(0.05 + 4 * per).epsilon(1e-12));
  }
  SUBCASE("square-root scaling at eta = 0.5") {
    ExecOverheads oe = o;
    oe.eta = 0.5;
    std::vector<MemberShape> m(4, {64, 0});
    const BatchShape shape{64, 4, ShapeKind::kGraph};
    CHECK(batch_service_time(shape, m, p, oe) ==
          doctest::Approx(0.05 + 2 * per).epsilon(1e-12));
  }
  SUBCASE("padding is billed at the padded length") {
    ExecOverheads oe = o;
    oe.eta = 1.0;
    std::vector<MemberShape> m{{10, 0}};
    const BatchShape shape{64, 1, ShapeKind::kGraph};
    CHECK(batch_service_time(shape, m, p, oe) ==
          doctest::Approx(0.05 + per).epsilon(1e-12));
  }
  SUBCASE("standard kind pays the larger launch cost") {
    std::vector<MemberShape> m{{64, 0}};
    const BatchShape shape{64, 1, ShapeKind::kStandard};
    CHECK(batch_service_time(shape, m, p, o) ==
          doctest::Approx(0.5 + per).epsilon(1e-12));
  }
  SUBCASE("member count must match the declared depth") {
    std::vector<MemberShape> m(3, {64, 0});
    const BatchShape shape{64, 4, ShapeKind::kGraph};
    CHECK_THROWS_AS((void)batch_service_time(shape, m, p, o), ShapeMismatch);
  }
  SUBCASE("member longer than the padded length is rejected") {
    std::vector<MemberShape> m{{65, 0}};
    const BatchShape shape{64, 1, ShapeKind::kGraph};
    CHECK_THROWS_AS((void)batch_service_time(shape, m, p, o), ShapeMismatch);
  }
  SUBCASE("deeper, longer, or more-history batches never get cheaper") {
    ExecOverheads oe = o;
    oe.eta = 0.7;
    std::vector<MemberShape> m4(4, {64, 100});
    std::vector<MemberShape> m8(8, {64, 100});
    CHECK(batch_service_time({64, 8, ShapeKind::kGraph}, m8, p, oe) >
          batch_service_time({64, 4, ShapeKind::kGraph}, m4, p, oe));
    CHECK(batch_service_time({128, 4, ShapeKind::kGraph}, m4, p, oe) >
          batch_service_time({64, 4, ShapeKind::kGraph}, m4, p, oe));
    std::vector<MemberShape> hot(4, {64, 500});
    CHECK(batch_service_time({64, 4, ShapeKind::kGraph}, hot, p, oe) >
          batch_service_time({64, 4, ShapeKind::kGraph}, m4, p, oe));
    // Per-request time falls as depth grows when eta < 1.
    CHECK(batch_service_time({64, 8, ShapeKind::kGraph}, m8, p, oe) / 8 <
          batch_service_time({64, 4, ShapeKind::kGraph}, m4, p, oe) / 4);
  }
}

TEST_CASE("packed service time sums unpadded member costs") {
  const CostParams p = example_params();
  ExecOverheads o;
  o.kappa_std_ms = 0.5;
  std::vector<MemberShape> m{{100, 0}, {300, 50}};
  const double want = 0.5 + compute_latency(100, 0, p).total_ms() +
                      compute_latency(300, 50, p).total_ms();
  CHECK(packed_service_time(m, p, o) == doctest::Approx(want).epsilon(1e-12));
  CHECK(packed_service_time({}, p, o) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("parameter validation") {
  CostParams p;
  p.alpha = 0;
  CHECK_THROWS_AS(validate(p), ConfigError);
  p = CostParams{};
  p.gamma_r = -1;
  CHECK_THROWS_AS(validate(p), ConfigError);
  CHECK_NOTHROW(validate(CostParams{}));

  ExecOverheads o;
  o.eta = 0;
  CHECK_THROWS_AS(validate(o), ConfigError);
  o = ExecOverheads{};
  o.eta = 1.5;
  CHECK_THROWS_AS(validate(o), ConfigError);
  o = ExecOverheads{};
  o.kappa_std_ms = 0.01;  // below kappa_graph
  CHECK_THROWS_AS(validate(o), ConfigError);
  CHECK_NOTHROW(validate(ExecOverheads{}));

  RooflineParams r;
  r.b_mem = 0;
  CHECK_THROWS_AS(validate(r), ConfigError);
  CHECK_NOTHROW(validate(RooflineParams{}));
}
