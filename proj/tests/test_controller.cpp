#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <prefillsim/controller.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace prefillsim;

namespace {

PoolState make_pool(int n_short, int n_long) {
  PoolState st;
  st.assignment.assign(n_short, PoolKind::kShort);
  st.assignment.insert(st.assignment.end(), n_long, PoolKind::kLong);
  return st;
}

// Flip one instance of `from` to the other pool, as the engine would.
void apply(PoolState& st, MigrationDir dir) {
  const PoolKind from =
      dir == MigrationDir::kLongToShort ? PoolKind::kLong : PoolKind::kShort;
  const PoolKind to =
      dir == MigrationDir::kLongToShort ? PoolKind::kShort : PoolKind::kLong;
  auto it = std::find(st.assignment.begin(), st.assignment.end(), from);
  REQUIRE(it != st.assignment.end());
  *it = to;
}

}  // namespace

TEST_CASE("instance pressure") {
  ControllerConfig cfg;  // w_q=1, w_e=10, w_u=5
  CHECK(pressure({0, 0, 0}, cfg) == doctest::Approx(0));
  CHECK(pressure({2, 0.5, 0.8}, cfg) == doctest::Approx(2 + 5 - 4));
  CHECK(pressure({0, 0, 1}, cfg) == doctest::Approx(-5));  // may go negative
  ControllerConfig unit;
  unit.w_q = unit.w_e = unit.w_u = 1;
  CHECK(pressure({5, 2, 1}, unit) == doctest::Approx(6));
}

TEST_CASE("pool aggregation is a nearest-rank percentile") {
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(aggregate(v, 90) == doctest::Approx(9));
  CHECK(aggregate(v, 100) == doctest::Approx(10));
  CHECK(aggregate(v, 1) == doctest::Approx(1));
  CHECK(aggregate(v, 50) == doctest::Approx(5));
  std::vector<double> one{3.5};
  CHECK(aggregate(one, 90) == doctest::Approx(3.5));
  std::vector<double> flat{5, 5, 5};
  CHECK(aggregate(flat, 50) == doctest::Approx(5));
  std::vector<double> unsorted{3, 1, 2};
  CHECK(aggregate(unsorted, 100) == doctest::Approx(3));
  CHECK_THROWS_AS((void)aggregate(std::vector<double>{}, 90), EmptyPool);
}

TEST_CASE("migration gate") {
  ControllerConfig cfg;  // tau=0.25, t_cool=500, n_min=1
  SUBCASE("pulls toward the pool whose pressure clears the hysteresis bar") {
    auto st = make_pool(4, 2);
    auto d = decide(10, 7.5, st, cfg, 1000);  // 10 > 1.25 * 7.5
    REQUIRE(d.has_value());
    CHECK(*d == MigrationDir::kLongToShort);
    CHECK(st.t_last_ms == doctest::Approx(1000));

    auto st2 = make_pool(2, 2);
    auto d2 = decide(6, 10, st2, cfg, 1000);  // 10 > 1.25 * 6
    REQUIRE(d2.has_value());
    CHECK(*d2 == MigrationDir::kShortToLong);
  }
  SUBCASE("larger hysteresis holds an imbalance that a smaller one moves") {
    ControllerConfig wide = cfg;
    wide.tau_hyst = 0.5;
    auto st = make_pool(2, 4);
    CHECK(decide(10, 5, st, wide, 0).has_value());  // 10 > 1.5 * 5
    auto st2 = make_pool(2, 4);
    CHECK_FALSE(decide(10, 9, st2, wide, 0).has_value());  // 10 < 13.5
    CHECK(st2.t_last_ms == -std::numeric_limits<double>::infinity());
  }
  SUBCASE("cool-down silences the gate") {
    auto st = make_pool(4, 2);
    st.t_last_ms = 900;
    CHECK_FALSE(decide(100, 0, st, cfg, 1000).has_value());
    CHECK(st.t_last_ms == doctest::Approx(900));  // unchanged
    CHECK(decide(100, 0, st, cfg, 1400).has_value());  // exactly t_cool later
  }
  SUBCASE("never shrinks a pool below its floor") {
    auto st = make_pool(3, 1);
    CHECK_FALSE(decide(1e9, 0, st, cfg, 0).has_value());
    auto st2 = make_pool(1, 3);
    CHECK_FALSE(decide(0, 1e9, st2, cfg, 0).has_value());
    ControllerConfig floor2 = cfg;
    floor2.n_min = 2;
    auto st3 = make_pool(2, 2);
    CHECK_FALSE(decide(1e9, 0, st3, floor2, 0).has_value());
    CHECK_FALSE(decide(0, 1e9, st3, floor2, 0).has_value());
  }
  SUBCASE("short pool relief wins when both negatives clear the bar") {
    auto st = make_pool(2, 2);
    auto d = decide(-1, -1, st, cfg, 0);  // -1 > 1.25 * -1 on both sides
    REQUIRE(d.has_value());
    CHECK(*d == MigrationDir::kLongToShort);
  }
  SUBCASE("balanced pressures never trigger a move") {
    std::mt19937_64 g(21);
    auto unit = [&] { return static_cast<double>(g() >> 11) * 0x1.0p-53; };
    for (int i = 0; i < 300; ++i) {
      const double p = 0.1 + 10 * unit();
      // Keep both pressures inside the hysteresis band around p.
      const double q = p * (1.0 + cfg.tau_hyst * (unit() * 1.99 - 1.0));
      const bool inside = q <= 1.25 * p && p <= 1.25 * q;
      if (!inside) continue;
      auto st = make_pool(3, 3);
      CHECK_FALSE(decide(p, q, st, cfg, 1e6).has_value());
    }
  }
}

TEST_CASE("closed-loop step response settles without thrash") {
  // Fixed offered load per pool, pressure = load / pool size. A step
  // imbalance should drain instances toward the hot pool until the floor
  // or the hysteresis band stops it, then stay put.
  ControllerConfig cfg;
  auto st = make_pool(3, 3);
  const double load_s = 30, load_l = 3;
  int migrations = 0;
  int last_ns = st.n_short();
  for (double t = 0; t <= 20000; t += cfg.dt_ms) {
    const double p_s = load_s / st.n_short();
    const double p_l = load_l / st.n_long();
    if (auto d = decide(p_s, p_l, st, cfg, t)) {
      apply(st, *d);
      ++migrations;
      // Moves only ever go toward the overloaded short pool here.
      CHECK(*d == MigrationDir::kLongToShort);
      CHECK(st.n_short() == last_ns + 1);
    }
    last_ns = st.n_short();
  }
  CHECK(st.n_short() == 5);
  CHECK(st.n_long() == 1);  // stopped at the floor
  CHECK(migrations == 2);
}

TEST_CASE("controller configuration validation") {
  auto bad = [](int n, auto mutate) {
    ControllerConfig c;
    mutate(c);
    CHECK_THROWS_AS(validate(c, n), ConfigError);
  };
  bad(4, [](ControllerConfig& c) { c.dt_ms = 0; });
  bad(4, [](ControllerConfig& c) { c.t_cool_ms = -1; });
  bad(4, [](ControllerConfig& c) { c.tau_hyst = -0.1; });
  bad(4, [](ControllerConfig& c) { c.n_min = -1; });
  bad(4, [](ControllerConfig& c) { c.n_min = 3; });  // 2*3 > 4 instances
  bad(4, [](ControllerConfig& c) { c.w_q = -1; });
  bad(4, [](ControllerConfig& c) { c.w_e = -1; });
  bad(4, [](ControllerConfig& c) { c.w_u = -1; });
  bad(4, [](ControllerConfig& c) { c.aggregator_percentile = 0; });
  bad(4, [](ControllerConfig& c) { c.aggregator_percentile = 101; });
  ControllerConfig ok;
  ok.n_min = 2;
  CHECK_NOTHROW(validate(ok, 4));
  CHECK_NOTHROW(validate(ControllerConfig{}, 2));
}
