#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <prefillsim/workload.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

using namespace prefillsim;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path(name) {}
  ~TempFile() { std::remove(path.c_str()); }
  void write(const std::string& text) {
    std::ofstream out(path);
    out << text;
  }
};

}  // namespace

TEST_CASE("trace loading") {
  SUBCASE("explicit fields plus cumulative history reconstruction") {
    TempFile f("wl_trace_basic.jsonl");
    f.write(
        "{\"session_id\":1,\"turn\":1,\"arrival_ms\":10,\"new_tokens\":100,"
        "\"gen_tokens\":20}\n"
        "{\"session_id\":1,\"turn\":2,\"arrival_ms\":50,\"new_tokens\":30}\n"
        "{\"session_id\":2,\"turn\":1,\"arrival_ms\":5,\"new_tokens\":200,"
        "\"deadline_ms\":405,\"extra\":\"ignored\"}\n");
    auto v = load_trace(f.path);
    REQUIRE(v.size() == 3);
    // Sorted by arrival, ids assigned in that order.
    CHECK(v[0].id == 0);
    CHECK(v[0].session_id == 2);
    CHECK(v[0].arrival_ms == doctest::Approx(5));
    CHECK(v[0].history_tokens == 0);
    REQUIRE(v[0].deadline_ms.has_value());
    CHECK(*v[0].deadline_ms == doctest::Approx(405));
    CHECK(v[1].session_id == 1);
    CHECK(v[1].turn == 1);
    CHECK(v[1].history_tokens == 0);
    CHECK_FALSE(v[1].deadline_ms.has_value());
    // Turn 2 history = turn-1 prompt + generated tokens.
    CHECK(v[2].turn == 2);
    CHECK(v[2].history_tokens == 120);
  }
  SUBCASE("explicit history wins and later turns continue from it") {
    TempFile f("wl_trace_hist.jsonl");
    f.write(
        "{\"session_id\":7,\"turn\":1,\"arrival_ms\":0,\"new_tokens\":100}\n"
        "{\"session_id\":7,\"turn\":2,\"arrival_ms\":1,\"new_tokens\":40,"
        "\"history_tokens\":500,\"gen_tokens\":10}\n"
        "{\"session_id\":7,\"turn\":3,\"arrival_ms\":2,\"new_tokens\":8}\n");
    auto v = load_trace(f.path);
    REQUIRE(v.size() == 3);
    CHECK(v[1].history_tokens == 500);
    CHECK(v[2].history_tokens == 550);
  }
  SUBCASE("errors carry the offending line number") {
    TempFile f("wl_trace_bad.jsonl");
    f.write(
        "{\"session_id\":1,\"turn\":1,\"arrival_ms\":0,\"new_tokens\":10}\n"
        "{\"session_id\":1,\"turn\":2,\"arrival_ms\":1}\n");
    try {
      (void)load_trace(f.path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line_number == 2);
    }
  }
  SUBCASE("malformed json and bad scalar values are parse errors") {
    TempFile f("wl_trace_junk.jsonl");
    f.write("not json at all\n");
    CHECK_THROWS_AS((void)load_trace(f.path), ParseError);
    f.write("{\"session_id\":1,\"turn\":0,\"arrival_ms\":0,\"new_tokens\":10}\n");
    CHECK_THROWS_AS((void)load_trace(f.path), ParseError);
    f.write("{\"session_id\":1,\"turn\":1,\"arrival_ms\":-1,\"new_tokens\":10}\n");
    CHECK_THROWS_AS((void)load_trace(f.path), ParseError);
    f.write("{\"session_id\":1,\"turn\":1,\"arrival_ms\":0,\"new_tokens\":0}\n");
    CHECK_THROWS_AS((void)load_trace(f.path), ParseError);
  }
  SUBCASE("session invariants are enforced") {
    TempFile f("wl_trace_inv.jsonl");
    f.write(
        "{\"session_id\":1,\"turn\":1,\"arrival_ms\":0,\"new_tokens\":10}\n"
        "{\"session_id\":1,\"turn\":1,\"arrival_ms\":1,\"new_tokens\":10}\n");
    CHECK_THROWS_AS((void)load_trace(f.path), InvariantViolation);
    f.write(
        "{\"session_id\":1,\"turn\":1,\"arrival_ms\":5,\"new_tokens\":10}\n"
        "{\"session_id\":1,\"turn\":2,\"arrival_ms\":2,\"new_tokens\":10}\n");
    CHECK_THROWS_AS((void)load_trace(f.path), InvariantViolation);
    f.write(
        "{\"session_id\":1,\"turn\":1,\"arrival_ms\":0,\"new_tokens\":10,"
        "\"history_tokens\":5}\n");
    CHECK_THROWS_AS((void)load_trace(f.path), InvariantViolation);
    f.write(
        "{\"session_id\":1,\"turn\":1,\"arrival_ms\":10,\"new_tokens\":10,"
        "\"deadline_ms\":10}\n");
    CHECK_THROWS_AS((void)load_trace(f.path), InvariantViolation);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS((void)load_trace("wl_no_such_file.jsonl"), ParseError);
  }
}

TEST_CASE("save and reload reproduce a stream exactly") {
  SynthConfig cfg;
  cfg.lambda_per_ms = 0.05;
  cfg.turns_per_session = {1, 4};
  cfg.slo_offset_ms = 250.0;
  cfg.seed = 99;
  auto orig = synth_stream(cfg, 20000.0);
  REQUIRE(orig.size() > 100);

  TempFile f("wl_roundtrip.jsonl");
  save_trace(f.path, orig);
  auto back = load_trace(f.path);
  CHECK(back == orig);
}

TEST_CASE("synthetic stream generation") {
  SUBCASE("deterministic for a fixed seed, different across seeds") {
    SynthConfig cfg;
    cfg.seed = 42;
    auto a = synth_stream(cfg, 50000.0);
    auto b = synth_stream(cfg, 50000.0);
    CHECK(a == b);
    cfg.seed = 43;
    auto c = synth_stream(cfg, 50000.0);
    CHECK(a != c);
  }
  SUBCASE("arrival rate and mixture fraction match the configuration") {
    SynthConfig cfg;
    cfg.lambda_per_ms = 0.01;
    cfg.short_fraction = 0.63;
    cfg.seed = 123;
    const double dur = 1e6;
    auto v = synth_stream(cfg, dur);
    const double n = static_cast<double>(v.size());
    CHECK(n == doctest::Approx(cfg.lambda_per_ms * dur).epsilon(0.03));
    // Length ranges are disjoint, so the mixture weight is observable.
    double n_short = 0;
    for (const auto& r : v) n_short += r.new_tokens <= 255 ? 1 : 0;
    CHECK(n_short / n == doctest::Approx(0.63).epsilon(0.02));
  }
  SUBCASE("structural invariants hold across configurations") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      SynthConfig cfg;
      cfg.lambda_per_ms = 0.02;
      cfg.short_fraction = 0.5;
      cfg.short_fraction_later = 0.8;
      cfg.turns_per_session = {1, 5};
      cfg.slo_offset_ms = 300.0;
      cfg.seed = seed;
      const double dur = 30000.0;
      auto v = synth_stream(cfg, dur);
      REQUIRE(!v.empty());
      std::map<std::int64_t, Tokens> cum;
      std::map<std::int64_t, int> last_turn;
      double prev = 0;
      for (size_t i = 0; i < v.size(); ++i) {
        const auto& r = v[i];
        CHECK(r.id == static_cast<RequestId>(i));
        CHECK(r.arrival_ms >= prev);
        CHECK(r.arrival_ms <= dur);
        CHECK(r.turn >= 1);
        CHECK(r.new_tokens >= 8);
        CHECK(r.new_tokens <= 2048);
        CHECK(r.turn == last_turn[r.session_id] + 1);
        CHECK(r.history_tokens == cum[r.session_id]);
        if (r.turn == 1) CHECK(r.history_tokens == 0);
        REQUIRE(r.deadline_ms.has_value());
        CHECK(*r.deadline_ms == doctest::Approx(r.arrival_ms + 300.0));
        cum[r.session_id] += r.new_tokens;
        last_turn[r.session_id] = r.turn;
        prev = r.arrival_ms;
      }
      // Multi-turn sessions actually occur.
      bool any_later = false;
      for (const auto& r : v) any_later |= r.turn > 1;
      CHECK(any_later);
    }
  }
  SUBCASE("invalid configurations are rejected") {
    auto bad = [](auto mutate) {
      SynthConfig c;
      mutate(c);
      CHECK_THROWS_AS((void)synth_stream(c, 100.0), InvalidConfig);
    };
    bad([](SynthConfig& c) { c.lambda_per_ms = 0; });
    bad([](SynthConfig& c) { c.lambda_per_ms = -1; });
    bad([](SynthConfig& c) { c.short_fraction = 1.5; });
    bad([](SynthConfig& c) { c.short_fraction_later = -0.1; });
    bad([](SynthConfig& c) { c.short_len = {0, 10}; });
    bad([](SynthConfig& c) { c.long_len = {100, 50}; });
    bad([](SynthConfig& c) { c.turns_per_session = {0, 2}; });
    bad([](SynthConfig& c) { c.turns_per_session = {3, 2}; });
    bad([](SynthConfig& c) { c.slo_offset_ms = 0.0; });
  }
}

TEST_CASE("length classification") {
  Request r;
  r.turn = 1;
  r.new_tokens = 100;
  CHECK(classify(r, 256, 256) == LengthClass::kShort);
  r.new_tokens = 1024;
  CHECK(classify(r, 256, 256) == LengthClass::kLong);
  r.new_tokens = 256;  // boundary counts as short
  CHECK(classify(r, 256, 256) == LengthClass::kShort);
  // Later turns use the re-prefill boundary.
  r.turn = 2;
  r.new_tokens = 200;
  CHECK(classify(r, 256, 128) == LengthClass::kLong);
  r.turn = 1;
  CHECK(classify(r, 256, 128) == LengthClass::kShort);
}

TEST_CASE("stream combinators") {
  auto mk = [](std::int64_t sid, double t) {
    Request r;
    r.session_id = sid;
    r.new_tokens = 10;
    r.arrival_ms = t;
    return r;
  };
  SUBCASE("merge interleaves by arrival with fresh ids and disjoint sessions") {
    std::vector<Request> a{mk(0, 10), mk(1, 30)};
    std::vector<Request> b{mk(0, 20), mk(0, 40)};
    auto m = merge_streams(a, b);
    REQUIRE(m.size() == 4);
    for (size_t i = 0; i < m.size(); ++i) {
      CHECK(m[i].id == static_cast<RequestId>(i));
    }
    CHECK(m[0].arrival_ms == doctest::Approx(10));
    CHECK(m[1].arrival_ms == doctest::Approx(20));
    CHECK(m[2].arrival_ms == doctest::Approx(30));
    CHECK(m[3].arrival_ms == doctest::Approx(40));
    // Second stream's sessions renumbered past the first stream's.
    CHECK(m[0].session_id == 0);
    CHECK(m[1].session_id == 2);
    CHECK(m[2].session_id == 1);
    CHECK(m[3].session_id == 2);
  }
  SUBCASE("ties keep the first stream first") {
    auto m = merge_streams({mk(0, 5)}, {mk(0, 5)});
    REQUIRE(m.size() == 2);
    CHECK(m[0].session_id == 0);
    CHECK(m[1].session_id == 1);
  }
  SUBCASE("shift moves arrivals and deadlines together") {
    auto r = mk(3, 100);
    r.deadline_ms = 400.0;
    auto s = shift_stream({r}, 2500.0);
    REQUIRE(s.size() == 1);
    CHECK(s[0].arrival_ms == doctest::Approx(2600));
    CHECK(*s[0].deadline_ms == doctest::Approx(2900));
    CHECK(s[0].session_id == 3);
    CHECK(s[0].new_tokens == 10);
  }
}
