#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <prefillsim/queueing.hpp>

#include <cmath>
#include <random>

using namespace prefillsim;

TEST_CASE("mean wait matches the moment formula") {
  SUBCASE("exponential service reduces to the birth-death closed form") {
    CHECK(pk_wait(0.5, 1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("deterministic service halves the exponential wait") {
    CHECK(pk_wait(0.5, 1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("two-point mix at eighty percent load") {
    // p=0.5 over {1, 3}: E[S]=2, E[S^2]=5.
    CHECK(pk_wait(0.4, 2.0, 5.0) == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("agrees with rho/(mu-lambda) whenever E[S^2] = 2 E[S]^2") {
    std::mt19937_64 g(5);
    auto unit = [&] { return static_cast<double>(g() >> 11) * 0x1.0p-53; };
    for (int i = 0; i < 200; ++i) {
      const double s = 0.1 + 5.0 * unit();
      const double rho = 0.05 + 0.9 * unit();
      const double lambda = rho / s;
      const double mm1 = rho / (1.0 / s - lambda);
      CHECK(pk_wait(lambda, s, 2 * s * s) ==
            doctest::Approx(mm1).epsilon(1e-9));
    }
  }
  SUBCASE("saturated or impossible inputs are rejected") {
    CHECK_THROWS_AS((void)pk_wait(1.0, 1.0, 2.0), UnstableQueue);
    CHECK_THROWS_AS((void)pk_wait(1.5, 1.0, 2.0), UnstableQueue);
    CHECK_THROWS_AS((void)pk_wait(0.5, 1.0, 0.5), InvalidMoments);
  }
}

TEST_CASE("head-of-line mixing penalty") {
  SUBCASE("homogeneous mixes cost nothing") {
    ServiceMix a{0.25, 0.0, 1.0, 3.0};
    CHECK(hol_penalty(a) == doctest::Approx(0.0));
    ServiceMix b{0.25, 1.0, 1.0, 3.0};
    CHECK(hol_penalty(b) == doctest::Approx(0.0));
    ServiceMix c{0.25, 0.5, 2.0, 2.0};
    CHECK(hol_penalty(c) == doctest::Approx(0.0));
  }
  SUBCASE("explicit-utilization form evaluates the formula as given") {
    CHECK(hol_penalty(1.0, 0.5, 1.0, 3.0, 0.5) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("mix form derives utilization and checks stability") {
    ServiceMix m{0.25, 0.5, 1.0, 3.0};  // rho = 0.5
    CHECK(hol_penalty(m) == doctest::Approx(0.25).epsilon(1e-12));
    ServiceMix sat{0.5, 0.5, 1.0, 3.0};  // rho = 1
    CHECK_THROWS_AS((void)hol_penalty(sat), UnstableQueue);
  }
  SUBCASE("symmetric in the class fraction and quadratic in the gap") {
    std::mt19937_64 g(11);
    auto unit = [&] { return static_cast<double>(g() >> 11) * 0x1.0p-53; };
    for (int i = 0; i < 200; ++i) {
      const double p = unit();
      const double s = 0.1 + unit();
      const double gap = unit() * 3;
      const double rho = 0.1 + 0.8 * unit();
      const double lambda = 0.1;
      const double base = hol_penalty(lambda, p, s, s + gap, rho);
      CHECK(hol_penalty(lambda, 1 - p, s, s + gap, rho) ==
            doctest::Approx(base).epsilon(1e-9));
      CHECK(hol_penalty(lambda, p, s, s + 2 * gap, rho) ==
            doctest::Approx(4 * base).epsilon(1e-9));
    }
  }
  SUBCASE("mixing penalty equals the wait decomposition identity") {
    // W(mix) - [p W(short-only) + (1-p) W(long-only)] at equal rho is
    // exactly the penalty formula; this is the identity the simulator
    // comparison relies on.
    std::mt19937_64 g(13);
    auto unit = [&] { return static_cast<double>(g() >> 11) * 0x1.0p-53; };
    for (int i = 0; i < 200; ++i) {
      const double p = 0.05 + 0.9 * unit();
      const double ss = 0.2 + unit();
      const double sl = ss + 0.1 + 2 * unit();
      const double rho = 0.1 + 0.8 * unit();
      ServiceMix m{rho / (p * ss + (1 - p) * sl), p, ss, sl};
      const double w_mix =
          pk_wait(m.lambda_per_ms, m.mean_service(), m.second_moment());
      const double w_s = pk_wait(rho / ss, ss, ss * ss);
      const double w_l = pk_wait(rho / sl, sl, sl * sl);
      const double decomposed = w_mix - (p * w_s + (1 - p) * w_l);
      CHECK(hol_penalty(m) == doctest::Approx(decomposed).epsilon(1e-9));
    }
  }
}

TEST_CASE("normalized latency") {
  CHECK(normalized_latency(1.0, 0.0) == doctest::Approx(1.0));
  CHECK(normalized_latency(1.0, 2.0) == doctest::Approx(3.0));
  SUBCASE("shorter requests suffer a larger slowdown") {
    CHECK(normalized_latency(1.0, 3.0) == doctest::Approx(4.0));
    CHECK(normalized_latency(3.0, 3.0) == doctest::Approx(2.0));
    std::mt19937_64 g(17);
    auto unit = [&] { return static_cast<double>(g() >> 11) * 0x1.0p-53; };
    for (int i = 0; i < 100; ++i) {
      const double w = unit() * 10 + 0.01;
      const double a = 0.1 + unit();
      const double b = a + 0.1 + unit();
      CHECK(normalized_latency(a, w) > normalized_latency(b, w));
    }
  }
}
