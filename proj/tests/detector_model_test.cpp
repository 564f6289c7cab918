#include <cmath>
#include <vector>

#include "doctest.h"
#include "pdcal/detector_model.hpp"
#include "pdcal/errors.hpp"
#include "pdcal/estimators.hpp"
#include "pdcal/oracle.hpp"

using namespace pdcal;

namespace {

std::vector<CountRecord> run(double n, double e1, double e2, double bg1, double bg2, std::size_t samples,
                             std::uint64_t seed, unsigned workers = 4) {
  SimulationPlan plan;
  plan.dist = PairDistribution::poisson(n);
  plan.ch1 = DetectorChannel{e1, bg1};
  plan.ch2 = DetectorChannel{e2, bg2};
  plan.samples = samples;
  plan.seed = seed;
  return simulate_records(plan, workers);
}

}  // namespace

TEST_SUITE("detector_model") {
  TEST_CASE("thin edge cases") {
    Rng rng{1};
    CHECK(thin(7, 1.0, rng) == 7);
    CHECK(thin(7, 0.0, rng) == 0);
    CHECK(thin(0, 0.5, rng) == 0);
    CHECK_THROWS_AS((void)thin(7, 1.5, rng), ParameterError);
    CHECK_THROWS_AS((void)thin(7, -0.1, rng), ParameterError);
    CHECK_THROWS_AS((void)DetectorChannel(0.5, -1.0), ParameterError);
    CHECK_THROWS_AS((void)DetectorChannel(2.0, 0.0), ParameterError);
  }

  TEST_CASE("thinning mean") {
    Rng rng{2};
    constexpr int n = 1'000'000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const auto l = static_cast<double>(thin(10, 0.3, rng));
      s += l;
      s2 += l * l;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - 3.0) <= 5.0 * se);
  }

  TEST_CASE("binomial arm moments") {
    auto a = binomial_arm_moments({1.0, 2.0}, 0.5);
    CHECK(a.mean == doctest::Approx(0.5));
    CHECK(a.second == doctest::Approx(0.75));
    auto z = binomial_arm_moments({3.7, 20.0}, 0.0);
    CHECK(z.mean == 0.0);
    CHECK(z.second == 0.0);
    auto t = binomial_arm_moments({2.0, 10.0}, 0.5);
    CHECK(t.mean == doctest::Approx(1.0));
    CHECK(t.second == doctest::Approx(3.0));
  }

  TEST_CASE("no light gives zero counts") {
    Rng rng{3};
    const DetectorChannel ch{0.7, 0.0};
    for (int i = 0; i < 100; ++i) {
      const auto r = simulate_record(PairDistribution::poisson(0.0), ch, ch, rng, true);
      REQUIRE(r == CountRecord{0, 0, Count{0}});
    }
  }

  TEST_CASE("perfect detection is perfectly correlated") {
    for (const auto& r : run(4.0, 1.0, 1.0, 0.0, 0.0, 20'000, 4)) {
      REQUIRE(r.l == r.m);
      REQUIRE(r.c == r.l);
    }
  }

  TEST_CASE("mean coincidences") {
    const auto records = run(4.0, 0.6, 0.4, 0.0, 0.0, 1'000'000, 5);
    const auto mom = sample_moments(records);
    const double se = std::sqrt(mom.covariance(Stat::C, Stat::C) / 1e6);
    CHECK(std::abs(*mom.mean_c() - 0.96) <= 5.0 * se);
  }

  TEST_CASE("coincidences never exceed arm-one detections") {
    for (const auto& r : run(3.0, 0.5, 0.9, 0.0, 0.0, 50'000, 6)) REQUIRE(*r.c <= r.l);
  }

  TEST_CASE("background enters singles only") {
    Rng rng{7};
    const auto dist = PairDistribution::poisson(2.0);
    const DetectorChannel ch1{0.5, 1.5}, ch2{0.5, 0.5};
    constexpr int n = 400'000;
    double sb = 0, ss = 0, sbs = 0, sb2 = 0, ss2 = 0;
    for (int i = 0; i < n; ++i) {
      const auto w = simulate_window(dist, ch1, ch2, rng);
      REQUIRE(w.coincidences <= w.l_signal);
      const auto r = w.record(true);
      REQUIRE(r.l == w.l_signal + w.l_background);
      REQUIRE(r.m == w.m_signal + w.m_background);
      REQUIRE(r.c == w.coincidences);
      const auto b = static_cast<double>(w.l_background), s = static_cast<double>(w.l_signal);
      sb += b;
      ss += s;
      sbs += b * s;
      sb2 += b * b;
      ss2 += s * s;
    }
    const double mb = sb / n, ms = ss / n;
    const double cov = sbs / n - mb * ms;
    const double se = std::sqrt((sb2 / n - mb * mb) * (ss2 / n - ms * ms) / n);
    CHECK(mb == doctest::Approx(1.5).epsilon(0.01));
    CHECK(std::abs(cov) <= 5.0 * se);
  }

  TEST_CASE("background-only records") {
    Rng rng{8};
    const DetectorChannel ch{0.9, 0.0};
    const auto r = simulate_background_record(ch, ch, rng);
    CHECK(r.l == 0);
    CHECK(r.m == 0);
    CHECK_FALSE(r.c.has_value());
  }

  TEST_CASE("record stream does not depend on the worker count") {
    for (std::size_t samples : {std::size_t{0}, std::size_t{1}, kSimulationBlock + 17, 5 * kSimulationBlock}) {
      const auto one = run(2.5, 0.6, 0.3, 0.2, 0.1, samples, 77, 1);
      CHECK(one.size() == samples);
      CHECK(one == run(2.5, 0.6, 0.3, 0.2, 0.1, samples, 77, 4));
      CHECK(one == run(2.5, 0.6, 0.3, 0.2, 0.1, samples, 77, 7));
    }
    CHECK(run(2.5, 0.6, 0.3, 0.0, 0.0, 100, 1) != run(2.5, 0.6, 0.3, 0.0, 0.0, 100, 2));
  }

  TEST_CASE("sample moments converge to the oracle") {
    struct Point {
      double n, e1, e2;
    };
    std::uint64_t seed = 900;
    for (const Point p : {Point{0.5, 0.9, 0.2}, Point{5.0, 0.6, 0.4}, Point{2.0, 0.15, 1.0}}) {
      const auto sample = sample_moments(run(p.n, p.e1, p.e2, 0.0, 0.0, 1'000'000, ++seed));
      const auto exact = exact_moments({PairDistribution::poisson(p.n), p.e1, p.e2, std::nullopt});
      for (Stat s : kAllStats) {
        const double se = std::sqrt(exact.covariance(s, s) / 1e6);
        CAPTURE(stat_name(s));
        CAPTURE(p.n);
        CHECK(std::abs(sample[s] - exact[s]) <= 5.0 * se);
      }
    }
  }
}
