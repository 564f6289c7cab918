#include <cmath>
#include <vector>

#include "doctest.h"
#include "pdcal/errors.hpp"
#include "pdcal/oracle.hpp"
#include "reference.hpp"

using namespace pdcal;
using pdcal::test::brute_force_table;
using pdcal::test::rel_close;

namespace {

std::vector<PairDistribution> small_sources() {
  return {PairDistribution::poisson(0.5), PairDistribution::poisson(2.0), PairDistribution::thermal(0.5),
          PairDistribution::thermal(1.0), PairDistribution::custom({0.2, 0.1, 0.4, 0.0, 0.3})};
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("worked example") {
    const auto mom = exact_moments({PairDistribution::poisson(1.0), 0.5, 0.25, std::nullopt});
    CHECK(mom.mean_lm() == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(mom.mean_diff2() == doctest::Approx(0.5625).epsilon(1e-14));
    CHECK(*mom.mean_c() == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(mom.has_coincidence);
    CHECK_FALSE(mom.sample_size.has_value());
  }

  TEST_CASE("dark detectors and vacuum give zero moments") {
    for (const auto& mom : {exact_moments({PairDistribution::thermal(3.0), 0.0, 0.0, std::nullopt}),
                            exact_moments({PairDistribution::poisson(0.0), 0.7, 0.2, std::nullopt})}) {
      for (Stat s : kAllStats) CHECK(mom[s] == 0.0);
      for (Stat u : kAllStats)
        for (Stat v : kAllStats) CHECK(mom.covariance(u, v) == 0.0);
    }
  }

  TEST_CASE("moment engine agrees with literal sums") {
    for (const auto& dist : small_sources()) {
      for (auto [e1, e2] : {std::pair{0.5, 0.25}, std::pair{0.9, 0.9}, std::pair{0.15, 1.0}}) {
        const auto mom = exact_moments({dist, e1, e2, std::nullopt});
        const auto ref = brute_force_table(dist, e1, e2);
        CAPTURE(to_string(dist.kind()));
        CAPTURE(dist.mean());
        CAPTURE(e1);
        CAPTURE(e2);
        for (Stat u : kAllStats) {
          CAPTURE(stat_name(u));
          CHECK(rel_close(mom[u], ref[u], 1e-10));
          for (Stat v : kAllStats) {
            CAPTURE(stat_name(v));
            CHECK(rel_close((*mom.cross)[index(u)][index(v)], (*ref.cross)[index(u)][index(v)], 1e-10));
          }
        }
        const double lm = brute_force_expectation(dist, e1, e2, [](Count l, Count m) {
          return static_cast<double>(l) * static_cast<double>(m);
        });
        CHECK(rel_close(mom.mean_lm(), lm, 1e-10));
      }
    }
  }

  TEST_CASE("closed forms agree with the engine") {
    for (double n : {0.5, 1.0, 5.0, 50.0}) {
      for (const auto& dist : {PairDistribution::poisson(n), PairDistribution::thermal(n)}) {
        const auto mom = exact_moments({dist, 0.7, 0.35, std::nullopt});
        const auto closed = closed_form_moments(dist, 0.7, 0.35);
        for (Stat s : kAllStats) CHECK(rel_close(mom[s], closed[s], 1e-10));
      }
    }
  }

  TEST_CASE("difference variance from the general formula") {
    for (const auto& dist : small_sources()) {
      for (auto [e1, e2] : {std::pair{0.5, 0.25}, std::pair{0.3, 0.3}, std::pair{1.0, 0.05}}) {
        const auto k = dist.moments();
        const auto arm = binomial_arm_moments(k, e1);
        const double m = e2 * k.mean;
        const double ref = brute_force_expectation(dist, e1, e2, [](Count l, Count m) {
          const double d = static_cast<double>(l) - static_cast<double>(m);
          return d * d;
        });
        CHECK(rel_close(difference_variance_closed_form(arm.mean, m, arm.second, e1, e2), ref, 1e-10));
      }
    }
  }

  TEST_CASE("swapping the arms swaps the statistics") {
    const auto dist = PairDistribution::thermal(3.0);
    const auto a = exact_moments({dist, 0.8, 0.3, std::nullopt});
    const auto b = exact_moments({dist, 0.3, 0.8, std::nullopt});
    CHECK(rel_close(a.mean_l(), b.mean_m(), 1e-14));
    CHECK(rel_close(a.mean_l2(), b.mean_m2(), 1e-14));
    CHECK(rel_close(a.mean_lm(), b.mean_lm(), 1e-14));
    CHECK(rel_close(a.mean_diff2(), b.mean_diff2(), 1e-14));
    CHECK(rel_close(a.covariance(Stat::L, Stat::LM), b.covariance(Stat::M, Stat::LM), 1e-12));
    CHECK(rel_close(*a.mean_c(), *b.mean_c(), 1e-14));
  }

  TEST_CASE("difference identity holds on exact moments") {
    for (double n : {0.5, 50.0}) {
      const auto mom = exact_moments({PairDistribution::thermal(n), 0.45, 0.85, std::nullopt});
      CHECK(rel_close(mom.mean_diff2(), mom.mean_l2() + mom.mean_m2() - 2 * mom.mean_lm(), 1e-12));
      CHECK_NOTHROW(mom.validate());
    }
  }

  TEST_CASE("coincidence moments") {
    const auto p1 = PairDistribution::poisson(1.0);
    CHECK(exact_coincidence_moments(p1, 0.5, 0.25, 1) == doctest::Approx(0.125).epsilon(1e-13));
    CHECK(exact_coincidence_moments(p1, 1.0, 1.0, 2) == doctest::Approx(2.0).epsilon(1e-13));
    const auto th = PairDistribution::thermal(2.5);
    CHECK(exact_coincidence_moments(th, 0.35, 1.0, 1) == doctest::Approx(0.35 * 2.5).epsilon(1e-12));
    const auto mom = exact_moments({th, 0.35, 0.6, std::nullopt});
    CHECK(rel_close(*mom.mean_c2(), exact_coincidence_moments(th, 0.35, 0.6, 2), 1e-11));
    CHECK_THROWS_AS((void)exact_coincidence_moments(th, 0.35, 0.6, 3), ParameterError);
  }

  TEST_CASE("covariances") {
    const ExactMomentRequest req{PairDistribution::poisson(1.0), 0.5, 0.25, std::nullopt};
    const auto one = exact_covariances(req, 1);
    CHECK(one[index(Stat::L)][index(Stat::L)] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(one[index(Stat::L)][index(Stat::M)] == doctest::Approx(0.125).epsilon(1e-14));
    const auto hundred = exact_covariances(req, 100);
    for (Stat u : kAllStats)
      for (Stat v : kAllStats) {
        CHECK(hundred[index(u)][index(v)] == doctest::Approx(one[index(u)][index(v)] / 100).epsilon(1e-15));
        CHECK(one[index(u)][index(v)] == one[index(v)][index(u)]);
      }
    CHECK_THROWS_AS((void)exact_covariances(req, 0), ParameterError);
    const auto dark = exact_covariances({PairDistribution::poisson(4.0), 0.0, 0.0, std::nullopt}, 1);
    for (const auto& row : dark)
      for (double x : row) CHECK(x == 0.0);
  }

  TEST_CASE("truncation checks") {
    const auto dist = PairDistribution::poisson(20.0);
    CHECK_THROWS_AS((void)exact_moments({dist, 0.5, 0.5, Count{10}}), TruncationError);
    const auto wide = exact_moments({dist, 0.5, 0.5, Count{400}});
    const auto def = exact_moments({dist, 0.5, 0.5, std::nullopt});
    CHECK(rel_close(wide.mean_l2(), def.mean_l2(), 1e-13));
    CHECK(summation_cutoff(dist) >= dist.cutoff());
    const auto raw = pair_raw_moments(PairDistribution::poisson(2.0));
    CHECK(raw[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(raw[4] == doctest::Approx(2.0 + 7 * 4.0 + 6 * 8.0 + 16.0).epsilon(1e-12));
  }

  TEST_CASE("binomial pmf") {
    CHECK(binomial_pmf(4, 0.5, 2) == doctest::Approx(0.375));
    CHECK(binomial_pmf(3, 0.0, 0) == 1.0);
    CHECK(binomial_pmf(3, 1.0, 3) == 1.0);
    CHECK(binomial_pmf(3, 1.0, 2) == 0.0);
    CHECK(binomial_pmf(3, 0.5, 4) == 0.0);
  }
}
