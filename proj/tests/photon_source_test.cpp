#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "doctest.h"
#include "pdcal/errors.hpp"
#include "pdcal/photon_source.hpp"

using namespace pdcal;

namespace {

struct DrawStats {
  double mean_k;
  double mean_k2;
  double se_k;
  double se_k2;
};

DrawStats draw(const PairDistribution& dist, std::uint64_t seed, std::size_t n) {
  Rng rng{seed};
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<double>(sample_pairs(dist, rng));
    s1 += k;
    s2 += k * k;
    s3 += k * k * k;
    s4 += k * k * k * k;
  }
  const double dn = static_cast<double>(n);
  const double m1 = s1 / dn, m2 = s2 / dn, m4 = s4 / dn;
  return {m1, m2, std::sqrt((m2 - m1 * m1) / dn), std::sqrt((m4 - m2 * m2) / dn)};
}

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_SUITE("photon_source") {
  TEST_CASE("pmf examples") {
    CHECK(pmf(PairDistribution::poisson(1.0), 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(pmf(PairDistribution::thermal(2.0), 1) == doctest::Approx(2.0 / 9.0).epsilon(1e-15));
    for (const auto& vacuum : {PairDistribution::poisson(0.0), PairDistribution::thermal(0.0)}) {
      CHECK(pmf(vacuum, 0) == 1.0);
      CHECK(pmf(vacuum, 1) == 0.0);
      CHECK(pmf(vacuum, 17) == 0.0);
    }
    const auto custom = PairDistribution::custom({0.25, 0.5, 0.25});
    CHECK(pmf(custom, 1) == 0.5);
    CHECK(pmf(custom, 3) == 0.0);
  }

  TEST_CASE("moments examples") {
    auto p = moments(PairDistribution::poisson(1.0));
    CHECK(p.mean == doctest::Approx(1.0));
    CHECK(p.second == doctest::Approx(2.0));
    auto t = moments(PairDistribution::thermal(2.0));
    CHECK(t.mean == doctest::Approx(2.0));
    CHECK(t.second == doctest::Approx(10.0));
    auto c = moments(PairDistribution::custom({1.0}));
    CHECK(c.mean == 0.0);
    CHECK(c.second == 0.0);
  }

  TEST_CASE("pmf sums to one up to the cutoff") {
    for (double n : {0.0, 0.5, 1.0, 5.0, 50.0, 1000.0}) {
      for (const auto& dist : {PairDistribution::poisson(n), PairDistribution::thermal(n)}) {
        double total = 0.0, first = 0.0;
        for (Count k = 0; k <= dist.cutoff(); ++k) {
          total += dist.pmf(k);
          first += static_cast<double>(k) * dist.pmf(k);
        }
        CAPTURE(n);
        CHECK(std::abs(total - 1.0) <= 1e-9);
        CHECK(first == doctest::Approx(n).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("invalid parameters") {
    CHECK_THROWS_AS((void)PairDistribution::poisson(-1.0), ParameterError);
    CHECK_THROWS_AS((void)PairDistribution::thermal(std::nan("")), ParameterError);
    CHECK_THROWS_AS((void)PairDistribution::poisson(INFINITY), ParameterError);
    CHECK_THROWS_AS((void)PairDistribution::custom({}), ParameterError);
    CHECK_THROWS_AS((void)PairDistribution::custom({0.5, -0.1, 0.6}), ParameterError);
    CHECK_THROWS_AS((void)PairDistribution::custom({0.7, 0.7}), ParameterError);
    CHECK_THROWS_AS((void)PairDistribution::custom({0.0, 0.0}), ParameterError);
    CHECK_THROWS_AS((void)dist_kind_from_string("gaussian"), ParameterError);
  }

  TEST_CASE("custom law with missing tail mass") {
    const auto dist = PairDistribution::custom({0.5, 0.499});
    CHECK_THROWS_AS((void)dist.moments(), TruncationError);
    const auto almost = PairDistribution::custom({0.5, 0.5 - 1e-12});
    CHECK(almost.moments().mean == doctest::Approx(0.5));
  }

  TEST_CASE("vacuum source emits nothing") {
    Rng rng{12345};
    for (const auto& dist : {PairDistribution::poisson(0.0), PairDistribution::thermal(0.0),
                             PairDistribution::custom({1.0})}) {
      for (int i = 0; i < 1000; ++i) REQUIRE(sample_pairs(dist, rng) == 0);
    }
  }

  TEST_CASE("Poisson N=5 sample mean") {
    const auto s = draw(PairDistribution::poisson(5.0), 101, 1'000'000);
    CHECK(std::abs(s.mean_k - 5.0) <= 5.0 * std::sqrt(5.0 / 1e6));
  }

  TEST_CASE("thermal N=3 sample second moment") {
    const auto s = draw(PairDistribution::thermal(3.0), 202, 1'000'000);
    CHECK(std::abs(s.mean_k2 - 21.0) <= 5.0 * s.se_k2);
  }

  TEST_CASE("draws match exact moments for every kind") {
    const std::vector<PairDistribution> dists{
        PairDistribution::poisson(0.5), PairDistribution::poisson(20.0),
        PairDistribution::thermal(0.5), PairDistribution::thermal(7.0),
        PairDistribution::custom({0.1, 0.2, 0.3, 0.0, 0.4})};
    std::uint64_t seed = 7;
    for (const auto& dist : dists) {
      const auto exact = dist.moments();
      const auto s = draw(dist, ++seed, 400'000);
      CAPTURE(to_string(dist.kind()));
      CAPTURE(dist.mean());
      CHECK(std::abs(s.mean_k - exact.mean) <= 5.0 * s.se_k);
      CHECK(std::abs(s.mean_k2 - exact.second) <= 5.0 * s.se_k2);
    }
  }

  TEST_CASE("sampling is a deterministic function of the seed") {
    const auto dist = PairDistribution::thermal(4.0);
    Rng a{99}, b{99}, c{100};
    std::vector<Count> xa, xb, xc;
    for (int i = 0; i < 500; ++i) {
      xa.push_back(dist.sample(a));
      xb.push_back(dist.sample(b));
      xc.push_back(dist.sample(c));
    }
    CHECK(xa == xb);
    CHECK(xa != xc);
  }

  TEST_CASE("stream seeds are distinct") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 100'000; ++i) seen.insert(stream_seed(42, i));
    CHECK(seen.size() == 100'000);
    CHECK(stream_seed(1, 0) != stream_seed(2, 0));
  }

  TEST_CASE("default cutoffs leave negligible tails") {
    for (double n : {0.1, 3.0, 100.0}) {
      const auto p = PairDistribution::poisson(n);
      CHECK(p.cutoff() == poisson_cutoff(n));
      const auto t = PairDistribution::thermal(n);
      CHECK(t.cutoff() == thermal_cutoff(n));
      const double tail = std::pow(n / (1.0 + n), static_cast<double>(t.cutoff() + 1));
      CHECK(tail < 1e-12);
    }
  }

  TEST_CASE("pmf file") {
    const auto path = temp_file("pdcal_pmf_ok.txt", "# pairs per window\n0.25\n\n0.5  # one pair\n0.25\n");
    const auto dist = load_pmf_file(path);
    CHECK(dist.kind() == DistKind::Custom);
    CHECK(dist.cutoff() == 2);
    CHECK(dist.mean() == doctest::Approx(1.0));

    const auto bad = temp_file("pdcal_pmf_bad.txt", "0.5\nhalf\n");
    try {
      (void)load_pmf_file(bad);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS((void)load_pmf_file("/nonexistent/pmf.txt"), ParameterError);
    std::filesystem::remove(path);
    std::filesystem::remove(bad);
  }
}
