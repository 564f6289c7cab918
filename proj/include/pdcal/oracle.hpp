// ============================================================================
// oracle.hpp -- exact moments of the pair-source / binomial-detector model
//
// Ground truth for estimators and variances. The main engine evaluates
//   <x> = sum_k G_N(k) sum_l sum_m B_{k,eta1}(l) B_{k,eta2}(m) x
// for every tracked statistic and every pairwise product of statistics.
// Conditional on k each expectation is a polynomial of degree <= 4 in k, so
// only the raw moments <k^j>, j <= 4, are summed over the distribution.
// Literal triple sums are kept as an independent reference route.
// ============================================================================
#pragma once
#include <array>
#include <functional>
#include <optional>

#include "pdcal/estimators.hpp"
#include "pdcal/photon_source.hpp"

namespace pdcal {

struct ExactMomentRequest {
  PairDistribution dist;
  double eta1 = 1.0;
  double eta2 = 1.0;
  /// Explicit truncation point; the tail beyond it must carry < 1e-12 mass.
  std::optional<Count> cutoff;
};

/// Raw pair-number moments <k^j>, j = 0..4, normalized by the summed mass.
using PairRawMoments = std::array<double, 5>;

/// Truncation point used by the oracle: the distribution's default cutoff,
/// extended until p(k) k^4 is negligible against the fourth moment.
[[nodiscard]] Count summation_cutoff(const PairDistribution& dist);

[[nodiscard]] PairRawMoments pair_raw_moments(const PairDistribution& dist,
                                              std::optional<Count> cutoff = std::nullopt);

/// Exact means and cross means of all statistics (l, m, l^2, m^2, lm,
/// (l-m)^2, c, c^2), with c ~ Binomial(l, eta2) and m independent of (l, c)
/// given k. `sample_size` is empty.
[[nodiscard]] MomentSet exact_moments(const ExactMomentRequest& req);

/// sigma_<u><v> = (<uv> - <u><v>) / M for every pair of statistics.
[[nodiscard]] StatMatrix exact_covariances(const ExactMomentRequest& req, std::uint64_t samples);

/// Closed-form means from (<k>, <k^2>) only: single-arm moments, <lm> =
/// eta1 eta2 <k^2>, <(l-m)^2> from the general difference-variance formula,
/// <c> = eta1 eta2 <k>. No cross table.
[[nodiscard]] MomentSet closed_form_moments(const PairDistribution& dist, double eta1, double eta2);

/// <(l-m)^2> = <l> + <m> - (eta1<l> + eta2<m>)
///            + (eta1-eta2)^2 (<l^2> - <l> + eta1<l>) / eta1^2,  eta1 > 0.
[[nodiscard]] double difference_variance_closed_form(double mean_l, double mean_m, double mean_l2,
                                                     double eta1, double eta2);

/// B_{k,eta}(l).
[[nodiscard]] double binomial_pmf(Count k, double eta, Count l);

/// Literal triple sum of f(l, m) over G_N(k) B_{k,eta1}(l) B_{k,eta2}(m).
/// O(K^3); intended for small N.
[[nodiscard]] double brute_force_expectation(const PairDistribution& dist, double eta1,
                                             double eta2,
                                             const std::function<double(Count, Count)>& f,
                                             std::optional<Count> cutoff = std::nullopt);

/// <c^p>, p in {1, 2}: sum_k sum_l sum_{m<=l} G_N(k) B_{k,eta1}(l) B_{l,eta2}(m) m^p.
/// O(K^3) literal sum.
[[nodiscard]] double exact_coincidence_moments(const PairDistribution& dist, double eta1,
                                               double eta2, int p);

}  // namespace pdcal
