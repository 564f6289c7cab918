// ============================================================================
// error_model.hpp -- statistical errors of the efficiency estimators
//
// The variance of an estimator eta(<u>, <v>, ...) of sample means follows
// from first-order (delta-method) propagation,
//   sigma^2(eta) = sum_{u,v} (d eta/d<u>) (d eta/d<v>) sigma_<u><v>,
//   sigma_<u><v> = (<uv> - <u><v>) / M,
// with the covariances taken either from exact model moments (oracle) or
// from the records themselves. Poissonian sources also have closed forms.
// ============================================================================
#pragma once
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pdcal/estimators.hpp"
#include "pdcal/photon_source.hpp"

namespace pdcal {

enum class VarianceSource { ClosedFormPoisson, ClosedFormEqualEta, NumericExactMoments, EmpiricalDeltaMethod };

[[nodiscard]] std::string_view to_string(VarianceSource s) noexcept;

/// Which efficiency an estimator gradient refers to.
enum class Arm { One, Two };

struct VarianceReport {
  Method method = Method::Product;
  double var_eta1 = 0.0;
  std::optional<double> var_eta2;
  VarianceSource source = VarianceSource::ClosedFormPoisson;
  // Parameters echoed back; NaN where not applicable.
  double eta1 = std::numeric_limits<double>::quiet_NaN();
  double eta2 = std::numeric_limits<double>::quiet_NaN();
  double mean_pairs = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t samples = 0;
};

/// d eta / d<u> for every statistic u (zero where eta does not depend on u),
/// evaluated at the means in `at`. Hand-derived from the estimator formulas.
[[nodiscard]] StatVector estimator_gradient(Method method, Arm arm, const MomentSet& at);

/// Delta-method variance with the per-window covariances of `cov_source`
/// divided by `samples`.
[[nodiscard]] double delta_variance(Method method, Arm arm, const MomentSet& at,
                                    const MomentSet& cov_source, std::uint64_t samples);

/// Closed-form sigma^2(eta1) for a Poissonian source (methods Product,
/// Difference, Coincidence). `mean_pairs` may be +infinity, giving the
/// N >> 1 limit. Throws ParameterError for eta outside (0, 1], N <= 0, M < 1.
[[nodiscard]] VarianceReport analytic_variance_poisson(Method method, double eta1, double eta2,
                                                       double mean_pairs, std::uint64_t samples);

/// Difference method with eta1 = eta2: 2(1-eta)^2/M (Poisson, N >> 1) or
/// 4(1-eta)^2/M (thermal, N >> 1).
[[nodiscard]] VarianceReport analytic_variance_equal_eta(DistKind kind, double eta,
                                                         std::uint64_t samples);

/// Delta method with exact moments and covariances from the oracle.
[[nodiscard]] VarianceReport numeric_variance(Method method, const PairDistribution& dist,
                                              double eta1, double eta2, std::uint64_t samples);

/// Delta method with sample covariances and partials at the sample means.
[[nodiscard]] VarianceReport empirical_variance(const MomentSet& sample, Method method);
[[nodiscard]] VarianceReport empirical_variance(std::span<const CountRecord> records, Method method);

/// Variance of an estimator applied to correct_background(raw, bg), where raw
/// and bg are independent runs with their own sample covariances.
[[nodiscard]] VarianceReport empirical_variance_corrected(const MomentSet& raw, const MomentSet& bg,
                                                          Method method);

/// Jacobian of correct_background: d(corrected u)/d(raw v) and
/// d(corrected u)/d(bg v), evaluated at (raw, bg).
struct BackgroundJacobian {
  StatMatrix wrt_raw{};
  StatMatrix wrt_background{};
};
[[nodiscard]] BackgroundJacobian background_jacobian(const MomentSet& raw, const MomentSet& bg);

// ----------------------------------------------------------------------------
// Variance curves
// ----------------------------------------------------------------------------
struct Eta2Mode {
  /// Empty: eta2 follows eta1.
  std::optional<double> fixed;

  static Eta2Mode equal_to_eta1() { return {}; }
  static Eta2Mode fixed_at(double v) { return {v}; }
};

struct CurvePoint {
  double eta1;
  double variance;
};

/// sigma^2(eta1) of the Product or Difference method along `eta1_grid` for a
/// Poissonian source; `mean_pairs` = +infinity evaluates the N >> 1 limit.
[[nodiscard]] std::vector<CurvePoint> variance_curve(Method method, Eta2Mode eta2_mode,
                                                     double mean_pairs, std::uint64_t samples,
                                                     std::span<const double> eta1_grid);

}  // namespace pdcal
