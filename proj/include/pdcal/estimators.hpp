// ============================================================================
// estimators.hpp -- sample moments and absolute-efficiency estimators
//
// Four estimators work on a MomentSet of singles statistics:
//   Product          eta1 = <lm>/<m> - <l^2>/<l> + 1
//   Difference       eta1 = [3<m> - <m>^2/<l> + <l^2>(1-<m>/<l>)^2 - <(l-m)^2>] / (2<m>)
//   EqualDifference  eta  = 1 - <(l-m)^2> / (2<s>),  <s> = (<l>+<m>)/2
//   Coincidence      eta1 = <c>/<m>,  eta2 = <c>/<l>
// eta2 follows from eta1 by exchanging the arms. Estimates are never clamped
// to [0, 1]; out-of-range values are flagged instead.
// ============================================================================
#pragma once
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "pdcal/detector_model.hpp"

namespace pdcal {

/// Per-window statistics tracked by a MomentSet.
enum class Stat : std::size_t { L, M, L2, M2, LM, D2, C, C2 };
inline constexpr std::size_t kStatCount = 8;
inline constexpr std::array<Stat, kStatCount> kAllStats{Stat::L,  Stat::M,  Stat::L2, Stat::M2,
                                                        Stat::LM, Stat::D2, Stat::C,  Stat::C2};

[[nodiscard]] std::string_view stat_name(Stat s) noexcept;  // "l", "m", "l2", ...
[[nodiscard]] constexpr std::size_t index(Stat s) noexcept { return static_cast<std::size_t>(s); }

using StatVector = std::array<double, kStatCount>;
using StatMatrix = std::array<StatVector, kStatCount>;

/// Means of the tracked statistics, optionally with the full table of cross
/// means <uv> (needed for covariances). `sample_size` is empty for exact
/// (population) moments.
struct MomentSet {
  StatVector mean{};
  std::optional<StatMatrix> cross;
  bool has_coincidence = false;
  std::optional<std::uint64_t> sample_size;

  [[nodiscard]] double operator[](Stat s) const noexcept { return mean[index(s)]; }
  double& operator[](Stat s) noexcept { return mean[index(s)]; }

  [[nodiscard]] double mean_l() const noexcept { return (*this)[Stat::L]; }
  [[nodiscard]] double mean_m() const noexcept { return (*this)[Stat::M]; }
  [[nodiscard]] double mean_l2() const noexcept { return (*this)[Stat::L2]; }
  [[nodiscard]] double mean_m2() const noexcept { return (*this)[Stat::M2]; }
  [[nodiscard]] double mean_lm() const noexcept { return (*this)[Stat::LM]; }
  [[nodiscard]] double mean_diff2() const noexcept { return (*this)[Stat::D2]; }
  [[nodiscard]] std::optional<double> mean_c() const noexcept;
  [[nodiscard]] std::optional<double> mean_c2() const noexcept;

  /// Per-window covariance <uv> - <u><v>. Requires `cross`.
  [[nodiscard]] double covariance(Stat u, Stat v) const;

  /// Checks variance nonnegativity (relative tolerance 1e-12) and the
  /// identity <(l-m)^2> = <l^2> + <m^2> - 2<lm>. Throws DataError.
  void validate(double identity_tolerance = 1e-9) const;
};

/// Exact streaming accumulator. Sums and cross sums are kept as 128-bit
/// integers, so merging partial accumulators is exact and order independent.
class MomentAccumulator {
public:
  /// Counts above this bound are rejected (keeps 4th-order sums in range).
  static constexpr Count kMaxCount = Count{1} << 20;

  void add(const CountRecord& r);
  void merge(const MomentAccumulator& other);

  [[nodiscard]] std::uint64_t size() const noexcept { return n_; }
  /// Throws InsufficientDataError for fewer than 2 records.
  [[nodiscard]] MomentSet finish() const;

private:
  __extension__ typedef unsigned __int128 Wide;
  std::uint64_t n_ = 0;
  std::uint64_t with_c_ = 0;
  std::array<Wide, kStatCount> sum_{};
  std::array<std::array<Wide, kStatCount>, kStatCount> cross_{};
};

[[nodiscard]] MomentSet sample_moments(std::span<const CountRecord> records);

enum class Method { Product, Difference, EqualDifference, Coincidence };

[[nodiscard]] std::string_view to_string(Method m) noexcept;
[[nodiscard]] Method method_from_string(std::string_view name);

struct EfficiencyEstimate {
  Method method = Method::Product;
  double eta1 = 0.0;
  double eta2 = 0.0;
  std::optional<double> var_eta1;
  std::optional<double> var_eta2;
  bool background_corrected = false;
  /// Some estimate lies outside [0, 1].
  bool out_of_range = false;
  /// EqualDifference only: the arms' singles differ by more than 5 joint
  /// standard errors, so the equal-efficiency assumption is suspect.
  bool unequal_arms = false;
};

[[nodiscard]] EfficiencyEstimate eta_product(const MomentSet& mom);
[[nodiscard]] EfficiencyEstimate eta_difference(const MomentSet& mom);
[[nodiscard]] EfficiencyEstimate eta_equal_difference(const MomentSet& mom);
/// Throws MethodUnavailable when the moments carry no coincidence data.
[[nodiscard]] EfficiencyEstimate eta_coincidence(const MomentSet& mom);
[[nodiscard]] EfficiencyEstimate estimate(Method method, const MomentSet& mom);

/// Signal-only moments from measured moments `raw` and a source-blocked
/// background run `bg`, assuming signal and background are independent.
/// Coincidence moments pass through unchanged. The result carries no cross
/// table. Throws BackgroundDominatesError when a corrected mean singles
/// rate is <= 0.
[[nodiscard]] MomentSet correct_background(const MomentSet& raw, const MomentSet& bg);

/// <(l-m)^2>/<s>^2 = (2/N)(1/eta - 1) for equal efficiencies.
[[nodiscard]] double normalized_difference_variance(double eta, double mean_pairs);

}  // namespace pdcal
