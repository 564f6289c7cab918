// ============================================================================
// photon_source.hpp -- pair-number distributions G_N(k)
//
// A PairDistribution is an immutable description of how many photon pairs a
// source emits per sample window. Poisson and thermal (Bose-Einstein) laws
// have closed-form moments; custom laws are explicit finite PMF tables.
// ============================================================================
#pragma once
#include <cstdint>
#include <filesystem>
#include <random>
#include <string_view>
#include <vector>

namespace pdcal {

using Count = std::uint64_t;
using Rng = std::mt19937_64;

enum class DistKind { Poisson, Thermal, Custom };

[[nodiscard]] std::string_view to_string(DistKind kind) noexcept;
[[nodiscard]] DistKind dist_kind_from_string(std::string_view name);

/// First and second raw moments <k>, <k^2>.
struct Moments2 {
  double mean = 0.0;
  double second = 0.0;
};

class PairDistribution {
public:
  /// Throws ParameterError on negative / non-finite mean.
  static PairDistribution poisson(double mean);
  /// Geometric law with mean N: P(k) = N^k / (1+N)^(k+1).
  static PairDistribution thermal(double mean);
  /// Table index is k. Entries must be finite and >= 0, and the total mass
  /// must not exceed 1 + 1e-9.
  static PairDistribution custom(std::vector<double> pmf_table);

  [[nodiscard]] DistKind kind() const noexcept { return kind_; }
  /// Expected pair count N (for custom laws, the table mean).
  [[nodiscard]] double mean() const noexcept { return mean_; }
  /// Truncation point K_max with tail mass below 1e-12 (custom: last index).
  [[nodiscard]] Count cutoff() const noexcept { return cutoff_; }
  [[nodiscard]] const std::vector<double>& pmf_table() const noexcept { return table_; }

  /// Probability of exactly k pairs.
  [[nodiscard]] double pmf(Count k) const;

  /// Exact (<k>, <k^2>). Custom laws with more than 1e-9 missing mass throw
  /// TruncationError.
  [[nodiscard]] Moments2 moments() const;

  /// One draw of k. A given (seed, call sequence) always yields the same k.
  [[nodiscard]] Count sample(Rng& rng) const;

private:
  PairDistribution() = default;

  DistKind kind_ = DistKind::Poisson;
  double mean_ = 0.0;
  Count cutoff_ = 0;
  std::vector<double> table_;
  std::vector<double> cdf_;
};

// Free-function spellings of the member operations.
[[nodiscard]] inline double pmf(const PairDistribution& dist, Count k) { return dist.pmf(k); }
[[nodiscard]] inline Moments2 moments(const PairDistribution& dist) { return dist.moments(); }
[[nodiscard]] inline Count sample_pairs(const PairDistribution& dist, Rng& rng) {
  return dist.sample(rng);
}

/// Reads a custom PMF file: one probability per line (line index = k),
/// `#` starts a comment, blank lines are skipped.
[[nodiscard]] PairDistribution load_pmf_file(const std::filesystem::path& path);

/// Default truncation points (tail mass < 1e-12).
[[nodiscard]] Count poisson_cutoff(double mean);
[[nodiscard]] Count thermal_cutoff(double mean);

// ----------------------------------------------------------------------------
// Seed splitting
// ----------------------------------------------------------------------------
/// SplitMix64 finalizer; a bijection on 64-bit words.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for independent stream `index` under `master`. Distinct indices map
/// to distinct seeds for a fixed master.
[[nodiscard]] constexpr std::uint64_t stream_seed(std::uint64_t master,
                                                  std::uint64_t index) noexcept {
  return splitmix64(master + 0x9E3779B97F4A7C15ULL * (index + 1));
}

}  // namespace pdcal
