// ============================================================================
// detector_model.hpp -- lossy detection as binomial thinning plus background
// ============================================================================
#pragma once
#include <cstddef>
#include <optional>
#include <vector>

#include "pdcal/photon_source.hpp"

namespace pdcal {

/// One detector arm: efficiency eta in [0, 1] and an additive background
/// count law (Poisson(lambda) unless a custom law is given).
class DetectorChannel {
public:
  DetectorChannel(double efficiency, double background_mean);
  DetectorChannel(double efficiency, PairDistribution background);

  [[nodiscard]] double efficiency() const noexcept { return efficiency_; }
  [[nodiscard]] double background_mean() const noexcept { return background_.mean(); }
  [[nodiscard]] const PairDistribution& background() const noexcept { return background_; }

private:
  double efficiency_;
  PairDistribution background_;
};

/// Measured counts of one sample window.
struct CountRecord {
  Count l = 0;
  Count m = 0;
  std::optional<Count> c;

  friend bool operator==(const CountRecord&, const CountRecord&) = default;
};

/// Signal/background decomposition of a simulated window.
struct SimulatedWindow {
  Count pairs = 0;
  Count l_signal = 0;
  Count m_signal = 0;
  Count l_background = 0;
  Count m_background = 0;
  Count coincidences = 0;

  [[nodiscard]] CountRecord record(bool with_coincidence) const;
};

/// l ~ Binomial(k, eta). Throws ParameterError for eta outside [0, 1].
[[nodiscard]] Count thin(Count k, double eta, Rng& rng);

/// Single-arm (<l>, <l^2>) from pair moments (<k>, <k^2>):
/// (eta<k>, eta<k> - eta^2<k> + eta^2<k^2>).
[[nodiscard]] Moments2 binomial_arm_moments(Moments2 pair_moments, double eta);

/// Draws k pairs, thins each arm independently, and adds independent
/// background. The coincidence count thins arm 1's detections by eta2 again,
/// c ~ Binomial(l, eta2); background never enters c.
[[nodiscard]] SimulatedWindow simulate_window(const PairDistribution& dist,
                                              const DetectorChannel& ch1,
                                              const DetectorChannel& ch2, Rng& rng);

[[nodiscard]] CountRecord simulate_record(const PairDistribution& dist,
                                          const DetectorChannel& ch1,
                                          const DetectorChannel& ch2, Rng& rng,
                                          bool with_coincidence);

/// Source-blocked window: background counts only.
[[nodiscard]] CountRecord simulate_background_record(const DetectorChannel& ch1,
                                                     const DetectorChannel& ch2, Rng& rng);

/// Records are generated in fixed-size blocks; block b draws from the stream
/// seeded with stream_seed(seed, b). Output depends only on (inputs, seed).
inline constexpr std::size_t kSimulationBlock = 4096;

struct SimulationPlan {
  PairDistribution dist = PairDistribution::poisson(0.0);
  DetectorChannel ch1{1.0, 0.0};
  DetectorChannel ch2{1.0, 0.0};
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  bool with_coincidence = true;
  /// Source blocked: emit background-only records.
  bool blocked = false;
};

/// Runs the plan on `workers` threads (>= 1). The result is identical for
/// every worker count.
[[nodiscard]] std::vector<CountRecord> simulate_records(const SimulationPlan& plan,
                                                        unsigned workers = 1);

}  // namespace pdcal
