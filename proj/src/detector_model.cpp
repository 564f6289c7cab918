#include "pdcal/detector_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "pdcal/errors.hpp"

namespace pdcal {

namespace {

void require_efficiency(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw ParameterError("detection efficiency must lie in [0, 1], got " + std::to_string(eta));
  }
}

}  // namespace

DetectorChannel::DetectorChannel(double efficiency, double background_mean)
    : DetectorChannel(efficiency, PairDistribution::poisson(background_mean)) {}

DetectorChannel::DetectorChannel(double efficiency, PairDistribution background)
    : efficiency_{efficiency}, background_{std::move(background)} {
  require_efficiency(efficiency);
}

CountRecord SimulatedWindow::record(bool with_coincidence) const {
  CountRecord r{l_signal + l_background, m_signal + m_background, std::nullopt};
  if (with_coincidence) r.c = coincidences;
  return r;
}

Count thin(Count k, double eta, Rng& rng) {
  require_efficiency(eta);
  if (k == 0 || eta == 0.0) return 0;
  if (eta == 1.0) return k;
  std::binomial_distribution<std::int64_t> draw(static_cast<std::int64_t>(k), eta);
  return static_cast<Count>(draw(rng));
}

Moments2 binomial_arm_moments(Moments2 pair_moments, double eta) {
  const double first = eta * pair_moments.mean;
  return {first, first - eta * eta * pair_moments.mean + eta * eta * pair_moments.second};
}

SimulatedWindow simulate_window(const PairDistribution& dist, const DetectorChannel& ch1,
                                const DetectorChannel& ch2, Rng& rng) {
  SimulatedWindow w;
  w.pairs = dist.sample(rng);
  w.l_signal = thin(w.pairs, ch1.efficiency(), rng);
  w.m_signal = thin(w.pairs, ch2.efficiency(), rng);
  w.coincidences = thin(w.l_signal, ch2.efficiency(), rng);
  w.l_background = ch1.background().sample(rng);
  w.m_background = ch2.background().sample(rng);
  return w;
}

CountRecord simulate_record(const PairDistribution& dist, const DetectorChannel& ch1,
                            const DetectorChannel& ch2, Rng& rng, bool with_coincidence) {
  return simulate_window(dist, ch1, ch2, rng).record(with_coincidence);
}

CountRecord simulate_background_record(const DetectorChannel& ch1, const DetectorChannel& ch2,
                                       Rng& rng) {
  CountRecord r;
  r.l = ch1.background().sample(rng);
  r.m = ch2.background().sample(rng);
  return r;
}

std::vector<CountRecord> simulate_records(const SimulationPlan& plan, unsigned workers) {
  std::vector<CountRecord> out(plan.samples);
  const std::size_t blocks = (plan.samples + kSimulationBlock - 1) / kSimulationBlock;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(blocks, 1))));

  auto run_block = [&](std::size_t b) {
    Rng rng(stream_seed(plan.seed, b));
    const std::size_t end = std::min(plan.samples, (b + 1) * kSimulationBlock);
    for (std::size_t i = b * kSimulationBlock; i < end; ++i) {
      out[i] = plan.blocked
                   ? simulate_background_record(plan.ch1, plan.ch2, rng)
                   : simulate_record(plan.dist, plan.ch1, plan.ch2, rng, plan.with_coincidence);
    }
  };

  if (workers == 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    return out;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t b = w; b < blocks; b += workers) run_block(b);
    });
  }
  pool.clear();  // joins
  return out;
}

}  // namespace pdcal
