#include "pdcal/photon_source.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "pdcal/errors.hpp"

namespace pdcal {

namespace {

constexpr double kTailBudget = 1e-12;
constexpr double kMassTolerance = 1e-9;

void require_mean(double mean) {
  if (!std::isfinite(mean) || mean < 0.0) {
    throw ParameterError("pair distribution mean must be finite and >= 0, got " +
                         std::to_string(mean));
  }
}

}  // namespace

std::string_view to_string(DistKind kind) noexcept {
  switch (kind) {
    case DistKind::Poisson: return "poisson";
    case DistKind::Thermal: return "thermal";
    case DistKind::Custom: return "custom";
  }
  return "unknown";
}

DistKind dist_kind_from_string(std::string_view name) {
  if (name == "poisson") return DistKind::Poisson;
  if (name == "thermal") return DistKind::Thermal;
  if (name == "custom") return DistKind::Custom;
  throw ParameterError("unknown distribution kind '" + std::string(name) + "'");
}

Count poisson_cutoff(double mean) {
  return static_cast<Count>(std::ceil(mean + 12.0 * std::sqrt(mean) + 30.0));
}

Count thermal_cutoff(double mean) {
  if (mean <= 0.0) return 0;
  // ln(N/(N+1)) = -log1p(1/N)
  return static_cast<Count>(std::ceil(std::log(kTailBudget) / -std::log1p(1.0 / mean)));
}

PairDistribution PairDistribution::poisson(double mean) {
  require_mean(mean);
  PairDistribution d;
  d.kind_ = DistKind::Poisson;
  d.mean_ = mean;
  d.cutoff_ = mean == 0.0 ? 0 : poisson_cutoff(mean);
  return d;
}

PairDistribution PairDistribution::thermal(double mean) {
  require_mean(mean);
  PairDistribution d;
  d.kind_ = DistKind::Thermal;
  d.mean_ = mean;
  d.cutoff_ = thermal_cutoff(mean);
  return d;
}

PairDistribution PairDistribution::custom(std::vector<double> pmf_table) {
  if (pmf_table.empty()) throw ParameterError("custom pmf table is empty");
  double total = 0.0;
  double first = 0.0;
  for (std::size_t k = 0; k < pmf_table.size(); ++k) {
    const double p = pmf_table[k];
    if (!std::isfinite(p) || p < 0.0) {
      throw ParameterError("custom pmf entry k=" + std::to_string(k) +
                           " must be finite and >= 0");
    }
    total += p;
    first += p * static_cast<double>(k);
  }
  if (total <= 0.0 || total > 1.0 + kMassTolerance) {
    throw ParameterError("custom pmf table is not normalizable (total mass " +
                         std::to_string(total) + ")");
  }
  PairDistribution d;
  d.kind_ = DistKind::Custom;
  d.mean_ = first;
  d.cutoff_ = pmf_table.size() - 1;
  d.cdf_.resize(pmf_table.size());
  std::partial_sum(pmf_table.begin(), pmf_table.end(), d.cdf_.begin());
  d.table_ = std::move(pmf_table);
  return d;
}

double PairDistribution::pmf(Count k) const {
  if (kind_ == DistKind::Custom) return k < table_.size() ? table_[k] : 0.0;
  if (mean_ == 0.0) return k == 0 ? 1.0 : 0.0;
  const double kd = static_cast<double>(k);
  if (kind_ == DistKind::Poisson) {
    return std::exp(kd * std::log(mean_) - mean_ - std::lgamma(kd + 1.0));
  }
  // N^k / (1+N)^(k+1)
  return std::exp(-kd * std::log1p(1.0 / mean_) - std::log1p(mean_));
}

Moments2 PairDistribution::moments() const {
  switch (kind_) {
    case DistKind::Poisson: return {mean_, mean_ + mean_ * mean_};
    case DistKind::Thermal: return {mean_, mean_ + 2.0 * mean_ * mean_};
    case DistKind::Custom: break;
  }
  double mass = 0.0, first = 0.0, second = 0.0;
  for (std::size_t k = 0; k < table_.size(); ++k) {
    const double kd = static_cast<double>(k);
    mass += table_[k];
    first += table_[k] * kd;
    second += table_[k] * kd * kd;
  }
  if (1.0 - mass > kMassTolerance) {
    throw TruncationError("custom pmf is missing " + std::to_string(1.0 - mass) +
                          " probability mass beyond its cutoff");
  }
  return {first, second};
}

Count PairDistribution::sample(Rng& rng) const {
  switch (kind_) {
    case DistKind::Poisson: {
      if (mean_ == 0.0) return 0;
      std::poisson_distribution<std::int64_t> draw(mean_);
      return static_cast<Count>(draw(rng));
    }
    case DistKind::Thermal: {
      if (mean_ == 0.0) return 0;
      // failures before the first success, success probability 1/(1+N)
      std::geometric_distribution<std::int64_t> draw(1.0 / (1.0 + mean_));
      return static_cast<Count>(draw(rng));
    }
    case DistKind::Custom: break;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng) * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<Count>(std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                                     static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
}

PairDistribution load_pmf_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open pmf file " + path.string());
  std::vector<double> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const char* begin = line.data() + first;
    const char* end = line.data() + last + 1;
    double p = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, p);
    if (ec != std::errc{} || ptr != end) {
      throw ParseError("pmf file " + path.string() + ": not a probability '" +
                           std::string(begin, end) + "'",
                       line_no);
    }
    table.push_back(p);
  }
  return PairDistribution::custom(std::move(table));
}

}  // namespace pdcal
