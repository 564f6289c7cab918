#include "pdcal/estimators.hpp"

#include <cmath>
#include <string>

#include "pdcal/errors.hpp"

namespace pdcal {

namespace {

constexpr double kRangeSlack = 1e-12;

bool outside_unit(double eta) { return eta < -kRangeSlack || eta > 1.0 + kRangeSlack; }

void require_singles(const MomentSet& mom, std::string_view method) {
  const auto why = [&](const char* arm, double v) {
    return std::string(method) + " estimator needs positive mean singles; arm " + arm +
           " has <" + (arm[0] == '1' ? "l" : "m") + "> = " + std::to_string(v);
  };
  if (!(mom.mean_l() > 0.0)) throw DegenerateDataError(why("1", mom.mean_l()));
  if (!(mom.mean_m() > 0.0)) throw DegenerateDataError(why("2", mom.mean_m()));
}

EfficiencyEstimate finish(Method method, double eta1, double eta2) {
  EfficiencyEstimate e;
  e.method = method;
  e.eta1 = eta1;
  e.eta2 = eta2;
  e.out_of_range = outside_unit(eta1) || outside_unit(eta2);
  return e;
}

}  // namespace

std::string_view stat_name(Stat s) noexcept {
  static constexpr std::array<std::string_view, kStatCount> names{"l",  "m",    "l2", "m2",
                                                                  "lm", "diff2", "c", "c2"};
  return names[index(s)];
}

std::optional<double> MomentSet::mean_c() const noexcept {
  if (!has_coincidence) return std::nullopt;
  return (*this)[Stat::C];
}

std::optional<double> MomentSet::mean_c2() const noexcept {
  if (!has_coincidence) return std::nullopt;
  return (*this)[Stat::C2];
}

double MomentSet::covariance(Stat u, Stat v) const {
  if (!cross) throw MethodUnavailable("moment set carries no cross moments");
  return (*cross)[index(u)][index(v)] - mean[index(u)] * mean[index(v)];
}

void MomentSet::validate(double identity_tolerance) const {
  for (auto [first, second] : {std::pair{Stat::L, Stat::L2}, std::pair{Stat::M, Stat::M2}}) {
    const double sq = (*this)[first] * (*this)[first];
    if ((*this)[second] < sq - 1e-12 * std::abs(sq)) {
      throw DataError("moment set has negative variance for " + std::string(stat_name(first)));
    }
  }
  const double rhs = mean_l2() + mean_m2() - 2.0 * mean_lm();
  const double scale = std::max({1.0, std::abs(mean_l2()) + std::abs(mean_m2()) + 2.0 * std::abs(mean_lm())});
  if (std::abs(mean_diff2() - rhs) > identity_tolerance * scale) {
    throw DataError("moment set violates <(l-m)^2> = <l^2> + <m^2> - 2<lm>");
  }
}

// ----------------------------------------------------------------------------
// MomentAccumulator
// ----------------------------------------------------------------------------
void MomentAccumulator::add(const CountRecord& r) {
  if (r.l > kMaxCount || r.m > kMaxCount || (r.c && *r.c > kMaxCount)) {
    throw DataError("count exceeds the supported per-window maximum of " +
                    std::to_string(kMaxCount));
  }
  const Wide l = r.l, m = r.m, c = r.c.value_or(0);
  const Wide d = r.l >= r.m ? Wide{r.l - r.m} : Wide{r.m - r.l};
  const std::array<Wide, kStatCount> u{l, m, l * l, m * m, l * m, d * d, c, c * c};
  for (std::size_t i = 0; i < kStatCount; ++i) {
    sum_[i] += u[i];
    for (std::size_t j = i; j < kStatCount; ++j) cross_[i][j] += u[i] * u[j];
  }
  ++n_;
  if (r.c) ++with_c_;
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  n_ += other.n_;
  with_c_ += other.with_c_;
  for (std::size_t i = 0; i < kStatCount; ++i) {
    sum_[i] += other.sum_[i];
    for (std::size_t j = i; j < kStatCount; ++j) cross_[i][j] += other.cross_[i][j];
  }
}

MomentSet MomentAccumulator::finish() const {
  if (n_ < 2) {
    throw InsufficientDataError("need at least 2 count records, got " + std::to_string(n_));
  }
  if (with_c_ != 0 && with_c_ != n_) {
    throw DataError("coincidence column present in only some records");
  }
  const auto n = static_cast<long double>(n_);
  MomentSet out;
  out.sample_size = n_;
  out.has_coincidence = with_c_ == n_;
  StatMatrix cross{};
  for (std::size_t i = 0; i < kStatCount; ++i) {
    out.mean[i] = static_cast<double>(static_cast<long double>(sum_[i]) / n);
    for (std::size_t j = i; j < kStatCount; ++j) {
      cross[i][j] = cross[j][i] = static_cast<double>(static_cast<long double>(cross_[i][j]) / n);
    }
  }
  out.cross = cross;
  return out;
}

MomentSet sample_moments(std::span<const CountRecord> records) {
  MomentAccumulator acc;
  for (const auto& r : records) acc.add(r);
  return acc.finish();
}

// ----------------------------------------------------------------------------
// Estimators
// ----------------------------------------------------------------------------
std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::Product: return "product";
    case Method::Difference: return "difference";
    case Method::EqualDifference: return "equal-difference";
    case Method::Coincidence: return "coincidence";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  for (Method m : {Method::Product, Method::Difference, Method::EqualDifference,
                   Method::Coincidence}) {
    if (name == to_string(m)) return m;
  }
  throw ParameterError("unknown method '" + std::string(name) + "'");
}

EfficiencyEstimate eta_product(const MomentSet& mom) {
  require_singles(mom, "product");
  const double l = mom.mean_l(), m = mom.mean_m();
  const double lm = mom.mean_lm();
  return finish(Method::Product, lm / m - mom.mean_l2() / l + 1.0,
                lm / l - mom.mean_m2() / m + 1.0);
}

EfficiencyEstimate eta_difference(const MomentSet& mom) {
  require_singles(mom, "difference");
  const double l = mom.mean_l(), m = mom.mean_m(), d2 = mom.mean_diff2();
  const double r1 = 1.0 - m / l;
  const double r2 = 1.0 - l / m;
  const double eta1 = (m * (2.0 + r1) + mom.mean_l2() * r1 * r1 - d2) / (2.0 * m);
  const double eta2 = (l * (2.0 + r2) + mom.mean_m2() * r2 * r2 - d2) / (2.0 * l);
  return finish(Method::Difference, eta1, eta2);
}

EfficiencyEstimate eta_equal_difference(const MomentSet& mom) {
  require_singles(mom, "equal-difference");
  const double l = mom.mean_l(), m = mom.mean_m();
  const double s = 0.5 * (l + m);
  const double eta = 1.0 - mom.mean_diff2() / (2.0 * s);
  auto e = finish(Method::EqualDifference, eta, eta);
  const double gap = std::abs(l - m);
  if (mom.sample_size) {
    const double var_diff = std::max(0.0, mom.mean_diff2() - (l - m) * (l - m));
    e.unequal_arms = gap > 5.0 * std::sqrt(var_diff / static_cast<double>(*mom.sample_size));
  } else {
    e.unequal_arms = gap > 1e-12 * std::max(l, m);
  }
  return e;
}

EfficiencyEstimate eta_coincidence(const MomentSet& mom) {
  const auto c = mom.mean_c();
  if (!c) throw MethodUnavailable("coincidence method needs a coincidence (c) column");
  require_singles(mom, "coincidence");
  return finish(Method::Coincidence, *c / mom.mean_m(), *c / mom.mean_l());
}

EfficiencyEstimate estimate(Method method, const MomentSet& mom) {
  switch (method) {
    case Method::Product: return eta_product(mom);
    case Method::Difference: return eta_difference(mom);
    case Method::EqualDifference: return eta_equal_difference(mom);
    case Method::Coincidence: return eta_coincidence(mom);
  }
  throw ParameterError("unknown method");
}

// ----------------------------------------------------------------------------
// Background correction
// ----------------------------------------------------------------------------
MomentSet correct_background(const MomentSet& raw, const MomentSet& bg) {
  for (const auto* set : {&raw, &bg}) {
    if (set->sample_size && *set->sample_size < 2) {
      throw InsufficientDataError("background correction needs at least 2 samples per run");
    }
  }
  const double lM = raw.mean_l(), mM = raw.mean_m();
  const double lB = bg.mean_l(), mB = bg.mean_m();
  const double lB2 = bg.mean_l2(), mB2 = bg.mean_m2();

  MomentSet out;
  out.sample_size = raw.sample_size;
  out.has_coincidence = raw.has_coincidence;
  out[Stat::L] = lM - lB;
  out[Stat::M] = mM - mB;
  out[Stat::L2] = raw.mean_l2() - lB2 - 2.0 * lM * lB + 2.0 * lB * lB;
  out[Stat::M2] = raw.mean_m2() - mB2 - 2.0 * mM * mB + 2.0 * mB * mB;
  out[Stat::LM] = raw.mean_lm() - lM * mB - lB * mM + lB * mB;
  out[Stat::D2] = raw.mean_diff2() + 2.0 * (lB - mB) * (lB - mB) - 2.0 * (lM - mM) * (lB - mB) +
                  2.0 * lB * mB - lB2 - mB2;
  out[Stat::C] = raw[Stat::C];
  out[Stat::C2] = raw[Stat::C2];

  if (!(out.mean_l() > 0.0) || !(out.mean_m() > 0.0)) {
    throw BackgroundDominatesError("background-corrected mean singles are not positive (<l> = " +
                                   std::to_string(out.mean_l()) +
                                   ", <m> = " + std::to_string(out.mean_m()) + ")");
  }
  return out;
}

double normalized_difference_variance(double eta, double mean_pairs) {
  if (eta == 0.0) {
    throw DivergenceError("normalized difference variance diverges at eta = 0");
  }
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw ParameterError("eta must lie in (0, 1], got " + std::to_string(eta));
  }
  if (!(mean_pairs > 0.0) || !std::isfinite(mean_pairs)) {
    throw ParameterError("mean pair number must be positive, got " + std::to_string(mean_pairs));
  }
  return 2.0 / mean_pairs * (1.0 / eta - 1.0);
}

}  // namespace pdcal
