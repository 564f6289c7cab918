#include "pdcal/error_model.hpp"

#include <cmath>
#include <string>

#include "pdcal/errors.hpp"
#include "pdcal/oracle.hpp"

namespace pdcal {

namespace {

void require_open_unit(double eta, const char* name) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw ParameterError(std::string(name) + " must lie in (0, 1], got " + std::to_string(eta));
  }
}

void require_samples(std::uint64_t samples) {
  if (samples < 1) throw ParameterError("sample size M must be >= 1");
}

/// sigma^2(eta1) * M for the product method, Poisson source.
double product_poisson(double e1, double e2, double n) {
  if (std::isinf(n)) return e1 / e2 + 2.0 + e1 * e1 - 4.0 * e1;
  return (e1 * (1.0 + n - e1) + n * e2 * (2.0 + e1 * (e1 - 4.0))) / (n * e2);
}

/// sigma^2(eta1) * M for the difference method, Poisson source.
double difference_poisson(double e1, double e2, double n) {
  const double e1_2 = e1 * e1, e1_3 = e1_2 * e1, e1_4 = e1_3 * e1;
  const double e2_2 = e2 * e2, e2_3 = e2_2 * e2;
  if (std::isinf(n)) {
    return (2.0 * e1_4 * e2 + 2.0 * e1_3 * (1.0 + 2.0 * e2 * (e2 - 3.0)) +
            e1_2 * e2 * (5.0 - 2.0 * e2 * (e2 - 2.0)) - 4.0 * e1 * e2_2 + e2_3) /
           (2.0 * e1_2 * e2);
  }
  return (2.0 * e1_4 * (n * e2 - 1.0) + 2.0 * e1_3 * (1.0 + n * (1.0 + 2.0 * e2 * (e2 - 3.0))) +
          n * e1_2 * e2 * (5.0 - 2.0 * e2 * (e2 - 2.0)) - 4.0 * n * e1 * e2_2 + n * e2_3) /
         (2.0 * n * e1_2 * e2);
}

double clamp_nonnegative(double v) { return v < 0.0 ? 0.0 : v; }

double quadratic_form(const StatVector& g, const MomentSet& cov_source) {
  double total = 0.0;
  for (Stat u : kAllStats) {
    if (g[index(u)] == 0.0) continue;
    for (Stat v : kAllStats) {
      if (g[index(v)] == 0.0) continue;
      total += g[index(u)] * g[index(v)] * cov_source.covariance(u, v);
    }
  }
  return total;
}

StatVector transpose_apply(const StatMatrix& jac, const StatVector& g) {
  StatVector out{};
  for (std::size_t u = 0; u < kStatCount; ++u) {
    for (std::size_t v = 0; v < kStatCount; ++v) out[v] += jac[u][v] * g[u];
  }
  return out;
}

std::uint64_t require_sample(const MomentSet& mom, const char* what) {
  if (!mom.sample_size) {
    throw InsufficientDataError(std::string(what) + " moments carry no sample size");
  }
  if (!mom.cross) throw InsufficientDataError(std::string(what) + " moments carry no cross moments");
  return *mom.sample_size;
}

void require_method_inputs(const MomentSet& mom, Method method) {
  if (method == Method::Coincidence && !mom.has_coincidence) {
    throw MethodUnavailable("coincidence method needs a coincidence (c) column");
  }
}

}  // namespace

std::string_view to_string(VarianceSource s) noexcept {
  switch (s) {
    case VarianceSource::ClosedFormPoisson: return "closed-form-poisson";
    case VarianceSource::ClosedFormEqualEta: return "closed-form-equal-eta";
    case VarianceSource::NumericExactMoments: return "numeric-exact-moments";
    case VarianceSource::EmpiricalDeltaMethod: return "empirical-delta-method";
  }
  return "unknown";
}

// ----------------------------------------------------------------------------
// Partial derivatives
// ----------------------------------------------------------------------------
StatVector estimator_gradient(Method method, Arm arm, const MomentSet& at) {
  // Arm two is arm one with the roles of l and m exchanged.
  const bool one = arm == Arm::One;
  const Stat own = one ? Stat::L : Stat::M;        // arm being calibrated
  const Stat other = one ? Stat::M : Stat::L;      // heralding arm
  const Stat own2 = one ? Stat::L2 : Stat::M2;
  const double l = at[own], m = at[other];
  if (!(l > 0.0) || !(m > 0.0)) {
    throw DegenerateDataError("estimator gradient needs positive mean singles in both arms");
  }

  StatVector g{};
  switch (method) {
    case Method::Product: {
      // eta = <lm>/m - l2/l + 1
      const double lm = at[Stat::LM], l2 = at[own2];
      g[index(Stat::LM)] = 1.0 / m;
      g[index(other)] = -lm / (m * m);
      g[index(own2)] = -1.0 / l;
      g[index(own)] = l2 / (l * l);
      break;
    }
    case Method::Difference: {
      // eta = num / (2m), num = 3m - m^2/l + l2 r^2 - d2, r = 1 - m/l
      const double l2 = at[own2], d2 = at[Stat::D2];
      const double r = 1.0 - m / l;
      const double num = 3.0 * m - m * m / l + l2 * r * r - d2;
      const double dnum_dl = m * m / (l * l) + 2.0 * l2 * r * m / (l * l);
      const double dnum_dm = 3.0 - 2.0 * m / l - 2.0 * l2 * r / l;
      g[index(own)] = dnum_dl / (2.0 * m);
      g[index(other)] = dnum_dm / (2.0 * m) - num / (2.0 * m * m);
      g[index(own2)] = r * r / (2.0 * m);
      g[index(Stat::D2)] = -1.0 / (2.0 * m);
      break;
    }
    case Method::EqualDifference: {
      // eta = 1 - d2 / (l + m)
      const double s = l + m, d2 = at[Stat::D2];
      g[index(Stat::D2)] = -1.0 / s;
      g[index(Stat::L)] = g[index(Stat::M)] = d2 / (s * s);
      break;
    }
    case Method::Coincidence: {
      // eta = c / m
      const double c = at[Stat::C];
      g[index(Stat::C)] = 1.0 / m;
      g[index(other)] = -c / (m * m);
      break;
    }
  }
  return g;
}

double delta_variance(Method method, Arm arm, const MomentSet& at, const MomentSet& cov_source,
                      std::uint64_t samples) {
  require_samples(samples);
  return clamp_nonnegative(quadratic_form(estimator_gradient(method, arm, at), cov_source) /
                           static_cast<double>(samples));
}

// ----------------------------------------------------------------------------
// Closed forms
// ----------------------------------------------------------------------------
VarianceReport analytic_variance_poisson(Method method, double eta1, double eta2,
                                         double mean_pairs, std::uint64_t samples) {
  require_open_unit(eta1, "eta1");
  require_open_unit(eta2, "eta2");
  require_samples(samples);
  if (!(mean_pairs > 0.0)) {
    throw ParameterError("closed-form variance is singular for N <= 0 (got " +
                         std::to_string(mean_pairs) + ")");
  }
  const double m = static_cast<double>(samples);
  VarianceReport r{method, 0.0, std::nullopt, VarianceSource::ClosedFormPoisson,
                   eta1, eta2, mean_pairs, samples};
  switch (method) {
    case Method::Product:
      r.var_eta1 = product_poisson(eta1, eta2, mean_pairs) / m;
      r.var_eta2 = product_poisson(eta2, eta1, mean_pairs) / m;
      break;
    case Method::Difference:
      r.var_eta1 = difference_poisson(eta1, eta2, mean_pairs) / m;
      r.var_eta2 = difference_poisson(eta2, eta1, mean_pairs) / m;
      break;
    case Method::Coincidence:
      // c thins arm 1 a second time, so the two arms are not symmetric here.
      if (std::isinf(mean_pairs)) {
        r.var_eta1 = 0.0;
        r.var_eta2 = 0.0;
      } else {
        r.var_eta1 = eta1 * (1.0 + eta1 - 2.0 * eta1 * eta2) / (m * mean_pairs * eta2);
        r.var_eta2 = eta2 * (1.0 - eta2) / (m * mean_pairs * eta1);
      }
      break;
    case Method::EqualDifference:
      throw ParameterError("no Poissonian closed form for the equal-difference method");
  }
  r.var_eta1 = clamp_nonnegative(r.var_eta1);
  return r;
}

VarianceReport analytic_variance_equal_eta(DistKind kind, double eta, std::uint64_t samples) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw ParameterError("eta must lie in [0, 1], got " + std::to_string(eta));
  }
  require_samples(samples);
  double factor = 0.0;
  switch (kind) {
    case DistKind::Poisson: factor = 2.0; break;
    case DistKind::Thermal: factor = 4.0; break;  // N >> 1 regime
    case DistKind::Custom:
      throw ParameterError("equal-efficiency closed form exists for poisson/thermal only");
  }
  const double v = factor * (1.0 - eta) * (1.0 - eta) / static_cast<double>(samples);
  return {Method::Difference, v, v, VarianceSource::ClosedFormEqualEta,
          eta, eta, std::numeric_limits<double>::infinity(), samples};
}

// ----------------------------------------------------------------------------
// Delta method
// ----------------------------------------------------------------------------
VarianceReport numeric_variance(Method method, const PairDistribution& dist, double eta1,
                                double eta2, std::uint64_t samples) {
  require_samples(samples);
  const auto exact = exact_moments({dist, eta1, eta2, std::nullopt});
  VarianceReport r{method, 0.0, std::nullopt, VarianceSource::NumericExactMoments,
                   eta1, eta2, dist.mean(), samples};
  r.var_eta1 = delta_variance(method, Arm::One, exact, exact, samples);
  r.var_eta2 = delta_variance(method, Arm::Two, exact, exact, samples);
  return r;
}

VarianceReport empirical_variance(const MomentSet& sample, Method method) {
  const auto samples = require_sample(sample, "sample");
  require_method_inputs(sample, method);
  VarianceReport r;
  r.method = method;
  r.source = VarianceSource::EmpiricalDeltaMethod;
  r.samples = samples;
  r.var_eta1 = delta_variance(method, Arm::One, sample, sample, samples);
  r.var_eta2 = delta_variance(method, Arm::Two, sample, sample, samples);
  return r;
}

VarianceReport empirical_variance(std::span<const CountRecord> records, Method method) {
  return empirical_variance(sample_moments(records), method);
}

BackgroundJacobian background_jacobian(const MomentSet& raw, const MomentSet& bg) {
  const double lM = raw.mean_l(), mM = raw.mean_m();
  const double lB = bg.mean_l(), mB = bg.mean_m();
  BackgroundJacobian j;
  auto& r = j.wrt_raw;
  auto& b = j.wrt_background;
  const auto L = index(Stat::L), M = index(Stat::M), L2 = index(Stat::L2), M2 = index(Stat::M2);
  const auto LM = index(Stat::LM), D2 = index(Stat::D2), C = index(Stat::C), C2 = index(Stat::C2);

  r[L][L] = 1.0;
  b[L][L] = -1.0;
  r[M][M] = 1.0;
  b[M][M] = -1.0;

  r[L2][L2] = 1.0;
  r[L2][L] = -2.0 * lB;
  b[L2][L2] = -1.0;
  b[L2][L] = -2.0 * lM + 4.0 * lB;

  r[M2][M2] = 1.0;
  r[M2][M] = -2.0 * mB;
  b[M2][M2] = -1.0;
  b[M2][M] = -2.0 * mM + 4.0 * mB;

  r[LM][LM] = 1.0;
  r[LM][L] = -mB;
  r[LM][M] = -lB;
  b[LM][L] = -mM + mB;
  b[LM][M] = -lM + lB;

  const double db = lB - mB, dm = lM - mM;
  r[D2][D2] = 1.0;
  r[D2][L] = -2.0 * db;
  r[D2][M] = 2.0 * db;
  b[D2][L] = 4.0 * db - 2.0 * dm + 2.0 * mB;
  b[D2][M] = -4.0 * db + 2.0 * dm + 2.0 * lB;
  b[D2][L2] = -1.0;
  b[D2][M2] = -1.0;

  r[C][C] = 1.0;
  r[C2][C2] = 1.0;
  return j;
}

VarianceReport empirical_variance_corrected(const MomentSet& raw, const MomentSet& bg,
                                            Method method) {
  const auto raw_n = require_sample(raw, "measured");
  const auto bg_n = require_sample(bg, "background");
  require_method_inputs(raw, method);
  const auto corrected = correct_background(raw, bg);
  const auto jac = background_jacobian(raw, bg);

  auto variance = [&](Arm arm) {
    const auto g = estimator_gradient(method, arm, corrected);
    const double v = quadratic_form(transpose_apply(jac.wrt_raw, g), raw) / static_cast<double>(raw_n) +
                     quadratic_form(transpose_apply(jac.wrt_background, g), bg) /
                         static_cast<double>(bg_n);
    return clamp_nonnegative(v);
  };
  VarianceReport r;
  r.method = method;
  r.source = VarianceSource::EmpiricalDeltaMethod;
  r.samples = raw_n;
  r.var_eta1 = variance(Arm::One);
  r.var_eta2 = variance(Arm::Two);
  return r;
}

// ----------------------------------------------------------------------------
std::vector<CurvePoint> variance_curve(Method method, Eta2Mode eta2_mode, double mean_pairs,
                                       std::uint64_t samples, std::span<const double> eta1_grid) {
  if (method != Method::Product && method != Method::Difference) {
    throw ParameterError("variance curves are defined for the product and difference methods");
  }
  if (eta2_mode.fixed) require_open_unit(*eta2_mode.fixed, "eta2");
  std::vector<CurvePoint> out;
  out.reserve(eta1_grid.size());
  for (double eta1 : eta1_grid) {
    if (!(eta1 > 0.0 && eta1 <= 1.0)) {
      throw ParameterError("curve grid values must lie in (0, 1], got " + std::to_string(eta1));
    }
    const double eta2 = eta2_mode.fixed.value_or(eta1);
    out.push_back({eta1, analytic_variance_poisson(method, eta1, eta2, mean_pairs, samples).var_eta1});
  }
  return out;
}

}  // namespace pdcal
