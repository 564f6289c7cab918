#include "pdcal/oracle.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "pdcal/detector_model.hpp"
#include "pdcal/errors.hpp"

namespace pdcal {

namespace {

constexpr int kMaxDegree = 4;
constexpr double kTailBudget = 1e-12;
constexpr double kFourthMomentTail = 1e-18;
constexpr Count kMaxSummation = 1'000'000'000;

using PolyK = std::array<double, kMaxDegree + 1>;  // coefficients of k^0..k^4

// Stirling numbers of the second kind: x^n = sum_j S2[n][j] (x)_j
constexpr int kStirling2[5][5] = {
    {1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, 1, 1, 0, 0}, {0, 1, 3, 1, 0}, {0, 1, 7, 6, 1}};
// Signed Stirling numbers of the first kind: (x)_j = sum_i S1[j][i] x^i
constexpr int kStirling1[5][5] = {
    {1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, -1, 1, 0, 0}, {0, 2, -3, 1, 0}, {0, -6, 11, -6, 1}};

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

PolyK multiply(const PolyK& a, const PolyK& b) {
  PolyK out{};
  for (int i = 0; i <= kMaxDegree; ++i) {
    for (int j = 0; i + j <= kMaxDegree; ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

/// E[X^n | k] for X ~ Binomial(k, p), as a polynomial in k.
PolyK binomial_raw_moment(int n, double p) {
  PolyK out{};
  double pj = 1.0;
  for (int j = 0; j <= n; ++j, pj *= p) {
    if (kStirling2[n][j] == 0) continue;
    for (int i = 0; i <= j; ++i) out[i] += kStirling2[n][j] * pj * kStirling1[j][i];
  }
  return out;
}

/// E[l^a m^b c^d | k] for all a + b + d <= 4.
class ConditionalMonomials {
public:
  ConditionalMonomials(double eta1, double eta2) {
    std::array<PolyK, kMaxDegree + 1> arm1{}, arm2{};
    for (int n = 0; n <= kMaxDegree; ++n) {
      arm1[n] = binomial_raw_moment(n, eta1);
      arm2[n] = binomial_raw_moment(n, eta2);
    }
    for (int a = 0; a <= kMaxDegree; ++a) {
      for (int d = 0; a + d <= kMaxDegree; ++d) {
        // c^d = sum_j S2[d][j] (c)_j and E[(c)_j | l] = eta2^j (l)_j, so
        // E[l^a c^d | l] is a polynomial in l with coefficients q.
        std::array<double, kMaxDegree + 1> q{};
        double pj = 1.0;
        for (int j = 0; j <= d; ++j, pj *= eta2) {
          for (int i = 0; i <= j; ++i) q[a + i] += kStirling2[d][j] * pj * kStirling1[j][i];
        }
        PolyK lc{};
        for (int n = 0; n <= a + d; ++n) {
          for (int i = 0; i <= kMaxDegree; ++i) lc[i] += q[n] * arm1[n][i];
        }
        for (int b = 0; a + b + d <= kMaxDegree; ++b) table_[a][b][d] = multiply(lc, arm2[b]);
      }
    }
  }

  [[nodiscard]] const PolyK& operator()(int a, int b, int d) const { return table_[a][b][d]; }

private:
  std::array<std::array<std::array<PolyK, 5>, 5>, 5> table_{};
};

struct Term {
  double coef;
  int a, b, d;  // powers of l, m, c
};

std::vector<Term> stat_terms(Stat s) {
  switch (s) {
    case Stat::L: return {{1, 1, 0, 0}};
    case Stat::M: return {{1, 0, 1, 0}};
    case Stat::L2: return {{1, 2, 0, 0}};
    case Stat::M2: return {{1, 0, 2, 0}};
    case Stat::LM: return {{1, 1, 1, 0}};
    case Stat::D2: return {{1, 2, 0, 0}, {-2, 1, 1, 0}, {1, 0, 2, 0}};
    case Stat::C: return {{1, 0, 0, 1}};
    case Stat::C2: return {{1, 0, 0, 2}};
  }
  return {};
}

/// Expectation of the product of the given term lists (an empty list is 1).
double expect(const ConditionalMonomials& mono, const PairRawMoments& km,
              const std::vector<Term>& x, const std::vector<Term>& y) {
  // Collect like monomials first so that integer coefficients cancel exactly.
  double coef[5][5][5] = {};
  for (const auto& s : x) {
    for (const auto& t : y) coef[s.a + t.a][s.b + t.b][s.d + t.d] += s.coef * t.coef;
  }
  PolyK poly{};
  for (int a = 0; a <= kMaxDegree; ++a) {
    for (int b = 0; a + b <= kMaxDegree; ++b) {
      for (int d = 0; a + b + d <= kMaxDegree; ++d) {
        if (coef[a][b][d] == 0.0) continue;
        const auto& p = mono(a, b, d);
        for (int i = 0; i <= kMaxDegree; ++i) poly[i] += coef[a][b][d] * p[i];
      }
    }
  }
  double out = 0.0;
  for (int i = 0; i <= kMaxDegree; ++i) out += poly[i] * km[i];
  return out;
}

void require_eta(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw ParameterError("detection efficiency must lie in [0, 1], got " + std::to_string(eta));
  }
}

bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

// ----------------------------------------------------------------------------
Count summation_cutoff(const PairDistribution& dist) {
  if (dist.kind() == DistKind::Custom || dist.mean() == 0.0) return dist.cutoff();
  CompensatedSum fourth;
  for (Count k = 0;; ++k) {
    if (k > kMaxSummation) {
      throw TruncationError("pair distribution cannot be truncated within " +
                            std::to_string(kMaxSummation) + " terms");
    }
    const double kd = static_cast<double>(k);
    const double p = dist.pmf(k);
    const double term = p * kd * kd * kd * kd;
    fourth.add(term);
    if (k >= dist.cutoff() && term <= kFourthMomentTail * fourth.value()) return k;
  }
}

PairRawMoments pair_raw_moments(const PairDistribution& dist, std::optional<Count> cutoff) {
  const Count last = cutoff.value_or(summation_cutoff(dist));
  std::array<CompensatedSum, 5> sums;
  for (Count k = 0; k <= last; ++k) {
    const double p = dist.pmf(k);
    if (p == 0.0) continue;
    const double kd = static_cast<double>(k);
    double term = p;
    for (auto& s : sums) {
      s.add(term);
      term *= kd;
    }
  }
  const double mass = sums[0].value();
  if (dist.kind() == DistKind::Custom) {
    // Custom mass deficits are reported by PairDistribution::moments().
    if (1.0 - mass > 1e-9) {
      throw TruncationError("custom pmf is missing " + std::to_string(1.0 - mass) +
                            " probability mass");
    }
  } else if (1.0 - mass > kTailBudget) {
    throw TruncationError("cutoff " + std::to_string(last) + " leaves tail mass " +
                          std::to_string(1.0 - mass) + " (budget 1e-12)");
  }
  PairRawMoments out{};
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = sums[j].value() / mass;
  return out;
}

MomentSet exact_moments(const ExactMomentRequest& req) {
  require_eta(req.eta1);
  require_eta(req.eta2);
  const auto km = pair_raw_moments(req.dist, req.cutoff);
  const ConditionalMonomials mono(req.eta1, req.eta2);
  const std::vector<Term> one{{1, 0, 0, 0}};

  MomentSet out;
  out.has_coincidence = true;
  StatMatrix cross{};
  for (Stat u : kAllStats) {
    const auto tu = stat_terms(u);
    out[u] = expect(mono, km, tu, one);
    for (Stat v : kAllStats) {
      if (index(v) < index(u)) continue;
      cross[index(u)][index(v)] = cross[index(v)][index(u)] = expect(mono, km, tu, stat_terms(v));
    }
  }
  out.cross = cross;

  if (req.dist.kind() != DistKind::Custom) {
    // The summed moments must reproduce the closed-form fast path.
    const auto fast = closed_form_moments(req.dist, req.eta1, req.eta2);
    for (Stat s : {Stat::L, Stat::M, Stat::L2, Stat::M2, Stat::LM}) {
      if (!close(out[s], fast[s], 1e-9)) {
        throw TruncationError("oracle sum disagrees with closed form for <" +
                              std::string(stat_name(s)) + ">; cutoff too small?");
      }
    }
  }
  return out;
}

StatMatrix exact_covariances(const ExactMomentRequest& req, std::uint64_t samples) {
  if (samples < 1) throw ParameterError("sample size M must be >= 1");
  const auto mom = exact_moments(req);
  StatMatrix out{};
  for (Stat u : kAllStats) {
    for (Stat v : kAllStats) {
      out[index(u)][index(v)] = mom.covariance(u, v) / static_cast<double>(samples);
    }
  }
  return out;
}

MomentSet closed_form_moments(const PairDistribution& dist, double eta1, double eta2) {
  require_eta(eta1);
  require_eta(eta2);
  const auto pair = dist.moments();
  const auto arm1 = binomial_arm_moments(pair, eta1);
  const auto arm2 = binomial_arm_moments(pair, eta2);
  const auto coinc = binomial_arm_moments(pair, eta1 * eta2);

  MomentSet out;
  out.has_coincidence = true;
  out[Stat::L] = arm1.mean;
  out[Stat::M] = arm2.mean;
  out[Stat::L2] = arm1.second;
  out[Stat::M2] = arm2.second;
  out[Stat::LM] = eta1 * eta2 * pair.second;
  out[Stat::D2] = eta1 > 0.0
                      ? difference_variance_closed_form(arm1.mean, arm2.mean, arm1.second, eta1, eta2)
                      : arm2.second;
  out[Stat::C] = coinc.mean;
  out[Stat::C2] = coinc.second;
  return out;
}

double difference_variance_closed_form(double mean_l, double mean_m, double mean_l2, double eta1,
                                       double eta2) {
  if (!(eta1 > 0.0)) throw ParameterError("difference variance closed form needs eta1 > 0");
  const double de = eta1 - eta2;
  return mean_l + mean_m - (eta1 * mean_l + eta2 * mean_m) +
         de * de * (mean_l2 - mean_l + eta1 * mean_l) / (eta1 * eta1);
}

double binomial_pmf(Count k, double eta, Count l) {
  if (l > k) return 0.0;
  if (eta == 0.0) return l == 0 ? 1.0 : 0.0;
  if (eta == 1.0) return l == k ? 1.0 : 0.0;
  const double kd = static_cast<double>(k), ld = static_cast<double>(l);
  const double log_choose = std::lgamma(kd + 1.0) - std::lgamma(ld + 1.0) - std::lgamma(kd - ld + 1.0);
  return std::exp(log_choose + ld * std::log(eta) + (kd - ld) * std::log1p(-eta));
}

double brute_force_expectation(const PairDistribution& dist, double eta1, double eta2,
                               const std::function<double(Count, Count)>& f,
                               std::optional<Count> cutoff) {
  require_eta(eta1);
  require_eta(eta2);
  const Count last = cutoff.value_or(summation_cutoff(dist));
  CompensatedSum total;
  std::vector<double> b1, b2;
  for (Count k = 0; k <= last; ++k) {
    const double g = dist.pmf(k);
    if (g == 0.0) continue;
    b1.assign(k + 1, 0.0);
    b2.assign(k + 1, 0.0);
    for (Count i = 0; i <= k; ++i) {
      b1[i] = binomial_pmf(k, eta1, i);
      b2[i] = binomial_pmf(k, eta2, i);
    }
    for (Count l = 0; l <= k; ++l) {
      for (Count m = 0; m <= k; ++m) total.add(g * b1[l] * b2[m] * f(l, m));
    }
  }
  return total.value();
}

double exact_coincidence_moments(const PairDistribution& dist, double eta1, double eta2, int p) {
  if (p != 1 && p != 2) throw ParameterError("coincidence moment order must be 1 or 2");
  require_eta(eta1);
  require_eta(eta2);
  const Count last = summation_cutoff(dist);
  CompensatedSum total;
  for (Count k = 0; k <= last; ++k) {
    const double g = dist.pmf(k);
    if (g == 0.0) continue;
    for (Count l = 0; l <= k; ++l) {
      const double gl = g * binomial_pmf(k, eta1, l);
      for (Count m = 0; m <= l; ++m) {
        const double md = static_cast<double>(m);
        total.add(gl * binomial_pmf(l, eta2, m) * (p == 1 ? md : md * md));
      }
    }
  }
  return total.value();
}

}  // namespace pdcal
