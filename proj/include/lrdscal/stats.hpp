#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "lrdscal/error.hpp"
#include "lrdscal/rng.hpp"

namespace lrdscal::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) fail(ErrorKind::insufficient_data, "mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> x) {
  if (x.size() < 2) fail(ErrorKind::insufficient_data, "variance needs two observations");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double sd(std::span<const double> x) { return std::sqrt(variance(x)); }

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
  double se_mean = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double se_skewness = 0.0;  // sqrt(6/n), normal-theory
  double se_kurtosis = 0.0;  // sqrt(24/n)

  bool operator==(const Moments&) const = default;
};

inline Moments moments(std::span<const double> x) {
  if (x.size() < 4) fail(ErrorKind::insufficient_data, "moments need at least four observations");
  Moments m;
  const double n = static_cast<double>(x.size());
  m.mean = mean(x);
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double c = v - m.mean;
    m2 += c * c;
    m3 += c * c * c;
    m4 += c * c * c * c;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.sd = std::sqrt(m2 * n / (n - 1.0));
  m.se_mean = m.sd / std::sqrt(n);
  m.skewness = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
  m.excess_kurtosis = m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  m.se_skewness = std::sqrt(6.0 / n);
  m.se_kurtosis = std::sqrt(24.0 / n);
  return m;
}

/// Autocovariance estimate at lag tau for a sample with known zero mean.
inline double acf_known_mean(std::span<const double> x, std::size_t tau) {
  if (tau >= x.size()) fail(ErrorKind::insufficient_data, "lag exceeds sample length");
  double s = 0.0;
  for (std::size_t t = 0; t + tau < x.size(); ++t) s += x[t] * x[t + tau];
  return s / static_cast<double>(x.size() - tau);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline std::vector<double> standardized(std::span<const double> x) {
  const double m = mean(x), s = sd(x);
  if (!(s > 0.0)) fail(ErrorKind::numeric, "cannot standardize a constant sample");
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - m) / s;
  return z;
}

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0, sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

struct TestResult {
  double statistic = 0.0;
  double critical = 0.0;  // at the requested level, when tabulated
  double p_value = -1.0;  // when available
  bool rejected = false;

  bool operator==(const TestResult&) const = default;
};

/// sup |F_n - Phi| for a sample standardized by its own mean and sd.
inline double ks_distance_normal(std::span<const double> x) {
  auto z = standardized(x);
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double D = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double F = normal_cdf(z[i]);
    D = std::max({D, (i + 1) / n - F, F - i / n});
  }
  return D;
}

/// Lilliefors test (normal law, estimated mean and variance) at the 1% level
/// through Stephens' modified statistic D (sqrt n - 0.01 + 0.85/sqrt n).
inline TestResult lilliefors_1pct(std::span<const double> x) {
  TestResult r;
  const double n = static_cast<double>(x.size());
  r.statistic = ks_distance_normal(x);
  const double modified = r.statistic * (std::sqrt(n) - 0.01 + 0.85 / std::sqrt(n));
  r.critical = 1.035 / (std::sqrt(n) - 0.01 + 0.85 / std::sqrt(n));
  r.rejected = modified > 1.035;
  return r;
}

/// Anderson-Darling normality test with estimated parameters at the 1% level
/// (Stephens' small-sample factor 1 + 0.75/n + 2.25/n^2).
inline TestResult anderson_darling_1pct(std::span<const double> x) {
  auto z = standardized(x);
  std::sort(z.begin(), z.end());
  const std::size_t n = z.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double Fi = std::clamp(normal_cdf(z[i]), 1e-300, 1.0 - 1e-16);
    const double Fr = std::clamp(normal_cdf(z[n - 1 - i]), 1e-300, 1.0 - 1e-16);
    s += (2.0 * i + 1.0) * (std::log(Fi) + std::log1p(-Fr));
  }
  const double nn = static_cast<double>(n);
  const double A2 = -nn - s / nn;
  TestResult r;
  r.statistic = A2 * (1.0 + 0.75 / nn + 2.25 / (nn * nn));
  r.critical = 1.092;
  r.rejected = r.statistic > r.critical;
  return r;
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
inline TestResult ks_two_sample(std::span<const double> a, std::span<const double> b, double level = 0.01) {
  if (a.empty() || b.empty()) fail(ErrorKind::insufficient_data, "two-sample KS needs data");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0, j = 0;
  double D = 0.0;
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    D = std::max(D, std::abs(i / na - j / nb));
  }
  TestResult r;
  r.statistic = D;
  const double ne = na * nb / (na + nb);
  r.p_value = kolmogorov_q((std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * D);
  r.rejected = r.p_value < level;
  return r;
}

struct Slope {
  double slope = 0.0;
  double se = 0.0;
  double intercept = 0.0;
};

/// Weighted least squares of y on x.
inline Slope weighted_slope(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  if (x.size() != y.size() || x.size() != w.size()) fail(ErrorKind::invalid_input, "slope: length mismatch");
  if (x.size() < 2) fail(ErrorKind::insufficient_data, "slope needs two points");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double xb = sx / sw, yb = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xb) * (x[i] - xb);
    sxy += w[i] * (x[i] - xb) * (y[i] - yb);
  }
  if (!(sxx > 0.0)) fail(ErrorKind::numeric, "slope: regressor has no spread");
  Slope s;
  s.slope = sxy / sxx;
  s.intercept = yb - s.slope * xb;
  s.se = std::sqrt(1.0 / sxx);
  return s;
}

struct ScalingFit {
  double slope = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double se = 0.0;

  bool operator==(const ScalingFit&) const = default;
};

/// Slope of log sd against log size. Each group holds replica values at one
/// size; weights are the inverse normal-theory variances of log sd
/// (1 / (2 (R - 1))). The 95% interval comes from `boot` replica resamples.
inline ScalingFit log_sd_regression(std::span<const double> sizes, const std::vector<std::vector<double>>& groups,
                                    std::uint64_t seed, int boot = 200) {
  if (sizes.size() != groups.size()) fail(ErrorKind::invalid_input, "regression: size/group mismatch");
  if (sizes.size() < 3) fail(ErrorKind::insufficient_data, "scaling regression needs at least three sizes");
  const std::size_t k = sizes.size();
  std::vector<double> x(k), y(k), w(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double s = sd(groups[i]);
    if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorKind::numeric, "degenerate variance in scaling regression");
    x[i] = std::log(sizes[i]);
    y[i] = std::log(s);
    w[i] = 2.0 * (static_cast<double>(groups[i].size()) - 1.0);
  }
  ScalingFit fit;
  const Slope base = weighted_slope(x, y, w);
  fit.slope = base.slope;
  fit.se = base.se;
  RandomStream rng(seed, 0x5EEDB007ull);
  std::vector<double> slopes;
  std::vector<double> res;
  for (int b = 0; b < boot; ++b) {
    for (std::size_t i = 0; i < k; ++i) {
      const auto& g = groups[i];
      res.resize(g.size());
      for (auto& v : res) v = g[static_cast<std::size_t>(rng.uniform() * static_cast<double>(g.size()))];
      y[i] = std::log(sd(res));
    }
    slopes.push_back(weighted_slope(x, y, w).slope);
  }
  std::sort(slopes.begin(), slopes.end());
  if (!slopes.empty()) {
    fit.ci_low = slopes[static_cast<std::size_t>(0.025 * (slopes.size() - 1))];
    fit.ci_high = slopes[static_cast<std::size_t>(0.975 * (slopes.size() - 1))];
  }
  return fit;
}

}  // namespace lrdscal::stats
