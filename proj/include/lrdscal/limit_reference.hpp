#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrdscal/error.hpp"
#include "lrdscal/gaussian_synth.hpp"
#include "lrdscal/hermite.hpp"
#include "lrdscal/parallel.hpp"
#include "lrdscal/quadrature.hpp"
#include "lrdscal/regime.hpp"
#include "lrdscal/rng.hpp"
#include "lrdscal/spectral_model.hpp"
#include "lrdscal/stats.hpp"
#include "lrdscal/wavelet_bank.hpp"

namespace lrdscal {

using json = nlohmann::json;

/// |hhat_inf(u)|^2 as a function on the real line.
using TransferSq = std::function<double(double)>;

inline TransferSq limit_transfer_sq(const WaveletFilterBank& bank) {
  return [&bank](double u) { return std::norm(bank.limit_transfer(u)); };
}

// ---------------------------------------------------------------------------
// L_q constants
// ---------------------------------------------------------------------------

/// int_R |u|^{-a} |s - u|^{-b} du = riesz_constant(a, b) |s|^{1-a-b} for
/// a, b in (0, 1) with a + b > 1.
inline double riesz_constant(double a, double b) {
  if (!(a > 0 && a < 1 && b > 0 && b < 1 && a + b > 1)) fail(ErrorKind::domain, "riesz_constant: bad exponents");
  return std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (1 - a)) * std::tgamma(0.5 * (1 - b)) *
         std::tgamma(0.5 * (a + b - 1)) / (std::tgamma(0.5 * a) * std::tgamma(0.5 * b) * std::tgamma(0.5 * (2 - a - b)));
}

/// Factor C_q with prod_{i<=q} |u_i|^{-2d} integrated over u_1 + ... + u_q = s
/// equal to C_q |s|^{-2 delta(q)}.
inline double composition_constant(int q, double d) {
  double c = 1.0;
  for (int k = 1; k < q; ++k) c *= riesz_constant(2.0 * memory_exponent(k, d).delta, 2.0 * d);
  return c;
}

struct LqEstimate {
  int q = 1;
  double estimate = 0.0;
  double se = 0.0;
  std::string method;
  double quad_value = 0.0;
  double quad_error = 0.0;
  double mc_value = 0.0;
  double mc_se = 0.0;
  double composition = 1.0;

  json to_json() const {
    return json{{"q", q},           {"estimate", estimate},     {"se", se},       {"method", method},
                {"quadrature", quad_value}, {"quadrature_error", quad_error}, {"mc", mc_value}, {"mc_se", mc_se},
                {"composition_constant", composition}};
  }
};

/// I(e) = int_R |hhat(u)|^2 |u|^{-2K-2e} du by panels of width 4 pi up to
/// 4 pi * panels, plus a tail assuming |hhat(u)|^2 u^2 averages to its value
/// over the last panel.
inline quad::Estimate reduced_integral_quadrature(const TransferSq& h2, double e, int K, int panels = 4096,
                                                  double tol = 1e-11) {
  const double w = 4.0 * std::numbers::pi;
  const double expo = -2.0 * K - 2.0 * e;
  auto f = [&](double u) { return u <= 0.0 ? 0.0 : h2(u) * std::pow(u, expo); };
  quad::Estimate total;
  for (int p = 0; p < panels; ++p) {
    const auto est = quad::adaptive(f, w * p, w * (p + 1), tol, 15, 30);
    total.value += est.value;
    total.error += est.error;
  }
  const double A = w * panels;
  const quad::Rule& r = quad::legendre_cached(40);
  const double avg = quad::fixed([&](double u) { return h2(u) * u * u; }, A - w, A, r) / w;
  const double tail = avg * std::pow(A, expo - 1.0) / (1.0 - expo);
  total.value += tail;
  total.error += 0.5 * tail;
  total.value *= 2.0;
  total.error *= 2.0;
  return total;
}

struct McEstimate {
  double value = 0.0;
  double se = 0.0;
  double half_gap = 0.0;
};

/// Importance sampling of I(e) with proposal proportional to
/// min(u^{-2e}, u^{-2e-2}) on (0, inf); the two halves of the budget use
/// separate streams and must agree within 3 combined standard errors.
inline McEstimate reduced_integral_mc(const TransferSq& h2, double e, int K, std::uint64_t budget, std::uint64_t seed) {
  if (budget < 1000) fail(ErrorKind::invalid_config, "Monte Carlo budget too small");
  const double a = 1.0 / (1.0 - 2.0 * e), b = 1.0 / (1.0 + 2.0 * e);
  const double pin = a / (a + b);
  auto half = [&](std::uint64_t stream, std::uint64_t n) {
    RandomStream rng(seed, stream);
    double s = 0.0, s2 = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      const double v = rng.uniform(), u01 = rng.uniform();
      double u, wgt;
      if (v < pin) {
        u = std::pow(u01, a);
        wgt = h2(u) * std::pow(u, -2.0 * K);
      } else {
        u = std::pow(u01, -b);
        wgt = h2(u) * std::pow(u, 2.0 - 2.0 * K);
      }
      wgt *= 2.0 * (a + b);
      s += wgt;
      s2 += wgt * wgt;
    }
    const double m = s / static_cast<double>(n);
    const double var = (s2 / static_cast<double>(n) - m * m) / static_cast<double>(n - 1);
    return std::pair{m, std::sqrt(std::max(var, 0.0))};
  };
  const auto [m1, se1] = half(0x4C51, budget / 2);
  const auto [m2, se2] = half(0x4C52, budget - budget / 2);
  McEstimate out;
  out.value = 0.5 * (m1 + m2);
  out.se = 0.5 * std::sqrt(se1 * se1 + se2 * se2);
  out.half_gap = std::abs(m1 - m2);
  if (out.half_gap > 3.0 * std::sqrt(se1 * se1 + se2 * se2)) {
    throw NumericError("L_q Monte Carlo halves disagree: " + std::to_string(m1) + " vs " + std::to_string(m2) +
                           " (combined SE " + std::to_string(std::sqrt(se1 * se1 + se2 * se2)) + ")",
                       out.half_gap);
  }
  return out;
}

/// L_q = int_{R^q} |hhat(u_1+...+u_q)|^2 |u_1+...+u_q|^{-2K} prod |u_i|^{-2d} du.
/// The q-fold integral reduces to C_q I(delta(q)); q = 1 reports the
/// quadrature value, q >= 2 the Monte Carlo value, both computed either way
/// when `budget` > 0.
inline LqEstimate compute_Lq(const TransferSq& h2, int q, double d, int K, std::uint64_t budget = 1 << 22,
                             std::uint64_t seed = 1) {
  if (q < 1) fail(ErrorKind::domain, "compute_Lq: q must be >= 1");
  if (K < 0) fail(ErrorKind::domain, "compute_Lq: K must be non-negative");
  if (static_cast<double>(q) * (1.0 - 2.0 * d) >= 1.0)
    fail(ErrorKind::domain, "L_" + std::to_string(q) + " is infinite: q >= 1/(1-2d)");
  LqEstimate r;
  r.q = q;
  const double e = memory_exponent(q, d).delta;
  r.composition = composition_constant(q, d);
  const auto quad_est = reduced_integral_quadrature(h2, e, K);
  r.quad_value = r.composition * quad_est.value;
  r.quad_error = r.composition * quad_est.error;
  if (budget > 0) {
    const auto mc = reduced_integral_mc(h2, e, K, budget, seed);
    r.mc_value = r.composition * mc.value;
    r.mc_se = r.composition * mc.se;
  }
  if (q == 1 || budget == 0) {
    r.estimate = r.quad_value;
    r.se = r.quad_error;
    r.method = q == 1 ? "quadrature" : "composition+quadrature";
  } else {
    r.estimate = r.mc_value;
    r.se = r.mc_se;
    r.method = "composition+importance-sampling";
  }
  return r;
}

// ---------------------------------------------------------------------------
// Gamma matrix
// ---------------------------------------------------------------------------

struct GammaResult {
  Eigen::MatrixXd matrix;
  int truncation = 64;
  double truncation_delta = 0.0;  // max relative change when the p-range doubles
  double min_eigenvalue = 0.0;

  json to_json() const {
    json m = json::array();
    for (int i = 0; i < matrix.rows(); ++i) {
      json row = json::array();
      for (int k = 0; k < matrix.cols(); ++k) row.push_back(matrix(i, k));
      m.push_back(row);
    }
    return m;
  }
};

namespace detail {

/// 8 pi f*(0)^2 int_0^pi |S_{ii'}(lambda)|^2 d lambda with the p-sum cut at |p| <= P.
inline Eigen::MatrixXd gamma_at(const std::vector<const WaveletFilterBank*>& filters, double d, int K, double fstar0,
                                int P) {
  const int m = static_cast<int>(filters.size());
  // Panels refined geometrically toward 0, then uniform.
  std::vector<std::pair<double, double>> panels;
  const double pi = std::numbers::pi;
  double lo = pi / 64.0;
  for (int k = 0; k < 40; ++k) {
    panels.emplace_back(lo / 2.0, lo);
    lo /= 2.0;
  }
  for (int k = 0; k < 63; ++k) panels.emplace_back(pi / 64.0 * (k + 1), pi / 64.0 * (k + 2));
  const quad::Rule& rule = quad::legendre_cached(24);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
  std::vector<std::complex<double>> hv(m);
  std::vector<std::complex<double>> S(m * m);
  for (const auto& [a, b] : panels) {
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double lam = c + h * rule.nodes[k];
      std::fill(S.begin(), S.end(), 0.0);
      for (int p = -P; p <= P; ++p) {
        const double x = lam + 2.0 * pi * p;
        const double wgt = std::pow(std::abs(x), -2.0 * (K + d));
        for (int i = 0; i < m; ++i) hv[i] = filters[i]->limit_transfer(x);
        for (int i = 0; i < m; ++i)
          for (int i2 = 0; i2 < m; ++i2) S[i * m + i2] += wgt * hv[i] * std::conj(hv[i2]);
      }
      for (int i = 0; i < m; ++i)
        for (int i2 = 0; i2 < m; ++i2) G(i, i2) += h * rule.weights[k] * std::norm(S[i * m + i2]);
    }
  }
  return 8.0 * pi * fstar0 * fstar0 * G;
}

}  // namespace detail

/// Gamma for the filters of `bank` (all channels share the same cascade, so
/// every channel uses the bank's limit transfer).
inline GammaResult compute_Gamma(const WaveletFilterBank& bank, const SpectralModel& model, int P = 64) {
  if (P < 8) fail(ErrorKind::domain, "compute_Gamma: truncation must be >= 8");
  std::vector<const WaveletFilterBank*> f(bank.filters(), &bank);
  GammaResult r;
  r.truncation = P;
  const Eigen::MatrixXd a = detail::gamma_at(f, model.d(), model.K(), model.fstar0(), P);
  const Eigen::MatrixXd b = detail::gamma_at(f, model.d(), model.K(), model.fstar0(), 2 * P);
  r.truncation_delta = (b - a).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
  if (!(r.truncation_delta < 5e-3))
    throw NumericError("Gamma truncation unstable under doubling of the p-range", r.truncation_delta);
  r.matrix = 0.5 * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.matrix);
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  return r;
}

// ---------------------------------------------------------------------------
// Reference samples of Z_{q,d}(1)
// ---------------------------------------------------------------------------

/// q! sum_{|tau|<n} (n - |tau|) rho(tau)^q, the variance of sum_{k<=n} H_q(X_k).
inline double partial_sum_variance(const std::vector<double>& rho, int q, std::size_t n) {
  double s = static_cast<double>(n);
  for (std::size_t tau = 1; tau < n; ++tau) s += 2.0 * static_cast<double>(n - tau) * std::pow(rho[tau], q);
  return factorial(q) * s;
}

struct ReferenceSample {
  std::string family;
  int q = 1;
  double d = 0.0;
  std::size_t internal_n = 0;
  std::vector<double> draws;
  double scale = 0.0;       // sqrt(Var) / n^{delta(q)+1/2} at internal_n
  double scale_half = 0.0;  // same at internal_n / 2
  bool stable = true;
  std::string warning;
};

/// Draws of n^{-(delta(q)+1/2)} sum_{k<=n} H_q(X_k), divided by the exact
/// calibration constant so the draws have unit variance.
inline ReferenceSample sample_reference(int q, double d, std::size_t internal_n, std::size_t replicas,
                                        std::uint64_t seed, unsigned workers = 1) {
  if (q < 1) fail(ErrorKind::domain, "reference: q must be >= 1");
  if (static_cast<double>(q) * (1.0 - 2.0 * d) >= 1.0)
    fail(ErrorKind::domain, "reference: H_q(X) is not long-range dependent for this (q, d)");
  if (internal_n < 4096) fail(ErrorKind::invalid_config, "reference: internal_n must be >= 2^12");
  if (replicas < 1) fail(ErrorKind::invalid_config, "reference: replicas must be positive");
  const SpectralModel model(d, FstarSpec{});
  const auto rho = model.autocovariance_sequence(internal_n);
  ReferenceSample r;
  r.family = q == 1 ? "gaussian" : (q == 2 ? "rosenblatt" : "hermite(" + std::to_string(q) + ")");
  r.q = q;
  r.d = d;
  r.internal_n = internal_n;
  const double H = memory_exponent(q, d).delta + 0.5;
  const double V = partial_sum_variance(rho, q, internal_n);
  const double Vh = partial_sum_variance(rho, q, internal_n / 2);
  r.scale = std::sqrt(V) / std::pow(static_cast<double>(internal_n), H);
  r.scale_half = std::sqrt(Vh) / std::pow(static_cast<double>(internal_n / 2), H);
  const double ratio = (r.scale * r.scale) / (r.scale_half * r.scale_half);
  r.stable = std::abs(ratio - 1.0) <= 0.05;
  if (!r.stable) r.warning = "calibration varies by " + std::to_string(100.0 * std::abs(ratio - 1.0)) + "% across n/2..n";

  const CirculantSynthesizer synth(model, internal_n);
  const double inv = 1.0 / std::sqrt(V);
  r.draws.assign(replicas, 0.0);
  parallel_for(replicas, workers, [&](std::size_t i) {
    const auto path = synth.draw(seed, substream(0x5EF, i));
    double s = 0.0;
    for (double x : path.samples) s += hermite_eval(q, x);
    r.draws[i] = s * inv;
  });
  return r;
}

struct SelfSimilarityFit {
  double slope = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double exact_slope = 0.0;  // slope of the exact partial-sum sd over the same sizes
  double target = 0.0;       // delta(q) + 1/2
};

/// Log-log slope of the sd of sum_{k<=n} H_q(X_k) against n.
inline SelfSimilarityFit self_similarity_slope(int q, double d, const std::vector<std::size_t>& sizes,
                                               std::size_t replicas, std::uint64_t seed, unsigned workers = 1) {
  if (sizes.size() < 3) fail(ErrorKind::insufficient_data, "self-similarity fit needs three sizes");
  const SpectralModel model(d, FstarSpec{});
  std::vector<std::vector<double>> groups;
  std::vector<double> xs, ex;
  const auto rho = model.autocovariance_sequence(*std::max_element(sizes.begin(), sizes.end()));
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    const CirculantSynthesizer synth(model, sizes[s]);
    std::vector<double> g(replicas);
    parallel_for(replicas, workers, [&](std::size_t i) {
      const auto path = synth.draw(seed, substream(s, i));
      double acc = 0.0;
      for (double x : path.samples) acc += hermite_eval(q, x);
      g[i] = acc;
    });
    groups.push_back(std::move(g));
    xs.push_back(static_cast<double>(sizes[s]));
    ex.push_back(0.5 * std::log(partial_sum_variance(rho, q, sizes[s])));
  }
  SelfSimilarityFit f;
  const auto fit = stats::log_sd_regression(xs, groups, seed);
  f.slope = fit.slope;
  f.ci_low = fit.ci_low;
  f.ci_high = fit.ci_high;
  std::vector<double> lx, w(xs.size(), 1.0);
  for (double x : xs) lx.push_back(std::log(x));
  f.exact_slope = stats::weighted_slope(lx, ex, w).slope;
  f.target = memory_exponent(q, d).delta + 0.5;
  return f;
}

// ---------------------------------------------------------------------------
// Theorem constants
// ---------------------------------------------------------------------------

struct LimitConstants {
  std::map<int, LqEstimate> Lq;
  std::optional<GammaResult> Gamma;
  double fstar0 = 0.0;
};

struct TheoremConstant {
  std::string symbolic;
  double value = 0.0;                  // scalar constants
  std::optional<Eigen::MatrixXd> matrix;  // c_1^2 Gamma

  json to_json() const {
    json j{{"symbolic", symbolic}};
    if (matrix) {
      json m = json::array();
      for (int i = 0; i < matrix->rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < matrix->cols(); ++k) row.push_back((*matrix)(i, k));
        m.push_back(row);
      }
      j["value"] = m;
    } else {
      j["value"] = value;
    }
    return j;
  }
};

/// Multiplicative constant of the limit selected by `report`.
inline TheoremConstant theorem_constant(const RegimeReport& report, const LimitConstants& lc,
                                        const HermiteExpansion& e) {
  TheoremConstant t;
  t.symbolic = report.constant_descriptor;
  auto need_L = [&](int q) -> double {
    auto it = lc.Lq.find(q);
    if (it == lc.Lq.end()) fail(ErrorKind::dependency, "theorem constant needs L_" + std::to_string(q));
    return it->second.estimate;
  };
  const double f0 = lc.fstar0;
  switch (report.constant) {
    case ConstantKind::gamma_matrix: {
      if (!lc.Gamma) fail(ErrorKind::dependency, "theorem constant needs the Gamma matrix");
      const double c1 = e.coeff(1);
      t.matrix = c1 * c1 * lc.Gamma->matrix;
      break;
    }
    case ConstantKind::lq_diag: {
      const int q = report.constant_q + 1;
      const double c = e.coeff(q);
      t.value = c * c / factorial(q - 1) * std::pow(f0, q) * need_L(q - 1);
      break;
    }
    case ConstantKind::lq_cross_consecutive: {
      const int q = report.constant_q;
      t.value = 2.0 * e.coeff(q) * e.coeff(q + 1) / factorial(q) * std::pow(f0, q + 0.5) * need_L(q);
      break;
    }
    case ConstantKind::lq_cross_linear: {
      const int q1 = std::get<1>(report.leading_term);
      t.value = 2.0 * e.coeff(1) * e.coeff(q1) / factorial(q1 - 1) * std::pow(f0, 0.5 * (q1 + 1)) * need_L(1);
      break;
    }
    case ConstantKind::none:
      fail(ErrorKind::dependency, "no single limit on a growth boundary; no constant to assemble");
  }
  return t;
}

}  // namespace lrdscal
