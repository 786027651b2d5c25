#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrdscal/error.hpp"
#include "lrdscal/quadrature.hpp"
#include "lrdscal/rational.hpp"

namespace lrdscal {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Memory-parameter calculus
// ---------------------------------------------------------------------------

struct MemoryExponents {
  double delta = 0.0;
  double delta_plus = 0.0;
  double delta_minus = 0.0;
};

/// delta(q) = q d - (q - 1)/2 together with its positive and negative parts.
/// Real-valued q is allowed (half-integer arguments appear in rate exponents).
inline MemoryExponents memory_exponent(double q, double d) {
  if (!(q > 0.0)) fail(ErrorKind::domain, "memory_exponent: q must be positive");
  MemoryExponents m;
  m.delta = q * d - 0.5 * (q - 1.0);
  m.delta_plus = std::max(m.delta, 0.0);
  m.delta_minus = std::max(-m.delta, 0.0);
  return m;
}

/// Exact variant; q = 0 is permitted here (delta(0) = 1/2 is used by the
/// contraction-exponent calculus).
inline Rational delta_exact(const Rational& q, const Rational& d) {
  return q * d - (q - Rational(1)) / Rational(2);
}
inline Rational delta_plus_exact(const Rational& q, const Rational& d) {
  return std::max(delta_exact(q, d), Rational(0));
}
inline Rational delta_minus_exact(const Rational& q, const Rational& d) {
  return std::max(-delta_exact(q, d), Rational(0));
}

/// H_q(X) has long memory iff q < 1/(1 - 2d).
inline bool is_long_memory(int q, double d) {
  if (q < 1) fail(ErrorKind::domain, "is_long_memory: q must be >= 1");
  return static_cast<double>(q) * (1.0 - 2.0 * d) < 1.0;
}

inline bool is_long_memory_exact(int q, const Rational& d) {
  if (q < 1) fail(ErrorKind::domain, "is_long_memory: q must be >= 1");
  return Rational(q) * (Rational(1) - Rational(2) * d) < Rational(1);
}

// ---------------------------------------------------------------------------
// Spectral model
// ---------------------------------------------------------------------------

enum class FstarKind { constant, cospoly, arfactor };

inline const char* to_string(FstarKind k) {
  switch (k) {
    case FstarKind::constant: return "const";
    case FstarKind::cospoly: return "cospoly";
    case FstarKind::arfactor: return "arfactor";
  }
  return "?";
}

/// Short-memory factor. `constant`: params = {c}. `cospoly`:
/// f*(lambda) = sum_m a_m cos(m lambda), params = {a_0, a_1, ...}.
/// `arfactor`: |1 - phi e^{-i lambda}|^{-2}, params = {phi}.
struct FstarSpec {
  FstarKind kind = FstarKind::constant;
  std::vector<double> params{1.0};
};

/// Spectral density f(lambda) = s |1 - e^{-i lambda}|^{-2d} f*(lambda), with the
/// scale s chosen at construction so that the integral of f over (-pi, pi] is
/// one (unit variance of X). Immutable after construction.
class SpectralModel {
 public:
  SpectralModel(double d, FstarSpec fstar, int K = 0) : d_(d), K_(K), fstar_(std::move(fstar)) {
    if (!(d > 0.0 && d < 0.5)) fail(ErrorKind::domain, "memory parameter d must lie in (0, 1/2)");
    if (K < 0) fail(ErrorKind::domain, "differencing order K must be non-negative");
    validate_fstar();
    fourier_ = fstar_fourier();
    double total = 0.0;
    const auto base = fractional_acf(fourier_.size());
    for (std::size_t k = 0; k < fourier_.size(); ++k) total += (k == 0 ? 1.0 : 2.0) * fourier_[k] * base[k];
    if (!(total > 0.0)) fail(ErrorKind::invalid_input, "f* does not define a positive spectral density");
    normalization_ = 1.0 / total;
  }

  double d() const { return d_; }
  int K() const { return K_; }
  const FstarSpec& fstar() const { return fstar_; }
  double normalization() const { return normalization_; }

  /// Unscaled short-memory factor.
  double fstar_raw(double lambda) const {
    switch (fstar_.kind) {
      case FstarKind::constant: return fstar_.params[0];
      case FstarKind::cospoly: {
        double s = 0.0;
        for (std::size_t m = 0; m < fstar_.params.size(); ++m) s += fstar_.params[m] * std::cos(m * lambda);
        return s;
      }
      case FstarKind::arfactor: {
        const double phi = fstar_.params[0];
        return 1.0 / (1.0 - 2.0 * phi * std::cos(lambda) + phi * phi);
      }
    }
    return 0.0;
  }

  /// f*(0) after unit-variance scaling; this is the value entering the limit constants.
  double fstar0() const { return normalization_ * fstar_raw(0.0); }

  double eval_f(double lambda) const {
    if (!std::isfinite(lambda)) fail(ErrorKind::domain, "eval_f: non-finite frequency");
    const double w = std::remainder(lambda, 2.0 * std::numbers::pi);
    if (w == 0.0) fail(ErrorKind::domain, "eval_f: spectral density is singular at lambda = 0");
    const double mod = 2.0 * std::abs(std::sin(0.5 * w));
    return normalization_ * std::pow(mod, -2.0 * d_) * fstar_raw(w);
  }

  /// rho(tau) = int e^{i lambda tau} f(lambda) d lambda by adaptive quadrature.
  /// The substitution lambda = pi v^{1/(1-2d)} removes the |lambda|^{-2d}
  /// singularity so the transformed integrand is bounded at v = 0.
  double autocovariance(long tau, double tol = 1e-10) const {
    if (!(tol > 0.0)) fail(ErrorKind::domain, "autocovariance: tol must be positive");
    const double beta = 1.0 / (1.0 - 2.0 * d_);
    const double t = static_cast<double>(std::labs(tau));
    auto integrand = [&](double v) {
      if (v <= 0.0) return 0.0;
      const double vb = std::pow(v, beta);
      const double lam = std::numbers::pi * vb;
      // |2 sin(lam/2)|^{-2d} times the Jacobian; the powers of v cancel exactly.
      const double sinc = lam < 1e-8 ? 1.0 : 2.0 * std::sin(0.5 * lam) / lam;
      const double core = std::pow(std::numbers::pi, 1.0 - 2.0 * d_) * beta * std::pow(sinc, -2.0 * d_);
      return 2.0 * normalization_ * core * std::cos(lam * t) * fstar_raw(lam);
    };
    const int depth = 18 + static_cast<int>(std::log2(1.0 + t));
    const quad::Estimate e = quad::adaptive(integrand, 0.0, 1.0, 0.25 * tol, 21, depth);
    if (e.error > tol) {
      throw NumericError("autocovariance: quadrature did not reach tolerance at lag " + std::to_string(tau),
                         e.error);
    }
    return e.value;
  }

  /// rho(0), ..., rho(n-1) from the closed-form fractional autocovariance
  /// convolved with the Fourier coefficients of f*. Used by the synthesizer;
  /// agrees with `autocovariance` to quadrature accuracy.
  std::vector<double> autocovariance_sequence(std::size_t n) const {
    const std::size_t kmax = fourier_.size() - 1;
    const auto base = fractional_acf(n + kmax);
    std::vector<double> rho(n, 0.0);
    for (std::size_t tau = 0; tau < n; ++tau) {
      double s = fourier_[0] * base[tau];
      for (std::size_t k = 1; k <= kmax; ++k) {
        const std::size_t lo = tau >= k ? tau - k : k - tau;
        s += fourier_[k] * (base[tau + k] + base[lo]);
      }
      rho[tau] = normalization_ * s;
    }
    return rho;
  }

  json to_json() const {
    return json{{"d", d_}, {"K", K_}, {"fstar", {{"kind", to_string(fstar_.kind)}, {"params", fstar_.params}}}};
  }

  static SpectralModel from_json(const json& j) {
    try {
      FstarSpec fs;
      int K = j.value("K", 0);
      if (j.contains("fstar")) {
        const auto& f = j.at("fstar");
        const std::string kind = f.at("kind").get<std::string>();
        if (kind == "const") fs.kind = FstarKind::constant;
        else if (kind == "cospoly") fs.kind = FstarKind::cospoly;
        else if (kind == "arfactor") fs.kind = FstarKind::arfactor;
        else fail(ErrorKind::invalid_input, "unknown fstar kind '" + kind + "'");
        fs.params = f.at("params").get<std::vector<double>>();
      }
      return SpectralModel(j.at("d").get<double>(), fs, K);
    } catch (const json::exception& e) {
      fail(ErrorKind::invalid_input, std::string("spectral model JSON: ") + e.what());
    }
  }

  /// FNV-1a hash of the canonical JSON form.
  std::uint64_t digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : to_json().dump()) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

 private:
  void validate_fstar() {
    const auto& p = fstar_.params;
    switch (fstar_.kind) {
      case FstarKind::constant:
        if (p.size() != 1 || !(p[0] > 0.0)) fail(ErrorKind::invalid_input, "const f* needs one positive parameter");
        break;
      case FstarKind::arfactor:
        if (p.size() != 1 || !(std::abs(p[0]) < 1.0))
          fail(ErrorKind::invalid_input, "arfactor f* needs one parameter with |phi| < 1");
        break;
      case FstarKind::cospoly: {
        if (p.empty()) fail(ErrorKind::invalid_input, "cospoly f* needs at least one coefficient");
        constexpr int grid = 8192;
        for (int i = 0; i <= grid; ++i) {
          if (!(fstar_raw(std::numbers::pi * i / grid) > 0.0))
            fail(ErrorKind::invalid_input, "cospoly f* is not positive on [0, pi]");
        }
        break;
      }
    }
    for (double v : p)
      if (!std::isfinite(v)) fail(ErrorKind::invalid_input, "non-finite f* parameter");
  }

  /// Coefficients b_k (k >= 0, b_{-k} = b_k) with f*(lambda) = sum_k b_k e^{i k lambda}.
  std::vector<double> fstar_fourier() const {
    const auto& p = fstar_.params;
    switch (fstar_.kind) {
      case FstarKind::constant: return {p[0]};
      case FstarKind::cospoly: {
        std::vector<double> b(p.size());
        b[0] = p[0];
        for (std::size_t m = 1; m < p.size(); ++m) b[m] = 0.5 * p[m];
        return b;
      }
      case FstarKind::arfactor: {
        const double phi = p[0];
        std::vector<double> b{1.0 / (1.0 - phi * phi)};
        double pw = 1.0;
        while (true) {
          pw *= phi;
          if (std::abs(pw) < 1e-18) break;
          b.push_back(pw / (1.0 - phi * phi));
        }
        return b;
      }
    }
    return {};
  }

  /// a(h) = int e^{i h lambda} |1 - e^{-i lambda}|^{-2d} d lambda, h = 0..n-1.
  std::vector<double> fractional_acf(std::size_t n) const {
    std::vector<double> a(std::max<std::size_t>(n, 1));
    a[0] = 2.0 * std::numbers::pi * std::exp(std::lgamma(1.0 - 2.0 * d_) - 2.0 * std::lgamma(1.0 - d_));
    for (std::size_t h = 0; h + 1 < a.size(); ++h) a[h + 1] = a[h] * (h + d_) / (h + 1.0 - d_);
    return a;
  }

  double d_;
  int K_;
  FstarSpec fstar_;
  std::vector<double> fourier_;
  double normalization_ = 1.0;
};

}  // namespace lrdscal
