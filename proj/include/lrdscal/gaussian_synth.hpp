#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "lrdscal/error.hpp"
#include "lrdscal/fft.hpp"
#include "lrdscal/rng.hpp"
#include "lrdscal/spectral_model.hpp"

namespace lrdscal {

enum class SynthMethod { circulant, spectral_approx };

inline const char* to_string(SynthMethod m) {
  return m == SynthMethod::circulant ? "circulant" : "spectral_approx";
}

struct GaussianPath {
  std::vector<double> samples;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t model_digest = 0;
  SynthMethod method = SynthMethod::circulant;
  /// Mass of negative embedding eigenvalues set to zero, relative to the largest.
  double clamp_error = 0.0;
};

/// Circulant-embedding sampler for one (model, n). The square-root spectrum is
/// computed once; draws for different (seed, stream) reuse it.
class CirculantSynthesizer {
 public:
  static constexpr int kMaxDoublings = 4;
  static constexpr double kClampTolerance = 1e-9;
  static constexpr std::size_t kSpectralFrequencies = std::size_t{1} << 20;

  /// `force_spectral` selects the fallback method directly (used by tests).
  CirculantSynthesizer(const SpectralModel& model, std::size_t n, bool force_spectral = false)
      : n_(n), digest_(model.digest()) {
    if (n < 2) fail(ErrorKind::domain, "synthesize: n must be >= 2");
    if (!force_spectral && try_circulant(model)) return;
    build_spectral(model);
  }

  std::size_t size() const { return n_; }
  SynthMethod method() const { return method_; }
  double clamp_error() const { return clamp_error_; }
  std::size_t embedding_size() const { return m_; }

  GaussianPath draw(std::uint64_t seed, std::uint64_t stream = 0) const {
    RandomStream rng(seed, stream);
    fft::Buffer w(m_), out(m_);
    for (std::size_t k = 0; k < m_; ++k) {
      const double a = rng.normal();
      const double b = rng.normal();
      w[k] = {sqrt_eig_[k] * a, sqrt_eig_[k] * b};
    }
    fft::forward(w, out);
    GaussianPath p;
    p.samples.resize(n_);
    if (method_ == SynthMethod::circulant) {
      for (std::size_t t = 0; t < n_; ++t) p.samples[t] = out[t].real();
    } else {
      // Frequencies sit at bin centres 2 pi (k + 1/2) / m; the half-bin shift
      // is a phase factor per output index.
      for (std::size_t t = 0; t < n_; ++t) {
        const double phase = -std::numbers::pi * static_cast<double>(t) / static_cast<double>(m_);
        p.samples[t] = (out[t] * std::complex<double>(std::cos(phase), std::sin(phase))).real();
      }
    }
    p.seed = seed;
    p.stream = stream;
    p.model_digest = digest_;
    p.method = method_;
    p.clamp_error = clamp_error_;
    return p;
  }

 private:
  bool try_circulant(const SpectralModel& model) {
    std::size_t m = 2 * fft::next_pow2(n_);
    for (int attempt = 0; attempt <= kMaxDoublings; ++attempt, m *= 2) {
      const auto rho = model.autocovariance_sequence(m / 2 + 1);
      fft::Buffer row(m), eig(m);
      for (std::size_t k = 0; k < m; ++k) row[k] = rho[k <= m / 2 ? k : m - k];
      fft::forward(row, eig);
      double top = 0.0, low = 0.0, neg = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        top = std::max(top, eig[k].real());
        low = std::min(low, eig[k].real());
      }
      if (low < -kClampTolerance * top) continue;
      sqrt_eig_.resize(m);
      for (std::size_t k = 0; k < m; ++k) {
        const double v = eig[k].real();
        if (v < 0.0) neg += -v;
        sqrt_eig_[k] = std::sqrt(std::max(v, 0.0) / static_cast<double>(m));
      }
      m_ = m;
      clamp_error_ = neg / top;
      method_ = SynthMethod::circulant;
      return true;
    }
    return false;
  }

  /// Riemann sum of the harmonizable representation over the circle.
  void build_spectral(const SpectralModel& model) {
    m_ = std::max(kSpectralFrequencies, fft::next_pow2(n_));
    sqrt_eig_.resize(m_);
    const double dl = 2.0 * std::numbers::pi / static_cast<double>(m_);
    for (std::size_t k = 0; k < m_; ++k) {
      const double lam = dl * (static_cast<double>(k) + 0.5);
      // Real part of a complex Gaussian with iid N(0,1) parts has variance a^2.
      sqrt_eig_[k] = std::sqrt(model.eval_f(lam) * dl);
    }
    method_ = SynthMethod::spectral_approx;
    clamp_error_ = 0.0;
  }

  std::size_t n_;
  std::uint64_t digest_;
  std::size_t m_ = 0;
  std::vector<double> sqrt_eig_;
  SynthMethod method_ = SynthMethod::circulant;
  double clamp_error_ = 0.0;
};

inline GaussianPath synthesize(const SpectralModel& model, std::size_t n, std::uint64_t seed,
                               std::uint64_t stream = 0) {
  return CirculantSynthesizer(model, n).draw(seed, stream);
}

/// (X_t, X_{t+tau}) for t = 0..n-tau-1, sliced from one path of length n.
inline std::pair<std::vector<double>, std::vector<double>> correlated_pair(const SpectralModel& model, std::size_t n,
                                                                           std::uint64_t seed, std::size_t tau) {
  if (tau >= n) fail(ErrorKind::insufficient_data, "correlated_pair: lag leaves no overlap");
  const auto path = synthesize(model, n, seed);
  std::vector<double> a(path.samples.begin(), path.samples.end() - static_cast<std::ptrdiff_t>(tau));
  std::vector<double> b(path.samples.begin() + static_cast<std::ptrdiff_t>(tau), path.samples.end());
  return {std::move(a), std::move(b)};
}

}  // namespace lrdscal
