#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lrdscal/error.hpp"
#include "lrdscal/fft.hpp"
#include "lrdscal/hermite.hpp"
#include "lrdscal/spectral_model.hpp"
#include "lrdscal/wavelet_bank.hpp"

namespace lrdscal {

enum class ConvolutionMode { automatic, direct, fft };

/// Work threshold (taps x coefficients) above which filtering goes through the FFT.
inline constexpr std::size_t kFftCrossover = std::size_t{1} << 18;

/// W_k = sum_u taps[u] y[gamma (k0 + k) - 1 - u], k = 0..n-1. The record is
/// indexed 1..N in the defining sum, hence the -1 when reading y.
inline std::vector<double> filter_decimate(std::span<const double> y, std::span<const double> taps, long long gamma,
                                           long long k0, long long n,
                                           ConvolutionMode mode = ConvolutionMode::automatic) {
  const long long L = static_cast<long long>(taps.size());
  const long long N = static_cast<long long>(y.size());
  if (n <= 0 || gamma * k0 - L < 0 || gamma * (k0 + n - 1) > N)
    fail(ErrorKind::insufficient_data, "filter window leaves the record");
  std::vector<double> W(static_cast<std::size_t>(n));
  if (mode == ConvolutionMode::automatic)
    mode = static_cast<std::size_t>(L) * static_cast<std::size_t>(n) > kFftCrossover ? ConvolutionMode::fft
                                                                                      : ConvolutionMode::direct;
  if (mode == ConvolutionMode::direct) {
    for (long long k = 0; k < n; ++k) {
      const long long end = gamma * (k0 + k) - 1;
      double s = 0.0;
      for (long long u = 0; u < L; ++u) s += taps[u] * y[end - u];
      W[k] = s;
    }
  } else {
    const long long lo = gamma * k0 - L;
    const long long hi = gamma * (k0 + n - 1);
    const auto full = fft::convolve(y.subspan(lo, hi - lo), taps);
    for (long long k = 0; k < n; ++k) W[k] = full[gamma * (k0 + k) - 1 - lo];
  }
  return W;
}

struct ScaleCoeffs {
  int j = 0;
  long long gamma = 0;
  long long n = 0;
  std::vector<std::vector<double>> W;  // per filter
};

struct WaveletCoeffs {
  std::vector<ScaleCoeffs> scales;
  int K = 0;

  const ScaleCoeffs& at(int j) const {
    for (const auto& s : scales)
      if (s.j == j) return s;
    fail(ErrorKind::domain, "scale " + std::to_string(j) + " not computed");
  }
};

/// Wavelet coefficients of the series Y with Delta^K Y = z (z given), at the
/// requested scales. The K-fold summation is folded into the taps, which is
/// algebraically the same as summing z first and filtering with h_j.
inline WaveletCoeffs wavelet_coeffs(std::span<const double> z, const WaveletFilterBank& bank,
                                    const std::vector<int>& scales,
                                    ConvolutionMode mode = ConvolutionMode::automatic) {
  WaveletCoeffs out;
  out.K = bank.K();
  const long long N = static_cast<long long>(z.size());
  for (int j : scales) {
    ScaleCoeffs sc;
    sc.j = j;
    sc.gamma = bank.gamma_int(j);
    sc.n = coefficient_count(N, bank.support(), j);
    const long long k0 = bank.first_index(j);
    if (sc.gamma * (k0 + sc.n - 1) > N)
      fail(ErrorKind::insufficient_data, "record too short for scale " + std::to_string(j));
    for (int f = 0; f < bank.filters(); ++f)
      sc.W.push_back(filter_decimate(z, bank.effective_taps(j, f), sc.gamma, k0, sc.n, mode));
    out.scales.push_back(std::move(sc));
  }
  return out;
}

struct ScalogramEntry {
  int j = 0;
  long long gamma = 0;
  long long n = 0;
  std::vector<double> S;      // per filter
  std::vector<double> Sbar;   // S - E_W2
  std::vector<double> E_W2;
  std::string centering = "none";
};

inline double mean_square(std::span<const double> w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return s / static_cast<double>(w.size());
}

inline double mean_product(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s / static_cast<double>(a.size());
}

inline std::vector<ScalogramEntry> scalogram(const WaveletCoeffs& c) {
  std::vector<ScalogramEntry> out;
  for (const auto& sc : c.scales) {
    ScalogramEntry e;
    e.j = sc.j;
    e.gamma = sc.gamma;
    e.n = sc.n;
    for (const auto& w : sc.W) {
      if (w.empty()) fail(ErrorKind::insufficient_data, "empty coefficient array");
      e.S.push_back(mean_square(w));
      e.Sbar.push_back(e.S.back());
      e.E_W2.push_back(0.0);
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// A(tau) = sum_t h(t) h(t + tau), tau = 0..L-1.
inline std::vector<double> tap_autocorrelation(std::span<const double> h) {
  std::vector<double> A(h.size(), 0.0);
  for (std::size_t tau = 0; tau < h.size(); ++tau)
    for (std::size_t t = 0; t + tau < h.size(); ++t) A[tau] += h[t] * h[t + tau];
  return A;
}

/// E[(W^{(q)}_{j,0})^2] = q! sum_tau A(tau) rho(tau)^q for a single chaos.
inline double chaos_energy(const std::vector<double>& A, const std::vector<double>& rho, int q) {
  double s = A[0];
  for (std::size_t tau = 1; tau < A.size(); ++tau) s += 2.0 * A[tau] * std::pow(rho[tau], q);
  return factorial(q) * s;
}

/// Expected squared coefficient E[W_{j,0}^2] per filter, from the Mehler
/// covariance sum_q c_q^2/q! rho^q and the effective taps.
inline std::vector<double> expected_energy(const SpectralModel& model, const HermiteExpansion& e,
                                           const WaveletFilterBank& bank, int j) {
  if (bank.K() != model.K())
    fail(ErrorKind::invalid_config, "bank integration order differs from the model's K");
  std::vector<double> out;
  for (int f = 0; f < bank.filters(); ++f) {
    const auto A = tap_autocorrelation(bank.effective_taps(j, f));
    const auto rho = model.autocovariance_sequence(A.size());
    double s = 0.0;
    for (const auto& t : e.entries) {
      const double a = t.c / factorial(t.q);
      s += a * a * chaos_energy(A, rho, t.q);
    }
    out.push_back(s);
  }
  return out;
}

/// Scalogram centered by the analytic expectation.
inline std::vector<ScalogramEntry> centered_scalogram(const WaveletCoeffs& c, const SpectralModel& model,
                                                      const HermiteExpansion& e, const WaveletFilterBank& bank) {
  auto out = scalogram(c);
  for (auto& s : out) {
    s.E_W2 = expected_energy(model, e, bank, s.j);
    for (std::size_t f = 0; f < s.S.size(); ++f) s.Sbar[f] = s.S[f] - s.E_W2[f];
    s.centering = "analytic";
  }
  return out;
}

/// Per-degree coefficients W^{(q)} obtained by filtering H_q(X_t).
using ChaosComponents = std::map<int, WaveletCoeffs>;

inline ChaosComponents chaos_components(std::span<const double> x, const HermiteExpansion& e,
                                        const WaveletFilterBank& bank, const std::vector<int>& scales) {
  ChaosComponents out;
  for (const auto& t : e.entries) {
    const auto hq = hermite_series(t.q, x);
    out.emplace(t.q, wavelet_coeffs(hq, bank, scales));
  }
  return out;
}

enum class ChaosGroup { diag11, sigma0, sigma1, sigma2, sigma3 };

inline const char* to_string(ChaosGroup g) {
  switch (g) {
    case ChaosGroup::diag11: return "diag11";
    case ChaosGroup::sigma0: return "Sigma0";
    case ChaosGroup::sigma1: return "Sigma1";
    case ChaosGroup::sigma2: return "Sigma2";
    case ChaosGroup::sigma3: return "Sigma3";
  }
  return "?";
}

struct PairMembership {
  int q = 0;
  int q2 = 0;
  ChaosGroup group = ChaosGroup::sigma0;
};

struct ChaosDecomposition {
  int j = 0;
  double diag11 = 0.0;
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double sigma3 = 0.0;
  std::vector<PairMembership> membership;

  double total() const { return diag11 + sigma0 + sigma1 + sigma2 + sigma3; }
};

/// Assigns every (l, l') pair, l <= l', of the expansion to its group.
inline std::vector<PairMembership> group_membership(const ExpansionStructure& s) {
  std::vector<PairMembership> out;
  const int n = static_cast<int>(s.q_seq.size());
  auto in_I = [&](int l) { return std::find(s.I.begin(), s.I.end(), l) != s.I.end(); };
  auto in_J = [&](int a, int b) { return std::find(s.J.begin(), s.J.end(), std::pair{a, b}) != s.J.end(); };
  for (int a = 0; a < n; ++a) {
    out.push_back({s.q_seq[a], s.q_seq[a], s.q_seq[a] == 1 ? ChaosGroup::diag11 : ChaosGroup::sigma0});
    for (int b = a + 1; b < n; ++b) {
      ChaosGroup g;
      if (b == a + 1 && in_I(a)) g = ChaosGroup::sigma3;
      else if (in_J(a, b)) g = ChaosGroup::sigma1;
      else if (s.q_seq[a] == 1 && s.m0 && b >= *s.m0) g = ChaosGroup::sigma2;
      else fail(ErrorKind::numeric, "pair outside every chaos group");
      out.push_back({s.q_seq[a], s.q_seq[b], g});
    }
  }
  return out;
}

/// Empirical chaos-group values at scale j for one filter. Diagonal terms are
/// centered by their own expectations; cross terms have mean zero.
inline ChaosDecomposition sigma_decomposition(const ChaosComponents& comp, const HermiteExpansion& e,
                                              const SpectralModel& model, const WaveletFilterBank& bank, int j,
                                              int filter = 0) {
  const auto s = structure(e);
  ChaosDecomposition d;
  d.j = j;
  d.membership = group_membership(s);
  const auto A = tap_autocorrelation(bank.effective_taps(j, filter));
  const auto rho = model.autocovariance_sequence(A.size());
  auto W = [&](int q) -> const std::vector<double>& { return comp.at(q).at(j).W.at(filter); };
  for (const auto& m : d.membership) {
    const double a = e.coeff(m.q) / factorial(m.q);
    const double b = e.coeff(m.q2) / factorial(m.q2);
    double v;
    if (m.q == m.q2) v = a * a * (mean_square(W(m.q)) - chaos_energy(A, rho, m.q));
    else v = 2.0 * a * b * mean_product(W(m.q), W(m.q2));
    switch (m.group) {
      case ChaosGroup::diag11: d.diag11 += v; break;
      case ChaosGroup::sigma0: d.sigma0 += v; break;
      case ChaosGroup::sigma1: d.sigma1 += v; break;
      case ChaosGroup::sigma2: d.sigma2 += v; break;
      case ChaosGroup::sigma3: d.sigma3 += v; break;
    }
  }
  return d;
}

}  // namespace lrdscal
