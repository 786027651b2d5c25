#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrdscal/error.hpp"

namespace lrdscal {

using json = nlohmann::json;

/// Orthonormal two-channel pair: `low` sums to sqrt(2), `high` is its mirror.
struct QmfPair {
  std::vector<double> low;
  std::vector<double> high;
  bool operator==(const QmfPair&) const = default;
};

inline QmfPair haar_qmf() {
  const double s = 1.0 / std::sqrt(2.0);
  return {{s, s}, {s, -s}};
}

/// Daubechies pair with two vanishing moments.
inline QmfPair db2_qmf() {
  const double r3 = std::sqrt(3.0), n = 4.0 * std::sqrt(2.0);
  std::vector<double> g{(1 + r3) / n, (3 + r3) / n, (3 - r3) / n, (1 - r3) / n};
  return {g, {g[3], -g[2], g[1], -g[0]}};
}

/// Checks orthonormality of the low-pass under even shifts and the mirror
/// relation high[k] = (-1)^k low[L-1-k].
inline bool is_qmf(const QmfPair& p, double tol = 1e-10) {
  const auto& g = p.low;
  const std::size_t L = g.size();
  if (L < 2 || L % 2 != 0 || p.high.size() != L) return false;
  for (std::size_t m = 0; m < L; m += 2) {
    double s = 0.0;
    for (std::size_t k = 0; k + m < L; ++k) s += g[k] * g[k + m];
    if (std::abs(s - (m == 0 ? 1.0 : 0.0)) > tol) return false;
  }
  for (std::size_t k = 0; k < L; ++k) {
    const double want = (k % 2 == 0 ? 1.0 : -1.0) * g[L - 1 - k];
    if (std::abs(p.high[k] - want) > tol) return false;
  }
  return true;
}

/// Sum_t h(t) e^{-i lambda t}.
inline std::complex<double> dtft(std::span<const double> h, double lambda) {
  std::complex<double> s = 0.0;
  for (std::size_t t = 0; t < h.size(); ++t) s += h[t] * std::polar(1.0, -lambda * static_cast<double>(t));
  return s;
}

/// Number of leading moments sum_t h(t) t^m that vanish, m = 0, 1, ...
inline int vanishing_moments(std::span<const double> h, double tol = 1e-9) {
  double abs_sum = 0.0;
  for (double v : h) abs_sum += std::abs(v);
  const double T = std::max<double>(1.0, static_cast<double>(h.size()) - 1.0);
  int M = 0;
  for (int m = 0; m < 32; ++m) {
    double s = 0.0;
    for (std::size_t t = 0; t < h.size(); ++t) s += h[t] * std::pow(static_cast<double>(t), m);
    if (std::abs(s) > tol * abs_sum * std::pow(T, m)) break;
    ++M;
  }
  return M;
}

/// Number of wavelet coefficients at scale j that only use samples inside a
/// record of length N, for a mother filter of support length T.
inline long long coefficient_count(long long N, long long T, int j) {
  if (N <= 0 || T <= 0 || j < 0) fail(ErrorKind::domain, "coefficient_count: arguments must be positive");
  const long long g = 1LL << j;
  const long long n = (N - T + 1 >= 0 ? (N - T + 1) / g : -1) - T + 1;
  if (n <= 0) {
    fail(ErrorKind::insufficient_data, "no interior wavelet coefficient at scale " + std::to_string(j) +
                                           "; need N >= " + std::to_string(T * g + T - 1));
  }
  return n;
}

/// K-fold running sum with zero initial conditions (inverse of K-fold differencing).
inline std::vector<double> apply_delta_inv_K(std::span<const double> y, int K, int M) {
  if (K < 0) fail(ErrorKind::domain, "apply_delta_inv_K: K must be non-negative");
  if (K >= 1 && M <= K)
    fail(ErrorKind::invalid_config, "integration order K=" + std::to_string(K) + " needs at least " +
                                        std::to_string(K + 1) + " vanishing moments, bank has " + std::to_string(M));
  std::vector<double> out(y.begin(), y.end());
  for (int r = 0; r < K; ++r) {
    double acc = 0.0;
    for (double& v : out) v = (acc += v);
  }
  return out;
}

struct SmoothnessReport {
  double C_fit = 0.0;
  bool holds = false;
  std::vector<double> C_per_level;
};

/// Per-scale filters h_j, j = 1..levels, from the dyadic cascade
/// H_j(z) = G(z) G(z^2) ... G(z^{2^{j-2}}) H(z^{2^{j-1}}), one set per filter
/// channel. Decimation is gamma_j = 2^j. Immutable once built.
class WaveletFilterBank {
 public:
  static WaveletFilterBank build_cascade(const QmfPair& qmf, int levels, int K = 0, int filters = 1) {
    if (!is_qmf(qmf)) fail(ErrorKind::invalid_input, "filter pair fails the quadrature-mirror check");
    WaveletFilterBank b;
    b.family_ = qmf == haar_qmf() ? "haar" : "cascade";
    b.qmf_ = qmf;
    b.alpha_ = b.family_ == "haar" ? 0.75 : 1.0;
    b.T_ = static_cast<int>(qmf.low.size()) - 1;
    b.init(levels, K, filters, [&](int j, const std::vector<double>& prev) {
      if (j == 1) return qmf.high;
      std::vector<double> up(2 * prev.size() - 1, 0.0);
      for (std::size_t i = 0; i < prev.size(); ++i) up[2 * i] = prev[i];
      std::vector<double> out(qmf.low.size() + up.size() - 1, 0.0);
      for (std::size_t a = 0; a < qmf.low.size(); ++a)
        for (std::size_t c = 0; c < up.size(); ++c) out[a + c] += qmf.low[a] * up[c];
      return out;
    });
    return b;
  }

  static WaveletFilterBank build_haar(int levels, int K = 0, int filters = 1) {
    return build_cascade(haar_qmf(), levels, K, filters);
  }

  /// Bank with the same explicit taps at every level (diagnostic use; no
  /// cascade limit is available).
  static WaveletFilterBank from_taps(const std::vector<double>& taps, int levels) {
    if (taps.empty()) fail(ErrorKind::invalid_input, "from_taps: empty filter");
    WaveletFilterBank b;
    b.family_ = "explicit";
    b.alpha_ = 0.75;
    b.T_ = std::max(1, static_cast<int>(taps.size()) - 1);
    b.init(levels, 0, 1, [&](int, const std::vector<double>&) { return taps; });
    return b;
  }

  static WaveletFilterBank from_name(const std::string& name, int levels, int K = 0, int filters = 1) {
    if (name == "haar") return build_haar(levels, K, filters);
    if (name == "db2") return build_cascade(db2_qmf(), levels, K, filters);
    fail(ErrorKind::invalid_input, "unknown filter '" + name + "' (expected haar or db2)");
  }

  static WaveletFilterBank from_json(const json& j) {
    try {
      const int levels = j.at("levels").get<int>();
      const int K = j.value("K", 0);
      const int m = j.value("filters", 1);
      const std::string fam = j.at("family").get<std::string>();
      if (fam == "haar") return build_haar(levels, K, m);
      if (fam == "db2") return build_cascade(db2_qmf(), levels, K, m);
      if (fam == "cascade") {
        const auto& q = j.at("qmf");
        return build_cascade({q.at(0).get<std::vector<double>>(), q.at(1).get<std::vector<double>>()}, levels, K, m);
      }
      fail(ErrorKind::invalid_input, "unknown bank family '" + fam + "'");
    } catch (const json::exception& e) {
      fail(ErrorKind::invalid_input, std::string("bank JSON: ") + e.what());
    }
  }

  json to_json() const {
    json j{{"family", family_}, {"levels", levels()}, {"K", K_}};
    if (!qmf_.low.empty()) j["qmf"] = json::array({qmf_.low, qmf_.high});
    if (filters() > 1) j["filters"] = filters();
    return j;
  }

  const std::string& family() const { return family_; }
  int levels() const { return static_cast<int>(raw_.front().size()); }
  int filters() const { return static_cast<int>(raw_.size()); }
  int K() const { return K_; }
  int M() const { return M_; }
  int support() const { return T_; }
  double alpha_smooth() const { return alpha_; }
  double gamma(int j) const { return std::ldexp(1.0, j); }
  long long gamma_int(int j) const { return 1LL << j; }

  /// Raw taps h_j (level j in 1..levels).
  const std::vector<double>& taps(int j, int filter = 0) const { return raw_.at(filter).at(level_index(j)); }

  /// Taps of the filter applied to Delta^K Y, i.e. h_j folded with the K-fold
  /// running sum. Finite support because the first K moments vanish.
  const std::vector<double>& effective_taps(int j, int filter = 0) const {
    return eff_.at(filter).at(level_index(j));
  }

  /// Index of the first coefficient whose window lies inside the record.
  long long first_index(int j) const {
    const long long L = static_cast<long long>(taps(j).size());
    return (L + gamma_int(j) - 1) / gamma_int(j);
  }

  std::complex<double> transfer(int j, double lambda, int filter = 0) const { return dtft(taps(j, filter), lambda); }

  /// Limit of gamma_j^{-1/2} hhat_j(lambda / gamma_j). Haar uses the closed
  /// form i e^{-i lambda/2} sin^2(lambda/4) / (lambda/4).
  std::complex<double> limit_transfer(double lambda) const {
    if (family_ != "haar") return limit_transfer_product(lambda);
    const double x = 0.25 * lambda;
    const double mag = std::abs(x) < 1e-300 ? 0.0 : std::sin(x) * std::sin(x) / x;
    return std::complex<double>(0.0, mag) * std::complex<double>(std::cos(0.5 * lambda), -std::sin(0.5 * lambda));
  }

  /// hhat_inf(lambda) = (H(lambda/2)/sqrt2) prod_{k>=2} G(lambda/2^k)/sqrt2.
  std::complex<double> limit_transfer_product(double lambda) const {
    if (qmf_.low.empty()) fail(ErrorKind::dependency, "limit transfer needs a cascade bank");
    const double r2 = std::sqrt(2.0);
    std::complex<double> v = dtft(qmf_.high, lambda / 2.0) / r2;
    for (int k = 2; k < 80; ++k) {
      const double w = std::ldexp(lambda, -k);
      v *= dtft(qmf_.low, w) / r2;
      if (std::abs(w) < 1e-17) break;
    }
    return v;
  }

  /// Smallest C with |hhat_j(lambda)| <= C g^{1/2} |g lambda|^M / (1 + g|lambda|)^{alpha+M}
  /// on a lambda-grid, per level; holds when C stabilizes over the two finest levels.
  SmoothnessReport smoothness_check(double alpha) const {
    SmoothnessReport r;
    if (M_ == 0) {
      r.C_fit = std::numeric_limits<double>::infinity();
      return r;
    }
    constexpr int grid = 4000;
    for (int j = 1; j <= levels(); ++j) {
      const double g = gamma(j);
      double C = 0.0;
      for (int i = 1; i <= grid; ++i) {
        const double lam = std::numbers::pi * std::pow(10.0, -6.0 * (grid - i) / grid);
        const double bound = std::sqrt(g) * std::pow(g * lam, M_) / std::pow(1.0 + g * lam, alpha + M_);
        C = std::max(C, std::abs(transfer(j, lam)) / bound);
      }
      r.C_per_level.push_back(C);
    }
    r.C_fit = r.C_per_level.back();
    if (levels() >= 2) {
      const double a = r.C_per_level[levels() - 2], b = r.C_per_level[levels() - 1];
      r.holds = std::isfinite(b) && std::abs(b - a) <= 0.1 * std::max(a, b);
    }
    return r;
  }

 private:
  template <class Step>
  void init(int levels, int K, int filters, Step step) {
    if (levels < 1 || levels > 24) fail(ErrorKind::domain, "bank levels must lie in 1..24");
    if (filters < 1) fail(ErrorKind::domain, "bank needs at least one filter");
    if (K < 0) fail(ErrorKind::domain, "K must be non-negative");
    std::vector<std::vector<double>> one;
    std::vector<double> prev;
    for (int j = 1; j <= levels; ++j) {
      prev = step(j, prev);
      one.push_back(prev);
    }
    M_ = vanishing_moments(one.front());
    for (const auto& h : one) M_ = std::min(M_, vanishing_moments(h));
    if (K >= 1 && M_ <= K)
      fail(ErrorKind::invalid_config, "K=" + std::to_string(K) + " needs at least " + std::to_string(K + 1) +
                                          " vanishing moments, filter has " + std::to_string(M_));
    K_ = K;
    std::vector<std::vector<double>> eff;
    for (const auto& h : one) {
      std::vector<double> e = h;
      for (int r = 0; r < K; ++r) {
        double acc = 0.0;
        for (double& v : e) v = (acc += v);
        e.pop_back();  // the final partial sum is the vanishing moment
      }
      eff.push_back(std::move(e));
    }
    raw_.assign(filters, one);
    eff_.assign(filters, eff);
  }

  std::size_t level_index(int j) const {
    if (j < 1 || j > levels()) fail(ErrorKind::domain, "scale index " + std::to_string(j) + " outside the bank");
    return static_cast<std::size_t>(j - 1);
  }

  std::string family_;
  QmfPair qmf_;
  std::vector<std::vector<std::vector<double>>> raw_;
  std::vector<std::vector<std::vector<double>>> eff_;
  int K_ = 0;
  int M_ = 0;
  int T_ = 1;
  double alpha_ = 0.75;
};

}  // namespace lrdscal
