#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lrdscal/error.hpp"
#include "lrdscal/quadrature.hpp"

namespace lrdscal {

using json = nlohmann::json;

inline double factorial(int q) {
  double f = 1.0;
  for (int i = 2; i <= q; ++i) f *= i;
  return f;
}

/// Probabilists' Hermite polynomial H_q(x).
inline double hermite_eval(int q, double x) {
  if (q < 0) fail(ErrorKind::domain, "hermite_eval: negative degree");
  if (q == 0) return 1.0;
  double h0 = 1.0, h1 = x;
  for (int k = 1; k < q; ++k) {
    const double h2 = x * h1 - k * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

/// Fills out[0..qmax] with H_0(x)..H_qmax(x).
inline void hermite_all(int qmax, double x, double* out) {
  out[0] = 1.0;
  if (qmax >= 1) out[1] = x;
  for (int k = 1; k < qmax; ++k) out[k + 1] = x * out[k] - k * out[k - 1];
}

struct HermiteTerm {
  int q = 1;
  double c = 0.0;
  bool operator==(const HermiteTerm&) const = default;
};

/// G(x) = sum over entries of (c_q / q!) H_q(x), c_q = E[G(X) H_q(X)].
struct HermiteExpansion {
  std::vector<HermiteTerm> entries;
  int qmax = 0;
  double tail_energy = 0.0;
  /// True when the expansion is known to be exactly finite (polynomial G);
  /// coefficient lists supplied by the caller are taken at face value.
  bool finite = true;

  int rank() const {
    if (entries.empty()) fail(ErrorKind::invalid_input, "empty Hermite expansion");
    return entries.front().q;
  }

  double coeff(int q) const {
    for (const auto& e : entries)
      if (e.q == q) return e.c;
    return 0.0;
  }

  std::vector<int> q_values() const {
    std::vector<int> v;
    for (const auto& e : entries) v.push_back(e.q);
    return v;
  }

  int max_q() const { return entries.empty() ? 0 : entries.back().q; }

  /// sum c_q^2 / q!, the variance carried by the stored terms.
  double variance() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.c * e.c / factorial(e.q);
    return s;
  }

  json to_json() const {
    json c = json::array();
    for (const auto& e : entries) c.push_back(json::array({e.q, e.c}));
    return json{{"coeffs", c}, {"qmax", qmax}};
  }

  bool operator==(const HermiteExpansion&) const = default;
};

/// Builds an expansion from explicit (q, c) pairs; zero coefficients are dropped.
inline HermiteExpansion from_coefficients(std::vector<HermiteTerm> terms, bool finite = true) {
  std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.q < b.q; });
  HermiteExpansion e;
  e.finite = finite;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].q < 0) fail(ErrorKind::invalid_input, "Hermite degree must be non-negative");
    if (i > 0 && terms[i].q == terms[i - 1].q) fail(ErrorKind::invalid_input, "duplicate Hermite degree");
    if (!std::isfinite(terms[i].c)) fail(ErrorKind::invalid_input, "non-finite Hermite coefficient");
    if (terms[i].q == 0 && terms[i].c != 0.0)
      fail(ErrorKind::invalid_input, "G must be centered: coefficient c_0 must vanish");
    if (terms[i].c != 0.0) e.entries.push_back(terms[i]);
  }
  if (e.entries.empty()) fail(ErrorKind::invalid_input, "Hermite expansion has no nonzero coefficient");
  e.qmax = e.entries.back().q;
  return e;
}

/// Parses the "1:3,3:6" shorthand.
inline HermiteExpansion parse_coeffs(const std::string& text) {
  std::vector<HermiteTerm> terms;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, comma - start);
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) fail(ErrorKind::invalid_input, "coefficient '" + item + "' is not of the form q:c");
    char* end = nullptr;
    const long q = std::strtol(item.c_str(), &end, 10);
    if (end != item.c_str() + colon) fail(ErrorKind::invalid_input, "bad degree in '" + item + "'");
    const std::string cs = item.substr(colon + 1);
    const double c = std::strtod(cs.c_str(), &end);
    if (cs.empty() || *end != '\0') fail(ErrorKind::invalid_input, "bad coefficient in '" + item + "'");
    terms.push_back({static_cast<int>(q), c});
    start = comma + 1;
  }
  return from_coefficients(std::move(terms));
}

inline HermiteExpansion expansion_from_json(const json& j) {
  try {
    std::vector<HermiteTerm> terms;
    for (const auto& p : j.at("coeffs")) terms.push_back({p.at(0).get<int>(), p.at(1).get<double>()});
    auto e = from_coefficients(std::move(terms));
    e.qmax = std::max(e.qmax, j.value("qmax", e.qmax));
    return e;
  } catch (const json::exception& ex) {
    fail(ErrorKind::invalid_input, std::string("expansion JSON: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Expansion of a function by quadrature
// ---------------------------------------------------------------------------

/// A transform G given by name. Linear combinations use '+'/'-' and an
/// optional "c*" prefix: "2*hermite:1+hermite:4", "power:3-3*hermite:1".
struct GFunction {
  std::function<double(double)> eval;
  bool smooth = true;   // Gauss-Hermite converges spectrally
  bool finite = true;   // polynomial, so the expansion terminates
  std::string text;
};

inline GFunction parse_g(const std::string& text) {
  if (text.empty()) fail(ErrorKind::invalid_input, "empty G specification");
  std::vector<std::pair<double, std::string>> terms;
  std::size_t i = 0;
  while (i < text.size()) {
    double sign = 1.0;
    if (text[i] == '+' || text[i] == '-') sign = text[i++] == '-' ? -1.0 : 1.0;
    std::size_t j = i;
    auto splits = [&](std::size_t k) {
      if (text[k] == '+') return true;
      if (text[k] != '-' || k == i) return false;
      if (k >= 3 && text.compare(k - 3, 12, "abs-centered") == 0) return false;
      return text[k - 1] != 'e' && text[k - 1] != '*' && text[k - 1] != ':';
    };
    while (j < text.size() && !splits(j)) ++j;
    std::string item = text.substr(i, j - i);
    double coef = sign;
    if (auto star = item.find('*'); star != std::string::npos) {
      char* end = nullptr;
      const std::string cs = item.substr(0, star);
      coef *= std::strtod(cs.c_str(), &end);
      if (cs.empty() || *end != '\0') fail(ErrorKind::invalid_input, "bad coefficient in '" + item + "'");
      item = item.substr(star + 1);
    }
    terms.emplace_back(coef, item);
    i = j;
  }

  GFunction g;
  g.text = text;
  std::vector<std::pair<double, std::function<double(double)>>> parts;
  for (const auto& [coef, name] : terms) {
    const auto colon = name.find(':');
    const std::string head = name.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : name.substr(colon + 1);
    auto int_arg = [&](int lo) {
      char* end = nullptr;
      const long v = std::strtol(arg.c_str(), &end, 10);
      if (arg.empty() || *end != '\0' || v < lo || v > 200)
        fail(ErrorKind::invalid_input, "bad argument in '" + name + "'");
      return static_cast<int>(v);
    };
    if (head == "hermite") {
      const int q = int_arg(1);
      parts.emplace_back(coef, [q](double x) { return hermite_eval(q, x); });
    } else if (head == "power") {
      const int p = int_arg(1);
      parts.emplace_back(coef, [p](double x) { return std::pow(x, p); });
    } else if (head == "abs-centered" && arg.empty()) {
      parts.emplace_back(coef, [](double x) { return std::abs(x) - std::sqrt(2.0 / std::numbers::pi); });
      g.smooth = g.finite = false;
    } else if (head == "sign" && arg.empty()) {
      parts.emplace_back(coef, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
      g.smooth = g.finite = false;
    } else {
      fail(ErrorKind::invalid_input, "unknown G builtin '" + name + "'");
    }
  }
  g.eval = [parts](double x) {
    double s = 0.0;
    for (const auto& [c, f] : parts) s += c * f(x);
    return s;
  };
  return g;
}

namespace detail {

/// Moments E[G H_q], q = 0..qmax, and E[G^2] under a weighted rule.
struct Moments {
  std::vector<double> c;
  double second = 0.0;
};

inline Moments moments_on_rule(const std::function<double(double)>& g, int qmax, const std::vector<double>& x,
                               const std::vector<double>& w) {
  Moments m;
  m.c.assign(qmax + 1, 0.0);
  std::vector<double> h(qmax + 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double gv = g(x[i]);
    if (!std::isfinite(gv)) fail(ErrorKind::invalid_input, "G is not finite on the quadrature grid");
    hermite_all(qmax, x[i], h.data());
    for (int q = 0; q <= qmax; ++q) m.c[q] += w[i] * gv * h[q];
    m.second += w[i] * gv * gv;
  }
  return m;
}

/// Composite Gauss-Legendre against the normal density, with panels that
/// never straddle 0 (where the non-smooth builtins have their kink).
inline Moments moments_composite(const std::function<double(double)>& g, int qmax, int order) {
  const double L = std::max(14.0, 2.0 * std::sqrt(static_cast<double>(qmax)) + 14.0);
  const int panels = static_cast<int>(std::ceil(L / 0.5));
  const quad::Rule& r = quad::legendre_cached(order);
  std::vector<double> x, w;
  for (int side : {-1, 1}) {
    for (int p = 0; p < panels; ++p) {
      const double a = 0.5 * p, b = 0.5 * (p + 1);
      for (std::size_t k = 0; k < r.nodes.size(); ++k) {
        const double u = 0.5 * (a + b) + 0.5 * (b - a) * r.nodes[k];
        x.push_back(side * u);
        w.push_back(0.5 * (b - a) * r.weights[k] * std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi));
      }
    }
  }
  return moments_on_rule(g, qmax, x, w);
}

}  // namespace detail

/// c_q for q = 1..qmax by quadrature against the standard normal law.
/// `nodes` = 0 selects max(4 qmax, 64).
inline HermiteExpansion expand(const GFunction& g, int qmax, int nodes = 0) {
  if (qmax < 1) fail(ErrorKind::invalid_config, "qmax must be >= 1");
  if (nodes == 0) nodes = std::max(4 * qmax, 64);
  if (nodes < 4 * qmax) fail(ErrorKind::invalid_config, "quadrature nodes must be >= 4*qmax");

  detail::Moments m;
  if (g.smooth) {
    const quad::Rule r = quad::gauss_hermite_normal(nodes);
    m = detail::moments_on_rule(g.eval, qmax, r.nodes, r.weights);
  } else {
    m = detail::moments_composite(g.eval, qmax, 24);
    const detail::Moments fine = detail::moments_composite(g.eval, qmax, 48);
    double diff = std::abs(fine.second - m.second);
    for (int q = 0; q <= qmax; ++q) diff = std::max(diff, std::abs(fine.c[q] - m.c[q]));
    if (diff > 1e-7 * std::max(1.0, std::sqrt(fine.second)))
      throw NumericError("Hermite coefficients did not converge under node doubling", diff);
    m = fine;
  }

  if (!std::isfinite(m.second)) fail(ErrorKind::invalid_input, "E[G^2] is not finite");
  const double norm = std::sqrt(std::max(m.second, 0.0));
  if (std::abs(m.c[0]) > 1e-8 * std::max(1.0, norm))
    fail(ErrorKind::invalid_input, "G is not centered: E[G(X)] = " + std::to_string(m.c[0]));

  HermiteExpansion e;
  e.qmax = qmax;
  e.finite = g.finite;
  const double drop = 1e-10 * std::max(1.0, norm);
  for (int q = 1; q <= qmax; ++q)
    if (std::abs(m.c[q]) >= drop) e.entries.push_back({q, m.c[q]});
  if (e.entries.empty()) fail(ErrorKind::invalid_input, "G has no Hermite coefficient up to qmax");
  e.tail_energy = std::max(0.0, m.second - e.variance());
  if (g.finite && e.tail_energy < 1e-9 * std::max(1.0, m.second)) e.tail_energy = 0.0;
  return e;
}

inline HermiteExpansion expand(const std::string& gspec, int qmax, int nodes = 0) {
  return expand(parse_g(gspec), qmax, nodes);
}

// ---------------------------------------------------------------------------
// Combinatorial structure
// ---------------------------------------------------------------------------

/// Index sets over l = 0..|L|-1. I holds l with q_{l+1} = q_l + 1; J holds
/// pairs l1 < l2 with q_{l1} != 1 and q_{l2} - q_{l1} >= 2. ell0 = min I
/// (absent means infinity), m0 = min{l : q_l >= 3}.
struct ExpansionStructure {
  std::vector<int> q_seq;
  std::vector<int> I;
  std::vector<std::pair<int, int>> J;
  std::optional<int> ell0;
  std::optional<int> m0;
  int q0 = 0;
  int q0_star = 0;

  int q(int ell) const { return q_seq.at(ell); }

  /// Display form: sets rendered by their q-values.
  json to_json() const {
    json I_q = json::array(), J_q = json::array(), I_idx = json::array(), J_idx = json::array();
    for (int l : I) {
      I_q.push_back(q_seq[l]);
      I_idx.push_back(l);
    }
    for (auto [a, b] : J) {
      J_q.push_back(json::array({q_seq[a], q_seq[b]}));
      J_idx.push_back(json::array({a, b}));
    }
    json out{{"q_seq", q_seq}, {"I", I_q}, {"J", J_q}, {"q0", q0}, {"q0_star", q0_star},
             {"indices", {{"I", I_idx}, {"J", J_idx}}}};
    out["ell0"] = ell0 ? json(q_seq[*ell0]) : json("inf");
    out["m0"] = m0 ? json(q_seq[*m0]) : json(nullptr);
    out["indices"]["ell0"] = ell0 ? json(*ell0) : json("inf");
    out["indices"]["m0"] = m0 ? json(*m0) : json(nullptr);
    return out;
  }
};

inline ExpansionStructure structure(const HermiteExpansion& e) {
  if (e.entries.empty()) fail(ErrorKind::invalid_input, "structure: empty expansion");
  ExpansionStructure s;
  s.q_seq = e.q_values();
  const int n = static_cast<int>(s.q_seq.size());
  for (int l = 0; l + 1 < n; ++l)
    if (s.q_seq[l + 1] - s.q_seq[l] == 1) s.I.push_back(l);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (s.q_seq[a] != 1 && s.q_seq[b] - s.q_seq[a] >= 2) s.J.emplace_back(a, b);
  if (!s.I.empty()) s.ell0 = s.I.front();
  for (int l = 0; l < n; ++l)
    if (s.q_seq[l] >= 3) {
      s.m0 = l;
      break;
    }
  s.q0 = s.q_seq.front();
  s.q0_star = (s.q0 == 1 && n > 1) ? s.q_seq[1] : s.q0;
  return s;
}

// ---------------------------------------------------------------------------
// Coefficient decay and evaluation
// ---------------------------------------------------------------------------

struct DecayReport {
  double lambda = std::numeric_limits<double>::infinity();
  bool satisfied = true;
};

/// Least-squares fit of log(|c_q| / (q!)^d) = a - lambda q.
inline DecayReport decay_check(const HermiteExpansion& e, double d) {
  DecayReport r;
  if (e.entries.size() < 3) return r;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(e.entries.size());
  for (const auto& t : e.entries) {
    const double x = t.q;
    const double y = std::log(std::abs(t.c)) - d * std::lgamma(t.q + 1.0);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  r.lambda = -slope;
  r.satisfied = r.lambda > 0.0 || e.finite;
  return r;
}

/// Pointwise sum_l (c_l / q_l!) H_{q_l}(x_t).
inline std::vector<double> apply_expansion(const HermiteExpansion& e, std::span<const double> x) {
  if (x.empty()) fail(ErrorKind::invalid_input, "apply_expansion: empty path");
  const int qm = e.max_q();
  std::vector<double> scale(e.entries.size());
  for (std::size_t l = 0; l < e.entries.size(); ++l) scale[l] = e.entries[l].c / factorial(e.entries[l].q);
  std::vector<double> out(x.size());
  std::vector<double> h(qm + 1);
  for (std::size_t t = 0; t < x.size(); ++t) {
    hermite_all(qm, x[t], h.data());
    double s = 0.0;
    for (std::size_t l = 0; l < e.entries.size(); ++l) s += scale[l] * h[e.entries[l].q];
    out[t] = s;
  }
  return out;
}

/// H_q(x_t) for one degree; the chaos components are filtered from these.
inline std::vector<double> hermite_series(int q, std::span<const double> x) {
  std::vector<double> out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) out[t] = hermite_eval(q, x[t]);
  return out;
}

}  // namespace lrdscal
