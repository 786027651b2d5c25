#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "lrdscal/error.hpp"
#include "lrdscal/hermite.hpp"
#include "lrdscal/rational.hpp"
#include "lrdscal/spectral_model.hpp"

namespace lrdscal {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Critical growth exponents
// ---------------------------------------------------------------------------

/// nu = 2 q_{l0} + 1 - 2 q0, or nothing (infinity) when I is empty.
inline std::optional<Rational> nu(const ExpansionStructure& s) {
  if (!s.ell0) return std::nullopt;
  return Rational(2 * s.q(*s.ell0) + 1 - 2 * s.q0);
}

struct Nu123 {
  Rational nu1;
  Rational nu2;
  std::optional<Rational> nu3;  // empty means infinity
};

inline Nu123 nu123(int q1, const Rational& d) {
  if (q1 < 3) fail(ErrorKind::domain, "nu123: q1 must be >= 3");
  const Rational one(1), a = (one - Rational(2) * d) * Rational(q1 - 1);
  if (a >= one) fail(ErrorKind::domain, "nu123: q1 must satisfy q1 < 1/(1-2d) + 1");
  if (Rational(2) * d == Rational(1, 2)) fail(ErrorKind::domain, "nu123: nu2 undefined at d = 1/4");
  Nu123 r;
  r.nu1 = a / (one - a);
  r.nu2 = a / (Rational(2) * d - Rational(1, 2));
  if (q1 > 3) r.nu3 = Rational(q1 - 1, q1 - 3);
  return r;
}

inline Rational q1_star(const Rational& d) {
  if (!(d > Rational(0) && d < Rational(1, 2))) fail(ErrorKind::domain, "q1_star: d must lie in (0, 1/2)");
  return Rational(2) + Rational(1) / (Rational(2) * (Rational(1) - Rational(2) * d));
}

// ---------------------------------------------------------------------------
// Growth specification and report
// ---------------------------------------------------------------------------

/// n_j ~ C gamma_j^rho.
struct GrowthSpec {
  Rational rho{1};

  /// Parses "n~g^RHO" (RHO exact: "1", "0.5", "3/2").
  static GrowthSpec parse(const std::string& text) {
    const std::string prefix = "n~g^";
    if (text.rfind(prefix, 0) != 0) fail(ErrorKind::invalid_input, "growth must look like n~g^RHO, got '" + text + "'");
    GrowthSpec g{parse_rational(text.substr(prefix.size()))};
    if (g.rho <= Rational(0)) fail(ErrorKind::invalid_input, "growth exponent must be positive");
    return g;
  }

  /// Least-squares exponent of n against gamma for explicit sequences,
  /// rounded to a nearby fraction.
  static GrowthSpec from_sequences(const std::vector<double>& n, const std::vector<double>& gamma) {
    if (n.size() != gamma.size() || n.size() < 2) fail(ErrorKind::invalid_input, "growth sequences need >= 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const double x = std::log(gamma[i]), y = std::log(n[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double k = static_cast<double>(n.size());
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    if (!(slope > 0.0)) fail(ErrorKind::invalid_input, "growth sequences do not increase together");
    return GrowthSpec{rational_from_double(slope, 1000)};
  }
};

enum class LimitKind { gaussian, rosenblatt, hermite, none };

struct LimitFamily {
  LimitKind kind = LimitKind::none;
  int order = 0;  // chaos order of the Hermite limit; 1 Gaussian, 2 Rosenblatt

  std::string name() const {
    switch (kind) {
      case LimitKind::gaussian: return "gaussian";
      case LimitKind::rosenblatt: return "rosenblatt";
      case LimitKind::hermite: return "hermite(" + std::to_string(order) + ")";
      case LimitKind::none: return "none";
    }
    return "none";
  }
};

/// Which multiplicative constant the limit carries.
enum class ConstantKind { gamma_matrix, lq_diag, lq_cross_consecutive, lq_cross_linear, none };

struct RegimeReport {
  std::string theorem;  // "3.1", "3.2", "3.3"
  char case_id = '-';
  LimitFamily family;
  std::optional<Rational> n_exponent;
  std::optional<Rational> gamma_exponent;
  ConstantKind constant = ConstantKind::none;
  int constant_q = 0;  // index of L_q used by the constant
  std::string constant_descriptor;
  std::string region;
  std::vector<std::string> conditions;
  std::vector<std::string> boundary_warnings;
  std::vector<std::pair<std::string, std::optional<Rational>>> criticals;  // empty optional = infinity
  std::tuple<int, int, int> leading_term{0, 0, 0};
  Rational d;
  Rational rho;
  int K = 0;

  bool on_boundary() const { return !boundary_warnings.empty(); }

  json to_json() const {
    auto rat = [](const std::optional<Rational>& r) -> json {
      if (!r) return "inf";
      return json{{"exact", to_string(*r)}, {"value", to_double(*r)}};
    };
    json crit = json::object();
    for (const auto& [k, v] : criticals) crit[k] = rat(v);
    json j{{"theorem", theorem},
           {"case", case_id == '-' ? json(nullptr) : json(std::string(1, case_id))},
           {"limit_family", family.name()},
           {"region", region},
           {"conditions", conditions},
           {"boundary_warnings", boundary_warnings},
           {"criticals", crit},
           {"d", to_string(d)},
           {"K", K},
           {"rho", to_string(rho)},
           {"constant", constant_descriptor}};
    j["n_exponent"] = n_exponent ? rat(n_exponent) : json(nullptr);
    j["gamma_exponent"] = gamma_exponent ? rat(gamma_exponent) : json(nullptr);
    if (!on_boundary()) {
      auto [a, b, c] = leading_term;
      j["leading_term"] = json::array({a, b, c});
    }
    return j;
  }

  std::string table() const {
    std::ostringstream os;
    os << "theorem        " << theorem << (case_id == '-' ? std::string() : std::string("(") + case_id + ")") << "\n";
    os << "region         " << region << "\n";
    os << "limit family   " << family.name() << "\n";
    if (n_exponent) os << "n exponent     " << to_string(*n_exponent) << "\n";
    if (gamma_exponent) os << "gamma exponent " << to_string(*gamma_exponent) << "\n";
    for (const auto& [k, v] : criticals) os << k << std::string(15 - std::min<std::size_t>(k.size(), 14), ' ')
                                          << (v ? to_string(*v) : std::string("inf")) << "\n";
    if (!constant_descriptor.empty()) os << "constant       " << constant_descriptor << "\n";
    for (const auto& w : boundary_warnings) os << "warning        " << w << "\n";
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

namespace detail {

inline std::string qstr(int q) { return std::to_string(q); }

inline void require_long_memory(int q, const Rational& d, const std::string& what, ErrorKind kind,
                                std::vector<std::string>& cond) {
  const Rational bound = Rational(1) / (Rational(1) - Rational(2) * d);
  if (!is_long_memory_exact(q, d))
    fail(kind, what + " = " + qstr(q) + " >= 1/(1-2d) = " + to_string(bound) + " (" +
                   std::to_string(to_double(bound)) + ")");
  cond.push_back(what + " = " + qstr(q) + " < 1/(1-2d) = " + to_string(bound));
}

}  // namespace detail

/// Selects the governing limit theorem and case for given expansion
/// structure, memory parameter, integration order and growth of n_j versus
/// gamma_j. `M`, when given, is checked against the moment condition.
inline RegimeReport classify(const ExpansionStructure& s, const Rational& d, int K, const GrowthSpec& growth,
                             std::optional<int> M = std::nullopt) {
  if (!(d > Rational(0) && d < Rational(1, 2))) fail(ErrorKind::domain, "d must lie in (0, 1/2)");
  if (K < 0) fail(ErrorKind::domain, "K must be non-negative");
  if (growth.rho <= Rational(0)) fail(ErrorKind::invalid_input, "growth exponent must be positive");
  RegimeReport r;
  r.d = d;
  r.K = K;
  r.rho = growth.rho;
  const Rational rho = growth.rho, one(1), two(2), Kr(K);
  auto del = [&](const Rational& q) { return delta_exact(q, d); };

  detail::require_long_memory(s.q0, d, "Hermite rank q0", ErrorKind::assumption_violated, r.conditions);
  if (M) {
    const Rational need = Kr + del(Rational(s.q0));
    if (Rational(*M) < need)
      fail(ErrorKind::assumption_violated, "vanishing moments M = " + std::to_string(*M) + " < K + delta(q0) = " +
                                               to_string(need));
    r.conditions.push_back("M = " + std::to_string(*M) + " >= K + delta(q0) = " + to_string(need));
  }

  auto boundary = [&](const std::string& name, const std::string& remark) {
    r.boundary_warnings.push_back("rho equals " + name + ": " + remark);
    r.family = {};
    r.region = "boundary " + name;
  };

  if (s.q0 >= 2) {
    r.theorem = "3.1";
    const auto nu_v = nu(s);
    r.criticals.emplace_back("nu", nu_v);
    if (nu_v) {
      const int ql = s.q(*s.ell0);
      detail::require_long_memory(ql + 1, d, "q_l0 + 1", ErrorKind::unsupported_regime, r.conditions);
    } else {
      r.conditions.push_back("I empty: nu = infinity");
    }
    if (nu_v && rho == *nu_v) {
      boundary("nu", "the scalogram is asymptotically a linear combination of a Rosenblatt and a Gaussian variable");
      return r;
    }
    if (!nu_v || rho < *nu_v) {
      r.case_id = 'a';
      r.family = {LimitKind::rosenblatt, 2};
      r.n_exponent = one - two * d;
      r.gamma_exponent = -two * (del(Rational(s.q0)) + Kr);
      r.constant = ConstantKind::lq_diag;
      r.constant_q = s.q0 - 1;
      r.constant_descriptor = "c_" + detail::qstr(s.q0) + "^2/" + detail::qstr(s.q0 - 1) + "! * f*(0)^" +
                              detail::qstr(s.q0) + " * L_" + detail::qstr(s.q0 - 1);
      r.region = nu_v ? "n_j << gamma_j^nu" : "any growth (nu infinite)";
      r.leading_term = {s.q0, s.q0, s.q0 - 1};
    } else {
      const int ql = s.q(*s.ell0);
      r.case_id = 'b';
      r.family = {LimitKind::gaussian, 1};
      r.n_exponent = (one - two * d) / two;
      r.gamma_exponent = -(del(Rational(ql)) + del(Rational(ql + 1)) + two * Kr);
      r.constant = ConstantKind::lq_cross_consecutive;
      r.constant_q = ql;
      r.constant_descriptor = "2*c_" + detail::qstr(ql) + "*c_" + detail::qstr(ql + 1) + "/" + detail::qstr(ql) +
                              "! * f*(0)^(" + detail::qstr(ql) + "+1/2) * L_" + detail::qstr(ql);
      r.region = "gamma_j^nu << n_j";
      r.leading_term = {ql, ql + 1, ql};
    }
    return r;
  }

  // Hermite rank one.
  if (s.q_seq.size() == 1) {
    // Linear G: only the (1,1,0) term exists.
    r.theorem = "3.2";
    r.case_id = 'a';
    r.family = {LimitKind::gaussian, 1};
    r.n_exponent = one / two;
    r.gamma_exponent = -(two * d + two * Kr);
    r.constant = ConstantKind::gamma_matrix;
    r.constant_descriptor = "c_1^2 * Gamma";
    r.region = "any growth (single linear term)";
    r.conditions.push_back("G linear: no higher chaos");
    r.leading_term = {1, 1, 0};
    return r;
  }
  if (s.ell0) {
    fail(ErrorKind::unsupported_regime,
         "Hermite rank 1 with consecutive degrees (1, 2) is outside the covered theorem families");
  }
  const int q1 = s.q_seq[1];
  detail::require_long_memory(q1, d, "q1", ErrorKind::assumption_violated, r.conditions);
  const Rational qs = q1_star(d);
  const Nu123 v = nu123(q1, d);
  r.criticals.emplace_back("q1*", qs);
  r.criticals.emplace_back("nu1", v.nu1);
  r.criticals.emplace_back("nu2", v.nu2);
  r.criticals.emplace_back("nu3", v.nu3);

  auto gaussian_case = [&] {
    r.case_id = 'a';
    r.family = {LimitKind::gaussian, 1};
    r.n_exponent = one / two;
    r.gamma_exponent = -(two * d + two * Kr);
    r.constant = ConstantKind::gamma_matrix;
    r.constant_descriptor = "c_1^2 * Gamma";
    r.leading_term = {1, 1, 0};
  };
  auto rosenblatt_case = [&](char id) {
    r.case_id = id;
    r.family = {LimitKind::rosenblatt, 2};
    r.n_exponent = one - two * d;
    r.gamma_exponent = -two * (del(Rational(q1)) + Kr);
    r.constant = ConstantKind::lq_diag;
    r.constant_q = q1 - 1;
    r.constant_descriptor = "c_" + detail::qstr(q1) + "^2/" + detail::qstr(q1 - 1) + "! * f*(0)^" + detail::qstr(q1) +
                            " * L_" + detail::qstr(q1 - 1);
    r.leading_term = {q1, q1, q1 - 1};
  };

  if (Rational(q1) < qs) {
    r.theorem = "3.2";
    r.conditions.push_back("q1 = " + detail::qstr(q1) + " < q1* = " + to_string(qs));
    if (rho == v.nu1) {
      boundary("nu1", "two terms of the same order, one Hermite in L2 and one Gaussian in law");
      return r;
    }
    if (v.nu3 && rho == *v.nu3) {
      boundary("nu3", "the scalogram is asymptotically a linear combination of a Rosenblatt and a Hermite variable");
      return r;
    }
    if (rho < v.nu1) {
      gaussian_case();
      r.region = "n_j << gamma_j^nu1";
    } else if (!v.nu3 || rho < *v.nu3) {
      r.case_id = 'b';
      r.family = {LimitKind::hermite, q1 - 1};
      r.n_exponent = (one - two * del(Rational(q1 - 1))) / two;
      r.gamma_exponent = -(two * del(Rational(q1 + 1, 2)) + two * Kr);
      r.constant = ConstantKind::lq_cross_linear;
      r.constant_q = 1;
      r.constant_descriptor = "2*c_1*c_" + detail::qstr(q1) + "/" + detail::qstr(q1 - 1) + "! * f*(0)^(" +
                              detail::qstr(q1 + 1) + "/2) * L_1";
      r.region = v.nu3 ? "gamma_j^nu1 << n_j << gamma_j^nu3" : "gamma_j^nu1 << n_j (nu3 infinite)";
      r.leading_term = {1, q1, 1};
    } else {
      rosenblatt_case('c');
      r.region = "gamma_j^nu3 << n_j";
    }
    return r;
  }

  r.theorem = "3.3";
  r.conditions.push_back("q1 = " + detail::qstr(q1) + " >= q1* = " + to_string(qs));
  if (rho == v.nu2) {
    boundary("nu2", "two leading terms of the same order; no single limit");
    return r;
  }
  if (rho < v.nu2) {
    gaussian_case();
    r.region = "n_j << gamma_j^nu2";
  } else {
    rosenblatt_case('b');
    r.region = "gamma_j^nu2 << n_j";
  }
  return r;
}

/// Refuses expansions whose truncation leaves non-negligible energy.
inline void check_truncation(const HermiteExpansion& e) {
  const double total = e.variance() + e.tail_energy;
  if (e.tail_energy > 1e-6 * total)
    fail(ErrorKind::assumption_violated, "expansion truncated at qmax = " + std::to_string(e.qmax) +
                                             " leaves tail energy " + std::to_string(e.tail_energy) +
                                             " > 1e-6 E[G^2]");
}

// ---------------------------------------------------------------------------
// Bound exponents and dominance audit
// ---------------------------------------------------------------------------

struct BoundExponents {
  Rational alpha;
  Rational beta_q;
  Rational beta_q2;
  Rational betap;
  int eps = 0;        // eps(q + q' - 2p)
  int eps_prime = 0;  // eps(q')
};

inline Rational bound_alpha(int q, int q2, int p, const Rational& d) {
  if (p == 0) return Rational(1, 2);
  return std::min(Rational(1) - delta_plus_exact(Rational(q - p), d) - delta_plus_exact(Rational(q2 - p), d),
                  Rational(1, 2));
}

inline Rational bound_beta(int q, int p, const Rational& d) {
  return std::max(delta_plus_exact(Rational(p), d) + delta_plus_exact(Rational(q - p), d) - Rational(1, 2),
                  Rational(0));
}

inline Rational bound_betap(int q, int q2, int p, const Rational& d) {
  return std::max(Rational(2) * delta_plus_exact(Rational(p), d) + delta_plus_exact(Rational(q - p), d) +
                      delta_plus_exact(Rational(q2 - p), d) - Rational(1),
                  Rational(-1, 2));
}

/// 1 iff s (1 - 2d) = 1 for some s in 1..p.
inline int bound_eps(int p, const Rational& d) {
  for (int s = 1; s <= p; ++s)
    if (Rational(s) * (Rational(1) - Rational(2) * d) == Rational(1)) return 1;
  return 0;
}

/// prod (a_i!)^{1-2d}.
inline double Lambda_s(const std::vector<int>& a, double d) {
  double lg = 0.0;
  for (int v : a) lg += std::lgamma(v + 1.0);
  return std::exp((1.0 - 2.0 * d) * lg);
}

inline BoundExponents bound_exponents(int q, int q2, int p, const Rational& d) {
  if (q < 0 || q2 < 0 || p < 0 || p > std::min(q, q2))
    fail(ErrorKind::domain, "bound_exponents: need 0 <= p <= min(q, q')");
  BoundExponents b;
  b.alpha = bound_alpha(q, q2, p, d);
  b.beta_q = bound_beta(q, p, d);
  b.beta_q2 = bound_beta(q2, p, d);
  b.betap = bound_betap(q, q2, p, d);
  b.eps = bound_eps(q + q2 - 2 * p, d);
  b.eps_prime = bound_eps(q2, d);
  return b;
}

struct AuditRow {
  int q = 0, q2 = 0, p = 0;
  Rational exponent;  // total growth exponent in gamma_j with n_j = gamma_j^rho
};

struct DominanceAudit {
  std::vector<AuditRow> rows;  // sorted, largest exponent first
  std::tuple<int, int, int> expected{0, 0, 0};
  bool agrees = true;
  bool boundary = false;

  json to_json() const {
    json r = json::array();
    for (const auto& row : rows)
      r.push_back({{"q", row.q}, {"q2", row.q2}, {"p", row.p}, {"exponent", to_string(row.exponent)},
                   {"value", to_double(row.exponent)}});
    auto [a, b, c] = expected;
    return json{{"rows", r}, {"expected", json::array({a, b, c})}, {"agrees", agrees}, {"boundary", boundary}};
  }
};

/// Ranks the L2 bounds n^{-alpha} gamma^{2K + beta(q,p) + beta(q',p)} of all
/// (q, q', p) terms with n = gamma^rho, and compares the top with the
/// classifier's leading term. Ties count as agreement.
inline DominanceAudit dominance_audit(const HermiteExpansion& e, const Rational& d, int K, const GrowthSpec& growth) {
  const auto s = structure(e);
  const RegimeReport rep = classify(s, d, K, growth);
  DominanceAudit a;
  a.boundary = rep.on_boundary();
  a.expected = rep.leading_term;
  const auto qs = s.q_seq;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    for (std::size_t k = i; k < qs.size(); ++k) {
      const int q = qs[i], q2 = qs[k];
      const int pmax = std::min(q, q2 - 1);
      for (int p = 0; p <= pmax; ++p) {
        AuditRow row{q, q2, p, -bound_alpha(q, q2, p, d) * growth.rho + Rational(2 * K) + bound_beta(q, p, d) +
                                   bound_beta(q2, p, d)};
        a.rows.push_back(row);
      }
    }
  }
  std::stable_sort(a.rows.begin(), a.rows.end(), [](const AuditRow& x, const AuditRow& y) {
    return x.exponent > y.exponent;
  });
  if (a.boundary) {
    a.agrees = true;
    return a;
  }
  a.agrees = false;
  for (const auto& row : a.rows) {
    if (row.exponent != a.rows.front().exponent) break;
    if (std::tuple{row.q, row.q2, row.p} == a.expected) a.agrees = true;
  }
  return a;
}

}  // namespace lrdscal
