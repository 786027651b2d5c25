#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "lrdscal/error.hpp"

namespace lrdscal::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1] by Newton iteration on the Legendre recurrence.
inline Rule gauss_legendre(int n) {
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  return r;
}

/// Cached Gauss-Legendre rule; rules are immutable once built.
inline const Rule& legendre_cached(int n) {
  static std::mutex m;
  static std::map<int, Rule> cache;
  std::lock_guard lock(m);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_legendre(n)).first;
  return it->second;
}

/// Gauss-Hermite rule for the standard normal density (weights sum to one),
/// by Golub-Welsch on the Jacobi matrix of the probabilists' polynomials.
inline Rule gauss_hermite_normal(int n) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  // Newton polish on the orthonormal recurrence; weights from the Christoffel sum.
  auto recur = [n](double x, double& pm1, double& pn) {
    double p0 = 0.0, p1 = 1.0, sum = 0.0;
    for (int k = 0; k < n; ++k) {
      sum += p1 * p1;
      const double p2 = (x * p1 - std::sqrt(static_cast<double>(k)) * p0) / std::sqrt(k + 1.0);
      p0 = p1;
      p1 = p2;
    }
    pm1 = p0;
    pn = p1;
    return sum;
  };
  for (int i = 0; i < n; ++i) {
    double x = es.eigenvalues()[i], pm1 = 0.0, pn = 0.0;
    for (int it = 0; it < 3; ++it) {
      recur(x, pm1, pn);
      x -= pn / (std::sqrt(static_cast<double>(n)) * pm1);
    }
    r.nodes[i] = x;
    r.weights[i] = 1.0 / recur(x, pm1, pn);
  }
  // Symmetrize to remove eigen-solver round-off.
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (r.nodes[n - 1 - i] - r.nodes[i]);
    const double w = 0.5 * (r.weights[n - 1 - i] + r.weights[i]);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

/// Fixed-order Gauss-Legendre on [a, b].
template <class F>
double fixed(const F& f, double a, double b, const Rule& rule) {
  const double h = 0.5 * (b - a), c = 0.5 * (a + b);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(c + h * rule.nodes[i]);
  return s * h;
}

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {
template <class F>
Estimate adapt(const F& f, double a, double b, double whole, double tol, int depth, const Rule& rule) {
  const double mid = 0.5 * (a + b);
  const double left = fixed(f, a, mid, rule);
  const double right = fixed(f, mid, b, rule);
  const double refined = left + right;
  const double err = std::abs(refined - whole);
  if (err <= tol || depth <= 0) return {refined, err};
  const Estimate l = adapt(f, a, mid, left, 0.5 * tol, depth - 1, rule);
  const Estimate r = adapt(f, mid, b, right, 0.5 * tol, depth - 1, rule);
  return {l.value + r.value, l.error + r.error};
}
}  // namespace detail

/// Adaptive bisection with a Gauss-Legendre rule; each panel is accepted when
/// the one-panel and two-half-panel estimates agree (Richardson-style check).
template <class F>
Estimate adaptive(const F& f, double a, double b, double tol, int order = 15, int max_depth = 40) {
  const Rule& rule = legendre_cached(order);
  return detail::adapt(f, a, b, fixed(f, a, b, rule), tol, max_depth, rule);
}

}  // namespace lrdscal::quad
