#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "errors.hpp"

namespace qpspec {

/// Gauss–Legendre rule on [-1,1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussRule gauss_legendre(int order) {
  detail::require(order >= 1, "gauss_legendre: order must be >= 1");
  GaussRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int n = order;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      // p1 = P_n(x), p0 = P_{n-1}(x)
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      if (n == 1) dp = 1.0;
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

/// Composite Gauss–Legendre on [a,b] with `panels` equal panels.
template <class F>
double integrate_composite(F&& f, double a, double b, int panels = 64, int order = 16) {
  static thread_local int cached_order = -1;
  static thread_local GaussRule cached;
  if (cached_order != order) {
    cached = gauss_legendre(order);
    cached_order = order;
  }
  const double w = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * w;
    for (std::size_t i = 0; i < cached.nodes.size(); ++i)
      sum += cached.weights[i] * f(mid + 0.5 * w * cached.nodes[i]);
  }
  return 0.5 * w * sum;
}

}  // namespace qpspec
