#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include "box_partition.hpp"
#include "errors.hpp"
#include "quadrature.hpp"
#include "torus_flow.hpp"

namespace qpspec {

/// Raised-cosine bump used inside one box: mid + amp*(w(t/len) - 1/2),
/// w(u) = (1 - cos 2 pi u)/2. Depends only on the offset t along alpha.
struct BoxProfile {
  double mid = 0.0;
  double amp = 0.0;
  double len = 1.0;

  double value(double t) const {
    const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t / len));
    return mid + amp * (w - 0.5);
  }
  double min_value() const { return mid - 0.5 * amp; }
  double max_value() const { return mid + 0.5 * amp; }
};

class SamplingFunction;

namespace fn {

struct Constant {
  double value = 0.0;
};

struct TrigTerm {
  std::vector<long> k;
  double cos_coeff = 0.0;
  double sin_coeff = 0.0;
};

struct TrigPoly {
  std::vector<TrigTerm> terms;
};

struct BoxStep {
  std::shared_ptr<const BoxPartition> partition;
  std::shared_ptr<const std::vector<BoxProfile>> profiles;  // one per box
};

struct Scaled {
  double lambda = 1.0;
  std::shared_ptr<const SamplingFunction> inner;
};

struct Mollified {
  std::shared_ptr<const SamplingFunction> inner;
  double eps = 0.0;
  int order = 16;
  std::vector<double> offsets;  // kernel nodes in [-eps, eps]
  std::vector<double> weights;  // normalized to sum 1
};

}  // namespace fn

/// Real-valued function on T^d (immutable, cheap to copy).
class SamplingFunction {
 public:
  using Variant = std::variant<fn::Constant, fn::TrigPoly, fn::BoxStep, fn::Scaled, fn::Mollified>;

  SamplingFunction() : v_(fn::Constant{0.0}) {}
  explicit SamplingFunction(Variant v) : v_(std::move(v)) {}

  static SamplingFunction constant(double c) { return SamplingFunction(fn::Constant{c}); }

  static SamplingFunction trig(std::vector<fn::TrigTerm> terms) {
    for (const auto& t : terms) {
      detail::require(!t.k.empty(), "trigpoly: empty frequency vector");
      detail::require(t.k.size() == terms.front().k.size(),
                      "trigpoly: all frequency vectors must have the same length");
    }
    return SamplingFunction(fn::TrigPoly{std::move(terms)});
  }

  static SamplingFunction box_step(std::shared_ptr<const BoxPartition> partition,
                                   std::vector<BoxProfile> profiles) {
    detail::require(partition != nullptr, "boxstep: missing partition");
    detail::require(profiles.size() == partition->size(), "boxstep: need one profile per box");
    return SamplingFunction(fn::BoxStep{
        std::move(partition), std::make_shared<const std::vector<BoxProfile>>(std::move(profiles))});
  }

  static SamplingFunction scaled(double lambda, SamplingFunction inner) {
    detail::require(std::isfinite(lambda), "scaled: non-finite lambda");
    return SamplingFunction(
        fn::Scaled{lambda, std::make_shared<const SamplingFunction>(std::move(inner))});
  }

  const Variant& variant() const { return v_; }

  template <class T>
  const T* as() const {
    return std::get_if<T>(&v_);
  }

  /// Dimension implied by the function, or 0 when any dimension works (constants).
  std::size_t dim_hint() const {
    return std::visit(
        [](const auto& v) -> std::size_t {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, fn::Constant>) return 0;
          else if constexpr (std::is_same_v<T, fn::TrigPoly>)
            return v.terms.empty() ? 0 : v.terms.front().k.size();
          else if constexpr (std::is_same_v<T, fn::BoxStep>) return v.partition->dim();
          else return v.inner->dim_hint();
        },
        v_);
  }

  double evaluate(std::span<const double> y) const {
    return std::visit([&](const auto& v) { return eval_impl(v, y); }, v_);
  }
  double evaluate(const TorusPoint& p) const { return evaluate(p.coords()); }

  /// Finite bound on sup |f|.
  double sup_bound() const {
    return std::visit(
        [](const auto& v) -> double {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, fn::Constant>) return std::abs(v.value);
          else if constexpr (std::is_same_v<T, fn::TrigPoly>) {
            double b = 0.0;
            for (const auto& t : v.terms) b += std::hypot(t.cos_coeff, t.sin_coeff);
            return b;
          } else if constexpr (std::is_same_v<T, fn::BoxStep>) {
            double b = 0.0;
            for (const auto& pr : *v.profiles)
              b = std::max({b, std::abs(pr.min_value()), std::abs(pr.max_value())});
            return b;
          } else if constexpr (std::is_same_v<T, fn::Scaled>)
            return std::abs(v.lambda) * v.inner->sup_bound();
          else
            return v.inner->sup_bound();
        },
        v_);
  }

  bool is_continuous() const {
    return std::visit(
        [](const auto& v) -> bool {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, fn::BoxStep>) return false;
          else if constexpr (std::is_same_v<T, fn::Scaled>) return v.inner->is_continuous();
          else return true;
        },
        v_);
  }

  /// Bound G with |f(y) - f(y')| <= G |y - y'|_2; infinity when f is not Lipschitz
  /// (box steps). Mollification does not increase it.
  double lipschitz_bound() const {
    return std::visit(
        [](const auto& v) -> double {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, fn::Constant>) return 0.0;
          else if constexpr (std::is_same_v<T, fn::TrigPoly>) {
            double g = 0.0;
            for (const auto& t : v.terms) {
              double kn = 0.0;
              for (long kj : t.k) kn += static_cast<double>(kj) * static_cast<double>(kj);
              g += 2.0 * std::numbers::pi * std::sqrt(kn) * std::hypot(t.cos_coeff, t.sin_coeff);
            }
            return g;
          } else if constexpr (std::is_same_v<T, fn::BoxStep>)
            return std::numeric_limits<double>::infinity();
          else if constexpr (std::is_same_v<T, fn::Scaled>)
            return std::abs(v.lambda) * v.inner->lipschitz_bound();
          else
            return v.inner->lipschitz_bound();
        },
        v_);
  }

 private:
  static double eval_impl(const fn::Constant& c, std::span<const double>) { return c.value; }

  static double eval_impl(const fn::TrigPoly& tp, std::span<const double> y) {
    double sum = 0.0;
    for (const auto& t : tp.terms) {
      double phase = 0.0;
      for (std::size_t j = 0; j < t.k.size(); ++j) phase += static_cast<double>(t.k[j]) * y[j];
      phase = 2.0 * std::numbers::pi * reduce_mod1(phase);
      if (t.cos_coeff != 0.0) sum += t.cos_coeff * std::cos(phase);
      if (t.sin_coeff != 0.0) sum += t.sin_coeff * std::sin(phase);
    }
    return sum;
  }

  static double eval_impl(const fn::BoxStep& b, std::span<const double> y) {
    auto loc = b.partition->locate(y);
    return (*b.profiles)[loc.index].value(loc.t_local);
  }

  static double eval_impl(const fn::Scaled& s, std::span<const double> y) {
    return s.lambda * s.inner->evaluate(y);
  }

  static double eval_impl(const fn::Mollified& m, std::span<const double> y) {
    const std::size_t d = y.size();
    const std::size_t q = m.offsets.size();
    constexpr std::size_t kStack = 8;
    std::array<double, kStack> buf_a{};
    std::array<std::size_t, kStack> idx_a{};
    std::vector<double> buf_v;
    std::vector<std::size_t> idx_v;
    std::span<double> shifted;
    std::span<std::size_t> idx;
    if (d <= kStack) {
      shifted = std::span<double>(buf_a.data(), d);
      idx = std::span<std::size_t>(idx_a.data(), d);
    } else {
      buf_v.assign(d, 0.0);
      idx_v.assign(d, 0);
      shifted = buf_v;
      idx = idx_v;
    }
    double sum = 0.0;
    while (true) {
      double w = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        shifted[j] = reduce_mod1(y[j] - m.offsets[idx[j]]);
        w *= m.weights[idx[j]];
      }
      sum += w * m.inner->evaluate(shifted);
      std::size_t j = d;
      while (j-- > 0) {
        if (++idx[j] < q) break;
        idx[j] = 0;
      }
      if (j == static_cast<std::size_t>(-1)) break;
    }
    return sum;
  }

  Variant v_;
};

// ---------------------------------------------------------------------------
// Mollifier

namespace detail {

inline double bump_unnormalized(double x) {
  const double x2 = x * x;
  if (x2 >= 1.0) return 0.0;
  return std::exp(1.0 / (x2 - 1.0));
}

}  // namespace detail

/// Normalizing constant C of the standard bump, 1 / int_{-1}^{1} exp(1/(x^2-1)) dx.
inline double mollifier_constant() {
  static const double c = 1.0 / integrate_composite(detail::bump_unnormalized, -1.0, 1.0, 256, 20);
  return c;
}

/// eta(x) = C exp(1/(x^2-1)) on |x| < 1, zero elsewhere.
inline double mollifier_eta(double x) { return mollifier_constant() * detail::bump_unnormalized(x); }

inline double mollifier_eta_eps(double x, double eps) {
  detail::require(eps > 0.0, "mollifier_eta_eps: eps must be positive");
  return mollifier_eta(x / eps) / eps;
}

/// Tensor-product convolution with eta_eps in every torus coordinate, realized as a
/// product Gauss–Legendre rule of the given order on [-eps, eps]^d. The discrete
/// weights are renormalized to sum 1, so the result is an average of translates.
inline SamplingFunction mollify(const SamplingFunction& f, double eps, int order = 16) {
  detail::require(eps > 0.0 && eps < 0.5, "mollify: eps must lie in (0, 0.5)");
  detail::require(order >= 8, "mollify: quadrature order must be >= 8");
  auto rule = gauss_legendre(order);
  fn::Mollified m;
  m.inner = std::make_shared<const SamplingFunction>(f);
  m.eps = eps;
  m.order = order;
  double total = 0.0;
  for (int i = 0; i < order; ++i) {
    m.offsets.push_back(eps * rule.nodes[i]);
    // eps * eta_eps(eps*x) = eta(x); the change of variables cancels eps.
    const double w = rule.weights[i] * mollifier_eta(rule.nodes[i]);
    m.weights.push_back(w);
    total += w;
  }
  for (auto& w : m.weights) w /= total;
  return SamplingFunction(std::move(m));
}

// ---------------------------------------------------------------------------
// Grid norms

namespace detail {

template <class Visit>
void for_each_grid_point(std::size_t d, std::size_t n, Visit&& visit) {
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> y(d, 0.0);
  while (true) {
    for (std::size_t j = 0; j < d; ++j) y[j] = static_cast<double>(idx[j]) / static_cast<double>(n);
    visit(std::span<const double>(y));
    std::size_t j = d;
    while (j-- > 0) {
      if (++idx[j] < n) break;
      idx[j] = 0;
    }
    if (j == static_cast<std::size_t>(-1)) break;
  }
}

inline std::size_t common_dim(const SamplingFunction& f, const SamplingFunction& g, std::size_t d) {
  if (d == 0) d = std::max(f.dim_hint(), g.dim_hint());
  return d == 0 ? 1 : d;
}

}  // namespace detail

/// Max of |f - g| over the uniform grid_n^d grid (a lower bound on the sup norm).
inline double sup_distance(const SamplingFunction& f, const SamplingFunction& g, std::size_t grid_n,
                           std::size_t d = 0) {
  detail::require(grid_n >= 2, "sup_distance: grid_n must be >= 2");
  d = detail::common_dim(f, g, d);
  double best = 0.0;
  detail::for_each_grid_point(d, grid_n, [&](std::span<const double> y) {
    best = std::max(best, std::abs(f.evaluate(y) - g.evaluate(y)));
  });
  return best;
}

/// Mean of |f - g| over the uniform grid_n^d grid (Riemann estimate of the L1 norm).
inline double l1_distance(const SamplingFunction& f, const SamplingFunction& g, std::size_t grid_n,
                          std::size_t d = 0) {
  detail::require(grid_n >= 2, "l1_distance: grid_n must be >= 2");
  d = detail::common_dim(f, g, d);
  double sum = 0.0;
  std::size_t count = 0;
  detail::for_each_grid_point(d, grid_n, [&](std::span<const double> y) {
    sum += std::abs(f.evaluate(y) - g.evaluate(y));
    ++count;
  });
  return sum / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Potentials along the flow

/// V(x) = f(omega + x alpha) sampled at x = i*h, i = 0..floor(X/h).
struct PotentialTrace {
  std::vector<double> values;
  double h = 0.0;
  TorusPoint omega;

  std::size_t size() const { return values.size(); }
  double length() const { return h * static_cast<double>(values.size() - 1); }
};

namespace detail {

inline std::size_t step_count(double X, double h) {
  return static_cast<std::size_t>(std::floor(X / h * (1.0 + 1e-12)));
}

}  // namespace detail

inline PotentialTrace trace_potential(const SamplingFunction& f, const FlowParams& p, double X,
                                      double h) {
  detail::require(h > 0.0 && h <= 0.1, "trace_potential: h must lie in (0, 0.1]");
  detail::require(X >= h, "trace_potential: X must be >= h");
  const std::size_t hint = f.dim_hint();
  detail::require(hint == 0 || hint == p.dim(), "trace_potential: dimension mismatch");
  PotentialTrace tr;
  tr.h = h;
  tr.omega = p.base();
  const std::size_t n = detail::step_count(X, h) + 1;
  tr.values.resize(n);
  std::vector<double> y(p.dim());
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) * h;
    for (std::size_t j = 0; j < p.dim(); ++j) y[j] = flow_coord(p, j, x);
    tr.values[i] = f.evaluate(y);
  }
  return tr;
}

/// Grid-aligned t in (0, t_max] with max_x |V(x) - V(x - t)| < eps over the overlap.
inline std::vector<double> find_almost_periods(const PotentialTrace& trace, double eps, double t_max) {
  detail::require(eps > 0.0, "find_almost_periods: eps must be positive");
  detail::require(t_max > 0.0 && t_max <= 0.5 * trace.length() * (1.0 + 1e-12),
                  "find_almost_periods: t_max must lie in (0, X/2]");
  const auto& v = trace.values;
  const std::size_t max_shift = detail::step_count(t_max, trace.h);
  std::vector<double> out;
  for (std::size_t m = 1; m <= max_shift; ++m) {
    bool ok = true;
    for (std::size_t i = m; i < v.size(); ++i) {
      if (!(std::abs(v[i] - v[i - m]) < eps)) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(static_cast<double>(m) * trace.h);
  }
  return out;
}

}  // namespace qpspec
