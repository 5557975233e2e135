#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "sampling.hpp"
#include "torus_flow.hpp"

namespace qpspec {

using cplx = std::complex<double>;

/// 2x2 matrix [[a, b], [c, d]].
template <class T>
struct Mat2 {
  T a{1}, b{0}, c{0}, d{1};

  static Mat2 identity() { return {}; }
  T det() const { return a * d - b * c; }
  T trace() const { return a + d; }
  Mat2& operator*=(double s) {
    a *= s;
    b *= s;
    c *= s;
    d *= s;
    return *this;
  }
};

template <class T>
Mat2<T> operator*(const Mat2<T>& x, const Mat2<T>& y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
          x.c * y.b + x.d * y.d};
}

inline Mat2<cplx> to_complex(const Mat2<double>& m) { return {m.a, m.b, m.c, m.d}; }

namespace detail {

inline double abs2(double v) { return v * v; }
inline double abs2(const cplx& v) { return std::norm(v); }

template <class T>
double frobenius2(const Mat2<T>& m) {
  return abs2(m.a) + abs2(m.b) + abs2(m.c) + abs2(m.d);
}

}  // namespace detail

/// Largest singular value of a 2x2 matrix.
template <class T>
double operator_norm(const Mat2<T>& m) {
  const double f2 = detail::frobenius2(m);
  const double det = std::abs(m.det());
  const double disc = std::max(0.0, f2 * f2 - 4.0 * det * det);
  return std::sqrt(0.5 * (f2 + std::sqrt(disc)));
}

/// Exact one-step propagator of -u'' + v u = E u over length h, with q = E - v:
/// [[cos kh, sin(kh)/k], [-k sin kh, cos kh]], k^2 = q. Small |k|h uses the series.
inline Mat2<double> step_block(double q, double h) {
  const double z = q * h * h;
  if (std::abs(z) < 1e-12) {
    return {1.0 - z / 2.0 + z * z / 24.0, h * (1.0 - z / 6.0 + z * z / 120.0),
            -q * h * (1.0 - z / 6.0 + z * z / 120.0), 1.0 - z / 2.0 + z * z / 24.0};
  }
  if (q > 0.0) {
    const double k = std::sqrt(q);
    const double c = std::cos(k * h), s = std::sin(k * h);
    return {c, s / k, -k * s, c};
  }
  const double kap = std::sqrt(-q);
  const double c = std::cosh(kap * h), s = std::sinh(kap * h);
  return {c, s / kap, kap * s, c};
}

inline Mat2<cplx> step_block(cplx q, double h) {
  const cplx z = q * h * h;
  if (std::abs(z) < 1e-12) {
    const cplx c = 1.0 - z / 2.0 + z * z / 24.0;
    const cplx sk = 1.0 - z / 6.0 + z * z / 120.0;
    return {c, h * sk, -q * h * sk, c};
  }
  const cplx k = std::sqrt(q);
  const cplx c = std::cos(k * h), s = std::sin(k * h);
  return {c, s / k, -k * s, c};
}

/// Transfer matrix M(x, E): (u(x), u'(x)) = M (u(0), u'(0)).
struct TransferMatrix {
  Mat2<cplx> m;
  double x = 0.0;
  cplx E{0.0, 0.0};

  cplx det() const { return m.det(); }
  cplx trace() const { return m.trace(); }
  double norm() const { return operator_norm(m); }
  /// |det - 1| relative to the squared matrix scale; cancellation in ad - bc is
  /// of order eps*|M|^2, so this is the meaningful unimodularity defect.
  double det_defect() const {
    return std::abs(det() - 1.0) / std::max(1.0, detail::frobenius2(m));
  }
};

namespace detail {

/// Calls visit(block) for each step of the piecewise-constant potential, using the
/// mean of the two endpoint samples on each step. Consecutive equal steps reuse the block.
template <class T, class Visit>
void for_each_block(std::span<const double> values, double h, T E, Visit&& visit) {
  if (values.size() < 2) return;
  double last_v = std::numeric_limits<double>::quiet_NaN();
  Mat2<T> block;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const double v = 0.5 * (values[i] + values[i + 1]);
    if (!(v == last_v)) {
      block = step_block(E - v, h);
      last_v = v;
    }
    visit(block);
  }
}

template <class T>
Mat2<T> product(std::span<const double> values, double h, T E) {
  Mat2<T> m;
  for_each_block(values, h, E, [&](const Mat2<T>& b) { m = b * m; });
  return m;
}

template <class T>
double log_norm_product(std::span<const double> values, double h, T E, std::size_t renorm_every) {
  Mat2<T> m;
  double log_scale = 0.0;
  std::size_t count = 0;
  for_each_block(values, h, E, [&](const Mat2<T>& b) {
    m = b * m;
    if (++count % renorm_every == 0) {
      const double s = std::sqrt(frobenius2(m));
      m *= 1.0 / s;
      log_scale += std::log(s);
    }
  });
  return log_scale + std::log(operator_norm(m));
}

}  // namespace detail

/// Product of exact constant-coefficient propagators over the trace.
/// Large L*X overflows; use log_norm_transfer for growth rates.
inline TransferMatrix propagate(const PotentialTrace& trace, cplx E) {
  detail::require(!trace.values.empty(), "propagate: empty trace");
  detail::require(trace.h > 0.0 && trace.h <= 0.1 + 1e-15, "propagate: step h must lie in (0, 0.1]");
  TransferMatrix t;
  t.E = E;
  t.x = trace.length();
  if (E.imag() == 0.0)
    t.m = to_complex(detail::product<double>(trace.values, trace.h, E.real()));
  else
    t.m = detail::product<cplx>(trace.values, trace.h, E);
  return t;
}

/// log ||M(X, E)|| with renormalization of the running product every `renorm_every` steps.
inline double log_norm_transfer(const PotentialTrace& trace, cplx E, std::size_t renorm_every = 1000) {
  detail::require(trace.values.size() >= 2, "log_norm_transfer: trace needs at least two samples");
  detail::require(renorm_every >= 1, "log_norm_transfer: renorm_every must be >= 1");
  if (E.imag() == 0.0)
    return detail::log_norm_product<double>(trace.values, trace.h, E.real(), renorm_every);
  return detail::log_norm_product<cplx>(trace.values, trace.h, E, renorm_every);
}

namespace detail {

/// Samples of f along the flow at x1 + i*(x2-x1)/n, i = 0..n, with n = ceil((x2-x1)/h).
inline PotentialTrace sample_segment(const SamplingFunction& f, const FlowParams& p, double x1,
                                     double x2, double h) {
  const double len = x2 - x1;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / h - 1e-9)));
  PotentialTrace tr;
  tr.h = len / static_cast<double>(n);
  tr.omega = flow(p, x1);
  tr.values.resize(n + 1);
  std::vector<double> y(p.dim());
  for (std::size_t i = 0; i <= n; ++i) {
    const double x = x1 + static_cast<double>(i) * tr.h;
    for (std::size_t j = 0; j < p.dim(); ++j) y[j] = flow_coord(p, j, x);
    tr.values[i] = f.evaluate(y);
  }
  return tr;
}

}  // namespace detail

/// Cocycle M(x2) M(x1)^{-1}: propagation from x1 to x2 along the flow with step <= h.
inline TransferMatrix cocycle_step(const SamplingFunction& f, const FlowParams& p, cplx E, double x1,
                                   double x2, double h = 0.005) {
  detail::require(std::isfinite(x1) && std::isfinite(x2) && x1 <= x2,
                  "cocycle_step: need finite x1 <= x2");
  detail::require(h > 0.0 && h <= 0.1, "cocycle_step: h must lie in (0, 0.1]");
  if (x1 == x2) {
    TransferMatrix t;
    t.E = E;
    return t;
  }
  auto tr = detail::sample_segment(f, p, x1, x2, h);
  auto t = propagate(tr, E);
  t.x = x2 - x1;
  return t;
}

/// Weyl–Titchmarsh m-function value with its convergence diagnostic.
struct MFunctionValue {
  cplx m;
  cplx E;
  double X = 0.0;
  double error_estimate = 0.0;
};

/// Horizon used when m_plus is called with X <= 0: 40 decay lengths of the slowest
/// frozen-coefficient solution, clamped to [20, 2e4].
inline double auto_horizon(const SamplingFunction& f, cplx E) {
  const double im_k = std::sqrt(E + f.sup_bound()).imag();
  return std::clamp(40.0 / im_k, 20.0, 2.0e4);
}

namespace detail {

/// Backward Riccati sweep m' = (V - E) - m^2 from the last sample down to x = 0,
/// each step applying the exact inverse step block as a Moebius map.
inline cplx riccati_backward(std::span<const double> values, double h, cplx E) {
  cplx m = cplx(0.0, 1.0) * std::sqrt(E - values.back());
  for (std::size_t i = values.size() - 1; i-- > 0;) {
    const double v = 0.5 * (values[i] + values[i + 1]);
    const auto b = step_block(E - v, h);
    m = (-b.c + b.a * m) / (b.d - b.b * m);
  }
  return m;
}

}  // namespace detail

namespace detail {

inline MFunctionValue m_plus_from_trace(const PotentialTrace& full, cplx E, double tol) {
  const std::size_t half_n = (full.values.size() - 1) / 2;
  std::span<const double> vals(full.values);
  const cplx m_full = riccati_backward(vals, full.h, E);
  const cplx m_half = riccati_backward(vals.first(half_n + 1), full.h, E);
  MFunctionValue out{m_full, E, full.length(), std::abs(m_full - m_half)};
  if (out.error_estimate > 100.0 * tol)
    throw NonContractionError("m_plus: Riccati flow did not contract (error estimate " +
                              std::to_string(out.error_estimate) + "); increase X or Im E");
  return out;
}

}  // namespace detail

/// m_+(E) for V(x) = f(omega + x alpha) by backward Riccati integration from X with
/// seed i sqrt(E - V(X)). error_estimate compares horizons X and X/2.
inline MFunctionValue m_plus(const SamplingFunction& f, const FlowParams& p, cplx E, double X = 0.0,
                             double h = 0.005, double tol = 1e-6) {
  detail::require(E.imag() >= 0.05, "m_plus: Im E must be >= 0.05");
  detail::require(h > 0.0 && h <= 0.1, "m_plus: h must lie in (0, 0.1]");
  detail::require(tol > 0.0, "m_plus: tol must be positive");
  if (X <= 0.0) X = auto_horizon(f, E);
  return detail::m_plus_from_trace(detail::sample_segment(f, p, 0.0, X, h), E, tol);
}

/// Image of the seed i sqrt(E - V(X)) under M(X)^{-1}: an independent route to m_+(E).
inline cplx m_plus_moebius(const SamplingFunction& f, const FlowParams& p, cplx E, double X,
                           double h = 0.005) {
  auto tr = detail::sample_segment(f, p, 0.0, X, h);
  const auto M = propagate(tr, E).m;
  const cplx seed = cplx(0.0, 1.0) * std::sqrt(E - tr.values.back());
  return (-M.c + M.a * seed) / (M.d - M.b * seed);
}

/// Trace of the one-period transfer matrix; |value| <= 2 exactly on the bands.
inline double floquet_discriminant(const PotentialTrace& one_period, double E) {
  detail::require(one_period.values.size() >= 2, "floquet_discriminant: trace must cover a period");
  return propagate(one_period, cplx(E, 0.0)).trace().real();
}

}  // namespace qpspec
