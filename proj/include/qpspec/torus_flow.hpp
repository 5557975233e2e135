#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace qpspec {

/// Reduce a real to [0,1). Values that round up to 1 wrap to 0.
inline double reduce_mod1(double v) {
  double r = v - std::floor(v);
  if (r >= 1.0) r = 0.0;
  return r;
}

/// A point of the torus T^d; coordinates always lie in [0,1).
class TorusPoint {
 public:
  TorusPoint() = default;
  explicit TorusPoint(std::vector<double> coords) : coords_(std::move(coords)) {
    for (auto& c : coords_) {
      detail::require(std::isfinite(c), "TorusPoint: non-finite coordinate");
      c = reduce_mod1(c);
    }
  }

  std::size_t dim() const { return coords_.size(); }
  double operator[](std::size_t j) const { return coords_[j]; }
  std::span<const double> coords() const { return coords_; }

  friend bool operator==(const TorusPoint&, const TorusPoint&) = default;

 private:
  std::vector<double> coords_;
};

/// Circular distance between two torus points (max over coordinates).
inline double torus_distance(const TorusPoint& a, const TorusPoint& b) {
  double dist = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j) {
    double t = std::abs(a[j] - b[j]);
    dist = std::max(dist, std::min(t, 1.0 - t));
  }
  return dist;
}

/// Translation flow x -> omega + x*alpha on T^d.
class FlowParams {
 public:
  FlowParams(std::vector<double> alpha, std::vector<double> omega)
      : alpha_(std::move(alpha)), omega_(std::move(omega)) {
    detail::require(!alpha_.empty(), "FlowParams: d must be >= 1");
    detail::require(alpha_.size() == omega_.size(),
                    "FlowParams: alpha and omega must have length d");
    bool nonzero = false;
    for (double a : alpha_) {
      detail::require(std::isfinite(a), "FlowParams: non-finite alpha");
      nonzero = nonzero || a != 0.0;
    }
    detail::require(nonzero, "FlowParams: alpha must not be the zero vector");
    for (auto& w : omega_) {
      detail::require(std::isfinite(w), "FlowParams: non-finite omega");
      w = reduce_mod1(w);
    }
  }

  std::size_t dim() const { return alpha_.size(); }
  std::span<const double> alpha() const { return alpha_; }
  std::span<const double> omega() const { return omega_; }
  TorusPoint base() const { return TorusPoint(omega_); }

  /// Same frequency, different base point.
  FlowParams with_omega(const TorusPoint& w) const {
    return FlowParams(alpha_, std::vector<double>(w.coords().begin(), w.coords().end()));
  }

 private:
  std::vector<double> alpha_;
  std::vector<double> omega_;
};

/// Coordinate j of the flow at time x, without allocating a TorusPoint.
inline double flow_coord(const FlowParams& p, std::size_t j, double x) {
  return reduce_mod1(p.omega()[j] + x * p.alpha()[j]);
}

inline TorusPoint flow(const FlowParams& p, double x) {
  detail::require(std::isfinite(x), "flow: x must be finite");
  std::vector<double> c(p.dim());
  for (std::size_t j = 0; j < p.dim(); ++j) c[j] = p.omega()[j] + x * p.alpha()[j];
  return TorusPoint(std::move(c));
}

/// Exhaustive search for a nonzero k with |k|_inf <= bound and |k.alpha| < tol.
///
/// Among all hits the smallest |k|_inf wins; ties break lexicographically, and
/// the sign is normalized so the first nonzero entry is positive. The axis with
/// the largest |alpha_j| is solved for directly, so the cost is (2*bound+1)^(d-1)
/// times a handful of candidates.
inline std::optional<std::vector<long>> find_rational_dependence(std::span<const double> alpha,
                                                                 long bound, double tol) {
  detail::require(!alpha.empty(), "find_rational_dependence: empty alpha");
  detail::require(bound >= 1 && bound <= 10000,
                  "find_rational_dependence: bound must lie in [1, 10^4]");
  detail::require(tol > 0.0, "find_rational_dependence: tol must be positive");

  const std::size_t d = alpha.size();
  std::size_t solve = 0;
  for (std::size_t j = 1; j < d; ++j)
    if (std::abs(alpha[j]) > std::abs(alpha[solve])) solve = j;
  const double a_solve = alpha[solve];

  std::optional<std::vector<long>> best;
  long best_norm = std::numeric_limits<long>::max();

  auto normalize = [](std::vector<long> k) {
    for (long v : k) {
      if (v == 0) continue;
      if (v < 0)
        for (auto& e : k) e = -e;
      break;
    }
    return k;
  };
  auto consider = [&](const std::vector<long>& k) {
    long norm = 0;
    bool nonzero = false;
    for (long v : k) {
      norm = std::max(norm, std::abs(v));
      nonzero = nonzero || v != 0;
    }
    if (!nonzero) return;
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += static_cast<double>(k[j]) * alpha[j];
    if (!(std::abs(dot) < tol)) return;
    auto kn = normalize(k);
    if (norm < best_norm || (norm == best_norm && kn < *best)) {
      best_norm = norm;
      best = std::move(kn);
    }
  };

  // Odometer over the free coordinates.
  std::vector<long> k(d, -bound);
  k[solve] = 0;
  while (true) {
    double partial = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      if (j != solve) partial += static_cast<double>(k[j]) * alpha[j];
    if (a_solve == 0.0) {
      // alpha is the zero vector: any k is a relation.
      for (long ks = -bound; ks <= bound; ++ks) {
        k[solve] = ks;
        consider(k);
      }
    } else {
      double lo = (-partial - tol) / a_solve;
      double hi = (-partial + tol) / a_solve;
      if (lo > hi) std::swap(lo, hi);
      long klo = std::max(-bound, static_cast<long>(std::floor(lo)));
      long khi = std::min(bound, static_cast<long>(std::ceil(hi)));
      for (long ks = klo; ks <= khi; ++ks) {
        k[solve] = ks;
        consider(k);
      }
    }
    k[solve] = 0;

    std::size_t j = 0;
    for (; j < d; ++j) {
      if (j == solve) continue;
      if (k[j] < bound) {
        ++k[j];
        break;
      }
      k[j] = -bound;
    }
    if (j == d) break;
  }
  return best;
}

enum class SamplingScheme { grid, low_discrepancy, seeded_random };

inline SamplingScheme parse_sampling_scheme(std::string_view s) {
  if (s == "grid") return SamplingScheme::grid;
  if (s == "low-discrepancy") return SamplingScheme::low_discrepancy;
  if (s == "seeded-random") return SamplingScheme::seeded_random;
  throw ConfigError("unknown omega sampling scheme: " + std::string(s));
}

inline std::string_view to_string(SamplingScheme s) {
  switch (s) {
    case SamplingScheme::grid: return "grid";
    case SamplingScheme::low_discrepancy: return "low-discrepancy";
    case SamplingScheme::seeded_random: return "seeded-random";
  }
  return "?";
}

namespace detail {

inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

inline std::uint64_t nth_prime(std::size_t n) {
  std::uint64_t c = 1;
  std::size_t found = 0;
  while (found <= n) {
    ++c;
    bool prime = true;
    for (std::uint64_t q = 2; q * q <= c; ++q)
      if (c % q == 0) {
        prime = false;
        break;
      }
    if (prime) ++found;
  }
  return c;
}

}  // namespace detail

/// Quadrature nodes on T^d.
///
/// grid: ceil(count^(1/d))^d product points i/m (first coordinate varies slowest).
/// low-discrepancy: Halton points with prime bases, indices 1..count.
/// seeded-random: mt19937_64 with 53-bit mantissa extraction (portable bit pattern).
inline std::vector<TorusPoint> sample_omegas(std::size_t d, std::size_t count, SamplingScheme scheme,
                                             std::uint64_t seed = 0) {
  detail::require(d >= 1, "sample_omegas: d must be >= 1");
  detail::require(count >= 1, "sample_omegas: count must be >= 1");
  std::vector<TorusPoint> out;
  switch (scheme) {
    case SamplingScheme::grid: {
      std::size_t m = 1;
      auto pow_d = [d](std::size_t b) {
        std::size_t r = 1;
        for (std::size_t j = 0; j < d; ++j) r *= b;
        return r;
      };
      while (pow_d(m) < count) ++m;
      std::size_t total = pow_d(m);
      out.reserve(total);
      std::vector<std::size_t> idx(d, 0);
      for (std::size_t n = 0; n < total; ++n) {
        std::vector<double> c(d);
        for (std::size_t j = 0; j < d; ++j)
          c[j] = static_cast<double>(idx[j]) / static_cast<double>(m);
        out.emplace_back(std::move(c));
        for (std::size_t j = d; j-- > 0;) {
          if (++idx[j] < m) break;
          idx[j] = 0;
        }
      }
      break;
    }
    case SamplingScheme::low_discrepancy: {
      std::vector<std::uint64_t> bases(d);
      for (std::size_t j = 0; j < d; ++j) bases[j] = detail::nth_prime(j);
      for (std::size_t n = 1; n <= count; ++n) {
        std::vector<double> c(d);
        for (std::size_t j = 0; j < d; ++j) c[j] = detail::radical_inverse(n, bases[j]);
        out.emplace_back(std::move(c));
      }
      break;
    }
    case SamplingScheme::seeded_random: {
      std::mt19937_64 rng(seed);
      for (std::size_t n = 0; n < count; ++n) {
        std::vector<double> c(d);
        for (auto& v : c) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        out.emplace_back(std::move(c));
      }
      break;
    }
  }
  return out;
}

inline std::vector<TorusPoint> sample_omegas(const FlowParams& p, std::size_t count,
                                             SamplingScheme scheme, std::uint64_t seed = 0) {
  return sample_omegas(p.dim(), count, scheme, seed);
}

}  // namespace qpspec
