#pragma once

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "propagation.hpp"
#include "sampling.hpp"
#include "torus_flow.hpp"

namespace qpspec {

enum class LyapunovMethod { growth, m_integral };

inline std::string_view to_string(LyapunovMethod m) {
  return m == LyapunovMethod::growth ? "growth" : "m-integral";
}

inline LyapunovMethod parse_lyapunov_method(std::string_view s) {
  if (s == "growth") return LyapunovMethod::growth;
  if (s == "m-integral") return LyapunovMethod::m_integral;
  throw ConfigError("unknown Lyapunov method: " + std::string(s));
}

struct LyapunovEstimate {
  cplx E;
  double value = 0.0;  // clamped to >= 0
  double raw = 0.0;    // unclamped mean
  LyapunovMethod method = LyapunovMethod::growth;
  double X = 0.0;
  double h = 0.0;
  std::size_t omega_count = 0;
  double spread = 0.0;
  bool ok = true;
  std::string error;
};

struct LyapunovParams {
  double X = 1000.0;
  double h = 0.005;
  std::vector<TorusPoint> omegas;
  std::size_t workers = 1;
  double m_tol = 1e-6;
};

namespace detail {

inline void mean_and_spread(const std::vector<double>& xs, double& mean, double& spread) {
  mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  spread = 0.0;
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  spread = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline std::vector<PotentialTrace> traces_for(const SamplingFunction& f, const FlowParams& p,
                                              double X, double h,
                                              const std::vector<TorusPoint>& omegas) {
  std::vector<PotentialTrace> out;
  out.reserve(omegas.size());
  for (const auto& w : omegas) out.push_back(trace_potential(f, p.with_omega(w), X, h));
  return out;
}

}  // namespace detail

/// Growth estimator from precomputed traces (one per omega).
inline LyapunovEstimate lyapunov_growth(const std::vector<PotentialTrace>& traces, cplx E) {
  detail::require(!traces.empty(), "lyapunov_growth: omegas must be nonempty");
  std::vector<double> rates;
  rates.reserve(traces.size());
  for (const auto& tr : traces) rates.push_back(log_norm_transfer(tr, E) / tr.length());
  LyapunovEstimate est;
  est.E = E;
  est.method = LyapunovMethod::growth;
  est.X = traces.front().length();
  est.h = traces.front().h;
  est.omega_count = traces.size();
  detail::mean_and_spread(rates, est.raw, est.spread);
  est.value = std::max(0.0, est.raw);
  return est;
}

/// Mean over omega of (1/X) log ||M(X, E, omega)||, clamped at zero.
inline LyapunovEstimate lyapunov_growth(const SamplingFunction& f, const FlowParams& p, cplx E,
                                        double X, double h, const std::vector<TorusPoint>& omegas) {
  detail::require(X >= 50.0, "lyapunov_growth: X must be >= 50");
  detail::require(!omegas.empty(), "lyapunov_growth: omegas must be nonempty");
  return lyapunov_growth(detail::traces_for(f, p, X, h, omegas), E);
}

/// Estimator through the m-function formula, from precomputed traces.
inline LyapunovEstimate lyapunov_via_m(const std::vector<PotentialTrace>& traces, cplx E,
                                       double tol = 1e-6) {
  detail::require(!traces.empty(), "lyapunov_via_m: omegas must be nonempty");
  detail::require(E.imag() >= 0.05, "lyapunov_via_m: Im E must be >= 0.05");
  std::vector<double> vals;
  vals.reserve(traces.size());
  for (const auto& tr : traces) vals.push_back(-detail::m_plus_from_trace(tr, E, tol).m.real());
  LyapunovEstimate est;
  est.E = E;
  est.method = LyapunovMethod::m_integral;
  est.X = traces.front().length();
  est.h = traces.front().h;
  est.omega_count = traces.size();
  detail::mean_and_spread(vals, est.raw, est.spread);
  est.value = std::max(0.0, est.raw);
  return est;
}

/// L(E) = -mean_omega Re m_+(E); X <= 0 selects the automatic horizon.
inline LyapunovEstimate lyapunov_via_m(const SamplingFunction& f, const FlowParams& p, cplx E,
                                       double X, double h, const std::vector<TorusPoint>& omegas,
                                       double tol = 1e-6) {
  detail::require(E.imag() >= 0.05, "lyapunov_via_m: Im E must be >= 0.05");
  detail::require(!omegas.empty(), "lyapunov_via_m: omegas must be nonempty");
  if (X <= 0.0) X = auto_horizon(f, E);
  std::vector<PotentialTrace> traces;
  traces.reserve(omegas.size());
  for (const auto& w : omegas) traces.push_back(detail::sample_segment(f, p.with_omega(w), 0.0, X, h));
  return lyapunov_via_m(traces, E, tol);
}

struct LyapunovCurve {
  std::vector<cplx> grid;
  std::vector<LyapunovEstimate> estimates;
  std::string fingerprint;
};

/// Independent estimates on a strictly increasing energy grid. Traces are shared
/// across energies; results are stored by index, so worker count does not matter.
inline LyapunovCurve sweep_curve(const SamplingFunction& f, const FlowParams& p,
                                 const std::vector<cplx>& grid, LyapunovMethod method,
                                 const LyapunovParams& params, std::string fingerprint = {}) {
  detail::require(!grid.empty(), "sweep_curve: grid must be nonempty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    detail::require(grid[i].real() > grid[i - 1].real(),
                    "sweep_curve: grid must be strictly increasing");
  detail::require(!params.omegas.empty(), "sweep_curve: omegas must be nonempty");

  LyapunovCurve curve;
  curve.grid = grid;
  curve.fingerprint = std::move(fingerprint);
  curve.estimates.resize(grid.size());

  std::vector<PotentialTrace> shared;
  const bool reuse = method == LyapunovMethod::growth || params.X > 0.0;
  if (reuse) {
    if (method == LyapunovMethod::growth) {
      detail::require(params.X >= 50.0, "sweep_curve: X must be >= 50");
      shared = detail::traces_for(f, p, params.X, params.h, params.omegas);
    } else {
      for (const auto& w : params.omegas)
        shared.push_back(detail::sample_segment(f, p.with_omega(w), 0.0, params.X, params.h));
    }
  }

  parallel_for(grid.size(), params.workers, [&](std::size_t i) {
    LyapunovEstimate est;
    try {
      if (method == LyapunovMethod::growth)
        est = lyapunov_growth(shared, grid[i]);
      else if (reuse)
        est = lyapunov_via_m(shared, grid[i], params.m_tol);
      else
        est = lyapunov_via_m(f, p, grid[i], params.X, params.h, params.omegas, params.m_tol);
    } catch (const std::exception& e) {
      est = LyapunovEstimate{};
      est.E = grid[i];
      est.method = method;
      est.X = params.X;
      est.h = params.h;
      est.omega_count = params.omegas.size();
      est.ok = false;
      est.error = e.what();
    }
    curve.estimates[i] = std::move(est);
  });
  return curve;
}

/// Curve CSV: E_re,E_im,L,spread,method,X,h,omega_count (failed points carry L = nan).
inline std::string curve_csv(const LyapunovCurve& curve) {
  std::ostringstream os;
  if (!curve.fingerprint.empty()) os << "# config_fingerprint=" << curve.fingerprint << '\n';
  os << "E_re,E_im,L,spread,method,X,h,omega_count\n";
  for (const auto& e : curve.estimates) {
    os << fmt17(e.E.real()) << ',' << fmt17(e.E.imag()) << ','
       << (e.ok ? fmt17(e.value) : std::string("nan")) << ',' << fmt17(e.spread) << ','
       << to_string(e.method) << ',' << fmt17(e.X) << ',' << fmt17(e.h) << ',' << e.omega_count
       << '\n';
  }
  return os.str();
}

}  // namespace qpspec
