#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "lyapunov.hpp"
#include "sampling.hpp"

namespace qpspec {

/// Riemann estimate of Leb{E in [-R, R] : L(E) < tau} on grid_n cell midpoints.
struct MREstimate {
  double R = 0.0;
  double tau = 0.0;
  std::size_t grid_n = 0;
  double measure = 0.0;
  std::vector<double> energies;
  std::vector<double> lyapunov;
  std::vector<bool> flags;
  std::size_t failures = 0;
};

inline std::vector<double> mr_energy_grid(double R, std::size_t grid_n) {
  std::vector<double> e(grid_n);
  const double cell = 2.0 * R / static_cast<double>(grid_n);
  for (std::size_t i = 0; i < grid_n; ++i) e[i] = -R + (static_cast<double>(i) + 0.5) * cell;
  return e;
}

/// Thresholds an existing sweep; used directly by tau-monotonicity checks.
inline MREstimate mr_from_curve(const LyapunovCurve& curve, double R, double tau) {
  detail::require(tau > 0.0, "estimate_mr: tau must be positive");
  MREstimate est;
  est.R = R;
  est.tau = tau;
  est.grid_n = curve.grid.size();
  std::size_t flagged = 0;
  for (const auto& e : curve.estimates) {
    est.energies.push_back(e.E.real());
    est.lyapunov.push_back(e.ok ? e.value : std::numeric_limits<double>::quiet_NaN());
    const bool flag = e.ok && e.value < tau;
    est.flags.push_back(flag);
    if (!e.ok) ++est.failures;
    if (flag) ++flagged;
  }
  est.measure = 2.0 * R / static_cast<double>(est.grid_n) * static_cast<double>(flagged);
  return est;
}

inline LyapunovCurve mr_sweep(const SamplingFunction& f, const FlowParams& p, double R,
                              std::size_t grid_n, const LyapunovParams& params) {
  detail::require(R > 0.0, "estimate_mr: R must be positive");
  detail::require(grid_n >= 16, "estimate_mr: grid_n must be >= 16");
  std::vector<cplx> grid;
  for (double e : mr_energy_grid(R, grid_n)) grid.emplace_back(e, 0.0);
  return sweep_curve(f, p, grid, LyapunovMethod::growth, params);
}

inline MREstimate estimate_mr(const SamplingFunction& f, const FlowParams& p, double R, double tau,
                              std::size_t grid_n, const LyapunovParams& params) {
  detail::require(tau > 0.0, "estimate_mr: tau must be positive");
  return mr_from_curve(mr_sweep(f, p, R, grid_n, params), R, tau);
}

/// Membership in {f : M_R(f) < delta} at the estimate's numerical parameters.
inline bool in_m_r_delta(const MREstimate& est, double delta) { return est.measure < delta; }

struct CouplingIntegralEstimate {
  double Lambda = 0.0;
  std::vector<double> lambda_nodes;
  std::vector<MREstimate> per_node;
  double integral = 0.0;
};

/// Trapezoid rule for int_0^Lambda M_R(lambda f) d lambda on lambda_n equispaced nodes.
inline CouplingIntegralEstimate coupling_integral(const SamplingFunction& f, const FlowParams& p,
                                                  double R, double Lambda, std::size_t lambda_n,
                                                  double tau, std::size_t grid_n,
                                                  const LyapunovParams& params) {
  detail::require(Lambda > 0.0, "coupling_integral: Lambda must be positive");
  detail::require(lambda_n >= 4, "coupling_integral: lambda_n must be >= 4");
  CouplingIntegralEstimate out;
  out.Lambda = Lambda;
  const double step = Lambda / static_cast<double>(lambda_n - 1);
  for (std::size_t i = 0; i < lambda_n; ++i) {
    const double lam = static_cast<double>(i) * step;
    out.lambda_nodes.push_back(lam);
    out.per_node.push_back(
        estimate_mr(SamplingFunction::scaled(lam, f), p, R, tau, grid_n, params));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < lambda_n; ++i) {
    const double w = (i == 0 || i + 1 == lambda_n) ? 0.5 : 1.0;
    sum += w * out.per_node[i].measure;
  }
  out.integral = sum * step;
  return out;
}

/// Membership in {f : int_0^Lambda M_R(lambda f) d lambda < delta}.
inline bool in_m_r_delta_lambda(const CouplingIntegralEstimate& est, double delta) {
  return est.integral < delta;
}

struct SemicontinuityRow {
  double eps_m = 0.0;
  double l1_to_ftilde = 0.0;
  double sup_to_f = 0.0;
  double mr = 0.0;
  double coupling = std::numeric_limits<double>::quiet_NaN();
};

struct SemicontinuityConfig {
  double R = 1.0;
  double tau = 0.05;
  std::size_t grid_n = 32;
  LyapunovParams lyapunov;
  std::size_t norm_grid_n = 64;
  int mollify_order = 16;
  bool with_coupling = false;
  double Lambda = 1.0;
  std::size_t lambda_n = 4;
};

/// Mollifies the discontinuous approximant at each scale and tabulates distances and
/// zero-Lyapunov measures. Produces an inspection table, not a verdict.
inline std::vector<SemicontinuityRow> semicontinuity_experiment(const SamplingFunction& f_target,
                                                                const SamplingFunction& f_original,
                                                                const FlowParams& p,
                                                                const std::vector<double>& scales,
                                                                const SemicontinuityConfig& cfg) {
  detail::require(scales.size() >= 3, "semicontinuity_experiment: need at least 3 scales");
  for (std::size_t i = 1; i < scales.size(); ++i)
    detail::require(scales[i] < scales[i - 1],
                    "semicontinuity_experiment: scales must be strictly decreasing");
  std::vector<SemicontinuityRow> rows;
  for (double eps_m : scales) {
    auto g = mollify(f_target, eps_m, cfg.mollify_order);
    SemicontinuityRow r;
    r.eps_m = eps_m;
    r.l1_to_ftilde = l1_distance(g, f_target, cfg.norm_grid_n, p.dim());
    r.sup_to_f = sup_distance(g, f_original, cfg.norm_grid_n, p.dim());
    r.mr = estimate_mr(g, p, cfg.R, cfg.tau, cfg.grid_n, cfg.lyapunov).measure;
    if (cfg.with_coupling)
      r.coupling = coupling_integral(g, p, cfg.R, cfg.Lambda, cfg.lambda_n, cfg.tau, cfg.grid_n,
                                     cfg.lyapunov)
                       .integral;
    rows.push_back(r);
  }
  return rows;
}

inline std::string semicontinuity_csv(const std::vector<SemicontinuityRow>& rows,
                                      const std::string& fingerprint = {}) {
  std::ostringstream os;
  if (!fingerprint.empty()) os << "# config_fingerprint=" << fingerprint << '\n';
  os << "eps_m,l1_to_ftilde,sup_to_f,mr,coupling_integral\n";
  for (const auto& r : rows)
    os << fmt17(r.eps_m) << ',' << fmt17(r.l1_to_ftilde) << ',' << fmt17(r.sup_to_f) << ','
       << fmt17(r.mr) << ',' << fmt17(r.coupling) << '\n';
  return os.str();
}

}  // namespace qpspec
