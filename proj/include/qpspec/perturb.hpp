#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "box_partition.hpp"
#include "errors.hpp"
#include "pieces.hpp"
#include "sampling.hpp"
#include "torus_flow.hpp"

namespace qpspec {

namespace detail {

/// Calls visit(box_index, y) for scan^d points per box at fractional positions
/// u_i = k/(scan-1), so the scan includes the far faces of each box's closure.
template <class Visit>
void scan_boxes(const BoxPartition& part, std::size_t scan, Visit&& visit) {
  const std::size_t d = part.dim();
  const auto& counts = part.counts();
  const auto& free_axes = part.free_axes();
  const std::size_t pivot = part.pivot();
  const auto alpha = part.flow().alpha();
  std::vector<std::size_t> g(d, 0), k(d, 0);
  std::vector<double> y(d);
  const double denom = scan > 1 ? static_cast<double>(scan - 1) : 1.0;
  for (std::size_t box = 0; box < part.size(); ++box) {
    std::fill(k.begin(), k.end(), 0);
    while (true) {
      const double s =
          (static_cast<double>(g[d - 1]) + static_cast<double>(k[d - 1]) / denom) * part.ell_d();
      y[pivot] = reduce_mod1(s * alpha[pivot]);
      for (std::size_t i = 0; i + 1 < d; ++i) {
        const double t = (static_cast<double>(g[i]) + static_cast<double>(k[i]) / denom) * part.ell()[i];
        y[free_axes[i]] = reduce_mod1(t + s * alpha[free_axes[i]]);
      }
      visit(box, std::span<const double>(y));
      std::size_t j = d;
      while (j-- > 0) {
        if (++k[j] < scan) break;
        k[j] = 0;
      }
      if (j == static_cast<std::size_t>(-1)) break;
    }
    for (std::size_t i = d; i-- > 0;) {
      if (++g[i] < counts[i]) break;
      g[i] = 0;
    }
  }
}

struct BoxRange {
  std::vector<double> lo, hi;
};

inline BoxRange scan_box_ranges(const SamplingFunction& f, const BoxPartition& part, std::size_t scan) {
  BoxRange r;
  r.lo.assign(part.size(), std::numeric_limits<double>::infinity());
  r.hi.assign(part.size(), -std::numeric_limits<double>::infinity());
  scan_boxes(part, scan, [&](std::size_t box, std::span<const double> y) {
    const double v = f.evaluate(y);
    r.lo[box] = std::min(r.lo[box], v);
    r.hi[box] = std::max(r.hi[box], v);
  });
  return r;
}

inline double max_variation(const BoxRange& r) {
  double m = 0.0;
  for (std::size_t i = 0; i < r.lo.size(); ++i) m = std::max(m, r.hi[i] - r.lo[i]);
  return m;
}

}  // namespace detail

struct PartitionOptions {
  std::size_t scan_per_axis = 16;
  double margin_fraction = 1.0 / 8.0;  // margin = margin_fraction * eps
  std::size_t max_count = std::size_t{1} << 16;
};

/// Partition P_{eps,n}: the coarsest dyadic grid whose scanned per-box variation is below
/// eps/2 - margin, then every axis subdivided n times (so delta(n) = delta(1)/n).
inline BoxPartition build_partition(const SamplingFunction& f, const FlowParams& p, double eps,
                                    std::size_t n, const PartitionOptions& opt = {}) {
  detail::require(f.is_continuous(), "build_partition: f must be continuous");
  detail::require(eps > 0.0, "build_partition: eps must be positive");
  detail::require(n >= 1, "build_partition: n must be >= 1");
  const std::size_t hint = f.dim_hint();
  detail::require(hint == 0 || hint == p.dim(), "build_partition: dimension mismatch");
  const std::size_t d = p.dim();

  double max_abs_alpha = 0.0;
  for (double a : p.alpha()) max_abs_alpha = std::max(max_abs_alpha, std::abs(a));
  std::vector<std::size_t> counts(d, 2);
  // ell_d = 1/(|alpha_pivot| N_d) must stay below 1.
  counts[d - 1] = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(1.0 / max_abs_alpha)) + 1);

  const double target = eps / 2.0 - opt.margin_fraction * eps;
  while (true) {
    BoxPartition part(p, counts);
    const double var = detail::max_variation(detail::scan_box_ranges(f, part, opt.scan_per_axis));
    if (var < target) break;
    for (auto& c : counts) c *= 2;
    if (*std::max_element(counts.begin(), counts.end()) > opt.max_count)
      throw UnresolvableVariationError("build_partition: refinement cap reached with variation " +
                                       std::to_string(var));
  }
  for (auto& c : counts) c *= n;
  detail::require(*std::max_element(counts.begin(), counts.end()) <= opt.max_count,
                  "build_partition: refined counts exceed the per-axis cap");
  return BoxPartition(p, counts);
}

/// Symbol per box; boxes whose (mid, amp, len) agree within 1e-12 share a symbol.
/// Symbols are numbered by increasing (mid, amp, len).
inline std::vector<int> intern_box_profiles(const std::vector<BoxProfile>& profiles) {
  std::vector<std::size_t> order(profiles.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    return std::tuple(profiles[i].mid, profiles[i].amp, profiles[i].len);
  };
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return key(a) < key(b); });
  std::vector<int> sym(profiles.size(), 0);
  int next = -1;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& cur = profiles[order[r]];
    bool same = false;
    if (r > 0) {
      const auto& prev = profiles[order[r - 1]];
      same = std::abs(cur.mid - prev.mid) <= 1e-12 && std::abs(cur.amp - prev.amp) <= 1e-12 &&
             std::abs(cur.len - prev.len) <= 1e-12;
    }
    if (!same) ++next;
    sym[order[r]] = next;
  }
  return sym;
}

/// The discontinuous approximant f_{eps,n} with the data used to build it.
struct Approximant {
  SamplingFunction function;  // BoxStep
  std::shared_ptr<const BoxPartition> partition;
  std::vector<double> box_inf;  // scanned inf of f per box
  std::vector<double> box_sup;  // scanned sup of f per box
  std::vector<int> box_symbol;
  std::size_t alphabet_size = 0;
  double amplitude = 0.0;  // min(eps/8, 1/n)

  const std::vector<BoxProfile>& profiles() const {
    return *function.as<fn::BoxStep>()->profiles;
  }
};

/// Per box: midpoint of the scanned range plus a raised cosine of amplitude min(eps/8, 1/n)
/// in the alpha direction.
inline Approximant build_fepsn(const SamplingFunction& f, const BoxPartition& partition, double eps,
                               std::size_t n, std::size_t scan_per_axis = 0) {
  detail::require(eps > 0.0 && n >= 1, "build_fepsn: need eps > 0 and n >= 1");
  if (scan_per_axis == 0) scan_per_axis = std::max<std::size_t>(4, (16 + n - 1) / n);
  Approximant out;
  out.partition = std::make_shared<const BoxPartition>(partition);
  auto ranges = detail::scan_box_ranges(f, partition, scan_per_axis);
  out.amplitude = std::min(eps / 8.0, 1.0 / static_cast<double>(n));
  std::vector<BoxProfile> profiles(partition.size());
  for (std::size_t b = 0; b < partition.size(); ++b)
    profiles[b] = BoxProfile{0.5 * (ranges.lo[b] + ranges.hi[b]), out.amplitude, partition.ell_d()};
  out.box_symbol = intern_box_profiles(profiles);
  out.alphabet_size = out.box_symbol.empty()
                          ? 0
                          : static_cast<std::size_t>(
                                *std::max_element(out.box_symbol.begin(), out.box_symbol.end()) + 1);
  out.box_inf = std::move(ranges.lo);
  out.box_sup = std::move(ranges.hi);
  out.function = SamplingFunction::box_step(out.partition, std::move(profiles));
  return out;
}

/// Ordered box visits of the flow, as a piece sequence starting at the first full entry.
struct Itinerary {
  PieceSequence sequence;
  std::vector<std::size_t> boxes;
  std::vector<double> enter_x;
  double first_entry = 0.0;
};

/// Visits of x -> omega + x alpha to the boxes of a BoxStep (possibly scaled) on [0, T].
/// Only complete visits are kept; each lasts exactly ell_d since s advances at unit rate.
inline Itinerary itinerary(const SamplingFunction& g, const FlowParams& p, double T) {
  double lambda = 1.0;
  const SamplingFunction* cur = &g;
  while (const auto* s = cur->as<fn::Scaled>()) {
    lambda *= s->lambda;
    cur = s->inner.get();
  }
  const auto* bs = cur->as<fn::BoxStep>();
  detail::require(bs != nullptr, "itinerary: function must be a (scaled) box step");
  const BoxPartition& part = *bs->partition;
  detail::require(part.dim() == p.dim(), "itinerary: dimension mismatch");
  detail::require(T >= 10.0 * part.ell_d(), "itinerary: T must be >= 10 * ell_d");
  const auto& profiles = *bs->profiles;
  const auto box_sym = intern_box_profiles(profiles);

  const double ell_d = part.ell_d();
  const std::size_t nd = part.counts().back();
  const auto start = part.to_sheared(p.omega());
  const auto k0 = std::min(static_cast<std::size_t>(start.s / ell_d), nd - 1);

  Itinerary it;
  it.first_entry = static_cast<double>(k0 + 1) * ell_d - start.s;
  it.sequence.start_offset = it.first_entry;
  std::vector<int> dense(static_cast<std::size_t>(
                             box_sym.empty() ? 0 : *std::max_element(box_sym.begin(), box_sym.end()) + 1),
                         -1);
  ShearedCoords c;
  c.t.resize(start.t.size());
  for (std::size_t m = 0;; ++m) {
    const double enter = it.first_entry + static_cast<double>(m) * ell_d;
    if (enter + ell_d > T) break;
    const std::size_t cell = k0 + 1 + m;
    const std::size_t wraps = cell / nd;
    for (std::size_t i = 0; i < c.t.size(); ++i)
      c.t[i] = reduce_mod1(start.t[i] + static_cast<double>(wraps) * part.wrap_shift(i));
    c.s = (static_cast<double>(cell % nd) + 0.5) * ell_d;
    const auto box = part.locate_sheared(c).index;
    const int sym = box_sym[box];
    if (dense[static_cast<std::size_t>(sym)] < 0) {
      const auto& pr = profiles[box];
      dense[static_cast<std::size_t>(sym)] = it.sequence.alphabet.push_unchecked(
          ell_d, PieceProfile::raised_cosine(lambda * pr.mid, lambda * pr.amp));
    }
    it.sequence.symbols.push_back(dense[static_cast<std::size_t>(sym)]);
    it.boxes.push_back(box);
    it.enter_x.push_back(enter);
  }
  return it;
}

/// Itinerary with exactly `count` complete visits.
inline Itinerary itinerary_symbols(const SamplingFunction& g, const FlowParams& p, std::size_t count) {
  const SamplingFunction* cur = &g;
  while (const auto* s = cur->as<fn::Scaled>()) cur = s->inner.get();
  const auto* bs = cur->as<fn::BoxStep>();
  detail::require(bs != nullptr, "itinerary: function must be a (scaled) box step");
  const double ell_d = bs->partition->ell_d();
  const double T = std::max(10.0, static_cast<double>(count + 2)) * ell_d;
  auto it = itinerary(g, p, T);
  it.sequence.symbols.resize(std::min(count, it.sequence.symbols.size()));
  it.boxes.resize(it.sequence.symbols.size());
  it.enter_x.resize(it.sequence.symbols.size());
  return it;
}

namespace detail {

inline std::size_t integer_rank(std::vector<std::vector<double>> rows) {
  std::size_t rank = 0;
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  for (std::size_t c = 0; c < cols && rank < rows.size(); ++c) {
    std::size_t piv = rank;
    for (std::size_t r = rank; r < rows.size(); ++r)
      if (std::abs(rows[r][c]) > std::abs(rows[piv][c])) piv = r;
    if (std::abs(rows[piv][c]) < 1e-9) continue;
    std::swap(rows[piv], rows[rank]);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r == rank) continue;
      const double fac = rows[r][c] / rows[rank][c];
      for (std::size_t k = c; k < cols; ++k) rows[r][k] -= fac * rows[rank][k];
    }
    ++rank;
  }
  return rank;
}

inline void collect_frequencies(const SamplingFunction& f, std::vector<std::vector<double>>& rows,
                                bool& opaque) {
  if (const auto* tp = f.as<fn::TrigPoly>()) {
    for (const auto& t : tp->terms) {
      if (t.cos_coeff == 0.0 && t.sin_coeff == 0.0) continue;
      if (std::all_of(t.k.begin(), t.k.end(), [](long v) { return v == 0; })) continue;
      rows.emplace_back(t.k.begin(), t.k.end());
    }
  } else if (const auto* s = f.as<fn::Scaled>()) {
    if (s->lambda != 0.0) collect_frequencies(*s->inner, rows, opaque);
  } else if (!f.as<fn::Constant>()) {
    opaque = true;
  }
}

}  // namespace detail

struct AperiodicityAdjustment {
  SamplingFunction function;
  bool adjusted = false;
  std::size_t rank_before = 0;
  double sup_change = 0.0;  // bound on ||f_adjusted - f||_inf
};

/// If the frequency vectors of a trigonometric f span a rank-deficient lattice, adds
/// (eps/16)/d * cos(2 pi x_j) for every axis j, which restores full rank.
inline AperiodicityAdjustment ensure_aperiodic(const SamplingFunction& f, std::size_t d, double eps) {
  detail::require(eps > 0.0, "ensure_aperiodic: eps must be positive");
  std::vector<std::vector<double>> rows;
  bool opaque = false;
  detail::collect_frequencies(f, rows, opaque);
  AperiodicityAdjustment out{f, false, 0, 0.0};
  if (opaque) return out;  // not a trigonometric polynomial: nothing to decide
  out.rank_before = detail::integer_rank(rows);
  if (out.rank_before >= d) return out;
  std::vector<fn::TrigTerm> terms;
  const double coeff = eps / 16.0 / static_cast<double>(d);
  for (std::size_t j = 0; j < d; ++j) {
    fn::TrigTerm t;
    t.k.assign(d, 0);
    t.k[j] = 1;
    t.cos_coeff = coeff;
    terms.push_back(std::move(t));
  }
  if (const auto* tp = f.as<fn::TrigPoly>())
    terms.insert(terms.begin(), tp->terms.begin(), tp->terms.end());
  else if (const auto* c = f.as<fn::Constant>()) {
    fn::TrigTerm t;
    t.k.assign(d, 0);
    t.cos_coeff = c->value;
    terms.insert(terms.begin(), t);
  } else {
    // Scaled trig polynomial: expand the scale into the coefficients.
    const auto* s = f.as<fn::Scaled>();
    double lam = 1.0;
    const SamplingFunction* cur = &f;
    while ((s = cur->as<fn::Scaled>())) {
      lam *= s->lambda;
      cur = s->inner.get();
    }
    if (const auto* tp2 = cur->as<fn::TrigPoly>()) {
      for (auto t : tp2->terms) {
        t.cos_coeff *= lam;
        t.sin_coeff *= lam;
        terms.insert(terms.begin(), t);
      }
    } else if (const auto* c2 = cur->as<fn::Constant>()) {
      fn::TrigTerm t;
      t.k.assign(d, 0);
      t.cos_coeff = lam * c2->value;
      terms.insert(terms.begin(), t);
    }
  }
  out.function = SamplingFunction::trig(std::move(terms));
  out.adjusted = true;
  out.sup_change = eps / 16.0;
  return out;
}

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerificationOptions {
  std::size_t variation_scan_per_axis = 0;  // 0: resolution-matched default
  std::size_t sup_grid_n = 128;
  std::size_t itinerary_symbols = 10000;
  double ell_factor = 3.0;
  std::size_t max_period = 200;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  SimpleFdpResult simple_forward;
  SimpleFdpResult simple_reverse;
  EventualPeriodicityResult periodic_forward;
  EventualPeriodicityResult periodic_reverse;
  FdpReport fdp;
  double max_variation = 0.0;
  double sup_distance = 0.0;
  double ell = 0.0;
  std::size_t symbols = 0;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// Runs every checkable hypothesis of the construction and records one entry per check.
inline VerificationReport verify_construction(const SamplingFunction& f, const Approximant& approx,
                                              const FlowParams& p, double eps, std::size_t n,
                                              const VerificationOptions& opt = {}) {
  VerificationReport rep;
  const BoxPartition& part = *approx.partition;
  const double cap = std::min(eps / 8.0, 1.0 / static_cast<double>(n));

  // Independent resolution from the construction scan: one more point per axis.
  const std::size_t vscan = opt.variation_scan_per_axis
                                ? opt.variation_scan_per_axis
                                : std::max<std::size_t>(5, (16 + n - 1) / n + 1);
  const auto ranges = detail::scan_box_ranges(f, part, vscan);
  rep.max_variation = detail::max_variation(ranges);
  rep.checks.push_back({"small_variation", rep.max_variation < eps / 2.0,
                        "max scanned box variation " + std::to_string(rep.max_variation) +
                            " vs eps/2 = " + std::to_string(eps / 2.0)});

  rep.sup_distance = sup_distance(f, approx.function, opt.sup_grid_n, p.dim());
  rep.checks.push_back({"good_approximation", rep.sup_distance < eps,
                        "grid sup distance " + std::to_string(rep.sup_distance) + " vs eps = " +
                            std::to_string(eps)});

  bool profiles_ok = true;
  std::string prof_detail = "all profiles non-constant and inside the allowed interval";
  const auto& profs = approx.profiles();
  for (std::size_t b = 0; b < profs.size(); ++b) {
    const auto& pr = profs[b];
    const bool nonconst = pr.amp > 0.0;
    const bool inside = pr.min_value() >= ranges.lo[b] - cap - 1e-12 &&
                        pr.max_value() <= ranges.hi[b] + cap + 1e-12;
    if (!nonconst || !inside) {
      profiles_ok = false;
      prof_detail = "box " + std::to_string(b) + (nonconst ? " leaves the value interval" : " is constant");
      break;
    }
  }
  rep.checks.push_back({"profile_constraints", profiles_ok, prof_detail});

  auto it = itinerary_symbols(approx.function, p, opt.itinerary_symbols);
  const auto& seq = it.sequence;
  rep.symbols = seq.symbols.size();
  rep.fdp = check_fdp(seq);
  rep.checks.push_back({"fdp", rep.fdp.holds && rep.fdp.alphabet_size <= part.size(),
                        "alphabet " + std::to_string(rep.fdp.alphabet_size) + " pieces, " +
                            std::to_string(part.size()) + " boxes"});

  double max_dur = 0.0;
  for (const auto& pc : seq.alphabet.pieces()) max_dur = std::max(max_dur, pc.duration);
  rep.ell = opt.ell_factor * max_dur;
  const auto rev = reverse(seq);
  rep.simple_forward = check_simple_fdp(seq, rep.ell, seq.symbols.size());
  rep.simple_reverse = check_simple_fdp(rev, rep.ell, rev.symbols.size());
  auto witness_text = [](const SimpleFdpResult& r) {
    if (r.holds) return std::string("holds on prefix");
    return "violated at positions " + std::to_string(r.witness->first) + " and " +
           std::to_string(r.witness->second);
  };
  rep.checks.push_back({"simple_fdp_forward", rep.simple_forward.holds, witness_text(rep.simple_forward)});
  rep.checks.push_back({"simple_fdp_reverse", rep.simple_reverse.holds, witness_text(rep.simple_reverse)});

  const std::size_t maxq = std::min(opt.max_period, seq.symbols.size() / 3);
  rep.periodic_forward = falsify_eventual_periodicity(seq, maxq);
  rep.periodic_reverse = falsify_eventual_periodicity(rev, maxq);
  auto period_text = [](const EventualPeriodicityResult& r) {
    if (r.falsified) return std::string("no symbol period up to the bound fits the tail");
    return "consistent with period " + std::to_string(r.period) + " from symbol " +
           std::to_string(r.start);
  };
  rep.checks.push_back({"not_eventually_periodic_forward", rep.periodic_forward.falsified,
                        period_text(rep.periodic_forward)});
  rep.checks.push_back({"not_eventually_periodic_reverse", rep.periodic_reverse.falsified,
                        period_text(rep.periodic_reverse)});
  return rep;
}

}  // namespace qpspec
