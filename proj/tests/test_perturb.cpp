#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qpspec/qpspec.hpp"

using namespace qpspec;

namespace {

FlowParams golden(double w0 = 0.0, double w1 = 0.0) { return FlowParams({1.0, std::sqrt(2.0)}, {w0, w1}); }

SamplingFunction cos_cos() {
  return SamplingFunction::trig({{{1, 0}, 1.0, 0.0}, {{0, 1}, 1.0, 0.0}});
}

// Containment in gamma + sum_{free} t_j e_j + s alpha, decided directly from the box
// description rather than through the partition's own index arithmetic.
bool contains(const BoxPartition& part, const Box& b, std::span<const double> y) {
  const auto alpha = part.flow().alpha();
  const std::size_t piv = part.pivot();
  const double a = alpha[piv];
  const double dp = y[piv] - b.gamma[piv];
  const double s = (a > 0 ? reduce_mod1(dp) : reduce_mod1(-dp)) / std::abs(a);
  if (!(s < b.ell.back())) return false;
  for (std::size_t i = 0; i < part.free_axes().size(); ++i) {
    const std::size_t j = part.free_axes()[i];
    if (!(reduce_mod1(y[j] - b.gamma[j] - s * alpha[j]) < b.ell[i])) return false;
  }
  return true;
}

void check_tiling(const FlowParams& p, std::vector<std::size_t> counts, std::uint64_t seed, int points) {
  BoxPartition part(p, counts);
  std::vector<Box> boxes;
  for (std::size_t b = 0; b < part.size(); ++b) boxes.push_back(part.box(b));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y(p.dim());
  int bad = 0;
  for (int n = 0; n < points; ++n) {
    for (auto& v : y) v = u(rng);
    int hits = 0;
    std::size_t which = 0;
    for (std::size_t b = 0; b < boxes.size(); ++b)
      if (contains(part, boxes[b], y)) {
        ++hits;
        which = b;
      }
    if (hits != 1 || which != part.locate(y).index) ++bad;
  }
  EXPECT_EQ(bad, 0);
}

}  // namespace

TEST(Partition, Invariants) {
  BoxPartition part(golden(), {3, 2});
  EXPECT_EQ(part.pivot(), 1u);
  EXPECT_EQ(part.size(), 6u);
  EXPECT_DOUBLE_EQ(part.ell()[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(part.ell_d(), 1.0 / (2.0 * std::sqrt(2.0)));
  EXPECT_DOUBLE_EQ(part.delta(), 1.0 / (2.0 * std::sqrt(2.0)));  // max over axes
  for (double l : part.ell()) {
    EXPECT_GT(l, 0.0);
    EXPECT_LT(l, 1.0);
  }
  EXPECT_THROW(BoxPartition(golden(), {1, 2}), ConfigError);
  EXPECT_THROW(BoxPartition(FlowParams({1.0, 0.5}, {0.0, 0.0}), {2, 1}), ConfigError);  // ell_d = 1
}

TEST(Partition, ShearedRoundTrip) {
  BoxPartition part(FlowParams({0.3, -1.1, 0.7}, {0.0, 0.0, 0.0}), {2, 3, 2});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> y{u(rng), u(rng), u(rng)};
    auto back = part.from_sheared(part.to_sheared(y));
    EXPECT_LT(torus_distance(back, TorusPoint(y)), 1e-12);
  }
}

TEST(Partition, TilesTheTorus) {
  check_tiling(golden(), {3, 2}, 1, 100000);
  check_tiling(FlowParams({0.3, -1.1, 0.7}, {0.2, 0.0, 0.9}), {2, 3, 2}, 2, 20000);
  check_tiling(FlowParams({-0.45}, {0.0}), {3}, 3, 20000);
}

TEST(BuildPartition, ConstantsUseMinimalGrid) {
  auto part = build_partition(SamplingFunction::constant(1.5), golden(), 0.4, 1);
  EXPECT_EQ(part.counts(), (std::vector<std::size_t>{2, 2}));
  auto ranges = detail::scan_box_ranges(SamplingFunction::constant(1.5), part, 16);
  EXPECT_EQ(detail::max_variation(ranges), 0.0);
  // Small |alpha| forces enough alpha-axis cells to keep ell_d < 1.
  auto slow = build_partition(SamplingFunction::constant(1.0), FlowParams({0.2, 0.1}, {0.0, 0.0}), 0.4, 1);
  EXPECT_LT(slow.ell_d(), 1.0);
}

TEST(BuildPartition, SmallVariationOnIndependentScan) {
  auto part = build_partition(cos_cos(), golden(), 0.4, 1);
  auto ranges = detail::scan_box_ranges(cos_cos(), part, 17);
  EXPECT_LT(detail::max_variation(ranges), 0.2);
}

TEST(BuildPartition, DeltaDecreasesWithN) {
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t n = 1; n <= 5; ++n) {
    auto part = build_partition(cos_cos(), golden(), 0.8, n);
    EXPECT_LE(part.delta(), prev);
    prev = part.delta();
  }
}

TEST(BuildPartition, Errors) {
  auto rough = SamplingFunction::trig({{{200, 0}, 1.0, 0.0}});
  PartitionOptions opt;
  opt.max_count = 16;
  EXPECT_THROW(build_partition(rough, golden(), 0.1, 1, opt), UnresolvableVariationError);
  auto part = std::make_shared<const BoxPartition>(golden(), std::vector<std::size_t>{2, 2});
  auto step = SamplingFunction::box_step(part, std::vector<BoxProfile>(4, BoxProfile{0.0, 0.1, part->ell_d()}));
  EXPECT_THROW(build_partition(step, golden(), 0.4, 1), ConfigError);
  EXPECT_THROW(build_partition(cos_cos(), golden(), 0.0, 1), ConfigError);
}

TEST(BuildFepsn, ConstantProfiles) {
  const double c = -0.75, eps = 0.4;
  for (std::size_t n : {1u, 3u, 10u}) {
    const auto f = SamplingFunction::constant(c);
    auto part = build_partition(f, golden(), eps, n);
    auto ap = build_fepsn(f, part, eps, n);
    const double a = std::min(eps / 8.0, 1.0 / static_cast<double>(n));
    EXPECT_EQ(ap.amplitude, a);
    for (const auto& pr : ap.profiles()) {
      EXPECT_EQ(pr.mid, c);
      EXPECT_EQ(pr.amp, a);
    }
    EXPECT_EQ(ap.alphabet_size, 1u);
    EXPECT_LE(sup_distance(f, ap.function, 64, 2), a / 2.0 + 1e-15);
  }
}

TEST(BuildFepsn, ProfileConstraints) {
  const double eps = 0.4;
  const std::size_t n = 2;
  auto part = build_partition(cos_cos(), golden(), eps, n);
  auto ap = build_fepsn(cos_cos(), part, eps, n);
  const double cap = std::min(eps / 8.0, 1.0 / n);
  ASSERT_EQ(ap.profiles().size(), part.size());
  for (std::size_t b = 0; b < part.size(); ++b) {
    const auto& pr = ap.profiles()[b];
    double lo = 1e300, hi = -1e300;
    for (int k = 0; k <= 64; ++k) {
      const double v = pr.value(pr.len * k / 64.0);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      EXPECT_LE(std::abs(v - pr.mid), pr.amp / 2.0 + 1e-15);
    }
    EXPECT_NEAR(hi - lo, pr.amp, 1e-12);
    EXPECT_GT(pr.amp, 0.0);
    EXPECT_GE(lo, ap.box_inf[b] - cap);
    EXPECT_LE(hi, ap.box_sup[b] + cap);
  }
  EXPECT_LT(sup_distance(cos_cos(), ap.function, 128, 2), eps);
}

TEST(BuildFepsn, DependsOnlyOnAlphaOffset) {
  auto part = build_partition(cos_cos(), golden(), 0.8, 1);
  auto ap = build_fepsn(cos_cos(), part, 0.8, 1);
  // Moving along a free axis inside a box leaves the value unchanged.
  for (std::size_t b = 0; b < part.size(); b += 7) {
    std::vector<double> u1{0.2, 0.4}, u2{0.8, 0.4};
    const auto y1 = part.from_sheared(part.box_point(b, u1));
    const auto y2 = part.from_sheared(part.box_point(b, u2));
    EXPECT_NEAR(ap.function.evaluate(y1), ap.function.evaluate(y2), 1e-12);
  }
}

TEST(Itinerary, ResidenceTimes) {
  const auto p = golden(0.13, 0.71);
  auto part = build_partition(cos_cos(), p, 0.8, 1);
  auto ap = build_fepsn(cos_cos(), part, 0.8, 1);
  auto it = itinerary(ap.function, p, 200.0);
  ASSERT_GT(it.boxes.size(), 10u);
  const double ell_d = part.ell_d();
  for (std::size_t m = 0; m + 1 < it.enter_x.size(); ++m)
    EXPECT_NEAR(it.enter_x[m + 1] - it.enter_x[m], ell_d, 1e-9);
  // Independent check: the orbit stays in the recorded box for the whole visit and
  // leaves it right after.
  for (std::size_t m = 0; m < it.boxes.size(); m += 3) {
    for (double u : {1e-7, 0.5, 1.0 - 1e-7}) {
      auto y = flow(p, it.enter_x[m] + u * ell_d);
      EXPECT_EQ(part.locate(y.coords()).index, it.boxes[m]);
    }
    auto before = flow(p, it.enter_x[m] - 1e-7);
    EXPECT_NE(part.locate(before.coords()).index, it.boxes[m]);
  }
  EXPECT_LE(it.sequence.alphabet.size(), part.size());
  EXPECT_THROW(itinerary(ap.function, p, 5.0 * ell_d), ConfigError);
  EXPECT_THROW(itinerary(cos_cos(), p, 100.0), ConfigError);
}

TEST(Itinerary, ConcatenationMatchesTrace) {
  const auto p = golden(0.4, 0.05);
  auto part = build_partition(cos_cos(), p, 0.4, 2);
  auto ap = build_fepsn(cos_cos(), part, 0.4, 2);
  auto it = itinerary(ap.function, p, 100.0);
  const auto& seq = it.sequence;
  auto cat = concatenate(seq);
  auto tr = trace_potential(ap.function, p, 100.0, 0.01);
  // x near 100 is known to ~1e-14; the profiles have slope up to pi * amp / ell_d.
  const double tol = 1e-12 + 1e-13 * std::numbers::pi * ap.amplitude / part.ell_d();
  std::size_t compared = 0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double x = static_cast<double>(i) * tr.h - seq.start_offset;
    if (x <= 0.0 || x >= cat.total_length()) continue;
    auto [k, local] = cat.locate(x);
    const double dur = seq.duration(k);
    if (local < 1e-9 || dur - local < 1e-9) continue;
    EXPECT_NEAR(cat(x), tr.values[i], tol) << "x=" << x;
    ++compared;
  }
  EXPECT_GT(compared, 9000u);
}

TEST(Itinerary, ScalingKeepsSymbols) {
  const auto p = golden();
  auto part = build_partition(cos_cos(), p, 0.8, 1);
  auto ap = build_fepsn(cos_cos(), part, 0.8, 1);
  auto a = itinerary_symbols(ap.function, p, 3000);
  auto b = itinerary_symbols(SamplingFunction::scaled(2.0, ap.function), p, 3000);
  EXPECT_EQ(a.sequence.symbols, b.sequence.symbols);
  ASSERT_EQ(a.sequence.alphabet.size(), b.sequence.alphabet.size());
  for (std::size_t i = 0; i < a.sequence.alphabet.size(); ++i) {
    const auto& pa = a.sequence.alphabet.pieces()[i];
    const auto& pb = b.sequence.alphabet.pieces()[i];
    EXPECT_EQ(pa.duration, pb.duration);
    for (double t : {0.0, 0.1, 0.3}) EXPECT_DOUBLE_EQ(pb.value(t), 2.0 * pa.value(t));
  }
  const double ell = 3.0 * part.ell_d();
  EXPECT_EQ(check_simple_fdp(a.sequence, ell, 3000).holds, check_simple_fdp(b.sequence, ell, 3000).holds);
  EXPECT_EQ(falsify_eventual_periodicity(a.sequence, 200).falsified,
            falsify_eventual_periodicity(b.sequence, 200).falsified);
}

TEST(Aperiodicity, AdjustmentOnlyWhenRankDeficient) {
  auto full = ensure_aperiodic(cos_cos(), 2, 0.4);
  EXPECT_FALSE(full.adjusted);
  EXPECT_EQ(full.rank_before, 2u);
  auto single = SamplingFunction::trig({{{1, 0}, 1.0, 0.0}});
  auto adj = ensure_aperiodic(single, 2, 0.4);
  EXPECT_TRUE(adj.adjusted);
  EXPECT_EQ(adj.rank_before, 1u);
  EXPECT_LE(sup_distance(single, adj.function, 32, 2), adj.sup_change + 1e-15);
  EXPECT_DOUBLE_EQ(adj.sup_change, 0.4 / 16.0);
  EXPECT_EQ(ensure_aperiodic(adj.function, 2, 0.4).rank_before, 2u);
  auto c = ensure_aperiodic(SamplingFunction::constant(2.0), 2, 0.4);
  EXPECT_TRUE(c.adjusted);
  EXPECT_NEAR(c.function.evaluate(std::vector<double>{0.25, 0.25}), 2.0, 1e-15);
}

TEST(Verify, FullPipelineCoarse) {
  const auto p = golden();
  const double eps = 0.4;
  auto part = build_partition(cos_cos(), p, eps, 1);
  auto ap = build_fepsn(cos_cos(), part, eps, 1);
  VerificationOptions opt;
  opt.itinerary_symbols = 3000;
  opt.max_period = 100;
  auto rep = verify_construction(cos_cos(), ap, p, eps, 1, opt);
  for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
  for (const char* name : {"small_variation", "good_approximation", "profile_constraints", "fdp",
                           "simple_fdp_forward", "simple_fdp_reverse", "not_eventually_periodic_forward",
                           "not_eventually_periodic_reverse"})
    EXPECT_NE(rep.find(name), nullptr) << name;
  EXPECT_EQ(rep.symbols, 3000u);
}

TEST(Verify, NonMinimalFlowIsEventuallyPeriodic) {
  const FlowParams p({1.0, 0.0}, {0.0, 0.3});
  ASSERT_TRUE(find_rational_dependence(p.alpha(), 3, 1e-9).has_value());
  const double eps = 0.8;
  auto part = build_partition(cos_cos(), p, eps, 1);
  auto ap = build_fepsn(cos_cos(), part, eps, 1);
  VerificationOptions opt;
  opt.itinerary_symbols = 2000;
  opt.max_period = 200;  // the itinerary repeats every N_d = 64 visits
  auto rep = verify_construction(cos_cos(), ap, p, eps, 1, opt);
  EXPECT_FALSE(rep.periodic_forward.falsified);
  EXPECT_EQ(part.counts().back() % rep.periodic_forward.period, 0u);
  EXPECT_FALSE(rep.find("not_eventually_periodic_forward")->passed);
  EXPECT_TRUE(rep.find("good_approximation")->passed);
}
