#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qpspec/qpspec.hpp"

using namespace qpspec;

namespace {

constexpr double kPi = std::numbers::pi;
const cplx I(0.0, 1.0);

FlowParams golden() { return FlowParams({1.0, std::sqrt(2.0)}, {0.0, 0.0}); }

SamplingFunction cos_cos(double c = 1.0) {
  return SamplingFunction::trig({{{1, 0}, c, 0.0}, {{0, 1}, c, 0.0}});
}

PotentialTrace constant_trace(double c, double X, double h) {
  return trace_potential(SamplingFunction::constant(c), golden(), X, h);
}

void expect_mat_near(const Mat2<cplx>& m, cplx a, cplx b, cplx c, cplx d, double tol) {
  EXPECT_LE(std::abs(m.a - a), tol);
  EXPECT_LE(std::abs(m.b - b), tol);
  EXPECT_LE(std::abs(m.c - c), tol);
  EXPECT_LE(std::abs(m.d - d), tol);
}

double max_entry_diff(const Mat2<cplx>& x, const Mat2<cplx>& y) {
  return std::max({std::abs(x.a - y.a), std::abs(x.b - y.b), std::abs(x.c - y.c), std::abs(x.d - y.d)});
}

}  // namespace

TEST(Propagate, FreeZeroEnergy) {
  auto M = propagate(constant_trace(0.0, 2.0, 0.01), 0.0).m;
  expect_mat_near(M, 1.0, 2.0, 0.0, 1.0, 1e-12);
}

TEST(Propagate, FreeRotationAtPi) {
  auto M = propagate(constant_trace(0.0, kPi, kPi / 1000.0), 1.0).m;
  expect_mat_near(M, -1.0, 0.0, 0.0, -1.0, 1e-10);
}

TEST(Propagate, HyperbolicClosedForm) {
  for (auto [c, E] : {std::pair{2.0, 1.0}, std::pair{3.0, -1.0}, std::pair{0.5, -4.0}}) {
    const double k = std::sqrt(c - E);
    auto M = propagate(constant_trace(c, 1.0, 0.01), E).m;
    expect_mat_near(M, std::cosh(k), std::sinh(k) / k, k * std::sinh(k), std::cosh(k), 1e-11);
  }
}

TEST(Propagate, IdentityAtZeroLengthAndEmptyRejected) {
  PotentialTrace one;
  one.h = 0.01;
  one.values = {3.0};
  auto t = propagate(one, cplx(2.0, 1.0));
  expect_mat_near(t.m, 1.0, 0.0, 0.0, 1.0, 0.0);
  EXPECT_EQ(t.x, 0.0);
  PotentialTrace empty;
  empty.h = 0.01;
  EXPECT_THROW(propagate(empty, 1.0), ConfigError);
}

TEST(Propagate, ResonantStepUsesSeriesBlock) {
  // E equal to the sample value makes k = 0 in every block.
  auto M = propagate(constant_trace(1.5, 2.0, 0.01), 1.5).m;
  expect_mat_near(M, 1.0, 2.0, 0.0, 1.0, 1e-12);
  auto blk = step_block(1e-14, 0.01);
  EXPECT_NEAR(blk.a, 1.0, 1e-15);
  EXPECT_NEAR(blk.b, 0.01, 1e-15);
}

TEST(Propagate, RealEnergyGivesRealEntries) {
  auto tr = trace_potential(cos_cos(), golden(), 50.0, 0.005);
  for (double E : {-1.0, 0.5, 3.0}) {
    auto M = propagate(tr, E).m;
    for (auto z : {M.a, M.b, M.c, M.d}) EXPECT_LT(std::abs(z.imag()), 1e-12);
  }
}

TEST(Propagate, UnimodularOnLongTraces) {
  // 1e5 steps at |V| <= 4; energies where the product stays representable.
  auto tr = trace_potential(cos_cos(2.0), golden(), 500.0, 0.005);
  ASSERT_EQ(tr.size(), 100001u);
  for (cplx E : {cplx(10.0, 0.0), cplx(5.0, 0.0), cplx(2.0, 0.0), cplx(6.0, 0.1)}) {
    auto t = propagate(tr, E);
    ASSERT_TRUE(std::isfinite(t.norm())) << "E=" << E;
    EXPECT_LT(t.det_defect(), 1e-8) << "E=" << E;
  }
  // Strongly hyperbolic energies overflow at 1e5 steps, so the chunk is shorter there.
  auto short_tr = trace_potential(cos_cos(2.0), golden(), 50.0, 0.005);
  for (cplx E : {cplx(-10.0, 0.0), cplx(-4.0, 1.0), cplx(-2.0, 0.2)}) EXPECT_LT(propagate(short_tr, E).det_defect(), 1e-8);
}

TEST(Cocycle, IdentityAndConsistency) {
  const auto f = cos_cos();
  const auto p = golden();
  auto id = cocycle_step(f, p, cplx(0.5, 0.0), 1.25, 1.25);
  expect_mat_near(id.m, 1.0, 0.0, 0.0, 1.0, 0.0);
  auto a = cocycle_step(f, p, cplx(0.5, 0.0), 0.0, 1.0);
  auto b = propagate(trace_potential(f, p, 1.0, 0.005), 0.5);
  EXPECT_LT(max_entry_diff(a.m, b.m), 1e-13);
  EXPECT_THROW(cocycle_step(f, p, 0.5, 2.0, 1.0), ConfigError);
}

TEST(Cocycle, CompositionLaw) {
  const auto f = cos_cos();
  const auto p = golden();
  for (cplx E : {cplx(0.5, 0.0), cplx(-1.0, 0.0), cplx(2.0, 1.0)}) {
    auto s01 = cocycle_step(f, p, E, 0.0, 1.0);
    auto s12 = cocycle_step(f, p, E, 1.0, 2.0);
    auto s02 = cocycle_step(f, p, E, 0.0, 2.0);
    const auto prod = s12.m * s01.m;
    EXPECT_LT(max_entry_diff(prod, s02.m) / std::max(1.0, s02.norm()), 1e-8);
  }
  // Uneven split points.
  auto s = cocycle_step(f, p, 0.5, 0.0, 0.37).m;
  auto t = cocycle_step(f, p, 0.5, 0.37, 3.0).m;
  auto u = cocycle_step(f, p, 0.5, 0.0, 3.0).m;
  EXPECT_LT(max_entry_diff(t * s, u) / std::max(1.0, operator_norm(u)), 1e-4);
}

TEST(MFunction, FreeClosedForms) {
  const auto zero = SamplingFunction::constant(0.0);
  const auto p = golden();
  auto m1 = m_plus(zero, p, I);
  EXPECT_NEAR(m1.m.real(), -0.70711, 1e-5);
  EXPECT_NEAR(m1.m.imag(), 0.70711, 1e-5);
  for (cplx E : {I, cplx(1.0, 1.0), cplx(4.0, 0.5)}) {
    auto v = m_plus(zero, p, E);
    EXPECT_LT(std::abs(v.m - I * std::sqrt(E)), 1e-4) << "E=" << E;
    EXPECT_GT(v.X, 0.0);
    EXPECT_GE(v.error_estimate, 0.0);
  }
  // i sqrt(4 + 0.5i) to five places.
  auto v = m_plus(zero, p, cplx(4.0, 0.5));
  EXPECT_NEAR(v.m.real(), -0.124757, 1e-5);
  EXPECT_NEAR(v.m.imag(), 2.003886, 1e-5);
}

TEST(MFunction, ConstantShift) {
  auto v = m_plus(SamplingFunction::constant(2.0), golden(), cplx(2.0, 1.0));
  EXPECT_NEAR(v.m.real(), -0.70711, 1e-5);
  EXPECT_NEAR(v.m.imag(), 0.70711, 1e-5);
}

TEST(MFunction, HerglotzOnQuasiPeriodicPotential) {
  const auto f = cos_cos();
  for (cplx E : {cplx(-1.0, 0.5), cplx(0.0, 0.2), cplx(2.0, 1.0), cplx(5.0, 0.1), cplx(1.0, 0.05)}) {
    for (double w : {0.0, 0.3}) {
      auto v = m_plus(f, FlowParams({1.0, std::sqrt(2.0)}, {w, 0.5 * w}), E);
      EXPECT_GT(v.m.imag(), 0.0) << "E=" << E;
    }
  }
}

TEST(MFunction, MoebiusCrossCheck) {
  const auto f = cos_cos();
  const auto p = golden();
  for (cplx E : {cplx(2.0, 1.0), cplx(-0.5, 0.5), cplx(1.0, 0.3)}) {
    const double X = 60.0;
    auto v = m_plus(f, p, E, X, 0.005, 1e-4);
    const cplx alt = m_plus_moebius(f, p, E, X);
    EXPECT_LE(std::abs(v.m - alt), std::max(10.0 * v.error_estimate, 1e-9)) << "E=" << E;
  }
}

TEST(MFunction, NonContractionAndPreconditions) {
  const auto f = cos_cos();
  EXPECT_THROW(m_plus(f, golden(), cplx(1.0, 0.05), 2.0), NonContractionError);
  EXPECT_THROW(m_plus(f, golden(), cplx(1.0, 0.01)), ConfigError);
}

TEST(Floquet, FreeExamples) {
  auto period = constant_trace(0.0, 1.0, 0.005);
  EXPECT_NEAR(floquet_discriminant(period, kPi * kPi), -2.0, 1e-10);
  EXPECT_NEAR(floquet_discriminant(period, -1.0), 2.0 * std::cosh(1.0), 1e-10);
  EXPECT_NEAR(floquet_discriminant(period, -1.0), 3.08616, 1e-5);
}

TEST(Floquet, ConstantBandIsHalfLine) {
  const double c = 1.3;
  auto period = constant_trace(c, 1.0, 0.005);
  for (int i = 0; i <= 200; ++i) {
    const double E = -3.0 + 0.05 * i;
    if (std::abs(E - c) < 1e-9) continue;
    EXPECT_EQ(std::abs(floquet_discriminant(period, E)) <= 2.0, E >= c) << "E=" << E;
  }
}
