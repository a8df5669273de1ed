#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "conetrace/edge_trace.hpp"

namespace ct = conetrace;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

ct::EdgeProblem circle_edge(double L = kTwoPi, int b = 1, int m = 2) {
  return {{ct::circle_scalar_spectrum(0.7, 10), m}, b, L};
}

ct::EdgeOptions closed_modes() {
  ct::EdgeOptions opt;
  opt.cone.quadrature_nu_max = -1.0;
  return opt;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(EdgeTrace, NoBaseIsConeTrace) {
  auto p = circle_edge(kTwoPi, 0);
  for (double z : {0.7, 9.0}) {
    EXPECT_EQ(ct::edge_trace(p, z).value, ct::cone_trace(p.cone, z).value);
  }
}

TEST(EdgeTrace, LatticeMatchesContinuum) {
  const auto p = circle_edge();
  auto lattice = closed_modes();
  lattice.method = ct::EdgeMethod::lattice;
  for (double z : {0.4, 3.0}) {
    const auto a = ct::edge_trace(p, z, closed_modes());
    const auto b = ct::edge_trace(p, z, lattice);
    EXPECT_LT(std::abs(a.value - b.value), a.tail_bound + b.tail_bound + a.error + b.error) << z;
    EXPECT_LT(rel(a.value, b.value), 1e-9) << z;
  }
}

TEST(EdgeTrace, PoissonTermsAreBounded) {
  const auto p = circle_edge();
  auto none = closed_modes();
  none.poisson_cut = 0.0;
  for (double z : {0.3, 1.0, 4.0}) {
    const auto with = ct::edge_trace(p, z, closed_modes());
    const auto without = ct::edge_trace(p, z, none);
    const double gap = with.value - without.value;
    EXPECT_GT(gap, 0.0) << z;
    EXPECT_LE(gap, without.tail_bound) << z;
  }
  // e^{-L z} is below double precision for L z > 45.
  const auto far = ct::edge_trace(p, 8.0, closed_modes());
  const auto far_none = ct::edge_trace(p, 8.0, none);
  EXPECT_EQ(far.value, far_none.value);
}

TEST(EdgeTrace, VolumeScaling) {
  const auto small = circle_edge(kTwoPi);
  const auto large = circle_edge(2.0 * kTwoPi);
  EXPECT_LT(std::abs(ct::edge_trace(large, 40.0).value / ct::edge_trace(small, 40.0).value - 2.0),
            1e-12);
  // Once L j_{nu,1} is of order one the lattice is felt and the ratio is not 2.
  const double r = ct::edge_trace(circle_edge(1.0), 0.2).value /
                   ct::edge_trace(circle_edge(0.5), 0.2).value;
  EXPECT_GT(std::abs(r - 2.0), 1e-3);
}

TEST(EdgeTrace, MonotoneInZAndL) {
  for (double L : {1.0, kTwoPi, 20.0}) {
    const auto p = circle_edge(L);
    double prev = INFINITY;
    for (double z = 0.25; z < 100.0; z *= 2.0) {
      const double v = ct::edge_trace(p, z).value;
      EXPECT_LT(v, prev) << L << " " << z;
      prev = v;
    }
  }
  for (double z : {0.3, 2.0, 30.0}) {
    double prev = 0.0;
    for (double L : {1.0, 3.0, kTwoPi, 20.0}) {
      const double v = ct::edge_trace(circle_edge(L), z).value;
      EXPECT_GT(v, prev) << L << " " << z;
      prev = v;
    }
  }
}

TEST(EdgeTrace, NaiveDoubleSum) {
  ct::CrossSectionSpectrum s;
  s.entries = {{1.7, 1}, {2.5, 2}, {4.0, 1}, {6.25, 3}};
  s.source = ct::SpectrumSource::user_supplied;
  s.f_dim = 1;
  ct::ConeOptions closed;
  closed.quadrature_nu_max = -1.0;
  for (int b : {1, 2}) {
    const ct::EdgeProblem p{{s, 3}, b, 3.0};
    for (double z : {0.5, 4.0}) {
      const double structured = ct::edge_lattice_box(p, z, 5, closed);
      const double naive = ct::naive_edge_sum(p, z, 5);
      EXPECT_LT(rel(structured, naive), 1e-13) << b << " " << z;
    }
  }
}

TEST(EdgeTrace, WeylTerm) {
  // n = 3, m = 2: z tr -> (4 pi)^{-3/2} Gamma(1/2) vol, vol = L pi beta.
  const double L = kTwoPi;
  const double target = std::pow(4.0 * std::numbers::pi, -1.5) * std::sqrt(std::numbers::pi) * L *
                        std::numbers::pi * 0.7;
  EXPECT_NEAR(target, 0.7 * std::numbers::pi / 4.0, 1e-15);
  const double z = 512.0;
  EXPECT_LT(rel(z * ct::edge_trace(circle_edge(L), z).value, target), 0.01);
}

TEST(EdgeTrace, RoutesAgree) {
  const auto p = circle_edge();
  ct::EdgeOptions eig;
  eig.cone.route = ct::Route::eigensum;
  for (double z : {1.0, 16.0}) {
    EXPECT_LT(rel(ct::edge_trace(p, z).value, ct::edge_trace(p, z, eig).value), 1e-9) << z;
  }
}

TEST(EdgeTrace, Preconditions) {
  EXPECT_THROW(ct::edge_trace(circle_edge(kTwoPi, 2, 2), 1.0), ct::TraceClassError);
  EXPECT_THROW(ct::edge_trace(circle_edge(-1.0), 1.0), ct::DomainError);
  EXPECT_THROW(ct::edge_trace(circle_edge(), 0.0), ct::DomainError);
  auto lattice = closed_modes();
  lattice.method = ct::EdgeMethod::lattice;
  EXPECT_THROW(ct::edge_trace(circle_edge(kTwoPi, 2, 3), 1.0, lattice), ct::CapabilityError);
}

TEST(EdgeTrace, HigherBaseDimension) {
  // b = 2, m = 3: box sums B(r) = F - a r^{-2} - c r^{-3} + ..., the deficit
  // coming from cone traces decaying like zeta^{-4}. Extrapolate F from three
  // radii and compare with the Poisson-resummed value.
  const auto p = circle_edge(kTwoPi, 2, 3);
  const double z = 2.0;
  const double full = ct::edge_trace(p, z).value;
  ct::ConeOptions closed;
  closed.quadrature_nu_max = -1.0;
  const double b1 = ct::edge_lattice_box(p, z, 8, closed);
  const double b2 = ct::edge_lattice_box(p, z, 16, closed);
  const double b3 = ct::edge_lattice_box(p, z, 32, closed);
  EXPECT_LT(b1, b2);
  EXPECT_LT(b2, b3);
  EXPECT_LT(b3, full);
  // With u = 1/r: 8 B(u/2) - B(u) = 7F - a u^2, then eliminate a.
  const double e12 = 8.0 * b2 - b1;
  const double e23 = 8.0 * b3 - b2;
  const double extrapolated = (4.0 * e23 - e12) / 21.0;
  EXPECT_LT(rel(extrapolated, full), 2e-4);
  EXPECT_GT(rel(b3, full), 10.0 * rel(extrapolated, full));
}

TEST(EdgeTrace, WorkersDoNotChangeResult) {
  const auto p = circle_edge();
  ct::EdgeOptions one;
  ct::EdgeOptions four;
  four.cone.workers = 4;
  EXPECT_EQ(ct::edge_trace(p, 11.0, one).value, ct::edge_trace(p, 11.0, four).value);
}

TEST(EdgeTrace, Samples) {
  const auto p = circle_edge();
  const auto s = ct::sample_edge_trace(p, ct::log_grid(1.0, 20.0, 4));
  EXPECT_EQ(s.route, ct::Route::lattice);
  EXPECT_NE(s.model_hash, ct::spectrum_hash(p.cone.spectrum));
  EXPECT_EQ(ct::samples_from_csv(ct::samples_to_csv(s)).values, s.values);
}
