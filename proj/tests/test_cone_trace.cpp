#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "conetrace/cone_trace.hpp"

namespace ct = conetrace;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

ct::ConeProblem circle_problem(double beta, int m, std::uint64_t cutoff = 10) {
  return {ct::circle_scalar_spectrum(beta, cutoff), m};
}

}  // namespace

TEST(ModeKernel, SymmetryAndBoundary) {
  for (double nu : {0.0, 0.5, 2.3, 15.0}) {
    for (double z : {0.3, 4.0, 40.0}) {
      EXPECT_LT(rel(ct::mode_kernel(nu, z, 0.7, 0.2), ct::mode_kernel(nu, z, 0.2, 0.7)), 1e-14);
      EXPECT_EQ(ct::mode_kernel(nu, z, 1.0, 0.4), 0.0);
    }
  }
  EXPECT_THROW(ct::mode_kernel(1.0, 0.0, 0.5, 0.2), ct::DomainError);
  EXPECT_THROW(ct::mode_kernel(1.0, 1.0, 1.5, 0.2), ct::DomainError);
}

TEST(ModeKernel, HalfIntegerClosedForm) {
  // nu = 1/2: G = sinh(yz) sinh(z(1-x)) / (z sinh z) for y <= x.
  auto g = [](double z, double x, double y) {
    return std::sinh(y * z) * std::sinh(z * (1.0 - x)) / (z * std::sinh(z));
  };
  EXPECT_LT(rel(ct::mode_kernel(0.5, 1.0, 0.8, 0.4), g(1.0, 0.8, 0.4)), 1e-13);
  EXPECT_LT(rel(ct::mode_kernel(0.5, 7.0, 0.3, 0.1), g(7.0, 0.3, 0.1)), 1e-13);
}

TEST(ModeTrace, QuadratureMatchesEigensum) {
  for (double nu : {0.5, 1.7, 3.2, 7.0}) {
    for (double z : {1.0, 5.0, 25.0}) {
      const auto q = ct::mode_trace(nu, z);
      const auto e = ct::mode_eigensum(nu, z, 1);
      EXPECT_LT(rel(q.value, e.value), 1e-8) << nu << " " << z;
      EXPECT_LT(std::abs(q.value - ct::mode_trace_closed(nu, z, 1)), 1e-11) << nu << " " << z;
    }
  }
}

TEST(ModeTrace, HalfIntegerSum) {
  // j_{1/2,k} = k pi: sum 1/(k^2 pi^2 + z^2) = (z coth z - 1) / (2 z^2).
  for (double z : {0.5, 3.0, 30.0}) {
    const double exact = (z / std::tanh(z) - 1.0) / (2.0 * z * z);
    EXPECT_LT(rel(ct::mode_trace(0.5, z).value, exact), 1e-11);
    EXPECT_LT(rel(ct::mode_trace_closed(0.5, z, 1), exact), 1e-13);
  }
}

TEST(ModeTrace, DecayAndBounds) {
  for (double nu : {0.0, 1.0, 6.0, 30.0}) {
    double prev = ct::mode_trace(nu, 0.25).value;
    for (double z = 0.5; z <= 256.0; z *= 2.0) {
      const double v = ct::mode_trace(nu, z).value;
      EXPECT_LT(v, prev);
      // h_1 = I_{nu+1} / (2 z I_nu) < 1 / (2 z)
      EXPECT_LE(z * v, 0.5);
      prev = v;
    }
  }
}

TEST(ModeTrace, LargeOrderDecay) {
  // sum_k j_{nu,k}^{-2} = 1 / (4 (nu + 1)): nu h_1 stays bounded and tends to 1/4.
  for (double z : {0.5, 2.0}) {
    double last = 0.0;
    for (double nu : {10.0, 100.0, 1000.0, 10000.0}) {
      last = nu * ct::mode_trace_closed(nu, z, 1);
      EXPECT_LT(last, 0.25);
    }
    EXPECT_NEAR(last, 0.25, 1e-3);
  }
}

TEST(ModeTrace, HigherPowersAgree) {
  for (double nu : {0.0, 0.5, 3.2, 7.0, 25.0}) {
    for (double z : {0.7, 4.0, 20.0, 90.0}) {
      const double e2 = ct::mode_eigensum(nu, z, 2).value;
      EXPECT_LT(rel(ct::mode_trace_kernel(nu, z, 2).value, e2), 1e-6) << nu << " " << z;
      EXPECT_LT(rel(ct::mode_trace_closed(nu, z, 2), e2), 1e-9) << nu << " " << z;
      const double e3 = ct::mode_eigensum(nu, z, 3).value;
      EXPECT_LT(rel(ct::mode_trace_closed(nu, z, 3), e3), 1e-7) << nu << " " << z;
    }
  }
}

TEST(ModeTrace, RayleighAndRiccatiOverlap) {
  for (double nu : {3.0, 40.0, 300.0}) {
    for (double q : {0.1, 0.25}) {
      const double z = std::sqrt(q) * (nu + 2.0);
      EXPECT_LT(rel(ct::rayleigh_resolvent_power(nu, z * z, 2),
                    ct::detail::riccati_resolvent_power(nu, z, 2)),
                1e-8);
    }
  }
}

TEST(ConeTrace, RouteAgreement) {
  const auto p = circle_problem(0.7, 2);
  ct::ConeOptions kernel;
  ct::ConeOptions eig;
  eig.route = ct::Route::eigensum;
  for (double z : {2.0, 8.0, 32.0}) {
    const auto a = ct::cone_trace(p, z, kernel);
    const auto b = ct::cone_trace(p, z, eig);
    EXPECT_LT(rel(a.value, b.value), 1e-6) << z;
    EXPECT_GT(a.value, 0.0);
  }
}

TEST(ConeTrace, PositiveAndDecreasing) {
  const auto p = circle_problem(0.7, 2);
  double prev = INFINITY;
  for (double z = 0.5; z < 200.0; z *= 1.7) {
    const double v = ct::cone_trace(p, z).value;
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(ConeTrace, WeylLimit) {
  // z^2 tr(Delta + z^2)^{-2} -> area / (4 pi) = beta / 4.
  const auto p = circle_problem(0.7, 2);
  const double z = 400.0;
  EXPECT_NEAR(z * z * ct::cone_trace(p, z).value, 0.175, 0.175 * 0.01);
}

TEST(ConeTrace, TraceClassViolation) {
  EXPECT_THROW(ct::cone_trace(circle_problem(0.7, 1), 3.0), ct::TraceClassError);
  EXPECT_THROW(ct::cone_trace(circle_problem(0.7, 2), 0.0), ct::DomainError);
}

TEST(ConeTrace, TailBoundCoversTruncation) {
  const auto p = circle_problem(0.7, 2);
  for (double z : {3.0, 20.0}) {
    ct::ConeOptions full;
    ct::ConeOptions half = full;
    half.explicit_slope = 1.0;
    half.explicit_pad = 5.0;
    const auto a = ct::cone_trace(p, z, full);
    const auto b = ct::cone_trace(p, z, half);
    EXPECT_LT(std::abs(a.value - b.value), b.tail_bound + a.tail_bound + 1e-14 * a.value) << z;
    EXPECT_GT(b.tail, a.tail);
  }
}

TEST(ConeTrace, WorkersDoNotChangeResult) {
  const auto p = circle_problem(0.7, 2);
  ct::ConeOptions one;
  ct::ConeOptions four;
  four.workers = 4;
  EXPECT_EQ(ct::cone_trace(p, 17.0, one).value, ct::cone_trace(p, 17.0, four).value);
}

TEST(ConeTrace, WeylTailForIterated) {
  const auto inner = ct::circle_scalar_spectrum(0.7, 200);
  const auto small = ct::iterated_cone_spectrum(inner, ct::DoubleBc::dirichlet_double, 40.0);
  const auto large = ct::iterated_cone_spectrum(inner, ct::DoubleBc::dirichlet_double, 80.0);
  for (double z : {2.0, 10.0}) {
    const auto a = ct::cone_trace({small, 2}, z);
    const auto b = ct::cone_trace({large, 2}, z);
    EXPECT_LT(std::abs(a.value - b.value), a.tail_bound + b.tail_bound) << z;
    EXPECT_LT(a.tail_bound, 0.05 * a.value);
  }
}

TEST(TraceSamples, CsvRoundTrip) {
  const auto p = circle_problem(0.7, 2);
  const auto s = ct::sample_cone_trace(p, ct::log_grid(2.0, 40.0, 5));
  const auto text = ct::samples_to_csv(s);
  const auto back = ct::samples_from_csv(text);
  EXPECT_EQ(back.values, s.values);
  EXPECT_EQ(back.z_grid, s.z_grid);
  EXPECT_EQ(back.tail_bound, s.tail_bound);
  EXPECT_EQ(back.model_hash, s.model_hash);
  EXPECT_EQ(back.route, s.route);
  EXPECT_EQ(back.m, 2);
  EXPECT_EQ(ct::samples_to_csv(back), text);
}

TEST(OffDiagonal, DecaySlope) {
  const ct::Interval near{0.6, 1.0}, far{0.0, 0.3};
  for (double nu : {2.0, 3.0, 8.0, 20.0}) {
    EXPECT_LE(ct::offdiag_decay_probe(nu, near, far).slope, -6.0) << nu;
  }
  const double narrow = ct::offdiag_decay_probe(3.0, {0.6, 1.0}, {0.0, 0.5}).slope;
  const double wide = ct::offdiag_decay_probe(3.0, {0.6, 1.0}, {0.0, 0.2}).slope;
  EXPECT_LT(wide, narrow);
}

TEST(OffDiagonal, Preconditions) {
  EXPECT_THROW(ct::offdiag_decay_probe(3.0, {0.3, 1.0}, {0.0, 0.3}), ct::PreconditionError);
  EXPECT_THROW(ct::offdiag_decay_probe(3.0, {0.2, 0.5}, {0.4, 0.9}), ct::PreconditionError);
  EXPECT_THROW(ct::offdiag_decay_probe(3.0, {0.6, 1.2}, {0.0, 0.3}), ct::PreconditionError);
}
