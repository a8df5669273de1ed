#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "conetrace/bessel_zeros.hpp"
#include "conetrace/spectra.hpp"

namespace ct = conetrace;

TEST(Circle, SmallExamples) {
  const auto a = ct::circle_scalar_spectrum(1.0, 2);
  const std::vector<ct::SpectrumEntry> ea{{0.0, 1}, {1.0, 2}, {2.0, 2}};
  EXPECT_EQ(a.entries, ea);
  EXPECT_EQ(a.f_dim, 1);
  EXPECT_EQ(a.source, ct::SpectrumSource::analytic);
  const auto b = ct::circle_scalar_spectrum(0.5, 1);
  const std::vector<ct::SpectrumEntry> eb{{0.0, 1}, {2.0, 2}};
  EXPECT_EQ(b.entries, eb);
  EXPECT_THROW(ct::circle_scalar_spectrum(0.0, 3), ct::DomainError);
  EXPECT_THROW(ct::circle_scalar_spectrum(1.0, 0), ct::DomainError);
}

TEST(Circle, WeylSlope) {
  for (double beta : {0.5, 0.7, 1.0, 2.5}) {
    const auto s = ct::circle_scalar_spectrum(beta, 400);
    EXPECT_NEAR(ct::weyl_slope(s) / (2.0 * beta), 1.0, 0.2) << beta;
  }
}

TEST(Shift, BlockFormula) {
  EXPECT_DOUBLE_EQ(ct::scalar_a_shift(0, 2), 9.0 / 4.0);
  EXPECT_DOUBLE_EQ(ct::scalar_a_shift(0, 1), 1.0);
  for (int f = 0; f <= 6; ++f) {
    for (int ell = 0; ell <= f; ++ell) {
      EXPECT_DOUBLE_EQ(ct::scalar_a_shift(ell, f),
                       ct::scalar_a_shift(ell + 1, f, ct::FormBlock::dx_omega));
    }
  }
  EXPECT_THROW(ct::scalar_a_shift(3, 2), ct::DomainError);
  EXPECT_THROW(ct::scalar_a_shift(0, 2, ct::FormBlock::dx_omega), ct::DomainError);
}

TEST(Spectrum, NuAConsistency) {
  const auto s = ct::circle_scalar_spectrum(0.7, 30);
  for (const auto& e : s.entries) {
    const double q = ct::q_eigenvalue(e.nu);
    EXPECT_DOUBLE_EQ(ct::a_eigenvalue(e.nu), q * (q + 1.0) + 0.25);
    EXPECT_NEAR(ct::a_eigenvalue(e.nu), (q + 0.5) * (q + 0.5), 1e-12 * (1.0 + e.nu * e.nu));
  }
}

TEST(Iterated, ConstantInnerModeGivesBesselZeros) {
  const auto inner = ct::circle_scalar_spectrum(1.0, 40);
  const auto s = ct::iterated_cone_spectrum(inner, ct::DoubleBc::dirichlet_double, 30.0);
  EXPECT_EQ(s.f_dim, 2);
  EXPECT_EQ(s.source, ct::SpectrumSource::computed);
  const auto j0 = ct::bessel_zeros_below(0.0, 30.0, ct::ZeroKind::j);
  for (double j : j0) {
    const double nu = std::sqrt(j * j + 9.0 / 4.0);
    if (nu > 30.0) continue;
    bool found = false;
    for (const auto& e : s.entries) found = found || (std::abs(e.nu - nu) < 1e-12 && e.mult == 1);
    EXPECT_TRUE(found) << nu;
  }
  // First entry: nu = 0 inner mode, first zero, outer shift 9/4.
  EXPECT_NEAR(s.entries.front().nu,
              std::sqrt(2.404825557695773 * 2.404825557695773 + 2.25), 1e-12);
}

TEST(Iterated, CutoffOnlyAppends) {
  const auto inner = ct::circle_scalar_spectrum(1.0, 60);
  for (auto bc : {ct::DoubleBc::dirichlet_double, ct::DoubleBc::neumann_double}) {
    const auto a = ct::iterated_cone_spectrum(inner, bc, 20.0);
    const auto b = ct::iterated_cone_spectrum(inner, bc, 40.0);
    ASSERT_LT(a.entries.size(), b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) EXPECT_EQ(a.entries[i], b.entries[i]);
    EXPECT_GT(b.entries[a.entries.size()].nu, 20.0);
  }
}

TEST(Iterated, ResolutionInvariance) {
  const auto inner = ct::circle_scalar_spectrum(0.7, 40);
  for (auto bc : {ct::DoubleBc::dirichlet_double, ct::DoubleBc::neumann_double}) {
    const auto a = ct::iterated_cone_spectrum(inner, bc, 25.0);
    const auto b = ct::iterated_cone_spectrum(inner, bc, 25.0, ct::kDefaultScanStep / 2.0);
    ASSERT_EQ(a.entries.size(), b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      EXPECT_NEAR(a.entries[i].nu, b.entries[i].nu, 1e-9);
      EXPECT_EQ(a.entries[i].mult, b.entries[i].mult);
    }
  }
}

TEST(Iterated, WorkerCountDoesNotMatter) {
  const auto inner = ct::circle_scalar_spectrum(0.7, 40);
  const auto a = ct::iterated_cone_spectrum(inner, ct::DoubleBc::neumann_double, 25.0,
                                            ct::kDefaultScanStep, 1);
  const auto b = ct::iterated_cone_spectrum(inner, ct::DoubleBc::neumann_double, 25.0,
                                            ct::kDefaultScanStep, 4);
  EXPECT_EQ(a.entries, b.entries);
}

TEST(Iterated, WeylModel) {
  const double beta = 0.7;
  const auto inner = ct::circle_scalar_spectrum(beta, 200);
  for (auto bc : {ct::DoubleBc::dirichlet_double, ct::DoubleBc::neumann_double}) {
    const auto s = ct::iterated_cone_spectrum(inner, bc, 120.0);
    ASSERT_EQ(s.tail.kind, ct::TailModel::Kind::weyl);
    EXPECT_NEAR(ct::weyl_slope(s) / s.tail.a, 1.0, 0.2);
    for (double nu : {60.0, 90.0, 119.0}) {
      const double n = double(s.count_below(nu));
      EXPECT_LT(std::abs(n - s.tail.weyl_count(nu)) / n, 0.02) << nu;
    }
  }
}

TEST(Iterated, IncompleteInnerRejected) {
  const auto inner = ct::circle_scalar_spectrum(1.0, 10);
  EXPECT_THROW(ct::iterated_cone_spectrum(inner, ct::DoubleBc::dirichlet_double, 20.0),
               ct::PreconditionError);
}

TEST(Witt, Reports) {
  const auto circle = ct::witt_check(ct::circle_scalar_spectrum(1.0, 10));
  EXPECT_FALSE(circle.satisfied);
  ASSERT_EQ(circle.offending_modes.size(), 2u);
  EXPECT_EQ(circle.offending_modes[0].nu, 0.0);
  EXPECT_EQ(circle.offending_modes[1].nu, 1.0);
  EXPECT_DOUBLE_EQ(circle.margin, -1.5);

  ct::CrossSectionSpectrum s;
  s.entries = {{2.0, 1}, {3.0, 4}};
  const auto ok = ct::witt_check(s);
  EXPECT_TRUE(ok.satisfied);
  EXPECT_DOUBLE_EQ(ok.margin, 0.5);
  EXPECT_TRUE(ok.offending_modes.empty());

  const auto depth2 = ct::witt_check(ct::iterated_cone_spectrum(
      ct::circle_scalar_spectrum(1.0, 30), ct::DoubleBc::dirichlet_double, 20.0));
  EXPECT_TRUE(depth2.satisfied);
  EXPECT_NEAR(depth2.margin, std::sqrt(2.404825557695773 * 2.404825557695773 + 2.25) - 1.5, 1e-12);
  EXPECT_EQ(depth2.satisfied, depth2.margin > 0.0);
}

TEST(Persistence, RoundTripBitExact) {
  const auto inner = ct::circle_scalar_spectrum(0.7, 40);
  const auto s = ct::iterated_cone_spectrum(inner, ct::DoubleBc::neumann_double, 25.0);
  const auto text = ct::serialize_spectrum(s);
  const auto back = ct::parse_spectrum(text);
  EXPECT_EQ(back.entries, s.entries);
  EXPECT_EQ(back.f_dim, s.f_dim);
  EXPECT_EQ(back.source, s.source);
  EXPECT_EQ(back.params, s.params);
  EXPECT_EQ(back.complete_below, s.complete_below);
  EXPECT_EQ(back.tail.a, s.tail.a);
  EXPECT_EQ(ct::serialize_spectrum(back), text);
  EXPECT_EQ(ct::spectrum_hash(back), ct::spectrum_hash(s));

  const auto c = ct::circle_scalar_spectrum(0.7, 12);
  EXPECT_EQ(ct::serialize_spectrum(ct::parse_spectrum(ct::serialize_spectrum(c))),
            ct::serialize_spectrum(c));
}

TEST(Persistence, TamperDetected) {
  auto text = ct::serialize_spectrum(ct::circle_scalar_spectrum(1.0, 5));
  const auto pos = text.find("\n3,2,");
  ASSERT_NE(pos, std::string::npos);
  text[pos + 1] = '4';
  EXPECT_THROW(ct::parse_spectrum(text), ct::Error);
}
