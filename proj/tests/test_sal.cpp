#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "conetrace/sal.hpp"

namespace ct = conetrace;

namespace {

double alternating(int k) { return (k % 2 == 0) ? 1.0 : -1.0; }

// e^{-x} (1 + zeta^2)^{-2}, expansion sum_n (n+1)(-1)^n zeta^{-4-2n}.
ct::SymbolProvider damped_symbol() {
  std::vector<ct::PowerLogTerm> g;
  for (int n = 0; n <= 6; ++n) g.push_back({-4.0 - 2.0 * n, 0, (n + 1) * alternating(n)});
  return ct::separable_symbol([](double x) { return std::exp(-x); }, alternating,
                              [](double z) {
                                const double q = 1.0 + z * z;
                                return 1.0 / (q * q);
                              },
                              g, -18.0);
}

// e^{-x} / (1 + zeta): int_0^inf = u e^u E_1(u), u = 1/z.
ct::SymbolProvider resolvent_symbol() {
  std::vector<ct::PowerLogTerm> g;
  for (int n = 1; n <= 8; ++n) g.push_back({-double(n), 0, alternating(n + 1)});
  return ct::separable_symbol([](double x) { return std::exp(-x); }, alternating,
                              [](double z) { return 1.0 / (1.0 + z); }, g, -9.0);
}

std::vector<double> z_grid(double lo, double hi) {
  std::vector<double> z;
  for (double v = lo; v <= hi * 1.0001; v *= std::sqrt(2.0)) z.push_back(v);
  return z;
}

}  // namespace

TEST(Regularized, ElementaryCases) {
  EXPECT_NEAR(ct::regularized_integral([](double t) { return std::exp(-t); }), 1.0, 1e-14);
  // 1/(1+t) ~ 1/t - 1/t^2 + ...: the finite part vanishes.
  const ct::EndExpansion inf{{{-1, 0, 1}, {-2, 0, -1}, {-3, 0, 1}, {-4, 0, -1}}, -5.0};
  EXPECT_NEAR(ct::regularized_integral([](double t) { return 1.0 / (1.0 + t); }, inf), 0.0, 1e-13);
  // A bare power has finite part 0 for every exponent.
  for (double a : {-2.5, -1.0, 0.0, 1.5}) {
    const ct::EndExpansion both{{{a, 0, 1.0}}, -INFINITY};
    const ct::EndExpansion zero{{{a, 0, 1.0}}, INFINITY};
    EXPECT_NEAR(ct::regularized_integral([a](double t) { return std::pow(t, a); }, both, zero), 0.0,
                1e-12)
        << a;
  }
}

TEST(Regularized, PowerLogContinuation) {
  // int_0^1 t^a log^j t = (-1)^j j! / (a+1)^{j+1}; int_1^inf = (-1)^{j+1} j! / (a+1)^{j+1}.
  EXPECT_DOUBLE_EQ(ct::power_log_integral(0.5, 0, 0.0, 1.0), 1.0 / 1.5);
  EXPECT_DOUBLE_EQ(ct::power_log_integral(0.5, 2, 0.0, 1.0), 2.0 / std::pow(1.5, 3));
  EXPECT_DOUBLE_EQ(ct::power_log_integral(-3.0, 1, 1.0, INFINITY), 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(ct::power_log_integral(-3.0, 0, 1.0, INFINITY), 0.5);
  EXPECT_EQ(ct::power_log_integral(-1.0, 0, 1.0, INFINITY), 0.0);
  EXPECT_EQ(ct::power_log_integral(-1.0, 3, 0.0, 1.0), 0.0);
  // Agrees with quadrature where the integral converges.
  for (double a : {-0.6, 0.3, 2.0}) {
    for (int j : {0, 1, 3}) {
      const auto q = ct::quad::integrate(
          [&](double t) { return std::pow(t, a) * std::pow(std::log(t), j); }, 0.2, 3.0);
      EXPECT_NEAR(ct::power_log_integral(a, j, 0.2, 3.0), q.value, 1e-12) << a << " " << j;
    }
  }
}

TEST(Regularized, ShallowExpansionRejected) {
  const ct::EndExpansion shallow{{{-1, 0, 1}}, -1.0};
  EXPECT_THROW(ct::regularized_integral([](double t) { return 1.0 / (1.0 + t); }, shallow),
               ct::CapabilityError);
  const ct::EndExpansion zero{{{-2, 0, 1}}, -1.5};
  EXPECT_THROW(ct::regularized_integral([](double t) { return 1.0 / (t * t); }, {}, zero),
               ct::CapabilityError);
}

TEST(Regularized, OrdinaryIntegralsReproduced) {
  // a t^c e^{-b t} + d (1+t)^{-p}: integral a Gamma(c+1) / b^{c+1} + d / (p-1).
  std::mt19937_64 rng(20251019);
  std::uniform_real_distribution<double> ua(0.2, 3.0), ub(0.3, 4.0), uc(-0.7, 2.0), ud(-2.0, 2.0),
      up(1.3, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = ua(rng), b = ub(rng), c = uc(rng), d = ud(rng), p = up(rng);
    auto f = [=](double t) { return a * std::pow(t, c) * std::exp(-b * t) + d * std::pow(1.0 + t, -p); };
    const double exact = a * std::tgamma(c + 1.0) / std::pow(b, c + 1.0) + d / (p - 1.0);
    EXPECT_NEAR(ct::regularized_integral(f), exact, 1e-9 * std::max(1.0, std::abs(exact))) << trial;
    // Supplying end data changes nothing for integrable functions.
    ct::EndExpansion inf{{}, -p - 6.0};
    for (int n = 0; n <= 5; ++n) {
      double binom = 1.0;
      for (int i = 0; i < n; ++i) binom *= (-p - i) / double(i + 1);
      inf.terms.push_back({-p - n, 0, d * binom});
    }
    const ct::EndExpansion zero{{{c, 0, a}, {0.0, 0, d}}, std::min(c + 1.0, 1.0)};
    EXPECT_NEAR(ct::regularized_integral(f, inf, zero), exact, 1e-9 * std::max(1.0, std::abs(exact)))
        << trial;
  }
}

TEST(Regularized, Linearity) {
  auto f = [](double t) { return 1.0 / (1.0 + t); };
  auto g = [](double t) { return 1.0 / ((1.0 + t) * (2.0 + t)); };
  const ct::EndExpansion ef{{{-1, 0, 1}, {-2, 0, -1}, {-3, 0, 1}}, -4.0};
  const ct::EndExpansion sum{{{-1, 0, 2}, {-2, 0, -2 + 3}, {-3, 0, 2 - 9}}, -4.0};
  const double lhs = ct::regularized_integral([&](double t) { return 2.0 * f(t) + 3.0 * g(t); }, sum);
  const double rhs = 2.0 * ct::regularized_integral(f, ef) + 3.0 * ct::regularized_integral(g);
  EXPECT_NEAR(lhs, rhs, 1e-12);
  EXPECT_NEAR(rhs, 3.0 * std::log(2.0), 1e-12);
}

TEST(Sal, ResolventSymbolClosedForm) {
  // u e^u E_1(u), u = 1/z: z^{-1}(log z - gamma) + z^{-2}(log z + 1 - gamma)
  //   + z^{-3}(log z / 2 + 3/4 - gamma / 2) + ...
  constexpr double gamma = std::numbers::egamma;
  ct::SalOrders o;
  o.order = 3;
  const auto s = ct::sal_expand(resolvent_symbol(), o);
  EXPECT_NEAR(s.coefficient(-1, 0), -gamma, 1e-11);
  EXPECT_NEAR(s.coefficient(-1, 1), 1.0, 1e-14);
  EXPECT_NEAR(s.coefficient(-2, 0), 1.0 - gamma, 1e-11);
  EXPECT_NEAR(s.coefficient(-2, 1), 1.0, 1e-14);
  EXPECT_NEAR(s.coefficient(-3, 0), 0.75 - 0.5 * gamma, 1e-11);
  EXPECT_NEAR(s.coefficient(-3, 1), 0.5, 1e-14);
}

TEST(Sal, DampedSymbolOrders) {
  ct::SalOrders o;
  o.order = 5;
  const auto d = ct::verify_sal(damped_symbol(), o, z_grid(16.0, 512.0));
  ASSERT_TRUE(d.hypotheses.ok) << d.hypotheses.detail;
  ASSERT_GE(d.orders.size(), 4u);
  for (std::size_t n = 0; n < 4; ++n) {
    EXPECT_TRUE(d.orders[n].pass) << "order " << n << " slope " << d.orders[n].slope << " expected "
                                  << d.orders[n].expected_slope;
    EXPECT_NEAR(d.orders[n].slope, d.orders[n].expected_slope, 0.2);
  }
  EXPECT_NEAR(d.series.coefficient(-1, 0), std::numbers::pi / 4.0, 1e-12);
  EXPECT_NEAR(d.series.coefficient(-2, 0), -0.5, 1e-12);
  // Only the integer exponent -4 carries a log: sigma_{-4,0}'''(0) / 3! = -1/6.
  EXPECT_NEAR(d.series.coefficient(-4, 1), -1.0 / 6.0, 1e-14);
  EXPECT_EQ(d.series.coefficient(-3, 1), 0.0);
}

TEST(Sal, ZetaIndependentSymbol) {
  // phi(x) = (1 - x^2)^4 on [0, 1]: the expansion is the constant int phi = 128/315.
  auto phi = [](double x) { return x < 1.0 ? std::pow(1.0 - x * x, 4) : 0.0; };
  const std::vector<double> taylor{1, 0, -8, 0, 144, 0, -2880, 0, 40320};
  auto phi_taylor = [taylor](int k) { return k < int(taylor.size()) ? taylor[k] : 0.0; };
  const auto s = ct::separable_symbol(phi, phi_taylor, [](double) { return 1.0; },
                                      {{0.0, 0, 1.0}}, -INFINITY, 2.0);
  ct::SalOrders o;
  o.order = 3;
  const auto d = ct::verify_sal(s, o, z_grid(4.0, 256.0));
  ASSERT_TRUE(d.hypotheses.ok) << d.hypotheses.detail;
  EXPECT_NEAR(d.series.coefficient(0, 0), 128.0 / 315.0, 1e-14);
  for (const auto& t : d.series.terms) {
    if (t.power != 0.0) {
      EXPECT_LT(std::abs(t.coeff), 1e-13) << t.power;
    }
  }
  EXPECT_LT(d.max_abs_residual, 1e-14);
}

TEST(Sal, SeparableInverseSquare) {
  // phi = (1-x)^3 on [0,1], g = 1/(1+zeta^2) ~ zeta^{-2} - zeta^{-4} + ...
  // z^{-2}: reg int phi x^{-2} = -1 + 0 + 3 - 1/2 = 3/2; z^{-2} log z: phi'(0) = -3.
  auto phi = [](double x) { return x < 1.0 ? std::pow(1.0 - x, 3) : 0.0; };
  const std::vector<double> taylor{1, -3, 6, -6};
  auto phi_taylor = [taylor](int k) { return k < 4 ? taylor[k] : 0.0; };
  std::vector<ct::PowerLogTerm> g;
  for (int n = 0; n <= 5; ++n) g.push_back({-2.0 - 2.0 * n, 0, alternating(n)});
  const auto s = ct::separable_symbol(phi, phi_taylor, [](double z) { return 1.0 / (1.0 + z * z); },
                                      g, -14.0, 2.0);
  ct::SalOrders o;
  o.order = 3;
  const auto e = ct::sal_expand(s, o);
  EXPECT_NEAR(e.coefficient(-2, 0), 1.5, 1e-12);
  EXPECT_NEAR(e.coefficient(-2, 1), -3.0, 1e-14);
  EXPECT_NEAR(e.coefficient(-1, 0), std::numbers::pi / 2.0, 1e-12);
}

TEST(Sal, Linearity) {
  const auto s1 = damped_symbol();
  const auto s2 = resolvent_symbol();
  ct::SalOrders o;
  o.order = 4;
  const auto a = ct::sal_expand(s1, o);
  const auto b = ct::sal_expand(s2, o);
  const auto c = ct::sal_expand(ct::linear_combination(2.0, s1, -3.0, s2), o);
  for (const auto& t : c.terms) {
    const double expect = 2.0 * a.coefficient(t.power, t.logpow) - 3.0 * b.coefficient(t.power, t.logpow);
    EXPECT_NEAR(t.coeff, expect, 1e-10 * std::max(1.0, std::abs(expect))) << t.power << " " << t.logpow;
  }
  EXPECT_EQ(c.terms.size(), b.terms.size());
}

TEST(Sal, ZetaRescaling) {
  // g = (1+zeta)^{-3/2}: non-integer exponents come only from the sigma_{alpha j}
  // family, which picks up c^alpha under zeta -> c zeta.
  std::vector<ct::PowerLogTerm> g;
  double binom = 1.0;
  for (int n = 0; n <= 8; ++n) {
    g.push_back({-1.5 - n, 0, binom});
    binom *= (-1.5 - n) / double(n + 1);
  }
  const auto s = ct::separable_symbol([](double x) { return std::exp(-x); }, alternating,
                                      [](double z) { return std::pow(1.0 + z, -1.5); }, g, -10.5);
  ct::SalOrders o;
  o.order = 3;
  const auto base = ct::sal_expand(s, o);
  for (double c : {0.5, 3.0}) {
    const auto scaled = ct::sal_expand(ct::rescale_zeta(s, c), o);
    for (double alpha : {-1.5, -2.5}) {
      EXPECT_NEAR(scaled.coefficient(alpha, 0), std::pow(c, alpha) * base.coefficient(alpha, 0),
                  1e-11 * std::abs(base.coefficient(alpha, 0)))
          << c << " " << alpha;
    }
  }
}

TEST(Sal, HypothesisViolations) {
  // sigma = e^{-x} / x near 0 fails the integrability hypothesis.
  ct::SymbolProvider bad = resolvent_symbol();
  bad.eval = [](double x, double z) { return std::exp(-x) / (x * (1.0 + z)); };
  bad.x_deriv_at_0 = nullptr;
  try {
    ct::sal_expand(bad);
    FAIL() << "expected HypothesisError";
  } catch (const ct::HypothesisError& e) {
    EXPECT_EQ(e.assumption(), "b");
  }
  const auto d = ct::verify_sal(bad, {}, z_grid(4.0, 64.0));
  EXPECT_FALSE(d.hypotheses.ok);
  EXPECT_FALSE(d.pass);
  EXPECT_EQ(d.hypotheses.violated, "b");

  // A wrong leading coefficient breaks the remainder bound.
  auto wrong = damped_symbol();
  wrong.zeta_expansion[0].coeff = [](double x) { return 2.0 * std::exp(-x); };
  EXPECT_EQ(ct::probe_hypotheses(wrong).violated, "a");

  // Too shallow an expansion for the requested order.
  ct::SalOrders deep;
  deep.order = 12;
  EXPECT_THROW(ct::sal_expand(resolvent_symbol(), deep), ct::CapabilityError);
}

TEST(Sal, UniformityProbe) {
  auto family = [](double s) {
    std::vector<ct::PowerLogTerm> g;
    for (int n = 0; n <= 6; ++n) g.push_back({-4.0 - 2.0 * n, 0, (n + 1) * alternating(n) * std::pow(s, 2 * n)});
    return ct::separable_symbol([](double x) { return std::exp(-x); }, alternating,
                                [s](double z) {
                                  const double q = s * s + z * z;
                                  return 1.0 / (q * q);
                                },
                                g, -18.0);
  };
  const auto rep = ct::probe_uniformity(family, {0.5, 1.0, 1.5});
  EXPECT_TRUE(rep.ok) << rep.detail;
  EXPECT_GT(rep.remainder_constant, 0.0);
  EXPECT_FALSE(rep.integrability_constants.empty());
}

TEST(ExpansionSeries, JsonRoundTrip) {
  ct::SalOrders o;
  o.order = 3;
  auto s = ct::sal_expand(resolvent_symbol(), o);
  s.z_min = 4.0;
  const nlohmann::json j = s;
  const auto back = j.get<ct::ExpansionSeries>();
  EXPECT_EQ(back.terms, s.terms);
  EXPECT_EQ(back.z_min, 4.0);
  EXPECT_TRUE(std::isinf(back.z_max));
  EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
  // Sorted by descending power, ascending log power.
  for (std::size_t i = 1; i < s.terms.size(); ++i) {
    const auto& a = s.terms[i - 1];
    const auto& b = s.terms[i];
    EXPECT_TRUE(a.power > b.power || (a.power == b.power && a.logpow < b.logpow));
  }
}
