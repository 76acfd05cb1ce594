#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "lmmd/analysis.hpp"

namespace lmmd {
namespace {

std::vector<Rational> R(std::initializer_list<Rational> v) { return v; }

double max_root(const Scheme& s) { return poly_roots(reduced_second_char_poly(s)).max_modulus(); }

// |p(r)| for rational coefficients rounded to double, evaluated in double.
double raw_residual(const CharPoly& p, std::complex<double> r) {
  std::complex<double> acc = 0;
  for (const auto& c : p.coeffs()) acc = acc * r + to_double(c);
  return std::abs(acc);
}

// sum_k |c_k| |r|^k: the size of the terms that cancel in p(r).
double evaluation_scale(const CharPoly& p, std::complex<double> r) {
  double acc = 0;
  for (const auto& c : p.coeffs()) acc = acc * std::abs(r) + std::abs(to_double(c));
  return acc;
}

TEST(CharPoly, Construction) {
  EXPECT_THROW(CharPoly(R({})), precondition_error);
  EXPECT_THROW(CharPoly(R({0, 1})), precondition_error);
  const CharPoly p(R({2, -3, 1}));
  EXPECT_EQ(p.degree(), 2);
  EXPECT_EQ(p(Rational(1)), 0);
  EXPECT_EQ(p.reversed(), CharPoly(R({1, -3, 2})));
  EXPECT_THROW(CharPoly(R({1, 0})).reversed(), precondition_error);
}

TEST(CharPoly, FirstCharacteristicPolynomial) {
  EXPECT_EQ(first_char_poly(ab_scheme(1)).coeffs(), R({1, -1}));
  EXPECT_EQ(first_char_poly(bdf_scheme(2)).coeffs(), R({Rational(3, 2), -2, Rational(1, 2)}));
  for (int M = 1; M <= kMaxSteps; ++M) {
    std::vector<Rational> expected(static_cast<std::size_t>(M) + 1, Rational(0));
    expected[0] = 1;
    expected[1] = -1;
    EXPECT_EQ(first_char_poly(ab_scheme(M)).coeffs(), expected);
    EXPECT_EQ(first_char_poly(am_scheme(M)).coeffs(), expected);
  }
}

TEST(CharPoly, ReducedSecondCharacteristicPolynomial) {
  for (int M = 1; M <= kMaxSteps; ++M) EXPECT_EQ(reduced_second_char_poly(bdf_scheme(M)).degree(), 0);
  EXPECT_EQ(reduced_second_char_poly(am_scheme(1)).coeffs(), R({Rational(1, 2), Rational(1, 2)}));
  EXPECT_EQ(reduced_second_char_poly(ab_scheme(2)).coeffs(), R({Rational(3, 2), Rational(-1, 2)}));
  EXPECT_EQ(reduced_second_char_poly(ab_scheme(5)).degree(), 4);
  EXPECT_EQ(reduced_second_char_poly(am_scheme(5)).degree(), 5);
}

TEST(PolyRoots, ConstantHasNoRoots) {
  const auto rs = poly_roots(CharPoly(R({3})));
  EXPECT_TRUE(rs.roots.empty());
  EXPECT_EQ(rs.total_multiplicity(), 0);
}

TEST(PolyRoots, SimpleKnownRoots) {
  auto rs = poly_roots(reduced_second_char_poly(ab_scheme(2)));
  ASSERT_EQ(rs.roots.size(), 1u);
  EXPECT_NEAR(rs.roots[0].value.real(), 1.0 / 3.0, 1e-15);
  rs = poly_roots(reduced_second_char_poly(am_scheme(1)));
  ASSERT_EQ(rs.roots.size(), 1u);
  EXPECT_NEAR(rs.roots[0].value.real(), -1.0, 1e-15);
  rs = poly_roots(CharPoly(R({1, 0, 1})));  // r^2 + 1
  ASSERT_EQ(rs.roots.size(), 2u);
  for (const auto& r : rs.roots) EXPECT_NEAR(std::abs(r.value), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(rs.roots[0].value + rs.roots[1].value), 0.0, 1e-14);
}

TEST(PolyRoots, RepeatedRootsGetMultiplicity) {
  // (r - 1/2)^3 (r + 2) = r^4 + r^3/2 - 9 r^2/4 + 11 r/8 - 1/4
  const CharPoly p(R({1, Rational(1, 2), Rational(-9, 4), Rational(11, 8), Rational(-1, 4)}));
  const auto rs = poly_roots(p);
  ASSERT_EQ(rs.roots.size(), 2u);
  EXPECT_EQ(rs.total_multiplicity(), 4);
  EXPECT_NEAR(rs.roots[0].value.real(), -2.0, 1e-12);
  EXPECT_EQ(rs.roots[0].multiplicity, 1);
  EXPECT_NEAR(rs.roots[1].value.real(), 0.5, 1e-12);
  EXPECT_EQ(rs.roots[1].multiplicity, 3);
}

TEST(PolyRoots, ClusterToleranceMergesNearbyRoots) {
  // (r - 1/2)(r - 1/2 - 1e-9): distinct exactly, merged at the default tolerance.
  const Rational a(1, 2), b = Rational(1, 2) + Rational(1, 1000000000);
  const CharPoly p(R({1, -(a + b), a * b}));
  EXPECT_EQ(poly_roots(p).roots.size(), 1u);
  EXPECT_EQ(poly_roots(p).roots[0].multiplicity, 2);
  EXPECT_EQ(poly_roots(p, 1e-12).roots.size(), 2u);
}

TEST(PolyRoots, LargestRootsTable) {
  const double ab[] = {0.3333, 0.4663, 0.6338, 0.8075, 0.9829, 1.1587, 1.3345, 1.5100, 1.6852};
  for (int M = 2; M <= 10; ++M) EXPECT_NEAR(max_root(ab_scheme(M)), ab[M - 2], 5e-5) << "AB-" << M;
  // 4-decimal roundings of a 30-digit evaluation of the same polynomials.
  const double am[] = {1.0000, 1.7165, 2.3658, 2.9775, 3.5639, 4.1317, 4.6851, 5.2267, 5.7586, 6.2820};
  for (int M = 1; M <= 10; ++M) EXPECT_NEAR(max_root(am_scheme(M)), am[M - 1], 5e-5) << "AM-" << M;
}

TEST(PolyRoots, ResidualsAndMultiplicityForCatalogue) {
  for (const auto& s : catalogue()) {
    for (const CharPoly& p : {reduced_second_char_poly(s), first_char_poly(s)}) {
      const auto rs = poly_roots(p);
      EXPECT_EQ(rs.total_multiplicity(), p.degree()) << s.name();
      EXPECT_LT(rs.residual_bound, 1e-12) << s.name();
      for (const auto& r : rs.roots) {
        // An absolute bound is only attainable while the cancelling terms stay
        // moderate; beyond that, double rounding alone exceeds it.
        if (evaluation_scale(p, r.value) <= 1e6) {
          EXPECT_LT(raw_residual(p, r.value), 1e-8) << s.name() << " root " << r.value;
        }
      }
    }
  }
}

TEST(PolyRoots, FirstCharacteristicPolynomialHasSimpleRootAtOne) {
  for (const auto& s : catalogue()) {
    const CharPoly rho = first_char_poly(s);
    EXPECT_EQ(rho(Rational(1)), 0) << s.name();
    EXPECT_EQ(detail::exact_root_multiplicity(rho, Rational(1)), 1) << s.name();
  }
}

TEST(PolyRoots, ReversalGivesReciprocalModuli) {
  for (const auto& s : catalogue()) {
    const CharPoly p = reduced_second_char_poly(s);
    if (p.degree() == 0) continue;
    std::vector<double> fwd, rev;
    for (const auto& r : poly_roots(p).roots) {
      for (int k = 0; k < r.multiplicity; ++k) fwd.push_back(1.0 / std::abs(r.value));
    }
    for (const auto& r : poly_roots(p.reversed()).roots) {
      for (int k = 0; k < r.multiplicity; ++k) rev.push_back(std::abs(r.value));
    }
    std::sort(fwd.begin(), fwd.end());
    std::sort(rev.begin(), rev.end());
    ASSERT_EQ(fwd.size(), rev.size()) << s.name();
    for (std::size_t i = 0; i < fwd.size(); ++i) EXPECT_NEAR(fwd[i], rev[i], 1e-8 * std::max(1.0, fwd[i])) << s.name();
  }
}

TEST(PolyRoots, AdamsMoultonHasRealRootBelowMinusOne) {
  for (int M = 2; M <= kMaxSteps; ++M) {
    const Scheme s = am_scheme(M);
    const double bound = -to_double(s.beta()[1] / s.beta()[0]);
    bool found = false;
    for (const auto& r : poly_roots(reduced_second_char_poly(s)).roots) {
      if (std::abs(r.value.imag()) < 1e-10 && r.value.real() < bound) found = true;
    }
    EXPECT_TRUE(found) << "AM-" << M;
    EXPECT_LT(bound, -1.0);
  }
}

// ---------------------------------------------------------------------------

TEST(Stability, ForwardClassesPerFamily) {
  for (int M = 1; M <= kMaxSteps; ++M) {
    EXPECT_EQ(classify_stability(bdf_scheme(M), Direction::Forward).tag, StabilityTag::Stable) << M;
    const auto ab = classify_stability(ab_scheme(M), Direction::Forward).tag;
    EXPECT_EQ(ab, M <= 6 ? StabilityTag::Stable : StabilityTag::Unstable) << "AB-" << M;
  }
  EXPECT_EQ(classify_stability(am_scheme(0), Direction::Forward).tag, StabilityTag::Stable);
  EXPECT_EQ(classify_stability(am_scheme(1), Direction::Forward).tag, StabilityTag::MarginallyStable);
  for (int M = 2; M <= kMaxSteps; ++M) {
    EXPECT_EQ(classify_stability(am_scheme(M), Direction::Forward).tag, StabilityTag::Unstable) << "AM-" << M;
  }
}

TEST(Stability, TerminalClassesPerFamily) {
  for (int M = 1; M <= kMaxSteps; ++M) {
    EXPECT_EQ(classify_stability(bdf_scheme(M), Direction::Terminal).tag, StabilityTag::Stable);
    EXPECT_EQ(classify_stability(ab_scheme(M), Direction::Terminal).tag,
              M == 1 ? StabilityTag::Stable : StabilityTag::Unstable)
        << "AB-" << M;
  }
  EXPECT_EQ(classify_stability(am_scheme(0), Direction::Terminal).tag, StabilityTag::Stable);
  EXPECT_EQ(classify_stability(am_scheme(1), Direction::Terminal).tag, StabilityTag::MarginallyStable);
  for (int M = 2; M <= kMaxSteps; ++M) {
    EXPECT_EQ(classify_stability(am_scheme(M), Direction::Terminal).tag, StabilityTag::Unstable) << "AM-" << M;
  }
}

TEST(Stability, AdamsMoultonTrapezoidIsCertifiedExactly) {
  const auto c = classify_stability(am_scheme(1), Direction::Forward);
  ASSERT_TRUE(c.witness.has_value());
  EXPECT_EQ(c.witness->value, std::complex<double>(-1.0, 0.0));
  EXPECT_EQ(c.witness->multiplicity, 1);
  EXPECT_EQ(c.witness_modulus, 1.0);
  EXPECT_EQ(c.label(), "MarginallyStable");
}

TEST(Stability, ConstantPolynomialIsVacuouslyStable) {
  const auto c = classify_stability(bdf_scheme(4), Direction::Forward);
  EXPECT_EQ(c.tag, StabilityTag::Stable);
  EXPECT_FALSE(c.witness.has_value());
  EXPECT_EQ(c.max_root_modulus, 0.0);
}

TEST(Stability, UnstableWitnessIsLargestRoot) {
  const auto c = classify_stability(am_scheme(2), Direction::Forward);
  EXPECT_EQ(c.tag, StabilityTag::Unstable);
  ASSERT_TRUE(c.witness.has_value());
  EXPECT_NEAR(c.witness->value.real(), -1.71651513899117, 1e-10);
  EXPECT_NEAR(c.max_root_modulus, 1.71651513899117, 1e-10);
}

TEST(Stability, RepeatedUnitRootsAreWeaklyStable) {
  // beta = (1, 2, 1): sigma-hat = (r + 1)^2, a double root at -1.
  const Scheme s = Scheme::from_coefficients(Family::AM, 2, R({1, -1, 0}), R({1, 2, 1}));
  const auto c = classify_stability(s, Direction::Forward);
  EXPECT_EQ(c.tag, StabilityTag::WeaklyStable);
  EXPECT_EQ(c.weak_degree, 3);
  EXPECT_EQ(c.label(), "WeaklyStable(-3)");
  ASSERT_TRUE(c.witness.has_value());
  EXPECT_EQ(c.witness->multiplicity, 2);

  // (r^2 + 1)^2: double roots at +-i, found numerically rather than certified.
  const auto d = classify_roots(CharPoly(R({1, 0, 2, 0, 1})));
  EXPECT_EQ(d.tag, StabilityTag::WeaklyStable);
  EXPECT_EQ(d.weak_degree, 3);

  // Simple unit roots that are not +-1: marginal via the float tolerance.
  EXPECT_EQ(classify_roots(CharPoly(R({1, 0, 1}))).tag, StabilityTag::MarginallyStable);
  // A root outside the circle dominates a repeated unit root.
  EXPECT_EQ(classify_roots(CharPoly(R({1, 0, -3, -2}))).tag, StabilityTag::Unstable);  // (r+1)^2 (r-2)
}

// ---------------------------------------------------------------------------

// Coefficients of z^0..z^n of rho(e^z) - z sigma(e^z), exactly.
std::vector<Rational> order_series(const Scheme& s, int n) {
  const int M = s.stencil();
  std::vector<Rational> out;
  Rational fact = 1;  // j!
  for (int j = 0; j <= n; ++j) {
    if (j > 0) fact *= j;
    Rational c = 0;
    for (int k = 0; k <= M; ++k) {
      Rational pj = 1;
      for (int i = 0; i < j; ++i) pj *= (M - k);
      c += s.alpha()[k] * pj / fact;
      if (j >= 1) {
        Rational pj1 = 1;
        for (int i = 0; i < j - 1; ++i) pj1 *= (M - k);
        c -= s.beta()[k] * pj1 * Rational(j) / fact;
      }
    }
    out.push_back(c);
  }
  return out;
}

TEST(Consistency, OrdersPerFamily) {
  for (int M = 1; M <= kMaxSteps; ++M) {
    EXPECT_EQ(consistency_report(ab_scheme(M), 40).order, M);
    EXPECT_EQ(consistency_report(bdf_scheme(M), 40).order, M);
  }
  for (int M = 0; M <= kMaxSteps; ++M) EXPECT_EQ(consistency_report(am_scheme(M), 40).order, M + 1);
}

TEST(Consistency, ReportFields) {
  const auto r = consistency_report(ab_scheme(2), 10);
  ASSERT_EQ(r.constants.size(), 4u);
  EXPECT_EQ(r.constants[0], 0);
  EXPECT_EQ(r.constants[1], 0);
  EXPECT_EQ(r.constants[2], 0);
  EXPECT_EQ(r.constants[3], Rational(5, 12));
  EXPECT_EQ(r.degree, 2);
  EXPECT_TRUE(r.strongly_consistent);
  EXPECT_FALSE(r.exceeds_max_order);
  EXPECT_FALSE(consistency_report(ab_scheme(1), 10).strongly_consistent);
  EXPECT_EQ(truncation_constant(am_scheme(1), 3), Rational(-1, 12));
  EXPECT_EQ(truncation_constant(bdf_scheme(2), 3), Rational(-1, 3));
}

TEST(Consistency, MaxOrderLimits) {
  EXPECT_THROW(consistency_report(ab_scheme(2), 0), domain_error);
  const auto r = consistency_report(am_scheme(10), 5);
  EXPECT_TRUE(r.exceeds_max_order);
  EXPECT_EQ(r.order, 6);
  for (const auto& c : r.constants) EXPECT_EQ(c, 0);
}

TEST(Consistency, AgreesWithExponentialSeries) {
  for (const auto& s : catalogue()) {
    const int p = consistency_report(s, 40).order;
    const auto series = order_series(s, p + 1);
    for (int j = 0; j <= p; ++j) EXPECT_EQ(series[j], 0) << s.name() << " z^" << j;
    EXPECT_NE(series[p + 1], 0) << s.name();
  }
}

// ---------------------------------------------------------------------------

TEST(Companion, Shapes) {
  const auto am1 = companion_matrix(am_scheme(1));
  ASSERT_EQ(am1.rows(), 1);
  EXPECT_EQ(am1(0, 0), -1.0);
  const auto ab3 = companion_matrix(ab_scheme(3));
  ASSERT_EQ(ab3.rows(), 2);
  EXPECT_DOUBLE_EQ(ab3(0, 0), 16.0 / 23.0);
  EXPECT_DOUBLE_EQ(ab3(0, 1), -5.0 / 23.0);
  EXPECT_EQ(ab3(1, 0), 1.0);
  EXPECT_EQ(ab3(1, 1), 0.0);
  EXPECT_EQ(companion_matrix(bdf_scheme(3)).rows(), 0);
  EXPECT_EQ(companion_matrix(am_scheme(0)).rows(), 0);
}

TEST(Companion, EigenvaluesAreSigmaHatRoots) {
  for (int M = 2; M <= 8; ++M) {
    const Scheme s = am_scheme(M);
    const Eigen::VectorXcd ev = companion_matrix(s).eigenvalues();
    double lam = 0;
    for (int i = 0; i < ev.size(); ++i) lam = std::max(lam, std::abs(ev(i)));
    EXPECT_NEAR(lam, max_root(s), 1e-9 * lam);
  }
}

TEST(PowerNorms, KnownProfiles) {
  const auto am1 = power_norm_profile(am_scheme(1), 1000);
  EXPECT_EQ(am1.max_norm, 1.0);
  EXPECT_EQ(am1.sum_norm, 1000.0);
  EXPECT_FALSE(am1.overflow_step.has_value());

  const auto bdf = power_norm_profile(bdf_scheme(5), 50);
  EXPECT_EQ(bdf.max_norm, 0.0);
  EXPECT_EQ(bdf.sum_norm, 0.0);
  EXPECT_EQ(bdf.per_step.size(), 50u);

  const auto am2 = power_norm_profile(am_scheme(2), 200);
  EXPECT_GT(am2.max_norm, 1e30);
  EXPECT_GT(am2.max_norm, std::pow(1.7165, 200 * 0.99));

  EXPECT_THROW(power_norm_profile(am_scheme(1), 0), domain_error);
}

TEST(PowerNorms, MatchDirectPowering) {
  const Scheme s = am_scheme(2);
  const Eigen::MatrixXd Z = companion_matrix(s);
  const auto prof = power_norm_profile(s, 10);
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(Z.rows(), Z.cols());
  for (int n = 1; n <= 10; ++n) {
    P = P * Z;
    EXPECT_NEAR(prof.per_step[n - 1], P.cwiseAbs().rowwise().sum().maxCoeff(), 1e-12 * prof.per_step[n - 1]);
  }
}

TEST(PowerNorms, OverflowIsReported) {
  const auto p = power_norm_profile(am_scheme(20), 1000);
  ASSERT_TRUE(p.overflow_step.has_value());
  EXPECT_TRUE(std::isinf(p.max_norm));
  EXPECT_EQ(p.per_step.size(), static_cast<std::size_t>(*p.overflow_step - 1));
}

TEST(PowerNorms, AgreeWithStabilityClass) {
  for (const auto& s : catalogue()) {
    const auto cls = classify_stability(s, Direction::Forward).tag;
    const auto p1000 = power_norm_profile(s, 1000);
    const auto p2000 = power_norm_profile(s, 2000);
    switch (cls) {
      case StabilityTag::Stable:
        EXPECT_LE(p2000.sum_norm, 1.01 * p1000.sum_norm) << s.name();
        break;
      case StabilityTag::MarginallyStable:
        EXPECT_EQ(p2000.max_norm, p1000.max_norm) << s.name();
        EXPECT_NEAR(p2000.sum_norm / p1000.sum_norm, 2.0, 0.02) << s.name();
        break;
      case StabilityTag::WeaklyStable:
        ADD_FAILURE() << s.name() << " is weakly stable; no catalogued scheme should be";
        break;
      case StabilityTag::Unstable:
        EXPECT_GT(power_norm_profile(s, 200).max_norm, 1e6) << s.name();
        break;
    }
  }
}

}  // namespace
}  // namespace lmmd
