#include <gtest/gtest.h>

#include <cmath>

#include "hameig/spectrum.hpp"
#include "test_support.hpp"

using namespace hameig;

TEST(Chain, ConstantFamilyEqualSegments) {
  // rho = 2: every link length pi/2; chain pi/2, ~0, then one negative link.
  auto s = support::spec_constant_family();
  auto chain = blowup_chain_1d(s, 2.0, IntegrateOptions{}, 16);
  ASSERT_GE(chain.size(), 2u);
  EXPECT_EQ(chain[0].family, Family::primal);
  EXPECT_EQ(chain[1].family, Family::dual);
  EXPECT_NEAR(chain[0].t, M_PI / 2.0, 1e-7);
  EXPECT_NEAR(chain[1].t, 0.0, 1e-6);
  for (size_t i = 0; i + 1 < chain.size(); ++i)
    EXPECT_GT(chain[i].t, chain[i + 1].t);
  EXPECT_LT(chain.back().t, 1e-6);

  // rho = 5: links at multiples of pi/4 counting down from T.
  auto c5 = blowup_chain_1d(s, 5.0, IntegrateOptions{}, 16);
  ASSERT_GE(c5.size(), 3u);
  EXPECT_NEAR(c5[0].t, 3.0 * M_PI / 4.0, 1e-7);
  EXPECT_NEAR(c5[1].t, M_PI / 2.0, 1e-7);
  EXPECT_NEAR(c5[2].t, M_PI / 4.0, 1e-7);
}

TEST(Chain, NearThresholdParameterGoesNegativeImmediately) {
  // rho = 1 + eps: first link T - pi/(2 sqrt(eps)) is far below zero.
  auto s = support::spec_constant_family();
  auto chain = blowup_chain_1d(s, 1.0 + 0.01, IntegrateOptions{}, 16);
  ASSERT_EQ(chain.size(), 1u);
  EXPECT_LT(chain[0].t, 0.0);
  EXPECT_NEAR(chain[0].t, M_PI - M_PI / (2.0 * 0.1), 1e-5);
}

TEST(Chain, LinksWithLinearTermMatchArctangentOracle) {
  // Constant coefficients with a != 0: primal and dual segment lengths are
  // (2/w)(pi/2 -+ atan(a/w)).  Checked on the first two links.
  auto s = support::spec_stoch_1d();
  const double rho = 14.0;
  const double a = 0.45, b = 1.0, c = rho - 0.75;
  auto chain = blowup_chain_1d(s, rho, IntegrateOptions{}, 8);
  ASSERT_GE(chain.size(), 2u);
  const double w = std::sqrt(4.0 * b * c - a * a);
  const double seg_p = (2.0 / w) * (M_PI / 2.0 - std::atan(a / w));
  const double seg_d = (2.0 / w) * (M_PI / 2.0 + std::atan(a / w));
  EXPECT_NEAR(chain[0].t, 1.0 - seg_p, 1e-7);
  EXPECT_NEAR(chain[1].t, 1.0 - seg_p - seg_d, 1e-7);
}

TEST(Chain, RequiresScalarH4AndSupercriticalParameter) {
  EXPECT_THROW(blowup_chain_1d(support::spec_coupled_n2(), 3.0,
                               IntegrateOptions{}, 8),
               InputError);
  auto bad = support::spec_constant_family();
  bad.H.set_block(2, 3, support::const1(0.9, bad.H.T()));
  EXPECT_THROW(blowup_chain_1d(bad, 3.0, IntegrateOptions{}, 8),
               PreconditionError);
  EXPECT_THROW(blowup_chain_1d(support::spec_constant_family(), 0.5,
                               IntegrateOptions{}, 8),
               PreconditionError);
}

TEST(Chain, LinkTimesNondecreasingInRho) {
  auto s = support::spec_timevarying_1d();
  double prev1 = -1e300, prev3 = -1e300;
  for (double rho : {30.0, 60.0, 120.0, 240.0}) {
    auto chain = blowup_chain_1d(s, rho, IntegrateOptions{}, 8);
    ASSERT_GE(chain.size(), 3u);
    EXPECT_GE(chain[0].t, prev1 - 1e-10);
    EXPECT_GE(chain[2].t, prev3 - 1e-10);
    prev1 = chain[0].t;
    prev3 = chain[2].t;
  }
}

TEST(Eigenvalue1D, ConstantFamilyClosedForm) {
  auto s = support::spec_constant_family();
  for (int m = 1; m <= 3; ++m) {
    auto rec = eigenvalue_1d(s, m, 1e-8, IntegrateOptions{});
    EXPECT_EQ(rec.m, m);
    EXPECT_NEAR(rec.rho, support::constant_family_eigenvalue(m), 1e-6)
        << "m=" << m;
    ASSERT_EQ(rec.chain.size(), static_cast<size_t>(2 * m - 1));
    EXPECT_LE(std::abs(rec.chain.back().t), 1e-7);
    EXPECT_EQ(rec.chain.back().family, Family::primal);
    for (size_t i = 0; i + 1 < rec.chain.size(); ++i)
      EXPECT_GT(rec.chain[i].t, rec.chain[i + 1].t);
  }
}

TEST(Eigenvalue1D, StrictOrderingAndRhoBGate) {
  for (auto& s : {support::spec_constant_family(), support::spec_stoch_1d()}) {
    const double rho_b = compute_rho_b(s);
    double prev = -1e300;
    for (int m = 1; m <= 3; ++m) {
      auto rec = eigenvalue_1d(s, m, 1e-8, IntegrateOptions{});
      EXPECT_GT(rec.rho, prev);
      EXPECT_GT(rec.rho, rho_b);
      prev = rec.rho;
    }
  }
}

TEST(Eigenvalue1D, RootCertificationAndSignFlip) {
  auto s = support::spec_timevarying_1d();
  const double tol = 1e-8;
  auto rec = eigenvalue_1d(s, 2, tol, IntegrateOptions{});
  EXPECT_LE(rec.tolerance, 10.0 * tol);
  const int J = static_cast<int>(rec.chain.size());
  ASSERT_EQ(J, 3);
  EXPECT_LE(std::abs(rec.chain.back().t), 10.0 * tol);
  // Strict monotonicity of the final link around the root.
  auto up = blowup_chain_1d(s, rec.rho + 100.0 * tol, IntegrateOptions{}, J + 1);
  auto dn = blowup_chain_1d(s, rec.rho - 100.0 * tol, IntegrateOptions{}, J + 1);
  ASSERT_GE(up.size(), static_cast<size_t>(J));
  ASSERT_GE(dn.size(), static_cast<size_t>(J));
  EXPECT_GT(up[J - 1].t, 0.0);
  EXPECT_LT(dn[J - 1].t, 0.0);
}

TEST(Eigenvalue1D, BitwiseDeterminism) {
  auto s = support::spec_timevarying_1d();
  auto a = eigenvalue_1d(s, 1, 1e-8, IntegrateOptions{});
  auto b = eigenvalue_1d(s, 1, 1e-8, IntegrateOptions{});
  EXPECT_EQ(a.rho, b.rho);
  ASSERT_EQ(a.chain.size(), b.chain.size());
  for (size_t i = 0; i < a.chain.size(); ++i)
    EXPECT_EQ(a.chain[i].t, b.chain[i].t);
}

TEST(FirstEigenvalue, BlockDiagonalSplitsIntoScalarProblems) {
  auto s = support::spec_blockdiag_n2();
  auto rec = first_eigenvalue_multidim(s, 1.01, 4.0, 1e-8, IntegrateOptions{});
  EXPECT_NEAR(rec.rho, 7.0 / 6.0, 1e-6);
  ASSERT_EQ(rec.kernel_basis.cols(), 1);
  // The weaker scalar block (H11 = 1.5) reaches threshold first: kernel
  // concentrates on the second coordinate.
  EXPECT_GT(std::abs(rec.kernel_basis(1, 0)), 0.999);
}

TEST(FirstEigenvalue, AgreesWithScalarPathOnCoincidingPatterns) {
  // With all mixed blocks zero and Hbar22 = H22 the two perturbation
  // patterns define the same family, so the independent solvers must agree.
  auto s = support::spec_constant_family();
  auto rec1 = eigenvalue_1d(s, 1, 1e-8, IntegrateOptions{});
  auto recm = first_eigenvalue_multidim(s, 1.05, 3.0, 1e-8, IntegrateOptions{});
  EXPECT_NEAR(rec1.rho, recm.rho, 1e-6);
  EXPECT_NEAR(recm.rho, 1.25, 1e-6);
}

TEST(FirstEigenvalue, BadBracketThrowsAndSubcriticalStaysBounded) {
  auto s = support::spec_blockdiag_n2();
  EXPECT_THROW(first_eigenvalue_multidim(s, 1.3, 4.0, 1e-8, IntegrateOptions{}),
               BracketError);
  // rho below the root by a safe margin: no blow-up on [0, T].
  auto r = blow_up_time(s, Pattern::varrho_scaling, Family::primal,
                        1.0 - (7.0 / 6.0 - 1e-4), M_PI,
                        Eigen::MatrixXd::Zero(2, 2), IntegrateOptions{});
  EXPECT_TRUE(!r.blew_up || r.t_star < 0.0);
}

TEST(H5Check, ReportsThreeQuantitiesAndHoldsOnMarginSpec) {
  auto rep = check_H5(support::spec_h5_margin());
  EXPECT_TRUE(rep.holds);
  // lhs = 4 * 1 * max|bracket(rho_b)|; rho_b = 1.01 gives bracket range
  // [0, 0.01] so lhs = 0.04; mid = (2*0.3)^2 = 0.36; rhs = 4.
  EXPECT_NEAR(rep.lhs, 0.04, 1e-6);
  EXPECT_NEAR(rep.mid, 0.36, 1e-12);
  EXPECT_NEAR(rep.rhs, 4.0, 1e-12);
}

TEST(H5Check, LongHorizonViolatesSecondInequality) {
  // Same shape on T = 10: mid = 0.36 but 4/T^2 = 0.04.
  auto s = support::spec_h5_margin();
  const double T = 10.0;
  hameig::CoefficientField H(1, T);
  H.set_block(1, 1, support::const1(1.0, T));
  H.set_block(1, 2, support::const1(0.3, T));
  H.set_block(2, 2, hameig::PiecewiseMatrix(
      {support::lin_piece(0.0, T, -1.0, -0.001)}));
  H.set_block(3, 3, support::const1(-1.0, T));
  H.set_block(4, 4, support::const1(-1.0, T));
  hameig::CoefficientField Hbar(1, T);
  Hbar.set_block(2, 2, support::const1(-1.0, T));
  s.H = H;
  s.Hbar = Hbar;
  auto rep = check_H5(s);
  EXPECT_FALSE(rep.holds);
  EXPECT_NEAR(rep.rhs, 0.04, 1e-12);
  EXPECT_GE(rep.mid, rep.rhs);
}

TEST(NoSpectrumBelowThreshold, CertifiesQuietZoneAndGatesOnH5) {
  auto s = support::spec_h5_margin();
  EXPECT_TRUE(no_eigenvalue_below_rho_b(s, 32, IntegrateOptions{}));
  // The time-varying corpus spec has lhs ~ 0.48 > mid ~ 0.05: the smallness
  // inequality fails and the certification refuses to run.
  ASSERT_FALSE(check_H5(support::spec_timevarying_1d()).holds);
  EXPECT_THROW(no_eigenvalue_below_rho_b(support::spec_timevarying_1d(), 8,
                                         IntegrateOptions{}),
               PreconditionError);
}

TEST(GrowthFit, RecoversExponentsOnSyntheticSequences) {
  std::vector<int> ms;
  std::vector<double> quad, lin, pow17, pow25;
  for (int m = 1; m <= 10; ++m) {
    ms.push_back(m);
    quad.push_back(support::constant_family_eigenvalue(m));
    lin.push_back(static_cast<double>(m));
    pow17.push_back(0.7 + 2.0 * std::pow(m, 1.7));
    pow25.push_back(3.0 + 0.5 * std::pow(m, 2.5));
  }
  auto fq = growth_order_fit_values(ms, quad);
  EXPECT_NEAR(fq.slope, 2.0, 0.02);
  EXPECT_GT(fq.r2, 0.999);
  auto fl = growth_order_fit_values(ms, lin);
  EXPECT_NEAR(fl.slope, 1.0, 0.02);
  EXPECT_NEAR(growth_order_fit_values(ms, pow17).slope, 1.7, 1e-5);
  EXPECT_NEAR(growth_order_fit_values(ms, pow25).slope, 2.5, 1e-5);
}

TEST(GrowthFit, RejectsShortOrNonMonotoneInput) {
  std::vector<int> ms{1, 2, 3, 4};
  std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  EXPECT_THROW(growth_order_fit_values(ms, v), InputError);
  std::vector<int> m5{1, 2, 3, 4, 5};
  std::vector<double> bad{1.0, 2.0, 1.5, 4.0, 5.0};
  EXPECT_THROW(growth_order_fit_values(m5, bad), InputError);
  std::vector<int> skip{1, 2, 4, 5, 6};
  std::vector<double> ok{1.0, 2.0, 3.0, 4.0, 5.0};
  EXPECT_THROW(growth_order_fit_values(skip, ok), InputError);
}

TEST(GainSchedule, ConstantFamilySecondEigenvalueLayout) {
  // rho_2 = 3.25: three chain links at 2pi/3, pi/3, 0; splice points at the
  // midpoints; families alternate dual/primal from the left.
  auto s = support::spec_constant_family();
  auto rec = eigenvalue_1d(s, 2, 1e-8, IntegrateOptions{});
  auto sched = GainSchedule::build(s, rec, IntegrateOptions{});
  ASSERT_EQ(sched.intervals.size(), 4u);
  const double seg = M_PI / 3.0;
  EXPECT_DOUBLE_EQ(sched.intervals[0].t0, 0.0);
  EXPECT_NEAR(sched.intervals[0].t1, seg / 2.0, 1e-6);
  EXPECT_NEAR(sched.intervals[1].t1, seg * 1.5, 1e-6);
  EXPECT_NEAR(sched.intervals[2].t1, seg * 2.5, 1e-6);
  EXPECT_DOUBLE_EQ(sched.intervals[3].t1, M_PI);
  EXPECT_EQ(sched.intervals[0].family, Family::dual);
  EXPECT_EQ(sched.intervals[1].family, Family::primal);
  EXPECT_EQ(sched.intervals[2].family, Family::dual);
  EXPECT_EQ(sched.intervals[3].family, Family::primal);
  // Dual gain vanishes exactly at the origin: eigenfunctions start at x0 = 0.
  EXPECT_EQ(sched.value(0, 0.0)(0, 0), 0.0);
  // Tangent closed form inside interval 1 (primal, anchored at chain time
  // pi/3 with value 0): k(t) = (2/3) tan(1.5 (pi/3 - t)).
  const double t_probe = M_PI / 4.0;
  EXPECT_NEAR(sched.value(1, t_probe)(0, 0),
              (2.0 / 3.0) * std::tan(1.5 * (M_PI / 3.0 - t_probe)), 1e-6);
}

TEST(GainSchedule, BoundariesStayFiniteAndFamiliesCover) {
  auto s = support::spec_timevarying_1d();
  auto rec = eigenvalue_1d(s, 3, 1e-8, IntegrateOptions{});
  auto sched = GainSchedule::build(s, rec, IntegrateOptions{});
  ASSERT_EQ(sched.intervals.size(), rec.chain.size() + 1);
  EXPECT_DOUBLE_EQ(sched.intervals.front().t0, 0.0);
  EXPECT_DOUBLE_EQ(sched.intervals.back().t1, s.H.T());
  for (size_t j = 0; j < sched.intervals.size(); ++j) {
    const auto& iv = sched.intervals[j];
    EXPECT_LT(iv.t0, iv.t1);
    if (j > 0) EXPECT_DOUBLE_EQ(iv.t0, sched.intervals[j - 1].t1);
    for (double frac : {0.0, 0.37, 1.0}) {
      const double t = iv.t0 + frac * (iv.t1 - iv.t0);
      Eigen::MatrixXd K = sched.value(static_cast<int>(j), t);
      EXPECT_TRUE(K.allFinite());
      EXPECT_LT(K.norm(), 1e7);
    }
  }
}
