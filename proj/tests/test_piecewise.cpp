#include <gtest/gtest.h>

#include "hameig/piecewise.hpp"
#include "test_support.hpp"

using hameig::PiecewiseMatrix;
using hameig::PolyPiece;
using support::m1;

TEST(Piecewise, ConstantValueEverywhere) {
  auto p = PiecewiseMatrix::constant(m1(2.5), 0.0, 3.0);
  EXPECT_DOUBLE_EQ(p.value(0.0)(0, 0), 2.5);
  EXPECT_DOUBLE_EQ(p.value(1.7)(0, 0), 2.5);
  EXPECT_DOUBLE_EQ(p.value(3.0)(0, 0), 2.5);
}

TEST(Piecewise, PolynomialUsesLocalOffsetBasis) {
  // value(t) = 1 + 2 (t-1) + 3 (t-1)^2 on [1, 2]
  PolyPiece piece{1.0, 2.0, {m1(1.0), m1(2.0), m1(3.0)}};
  PiecewiseMatrix p({piece});
  EXPECT_NEAR(p.value(1.0)(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(p.value(1.5)(0, 0), 1.0 + 2.0 * 0.5 + 3.0 * 0.25, 1e-15);
  EXPECT_NEAR(p.value(2.0)(0, 0), 6.0, 1e-15);
}

TEST(Piecewise, MultiplePiecesSelectByTime) {
  PiecewiseMatrix p({support::lin_piece(0.0, 0.5, 1.0, 0.4),
                     support::lin_piece(0.5, 1.0, 1.2, -0.4)});
  EXPECT_NEAR(p.value(0.25)(0, 0), 1.1, 1e-15);
  EXPECT_NEAR(p.value(0.5)(0, 0), 1.2, 1e-15);
  EXPECT_NEAR(p.value(0.75)(0, 0), 1.1, 1e-15);
}

TEST(Piecewise, RejectsGapsAndOverlaps) {
  EXPECT_THROW(PiecewiseMatrix({support::lin_piece(0.0, 0.4, 1.0, 0.0),
                                support::lin_piece(0.5, 1.0, 1.0, 0.0)}),
               hameig::ConfigError);
  EXPECT_THROW(PiecewiseMatrix({support::lin_piece(0.0, 0.6, 1.0, 0.0),
                                support::lin_piece(0.5, 1.0, 1.0, 0.0)}),
               hameig::ConfigError);
}

TEST(Piecewise, RejectsDimensionMismatchAcrossPieces) {
  PolyPiece a{0.0, 0.5, {m1(1.0)}};
  PolyPiece b{0.5, 1.0, {Eigen::MatrixXd::Zero(2, 2)}};
  EXPECT_THROW(PiecewiseMatrix({a, b}), hameig::ConfigError);
}

TEST(Piecewise, RejectsEmptyOrDegeneratePieces) {
  EXPECT_THROW(PiecewiseMatrix(std::vector<PolyPiece>{}), hameig::ConfigError);
  EXPECT_THROW(PiecewiseMatrix({PolyPiece{0.5, 0.5, {m1(1.0)}}}),
               hameig::ConfigError);
  EXPECT_THROW(PiecewiseMatrix({PolyPiece{0.0, 1.0, {}}}), hameig::ConfigError);
}

TEST(Piecewise, ValueOutsideDomainThrows) {
  auto p = PiecewiseMatrix::constant(m1(1.0), 0.0, 1.0);
  EXPECT_THROW(p.value(-0.1), hameig::DomainError);
  EXPECT_THROW(p.value(1.1), hameig::DomainError);
}

TEST(Piecewise, ClampedValueExtendsEndpoints) {
  PiecewiseMatrix p({support::lin_piece(0.0, 1.0, 1.0, 2.0)});
  EXPECT_DOUBLE_EQ(p.value_clamped(-5.0)(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(p.value_clamped(7.0)(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(p.value_clamped(0.5)(0, 0), 2.0);
}

TEST(Piecewise, DomainAccessors) {
  PiecewiseMatrix p({support::lin_piece(0.25, 2.0, 0.0, 1.0)});
  EXPECT_DOUBLE_EQ(p.t_begin(), 0.25);
  EXPECT_DOUBLE_EQ(p.t_end(), 2.0);
  EXPECT_EQ(p.rows(), 1);
}
