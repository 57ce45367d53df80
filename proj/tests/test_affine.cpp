#include <vector>

#include <gtest/gtest.h>

#include "affgeo/affine.hpp"
#include "affgeo/sampling.hpp"

using namespace affgeo;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

/// A random invertible transition: a random matrix shifted towards the identity.
Matrix random_invertible(int n, Rng& rng) {
  return Matrix::Identity(n, n) * 2.0 + random_matrix(n, n, rng, -0.5, 0.5);
}

}  // namespace

TEST(Difference, SameChartSubtractsCoordinates) {
  auto a = AffineSpace::make(2);
  const auto d = difference(AffinePoint::at(a, vec({1, 2})), AffinePoint::at(a, vec({0, 0})));
  EXPECT_EQ(d.components, vec({1, 2}));
}

TEST(Difference, OfAPointWithItselfIsZero) {
  auto a = AffineSpace::make(3);
  Rng rng(1);
  const auto p = AffinePoint::at(a, random_vector(3, rng));
  EXPECT_EQ(difference(p, p).components, Vector::Zero(3));
}

TEST(Difference, AcrossChartsUsesTheTransition) {
  auto a = AffineSpace::make(2);
  a->add_translation_chart("B", vec({1, 1}));
  const auto p = AffinePoint::at(a, vec({0, 0}), "B");
  const auto q = AffinePoint::at(a, vec({0, 0}));
  EXPECT_EQ(difference(p, q).components, vec({1, 1}));
}

TEST(Difference, IsBijectiveInTheFirstSlot) {
  auto a = AffineSpace::make(3);
  a->add_chart("C", Matrix::Identity(3, 3) * 3.0, vec({1, -2, 0.5}));
  Rng rng(2);
  const auto base = AffinePoint::at(a, random_vector(3, rng), "C");
  for (int i = 0; i < 16; ++i) {
    const TangentVec u{a, AffineSpace::kReferenceChart, random_vector(3, rng)};
    const auto moved = translate(base, u);
    EXPECT_EQ(moved.chart, "C");
    EXPECT_LT((difference(moved, base).components - u.components).norm(), 1e-12);
  }
}

TEST(Cocycle, VanishesForEqualPoints) {
  auto a = AffineSpace::make(2);
  const auto p = AffinePoint::at(a, vec({0.3, -0.7}));
  EXPECT_EQ(cocycle_check(p, p, p), 0.0);
}

TEST(Cocycle, VanishesExactlyInOneChart) {
  auto a = AffineSpace::make(4);
  Rng rng(3);
  for (int i = 0; i < 32; ++i) {
    // Integer coordinates make every subtraction exact.
    Vector x(4), y(4), z(4);
    for (int k = 0; k < 4; ++k) {
      x[k] = rng.integer(-100, 100);
      y[k] = rng.integer(-100, 100);
      z[k] = rng.integer(-100, 100);
    }
    EXPECT_EQ(cocycle_check(AffinePoint::at(a, x), AffinePoint::at(a, y), AffinePoint::at(a, z)), 0.0);
  }
}

TEST(Cocycle, SmallAcrossThreeCharts) {
  auto a = AffineSpace::make(3);
  Rng rng(4);
  a->add_chart("B", random_invertible(3, rng), random_vector(3, rng));
  a->add_chart("C", random_invertible(3, rng), random_vector(3, rng));
  for (int i = 0; i < 64; ++i) {
    const auto p = AffinePoint::at(a, random_vector(3, rng));
    const auto q = AffinePoint::at(a, random_vector(3, rng), "B");
    const auto r = AffinePoint::at(a, random_vector(3, rng), "C");
    EXPECT_LT(cocycle_check(p, q, r), 1e-12);
  }
}

TEST(Charts, PointRoundTrip) {
  auto a = AffineSpace::make(3);
  Rng rng(5);
  a->add_chart("B", random_invertible(3, rng), random_vector(3, rng));
  for (int i = 0; i < 32; ++i) {
    const auto p = AffinePoint::at(a, random_vector(3, rng));
    const auto back = p.in_chart("B").in_chart(AffineSpace::kReferenceChart);
    EXPECT_LT((back.coords - p.coords).norm(), 1e-12);
  }
  EXPECT_LT(a->max_roundtrip_residual(), 1e-12);
}

TEST(Charts, RejectsSingularAndDuplicate) {
  auto a = AffineSpace::make(2);
  EXPECT_THROW(a->add_chart("S", Matrix::Zero(2, 2), Vector::Zero(2)), ContractViolation);
  a->add_translation_chart("B", vec({1, 0}));
  EXPECT_THROW(a->add_translation_chart("B", vec({0, 1})), ContractViolation);
  EXPECT_THROW(a->add_translation_chart("C", vec({0, 1, 2})), DimensionMismatch);
  EXPECT_THROW(AffinePoint::at(a, vec({1, 2}), "missing"), ContractViolation);
}

TEST(Charts, DifferenceIsChartIndependent) {
  auto a = AffineSpace::make(2);
  Rng rng(6);
  a->add_chart("B", random_invertible(2, rng), random_vector(2, rng));
  const auto p = AffinePoint::at(a, random_vector(2, rng));
  const auto q = AffinePoint::at(a, random_vector(2, rng));
  const auto direct = difference(p, q).components;
  const auto via_b = difference(p.in_chart("B"), q.in_chart("B")).components;
  EXPECT_LT((direct - via_b).norm(), 1e-12);
}

TEST(LinearPart, Translation) {
  auto a = AffineSpace::make(3);
  const AffineMap phi(a, a, Matrix::Identity(3, 3), vec({1, 2, 3}));
  EXPECT_EQ(linear_part(phi), Matrix::Identity(3, 3));
}

TEST(LinearPart, ConstantMap) {
  auto a = AffineSpace::make(2);
  auto b = AffineSpace::make(3);
  const AffineMap phi(a, b, Matrix::Zero(3, 2), vec({4, 5, 6}));
  EXPECT_EQ(linear_part(phi), Matrix::Zero(3, 2));
}

TEST(LinearPart, ScalarAffineMap) {
  auto a = AffineSpace::make(1);
  const AffineMap phi(a, a, Matrix::Constant(1, 1, 2.0), vec({1}));
  EXPECT_EQ(linear_part(phi)(0, 0), 2.0);
  // phi(x) - phi(y) = 2 (x - y)
  const auto x = AffinePoint::at(a, vec({3})), y = AffinePoint::at(a, vec({-1}));
  EXPECT_EQ(difference(phi(x), phi(y)).components[0], 8.0);
}

TEST(LinearPart, CommutesWithDifferences) {
  auto a = AffineSpace::make(3);
  auto b = AffineSpace::make(2);
  Rng rng(7);
  const AffineMap phi(a, b, random_matrix(2, 3, rng), random_vector(2, rng));
  for (int i = 0; i < 16; ++i) {
    const auto p = AffinePoint::at(a, random_vector(3, rng));
    const auto q = AffinePoint::at(a, random_vector(3, rng));
    const auto lhs = difference(phi(p), phi(q)).components;
    const auto rhs = phi.apply_linear(difference(p, q)).components;
    EXPECT_LT((lhs - rhs).norm(), 1e-12);
  }
}

TEST(Compose, AgreesWithSequentialApplication) {
  auto a = AffineSpace::make(2);
  auto b = AffineSpace::make(3);
  auto c = AffineSpace::make(1);
  Rng rng(8);
  const AffineMap phi(a, b, random_matrix(3, 2, rng), random_vector(3, rng));
  const AffineMap psi(b, c, random_matrix(1, 3, rng), random_vector(1, rng));
  const auto both = compose(psi, phi);
  for (int i = 0; i < 8; ++i) {
    const auto p = AffinePoint::at(a, random_vector(2, rng));
    EXPECT_NEAR(both(p).coords[0], psi(phi(p)).coords[0], 1e-12);
  }
  EXPECT_THROW(compose(phi, psi), ContractViolation);
}

TEST(BiAffine, QuadraticFormExpansion) {
  // Phi(x, y) = xy + x + y + 1
  auto r = AffineSpace::make(1);
  const BiAffineMap phi(r, r, {Matrix::Constant(1, 1, 1.0)}, Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0),
                        vec({1}));
  const auto parts = biaffine_parts(phi);
  for (double u : {-2.0, 0.5, 3.0})
    for (double w : {-1.0, 0.25, 4.0}) {
      EXPECT_DOUBLE_EQ(parts.bilinear(vec({u}), vec({w}))[0], u * w);
      EXPECT_DOUBLE_EQ(parts.first(vec({u}), vec({w}))[0], u * w + u);
      EXPECT_DOUBLE_EQ(parts.second(vec({u}), vec({w}))[0], u * w + w);
    }
  EXPECT_DOUBLE_EQ(phi(vec({2}), vec({3}))[0], 12.0);
}

TEST(BiAffine, ConstantMapHasZeroParts) {
  auto a = AffineSpace::make(2);
  auto b = AffineSpace::make(3);
  const BiAffineMap phi(a, b, {Matrix::Zero(2, 3)}, Matrix::Zero(1, 2), Matrix::Zero(1, 3), vec({7}));
  const auto parts = biaffine_parts(phi);
  Rng rng(9);
  const auto u = random_vector(2, rng);
  const auto w = random_vector(3, rng);
  EXPECT_EQ(parts.bilinear(u, w)[0], 0.0);
  EXPECT_EQ(parts.first(u, w)[0], 0.0);
  EXPECT_EQ(parts.second(u, w)[0], 0.0);
}

TEST(BiAffine, PartsMatchFiniteDifferences) {
  // Phi(x, y) = 3xy: the linear parts are the differences in each slot.
  auto r = AffineSpace::make(1);
  const BiAffineMap phi(r, r, {Matrix::Constant(1, 1, 3.0)}, Matrix::Zero(1, 1), Matrix::Zero(1, 1), vec({0}));
  const auto parts = biaffine_parts(phi);
  Rng rng(10);
  for (int i = 0; i < 16; ++i) {
    const auto x = random_vector(1, rng), y = random_vector(1, rng);
    const auto u = random_vector(1, rng), w = random_vector(1, rng);
    const double first = phi(x + u, y)[0] - phi(x, y)[0];
    const double second = phi(x, y + w)[0] - phi(x, y)[0];
    const double mixed = phi(x + u, y + w)[0] - phi(x + u, y)[0] - phi(x, y + w)[0] + phi(x, y)[0];
    EXPECT_NEAR(parts.first(u, y)[0], first, 1e-12);
    EXPECT_NEAR(parts.second(x, w)[0], second, 1e-12);
    EXPECT_NEAR(parts.bilinear(u, w)[0], mixed, 1e-12);
    EXPECT_NEAR(parts.bilinear(u, w)[0], 3.0 * u[0] * w[0], 1e-12);
  }
}

TEST(BiAffine, RejectsInconsistentShapes) {
  auto a = AffineSpace::make(2);
  EXPECT_THROW(BiAffineMap(a, a, {Matrix::Zero(2, 3)}, Matrix::Zero(1, 2), Matrix::Zero(1, 2), vec({0})),
               DimensionMismatch);
}

TEST(Properties, BiAffineSlotDifferences) {
  auto a = AffineSpace::make(2);
  auto b = AffineSpace::make(3);
  Rng rng(11);
  std::vector<Matrix> c{random_matrix(2, 3, rng), random_matrix(2, 3, rng)};
  const BiAffineMap phi(a, b, c, random_matrix(2, 2, rng), random_matrix(2, 3, rng), random_vector(2, rng));
  const auto parts = phi.parts();
  for (int i = 0; i < 64; ++i) {
    const auto x = random_vector(2, rng), u = random_vector(2, rng);
    const auto y = random_vector(3, rng), w = random_vector(3, rng);
    EXPECT_LT((phi(x + u, y) - phi(x, y) - parts.first(u, y)).norm(), 1e-12);
    EXPECT_LT((phi(x, y + w) - phi(x, y) - parts.second(x, w)).norm(), 1e-12);
  }
}

TEST(Properties, LinearPartOfComposition) {
  auto a = AffineSpace::make(3);
  Rng rng(12);
  for (int i = 0; i < 8; ++i) {
    const AffineMap phi(a, a, random_matrix(3, 3, rng), random_vector(3, rng));
    const AffineMap psi(a, a, random_matrix(3, 3, rng), random_vector(3, rng));
    EXPECT_LT((linear_part(compose(psi, phi)) - linear_part(psi) * linear_part(phi)).norm(), 1e-12);
  }
}

TEST(Properties, AffineMapApplicationIsChartInvariant) {
  auto a = AffineSpace::make(2);
  Rng rng(13);
  a->add_chart("B", Matrix::Identity(2, 2) * 1.5 + random_matrix(2, 2, rng, -0.3, 0.3), random_vector(2, rng));
  const AffineMap phi(a, a, random_matrix(2, 2, rng), random_vector(2, rng));
  for (int i = 0; i < 16; ++i) {
    const auto p = AffinePoint::at(a, random_vector(2, rng));
    EXPECT_LT((phi(p).coords - phi(p.in_chart("B")).coords).norm(), 1e-12);
  }
}
