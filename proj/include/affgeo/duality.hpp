#pragma once

/**
 * @file duality.hpp
 * @brief Vector dual A†, vector hull Â, special affine spaces, the special
 * affine dual A# and its double dual, AV coordinates and the section/function
 * identification F_sigma.
 *
 * Dual and hull elements are stored in reference-chart coordinates. An
 * element of A† is the affine function x -> <w, x> + c; an element of Â is a
 * pair (z, weight) acting on A† by <w, z> + c * weight.
 */

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "affgeo/affine.hpp"
#include "affgeo/errors.hpp"
#include "affgeo/symexpr.hpp"

namespace affgeo {

using ExprVector = std::vector<Expression>;

/// Orientation of the AV fibre coordinate: d/ds = kChiSign * chi_A.
inline constexpr double kChiSign = -1.0;

struct DualElement {
  SpacePtr space;
  Vector w;
  double c = 0.0;

  double operator()(const AffinePoint& a) const {
    if (a.space != space) throw ContractViolation("dual element evaluated on a foreign point");
    return w.dot(a.reference_coords()) + c;
  }

  /// (w, c) of the same function written in chart coordinates.
  std::pair<Vector, double> in_chart(const std::string& chart) const {
    if (chart == AffineSpace::kReferenceChart) return {w, c};
    const auto& t = space->transition(chart);
    return {t.linear.transpose() * w, w.dot(t.offset) + c};
  }

  DualElement operator+(const DualElement& o) const { return {space, w + o.w, c + o.c}; }
  DualElement operator*(double k) const { return {space, w * k, c * k}; }
};

/// The constant function 1_A.
inline DualElement one(const SpacePtr& space) { return {space, Vector::Zero(space->dimension()), 1.0}; }

/// dim A† as a vector space.
inline int dual_dimension(const AffineSpace& space) { return space.dimension() + 1; }

struct HullPoint {
  Vector z;
  double weight = 0.0;

  HullPoint operator+(const HullPoint& o) const { return {z + o.z, weight + o.weight}; }
  HullPoint operator*(double k) const { return {z * k, weight * k}; }
};

/// A ⊂ Â: weight 1.
inline HullPoint embed(const AffinePoint& a) { return {a.reference_coords(), 1.0}; }

/// V(A) ⊂ Â: weight 0.
inline HullPoint embed(const TangentVec& u) { return {u.reference_components(), 0.0}; }

/// Hull coordinates of `h` (reference) as seen from `chart`.
inline HullPoint hull_in_chart(const AffineSpace& space, const HullPoint& h, const std::string& chart) {
  if (chart == AffineSpace::kReferenceChart) return h;
  const auto& t = space.transition(chart);
  return {t.inverse * (h.z - h.weight * t.offset), h.weight};
}

inline double pair(const HullPoint& h, const DualElement& d) {
  if (h.z.size() != d.w.size()) throw DimensionMismatch("hull point and dual element differ in dimension");
  return d.w.dot(h.z) + d.c * h.weight;
}

// ---------------------------------------------------------------------------
// Special affine spaces and the special affine dual
// ---------------------------------------------------------------------------

struct SpecialAffineSpace {
  SpacePtr space;
  Vector distinguished;  // v_A, reference components

  SpecialAffineSpace(SpacePtr s, Vector v) : space(std::move(s)), distinguished(std::move(v)) {
    if (distinguished.size() != space->dimension()) throw DimensionMismatch("distinguished vector dimension");
    if (!(distinguished.norm() > 0.0)) throw ContractViolation("distinguished vector must be non-zero");
  }

  int dimension() const noexcept { return space->dimension(); }

  /// Component of v_A used to solve the constraint <w, v_A> = 1: largest in magnitude.
  Eigen::Index pivot() const {
    Eigen::Index k = 0;
    distinguished.cwiseAbs().maxCoeff(&k);
    return k;
  }
};

/// Name of the dual coordinate w_i (0-based i), printed 1-based.
inline std::string dual_coordinate_name(Eigen::Index i) { return "w" + std::to_string(i + 1); }
inline constexpr const char* kDualConstantName = "c";

/**
 * A# = {(w, c) : <w, v_A> = 1} described by an affine basis. Coordinates on
 * A# are (y, c) where y are the unconstrained w_i (i != pivot) and
 * w = particular + basis * y.
 */
struct SpecialDual {
  SpecialAffineSpace base;
  Eigen::Index pivot;
  Vector particular;  // w0, <w0, v_A> = 1
  Matrix basis;       // n x (n-1), columns annihilate v_A
  std::vector<DualElement> model_basis;  // basis columns (c = 0) followed by 1_A
  DualElement one_element;

  int dimension() const noexcept { return base.dimension(); }

  bool contains(const DualElement& d, double tol = kIdentityTolerance) const {
    return d.space == base.space && std::abs(d.w.dot(base.distinguished) - 1.0) <= tol;
  }

  bool in_model(const DualElement& d, double tol = kIdentityTolerance) const {
    return d.space == base.space && std::abs(d.w.dot(base.distinguished)) <= tol;
  }

  DualElement element(const Vector& y, double c) const { return {base.space, particular + basis * y, c}; }

  /// Free coordinates y of a member of A#.
  Vector coordinates(const DualElement& d) const {
    Vector y(dimension() - 1);
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < dimension(); ++i)
      if (i != pivot) y[j++] = d.w[i];
    return y;
  }

  std::vector<std::string> free_names() const {
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < dimension(); ++i)
      if (i != pivot) out.push_back(dual_coordinate_name(i));
    return out;
  }

  /// w as Expressions of the free coordinates (the constraint solved for w_pivot).
  ExprVector w_expressions() const {
    const auto& v = base.distinguished;
    ExprVector w(static_cast<std::size_t>(dimension()));
    Expression rest = 1.0;
    for (Eigen::Index i = 0; i < dimension(); ++i) {
      if (i == pivot) continue;
      auto wi = Expression::variable(dual_coordinate_name(i));
      w[static_cast<std::size_t>(i)] = wi;
      rest = rest - Expression(v[i]) * wi;
    }
    w[static_cast<std::size_t>(pivot)] = rest / Expression(v[pivot]);
    return w;
  }
};

inline SpecialDual special_dual(const SpecialAffineSpace& s) {
  const int n = s.dimension();
  const auto k = s.pivot();
  const Vector& v = s.distinguished;
  Vector w0 = Vector::Zero(n);
  w0[k] = 1.0 / v[k];
  Matrix basis = Matrix::Zero(n, std::max(n - 1, 0));
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == k) continue;
    basis(i, col) = 1.0;
    basis(k, col) = -v[i] / v[k];
    ++col;
  }
  std::vector<DualElement> model;
  for (Eigen::Index j = 0; j < basis.cols(); ++j) model.push_back({s.space, basis.col(j), 0.0});
  model.push_back(one(s.space));
  return SpecialDual{s, k, std::move(w0), std::move(basis), std::move(model), one(s.space)};
}

/// A# as a special affine space in its own (y, c) coordinates, distinguished vector 1_A = (0, .., 0, 1).
inline SpecialAffineSpace special_dual_space(const SpecialDual& dual) {
  const int n = dual.dimension();
  auto space = AffineSpace::make(n, dual.base.space->name() + "#");
  Vector e = Vector::Zero(n);
  e[n - 1] = 1.0;
  return SpecialAffineSpace(space, e);
}

/**
 * The canonical identification A ≅ (A#)#: a point a goes to evaluation at a,
 * written as an affine function of the (y, c) coordinates of A#.
 */
class DoubleDual {
 public:
  explicit DoubleDual(const SpecialAffineSpace& s)
      : dual_(special_dual(s)), dual_space_(special_dual_space(dual_)) {
    const int n = s.dimension();
    // Rows: basis^T (n-1 rows) then w0^T; maps a -> (coefficients on y, constant term).
    system_ = Matrix(n, n);
    if (n > 1) system_.topRows(n - 1) = dual_.basis.transpose();
    system_.row(n - 1) = dual_.particular.transpose();
    lu_ = Eigen::FullPivLU<Matrix>(system_);
  }

  const SpecialDual& dual() const noexcept { return dual_; }
  const SpecialAffineSpace& dual_space() const noexcept { return dual_space_; }

  /// ev_a(y, c) = <w0 + B y, a> + c.
  DualElement forward(const AffinePoint& a) const {
    if (a.space != dual_.base.space) throw ContractViolation("point is not in the special affine space");
    const int n = dual_.dimension();
    const Vector image = system_ * a.reference_coords();
    Vector w(n);
    w.head(n - 1) = image.head(n - 1);
    w[n - 1] = 1.0;
    return {dual_space_.space, w, image[n - 1]};
  }

  AffinePoint backward(const DualElement& f) const {
    const int n = dual_.dimension();
    if (f.space != dual_space_.space) throw ContractViolation("element does not live on A#");
    if (std::abs(f.w[n - 1] - 1.0) > kIdentityTolerance)
      throw ContractViolation("element is not special: its linear part does not send 1_A to 1");
    Vector rhs(n);
    rhs.head(n - 1) = f.w.head(n - 1);
    rhs[n - 1] = f.c;
    return AffinePoint::at(dual_.base.space, lu_.solve(rhs));
  }

  /// Linear part of `backward` on a model element (w-part must annihilate 1_A).
  Vector backward_linear(const DualElement& model) const {
    const int n = dual_.dimension();
    if (std::abs(model.w[n - 1]) > kIdentityTolerance) throw ContractViolation("not a model element of (A#)#");
    Vector rhs(n);
    rhs.head(n - 1) = model.w.head(n - 1);
    rhs[n - 1] = model.c;
    return lu_.solve(rhs);
  }

  /// Distinguished vector of (A#)#: the constant function 1 on A#.
  DualElement distinguished() const { return one(dual_space_.space); }

 private:
  SpecialDual dual_;
  SpecialAffineSpace dual_space_;
  Matrix system_;
  Eigen::FullPivLU<Matrix> lu_;
};

inline DoubleDual double_special_dual(const SpecialAffineSpace& s) { return DoubleDual(s); }

// ---------------------------------------------------------------------------
// AV coordinates on a special affine space and the identification F_sigma
// ---------------------------------------------------------------------------

/**
 * Adapted coordinates (x, s) on A: x are coordinates on A/<v_A>, and moving
 * s by +1 moves the point by -v_A (d/ds = -chi_A).
 */
class AVChart {
 public:
  explicit AVChart(SpecialAffineSpace s, std::vector<std::string> base_names = {}, std::string fiber_name = "s")
      : s_(std::move(s)), pivot_(s_.pivot()), fiber_(std::move(fiber_name)) {
    const int n = s_.dimension();
    if (base_names.empty())
      for (int i = 1; i < n; ++i) base_names.push_back("x" + std::to_string(i));
    if (static_cast<int>(base_names.size()) != n - 1) throw DimensionMismatch("AV chart needs n-1 base names");
    base_ = std::move(base_names);
  }

  const SpecialAffineSpace& space() const noexcept { return s_; }
  const std::vector<std::string>& base_names() const noexcept { return base_; }
  const std::string& fiber_name() const noexcept { return fiber_; }

  /// (x, s) of a reference-chart point.
  std::pair<Vector, double> coordinates(const Vector& a) const {
    const Vector& v = s_.distinguished;
    const double s = kChiSign * a[pivot_] / v[pivot_];
    Vector x(s_.dimension() - 1);
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < s_.dimension(); ++i)
      if (i != pivot_) x[j++] = a[i] - kChiSign * s * v[i];
    return {x, s};
  }

  Vector point(const Vector& x, double s) const {
    const Vector& v = s_.distinguished;
    Vector a(s_.dimension());
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < s_.dimension(); ++i) a[i] = (i == pivot_) ? 0.0 : x[j++];
    return a + kChiSign * s * v;
  }

  VarContext context() const {
    VarContext ctx = VarContext::of(base_, VarRole::Base);
    ctx.add(fiber_, VarRole::AVCoordinate);
    return ctx;
  }

 private:
  SpecialAffineSpace s_;
  Eigen::Index pivot_;
  std::vector<std::string> base_;
  std::string fiber_;
};

/// F_sigma(x, s) = s - sigma(x): the affine function with chi(F) = -1 vanishing on sigma.
inline Expression F_of_section(const Expression& sigma, const std::string& fiber_name) {
  if (depends_on(sigma, fiber_name))
    throw ContractViolation("section must not depend on the fibre coordinate \"" + fiber_name + "\"");
  return Expression::variable(fiber_name) - sigma;
}

inline Expression F_of_section(const Expression& sigma, const AVChart& chart) {
  return F_of_section(sigma, chart.fiber_name());
}

/// chi_A(F) in AV coordinates.
inline Expression chi_derivative(const Expression& f, const std::string& fiber_name) {
  return Expression(1.0 / kChiSign) * differentiate(f, fiber_name);
}

/// iota†_X: the linear function (w, c) -> <w, X> on A†, in variables w1..wn, c.
inline Expression iota_dagger(const ExprVector& x) {
  Expression out = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    out += Expression::variable(dual_coordinate_name(static_cast<Eigen::Index>(i))) * x[i];
  return out;
}

/// iota#_X: iota†_X restricted to A# and written in the free coordinates of A#/<1_A>.
inline Expression iota_sharp(const SpecialDual& dual, const ExprVector& x) {
  if (static_cast<int>(x.size()) != dual.dimension()) throw DimensionMismatch("section rank differs from A");
  const auto w = dual.w_expressions();
  Expression out = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) out += w[i] * x[i];
  return out;
}

}  // namespace affgeo
