#pragma once

/**
 * @file affine.hpp
 * @brief Finite-dimensional affine spaces with explicit charts, affine and
 * bi-affine maps, and their linear parts.
 *
 * A space has a reference chart and any number of further charts, each
 * related to the reference chart by an affine transition
 * `x_ref = M * x_chart + b`. Points carry the chart they are written in;
 * model vectors transform with M only.
 */

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "affgeo/errors.hpp"

namespace affgeo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kIdentityTolerance = 1e-12;
inline constexpr double kNumericTolerance = 1e-6;

/// Affine transition from a chart into the reference chart.
struct ChartTransition {
  Matrix linear;
  Vector offset;
  Matrix inverse;
};

class AffineSpace {
 public:
  static constexpr const char* kReferenceChart = "ref";

  explicit AffineSpace(int dimension, std::string name = "A") : dim_(dimension), name_(std::move(name)) {
    if (dimension < 0) throw ContractViolation("negative dimension");
  }

  static std::shared_ptr<AffineSpace> make(int dimension, std::string name = "A") {
    return std::make_shared<AffineSpace>(dimension, std::move(name));
  }

  /// Register chart `name` with `x_ref = linear * x_chart + offset`.
  AffineSpace& add_chart(const std::string& name, const Matrix& linear, const Vector& offset) {
    if (name == kReferenceChart || charts_.contains(name))
      throw ContractViolation("duplicate chart \"" + name + "\"");
    if (linear.rows() != dim_ || linear.cols() != dim_ || offset.size() != dim_)
      throw DimensionMismatch("chart \"" + name + "\" has wrong dimensions");
    Eigen::FullPivLU<Matrix> lu(linear);
    if (dim_ > 0 && !lu.isInvertible()) throw ContractViolation("chart \"" + name + "\" transition is singular");
    Matrix inv = dim_ > 0 ? Matrix(lu.inverse()) : Matrix(0, 0);
    if (dim_ > 0) {
      const double residual = (linear * inv - Matrix::Identity(dim_, dim_)).cwiseAbs().maxCoeff();
      if (residual > kIdentityTolerance * std::max(1.0, linear.cwiseAbs().maxCoeff() * inv.cwiseAbs().maxCoeff()))
        throw ContractViolation("chart \"" + name + "\" transition is ill-conditioned");
    }
    charts_.emplace(name, ChartTransition{linear, offset, std::move(inv)});
    return *this;
  }

  /// Translation chart: `x_ref = x_chart + offset`.
  AffineSpace& add_translation_chart(const std::string& name, const Vector& offset) {
    return add_chart(name, Matrix::Identity(dim_, dim_), offset);
  }

  int dimension() const noexcept { return dim_; }
  const std::string& name() const noexcept { return name_; }

  bool has_chart(const std::string& chart) const { return chart == kReferenceChart || charts_.contains(chart); }

  std::vector<std::string> chart_names() const {
    std::vector<std::string> out{kReferenceChart};
    for (const auto& [n, _] : charts_) out.push_back(n);
    return out;
  }

  const ChartTransition& transition(const std::string& chart) const {
    auto it = charts_.find(chart);
    if (it == charts_.end()) throw ContractViolation("unknown chart \"" + chart + "\" in space " + name_);
    return it->second;
  }

  Vector point_to_reference(const std::string& chart, const Vector& x) const {
    check_size(x);
    if (chart == kReferenceChart) return x;
    const auto& t = transition(chart);
    return t.linear * x + t.offset;
  }

  Vector point_from_reference(const std::string& chart, const Vector& x) const {
    check_size(x);
    if (chart == kReferenceChart) return x;
    const auto& t = transition(chart);
    return t.inverse * (x - t.offset);
  }

  Vector vector_to_reference(const std::string& chart, const Vector& u) const {
    check_size(u);
    if (chart == kReferenceChart) return u;
    return transition(chart).linear * u;
  }

  Vector vector_from_reference(const std::string& chart, const Vector& u) const {
    check_size(u);
    if (chart == kReferenceChart) return u;
    return transition(chart).inverse * u;
  }

  /// Largest deviation of transition∘inverse from the identity over all charts.
  double max_roundtrip_residual() const {
    double worst = 0.0;
    for (const auto& [n, t] : charts_) {
      if (dim_ == 0) continue;
      worst = std::max(worst, (t.linear * t.inverse - Matrix::Identity(dim_, dim_)).cwiseAbs().maxCoeff());
    }
    return worst;
  }

 private:
  void check_size(const Vector& v) const {
    if (v.size() != dim_) throw DimensionMismatch("expected " + std::to_string(dim_) + " coordinates");
  }

  int dim_;
  std::string name_;
  std::map<std::string, ChartTransition> charts_;
};

using SpacePtr = std::shared_ptr<const AffineSpace>;

struct AffinePoint {
  SpacePtr space;
  std::string chart = AffineSpace::kReferenceChart;
  Vector coords;

  static AffinePoint at(SpacePtr space, Vector coords, std::string chart = AffineSpace::kReferenceChart) {
    if (!space->has_chart(chart)) throw ContractViolation("unknown chart \"" + chart + "\"");
    if (coords.size() != space->dimension()) throw DimensionMismatch("point has wrong dimension");
    return AffinePoint{std::move(space), std::move(chart), std::move(coords)};
  }

  Vector reference_coords() const { return space->point_to_reference(chart, coords); }

  AffinePoint in_chart(const std::string& target) const {
    return at(space, space->point_from_reference(target, reference_coords()), target);
  }
};

struct TangentVec {
  SpacePtr space;
  std::string chart = AffineSpace::kReferenceChart;
  Vector components;

  Vector reference_components() const { return space->vector_to_reference(chart, components); }

  TangentVec in_chart(const std::string& target) const {
    return TangentVec{space, target, space->vector_from_reference(target, reference_components())};
  }
};

/// a + u, written in the chart of `a`.
inline AffinePoint translate(const AffinePoint& a, const TangentVec& u) {
  if (a.space != u.space) throw ContractViolation("point and vector belong to different spaces");
  return AffinePoint::at(a.space, a.coords + a.space->vector_from_reference(a.chart, u.reference_components()),
                         a.chart);
}

/// The difference map alpha(p, q) = p - q, in reference-chart components.
inline TangentVec difference(const AffinePoint& p, const AffinePoint& q) {
  if (p.space != q.space) throw ContractViolation("points belong to different spaces");
  return TangentVec{p.space, AffineSpace::kReferenceChart, p.reference_coords() - q.reference_coords()};
}

/// Norm of alpha(a3,a2) + alpha(a2,a1) + alpha(a1,a3).
inline double cocycle_check(const AffinePoint& a1, const AffinePoint& a2, const AffinePoint& a3) {
  const Vector sum = difference(a3, a2).components + difference(a2, a1).components + difference(a1, a3).components;
  return sum.size() == 0 ? 0.0 : sum.norm();
}

/// phi(x) = L x + b on reference coordinates.
class AffineMap {
 public:
  AffineMap(SpacePtr domain, SpacePtr codomain, Matrix linear, Vector offset)
      : domain_(std::move(domain)), codomain_(std::move(codomain)), linear_(std::move(linear)),
        offset_(std::move(offset)) {
    if (linear_.rows() != codomain_->dimension() || linear_.cols() != domain_->dimension() ||
        offset_.size() != codomain_->dimension())
      throw DimensionMismatch("affine map shape does not match its spaces");
  }

  const SpacePtr& domain() const noexcept { return domain_; }
  const SpacePtr& codomain() const noexcept { return codomain_; }
  const Vector& offset() const noexcept { return offset_; }

  /// The linear part phi_V.
  const Matrix& linear_part() const noexcept { return linear_; }

  AffinePoint operator()(const AffinePoint& a) const {
    if (a.space != domain_) throw ContractViolation("point is not in the domain of the map");
    return AffinePoint::at(codomain_, linear_ * a.reference_coords() + offset_);
  }

  TangentVec apply_linear(const TangentVec& u) const {
    if (u.space != domain_) throw ContractViolation("vector is not in the model of the domain");
    return TangentVec{codomain_, AffineSpace::kReferenceChart, linear_ * u.reference_components()};
  }

 private:
  SpacePtr domain_;
  SpacePtr codomain_;
  Matrix linear_;
  Vector offset_;
};

inline const Matrix& linear_part(const AffineMap& phi) { return phi.linear_part(); }

/// psi ∘ phi.
inline AffineMap compose(const AffineMap& psi, const AffineMap& phi) {
  if (phi.codomain() != psi.domain()) throw ContractViolation("maps are not composable");
  return AffineMap(phi.domain(), psi.codomain(), psi.linear_part() * phi.linear_part(),
                   psi.linear_part() * phi.offset() + psi.offset());
}

/**
 * Bi-affine map Phi(x, y) = C(x ⊗ y) + D x + E y + F, with values in R^k.
 * `bilinear[k]` is the n1 x n2 slice of C for output component k.
 */
class BiAffineMap {
 public:
  /// (u, y) -> C(u ⊗ y) + D u: linear in u, affine in y.
  struct FirstPartial {
    std::vector<Matrix> bilinear;
    Matrix d;
    Vector operator()(const Vector& u, const Vector& y) const {
      Vector out = d * u;
      for (std::size_t k = 0; k < bilinear.size(); ++k) out[static_cast<Eigen::Index>(k)] += u.dot(bilinear[k] * y);
      return out;
    }
  };

  /// (x, w) -> C(x ⊗ w) + E w: affine in x, linear in w.
  struct SecondPartial {
    std::vector<Matrix> bilinear;
    Matrix e;
    Vector operator()(const Vector& x, const Vector& w) const {
      Vector out = e * w;
      for (std::size_t k = 0; k < bilinear.size(); ++k) out[static_cast<Eigen::Index>(k)] += x.dot(bilinear[k] * w);
      return out;
    }
  };

  /// (u, w) -> C(u ⊗ w).
  struct BilinearPart {
    std::vector<Matrix> bilinear;
    Vector operator()(const Vector& u, const Vector& w) const {
      Vector out(static_cast<Eigen::Index>(bilinear.size()));
      for (std::size_t k = 0; k < bilinear.size(); ++k) out[static_cast<Eigen::Index>(k)] = u.dot(bilinear[k] * w);
      return out;
    }
  };

  struct Parts {
    FirstPartial first;
    SecondPartial second;
    BilinearPart bilinear;
  };

  BiAffineMap(SpacePtr first, SpacePtr second, std::vector<Matrix> c, Matrix d, Matrix e, Vector f)
      : first_(std::move(first)), second_(std::move(second)), c_(std::move(c)), d_(std::move(d)), e_(std::move(e)),
        f_(std::move(f)) {
    const auto k = static_cast<Eigen::Index>(c_.size());
    const int n1 = first_->dimension();
    const int n2 = second_->dimension();
    bool ok = f_.size() == k && d_.rows() == k && d_.cols() == n1 && e_.rows() == k && e_.cols() == n2;
    for (const auto& m : c_) ok = ok && m.rows() == n1 && m.cols() == n2;
    if (!ok) throw DimensionMismatch("bi-affine coefficient shapes are inconsistent");
  }

  int codimension() const noexcept { return static_cast<int>(c_.size()); }
  const SpacePtr& first_space() const noexcept { return first_; }
  const SpacePtr& second_space() const noexcept { return second_; }

  Vector operator()(const Vector& x, const Vector& y) const {
    Vector out = d_ * x + e_ * y + f_;
    for (std::size_t k = 0; k < c_.size(); ++k) out[static_cast<Eigen::Index>(k)] += x.dot(c_[k] * y);
    return out;
  }

  Vector operator()(const AffinePoint& x, const AffinePoint& y) const {
    if (x.space != first_ || y.space != second_) throw ContractViolation("arguments are not in the domain");
    return (*this)(x.reference_coords(), y.reference_coords());
  }

  Parts parts() const { return Parts{FirstPartial{c_, d_}, SecondPartial{c_, e_}, BilinearPart{c_}}; }

 private:
  SpacePtr first_;
  SpacePtr second_;
  std::vector<Matrix> c_;
  Matrix d_;
  Matrix e_;
  Vector f_;
};

/// (Phi¹_V, Phi²_V, Phi_V).
inline BiAffineMap::Parts biaffine_parts(const BiAffineMap& phi) { return phi.parts(); }

}  // namespace affgeo
