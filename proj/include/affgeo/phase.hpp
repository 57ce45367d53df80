#pragma once

/**
 * @file phase.hpp
 * @brief AV-bundles over a patch, the phase bundle PZ in explicit
 * trivializations, bold differentials, 2-forms, the canonical Poisson bracket
 * on T*M, the aff-Poisson bracket of time-dependent mechanics and the
 * affine Poisson reduction check.
 *
 * A point of PZ is stored as a covector p tagged with a registered section
 * sigma0: the class of (m, sigma) is stored as p = d(sigma - sigma0)(m).
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "affgeo/brackets.hpp"
#include "affgeo/errors.hpp"
#include "affgeo/report.hpp"
#include "affgeo/sampling.hpp"
#include "affgeo/symexpr.hpp"

namespace affgeo {

inline std::vector<std::string> default_momentum_names(const std::vector<std::string>& base) {
  if (base.size() == 1) return {"p"};
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= base.size(); ++i) out.push_back("p" + std::to_string(i));
  return out;
}

/// Gradient of f as a covector field.
inline ExprVector gradient(const Expression& f, const std::vector<std::string>& vars) {
  ExprVector out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(differentiate(f, v));
  return out;
}

// ---------------------------------------------------------------------------
// AV-bundles and PZ
// ---------------------------------------------------------------------------

struct PhasePoint {
  Point m;
  Vector p;
  std::string tag;
};

/// A section of PZ written in the trivialization of `tag`: components alpha - d(tag).
struct AffineOneForm {
  ExprVector components;
  std::string tag;
};

/// Antisymmetric 2-form sum_{i<j} w_ij dz^i ^ dz^j; only i < j is stored.
class TwoForm {
 public:
  explicit TwoForm(std::vector<std::string> vars)
      : vars_(std::move(vars)), upper_(vars_.size() * (vars_.size() > 0 ? vars_.size() - 1 : 0) / 2, Expression(0.0)) {}

  const std::vector<std::string>& variables() const noexcept { return vars_; }
  std::size_t dimension() const noexcept { return vars_.size(); }

  /// Coefficient of dz^i ^ dz^j for any (i, j).
  Expression coefficient(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    if (i < j) return upper_[index(i, j)];
    return -upper_[index(j, i)];
  }

  /// Adds k dz^i ^ dz^j.
  void add(std::size_t i, std::size_t j, const Expression& k) {
    if (i == j || k.is_zero()) return;
    if (i < j)
      upper_[index(i, j)] += k;
    else
      upper_[index(j, i)] -= k;
  }

  void simplify_all() {
    for (auto& e : upper_) e = simplify(e);
  }

  Matrix evaluate(const Point& at) const {
    const auto n = static_cast<Eigen::Index>(vars_.size());
    Matrix out = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < vars_.size(); ++i)
      for (std::size_t j = i + 1; j < vars_.size(); ++j) {
        const double v = affgeo::evaluate(upper_[index(i, j)], at);
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = -v;
      }
    return out;
  }

  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < vars_.size(); ++i)
      for (std::size_t j = i + 1; j < vars_.size(); ++j) {
        const auto& e = upper_[index(i, j)];
        if (e.is_zero()) continue;
        if (!out.empty()) out += " + ";
        out += "(" + affgeo::to_string(e) + ") d" + vars_[i] + "^d" + vars_[j];
      }
    return out.empty() ? "0" : out;
  }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    const std::size_t n = vars_.size();
    return i * n - i * (i + 1) / 2 + (j - i - 1);
  }

  std::vector<std::string> vars_;
  std::vector<Expression> upper_;
};

/// Largest coefficient difference between two 2-forms on the same variables over `points`.
inline double max_difference(const TwoForm& a, const TwoForm& b, const std::vector<Point>& points) {
  if (a.variables() != b.variables()) throw DimensionMismatch("2-forms live on different coordinates");
  double worst = 0.0;
  for (const auto& p : points) worst = std::max(worst, (a.evaluate(p) - b.evaluate(p)).cwiseAbs().maxCoeff());
  return worst;
}

/// Exterior derivative of a covector field: (d alpha)_ij = d_i alpha_j - d_j alpha_i.
inline TwoForm exterior_derivative(const ExprVector& alpha, const std::vector<std::string>& vars) {
  if (alpha.size() != vars.size()) throw DimensionMismatch("covector field has the wrong number of components");
  TwoForm out(vars);
  for (std::size_t i = 0; i < vars.size(); ++i)
    for (std::size_t j = i + 1; j < vars.size(); ++j)
      out.add(i, j, differentiate(alpha[j], vars[i]) - differentiate(alpha[i], vars[j]));
  out.simplify_all();
  return out;
}

/**
 * An AV-bundle M x R with fibre coordinate s and a registry of named
 * trivializing sections.
 */
class AVBundle {
 public:
  AVBundle(std::vector<std::string> base, std::string fiber = "s", std::vector<std::string> momenta = {})
      : base_(std::move(base)), fiber_(std::move(fiber)), momenta_(std::move(momenta)) {
    if (momenta_.empty()) momenta_ = default_momentum_names(base_);
    if (momenta_.size() != base_.size()) throw DimensionMismatch("need one momentum name per base coordinate");
  }

  const std::vector<std::string>& base() const noexcept { return base_; }
  const std::vector<std::string>& momenta() const noexcept { return momenta_; }
  const std::string& fiber() const noexcept { return fiber_; }

  /// Coordinates (x, p) on PZ.
  std::vector<std::string> phase_variables() const {
    auto out = base_;
    out.insert(out.end(), momenta_.begin(), momenta_.end());
    return out;
  }

  VarContext context() const { return VarContext::of(base_, VarRole::Base); }

  AVBundle& add_section(const std::string& name, const Expression& sigma) {
    if (depends_on(sigma, fiber_))
      throw ContractViolation("section \"" + name + "\" depends on the fibre coordinate " + fiber_);
    for (const auto& v : free_variables(sigma))
      if (std::find(base_.begin(), base_.end(), v) == base_.end())
        throw ContractViolation("section \"" + name + "\" depends on \"" + v + "\", which is not a base coordinate");
    if (!sections_.emplace(name, sigma).second) throw ContractViolation("section \"" + name + "\" already registered");
    order_.push_back(name);
    return *this;
  }

  const Expression& section(const std::string& name) const {
    const auto it = sections_.find(name);
    if (it == sections_.end()) throw ContractViolation("no section named \"" + name + "\"");
    return it->second;
  }

  const std::vector<std::string>& section_names() const noexcept { return order_; }

  /// sigma1 - sigma2: a function on M.
  Expression difference(const std::string& a, const std::string& b) const { return simplify(section(a) - section(b)); }

  /// bold d(sigma)(m) in the trivialization of `tag`.
  PhasePoint bold_d(const Expression& sigma, const Point& m, const std::string& tag) const {
    const auto g = gradient(sigma - section(tag), base_);
    return {m, evaluate(g, m), tag};
  }

  PhasePoint bold_d(const std::string& name, const Point& m, const std::string& tag) const {
    return bold_d(section(name), m, tag);
  }

  /// Re-expresses a phase point in another trivialization: p + d(old - new)(m).
  PhasePoint retag(const PhasePoint& x, const std::string& tag) const {
    const auto shift = evaluate(gradient(section(x.tag) - section(tag), base_), x.m);
    return {x.m, x.p + shift, tag};
  }

  /// The affine 1-form m -> bold d(sigma)(m), written in `tag`.
  AffineOneForm bold_d_section(const Expression& sigma, const std::string& tag) const {
    auto g = gradient(sigma - section(tag), base_);
    for (auto& e : g) e = simplify(e);
    return {std::move(g), tag};
  }

  AffineOneForm retag(const AffineOneForm& alpha, const std::string& tag) const {
    return {alpha.components + gradient(section(alpha.tag) - section(tag), base_), tag};
  }

 private:
  std::vector<std::string> base_;
  std::string fiber_;
  std::vector<std::string> momenta_;
  std::map<std::string, Expression, std::less<>> sections_;
  std::vector<std::string> order_;
};

/// The differential of an affine 1-form: d(alpha - d sigma) for its trivialization sigma.
inline TwoForm bold_d_oneform(const AVBundle& Z, const AffineOneForm& alpha) {
  return exterior_derivative(alpha.components, Z.base());
}

/**
 * omega_Z written through the trivialization of `tag`, in the (x, p)
 * coordinates of the reference trivialization `reference`: the pullback of
 * sum dP_i ^ dX^i along (x, p) -> (x, p + d(reference - tag)).
 */
inline TwoForm omega_Z(const AVBundle& Z, const std::string& tag, const std::string& reference) {
  const auto& x = Z.base();
  const auto& p = Z.momenta();
  const auto vars = Z.phase_variables();
  const auto shift = gradient(Z.section(reference) - Z.section(tag), x);
  const std::size_t n = x.size();

  // Components of the map z -> (X, P).
  std::vector<ExprVector> dX(n), dP(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Expression Xi = Expression::variable(x[i]);
    const Expression Pi = Expression::variable(p[i]) + shift[i];
    dX[i] = gradient(Xi, vars);
    dP[i] = gradient(Pi, vars);
  }
  TwoForm out(vars);
  for (std::size_t a = 0; a < vars.size(); ++a)
    for (std::size_t b = a + 1; b < vars.size(); ++b) {
      Expression k = 0.0;
      for (std::size_t i = 0; i < n; ++i) k += dP[i][a] * dX[i][b] - dP[i][b] * dX[i][a];
      out.add(a, b, k);
    }
  out.simplify_all();
  return out;
}

/// omega_Z through the first registered section.
inline TwoForm omega_Z(const AVBundle& Z) {
  if (Z.section_names().empty()) throw ContractViolation("omega_Z needs a registered trivializing section");
  const auto& ref = Z.section_names().front();
  return omega_Z(Z, ref, ref);
}

// ---------------------------------------------------------------------------
// Canonical Poisson bracket and the aff-Poisson bracket on sections of zeta
// ---------------------------------------------------------------------------

/// {F, G} = sum dF/dp_i dG/dx^i - dF/dx^i dG/dp_i, so that {p, x} = 1.
inline Expression canonical_poisson(const Expression& F, const Expression& G, const std::vector<std::string>& x,
                                    const std::vector<std::string>& p) {
  if (x.size() != p.size()) throw DimensionMismatch("need as many momenta as positions");
  Expression out = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out += differentiate(F, p[i]) * differentiate(G, x[i]);
    out -= differentiate(F, x[i]) * differentiate(G, p[i]);
  }
  return simplify(out);
}

/**
 * Coordinates on T*M for M = Q x T: positions (q, t) and momenta (p, s),
 * with s the momentum conjugate to t. The quotient T*M/<dt> drops s.
 */
struct ExtendedPhase {
  std::vector<std::string> q;
  std::vector<std::string> p;
  std::string t = "t";
  std::string s = "s";

  static ExtendedPhase make(int spatial_dim) {
    ExtendedPhase out;
    if (spatial_dim == 1) {
      out.q = {"q"};
      out.p = {"p"};
    } else {
      for (int i = 1; i <= spatial_dim; ++i) {
        out.q.push_back("q" + std::to_string(i));
        out.p.push_back("p" + std::to_string(i));
      }
    }
    return out;
  }

  int spatial_dim() const noexcept { return static_cast<int>(q.size()); }

  std::vector<std::string> positions() const {
    auto out = q;
    out.push_back(t);
    return out;
  }

  std::vector<std::string> momenta() const {
    auto out = p;
    out.push_back(s);
    return out;
  }

  /// (q, t, p): coordinates on T*M/<dt>.
  std::vector<std::string> reduced() const {
    auto out = positions();
    out.insert(out.end(), p.begin(), p.end());
    return out;
  }

  /// (q, t, p, s).
  std::vector<std::string> all() const {
    auto out = reduced();
    out.push_back(s);
    return out;
  }

  VarContext reduced_context() const {
    VarContext ctx = VarContext::of(q, VarRole::Base);
    ctx.add(t, VarRole::Time);
    for (const auto& v : p) ctx.add(v, VarRole::Fiber);
    return ctx;
  }

  Expression poisson(const Expression& F, const Expression& G) const {
    return canonical_poisson(F, G, positions(), momenta());
  }
};

struct ReducedBracket {
  Expression full;       // {F_sigma, F_sigma'} on T*M
  Expression descended;  // the same function on T*M/<dt>
  double fiber_residual = 0.0;
};

/**
 * {sigma, sigma'} o zeta = {F_sigma, F_sigma'}_M with F_sigma = s - sigma.
 * Throws ContractViolation if the T*M bracket is not constant along the
 * fibres of zeta at the sample points.
 */
inline ReducedBracket reduced_aff_poisson(const ExtendedPhase& Z, const Expression& sigma1,
                                          const Expression& sigma2, std::uint64_t seed = 0, int samples = 32,
                                          double tol = kBracketTolerance) {
  const auto F1 = F_of_section(sigma1, Z.s);
  const auto F2 = F_of_section(sigma2, Z.s);
  ReducedBracket out;
  out.full = Z.poisson(F1, F2);
  const Expression along = simplify(differentiate(out.full, Z.s));
  Rng rng(seed);
  for (const auto& pt : random_points(Z.all(), static_cast<std::size_t>(samples), rng)) {
    const double r = std::abs(evaluate(along, pt));
    out.fiber_residual = std::max(out.fiber_residual, r);
    if (!(r < tol))
      throw ContractViolation("bracket is not constant along the fibres of zeta: d/d" + Z.s + " = " +
                              format_number(r) + " at " + format_point(pt));
  }
  out.descended = simplify(substitute(out.full, Z.s, 0.0));
  return out;
}

// ---------------------------------------------------------------------------
// Affine Poisson reduction
// ---------------------------------------------------------------------------

/**
 * A morphism of AV-bundles Z -> Y in coordinates: a base map b and the fibre
 * rule s_Y = lambda s_Z + mu, with mu a function on the base of Z.
 */
struct AVMorphism {
  std::vector<std::pair<std::string, Expression>> base_map;  // Y-base coordinate -> expression on the Z base
  double lambda = 1.0;
  Expression mu = 0.0;

  Expression compose(const Expression& f) const {
    Expression out = f;
    // Simultaneous substitution through temporaries, so that maps like (x, y) -> (y, x) work.
    for (std::size_t i = 0; i < base_map.size(); ++i)
      out = substitute(out, base_map[i].first, Expression::variable("__pull" + std::to_string(i)));
    for (std::size_t i = 0; i < base_map.size(); ++i)
      out = substitute(out, "__pull" + std::to_string(i), base_map[i].second);
    return out;
  }

  /// The section of Z whose image lies in the section sigma of Y: (sigma o b - mu) / lambda.
  Expression pull_section(const Expression& sigma) const {
    return simplify((compose(sigma) - mu) / Expression(lambda));
  }

  /// A model value f of Y as a model value of Z: (f o b) / lambda.
  Expression pull_value(const Expression& f) const { return simplify(compose(f) / Expression(lambda)); }
};

using SectionBracket = std::function<Expression(const Expression&, const Expression&)>;

/// Residual of {rho* sigma, rho* sigma'}_Z = rho* {sigma, sigma'}_Y at the sample points.
inline Report check_affine_reduction(const AVMorphism& rho, const SectionBracket& bracketZ,
                                     const SectionBracket& bracketY,
                                     const std::vector<std::pair<Expression, Expression>>& sections,
                                     const std::vector<Point>& samples, double tol = kBracketTolerance) {
  ResidualTracker t("reduction", tol);
  for (const auto& [s1, s2] : sections) {
    const Expression lhs = bracketZ(rho.pull_section(s1), rho.pull_section(s2));
    const Expression rhs = rho.pull_value(bracketY(s1, s2));
    for (const auto& p : samples) {
      const double l = evaluate(lhs, p), r = evaluate(rhs, p);
      t.record_lazy(l - r, [&] {
        return "sigma=" + to_string(s1) + ", sigma'=" + to_string(s2) + " at " + format_point(p) + ": lhs " +
               format_number(l) + ", rhs " + format_number(r);
      });
    }
  }
  Report rep{"reduction", {}};
  rep.add(t.check());
  return rep;
}

/**
 * rho(a, r) = a - r dt (or a + r dt when `flipped`) from Z = T*M x I, an
 * AV-bundle over T*M with fibre coordinate -r, to Y = T*M as an AV-bundle over
 * T*M/<dt>. In coordinates s_Y = s + lambda s_Z with lambda = 1 (or -1).
 */
inline AVMorphism time_reduction_morphism(const ExtendedPhase& Z, bool flipped = false) {
  AVMorphism out;
  for (const auto& v : Z.reduced()) out.base_map.emplace_back(v, Expression::variable(v));
  out.lambda = flipped ? -1.0 : 1.0;
  out.mu = Expression::variable(Z.s);
  return out;
}

/// The trivial AV-bundle over the Poisson manifold T*M: the canonical bracket of functions.
inline SectionBracket trivial_bundle_bracket(const ExtendedPhase& Z) {
  return [Z](const Expression& a, const Expression& b) { return Z.poisson(a, b); };
}

/// The aff-Poisson bracket on sections of zeta, as a SectionBracket.
inline SectionBracket reduced_bracket(const ExtendedPhase& Z) {
  return [Z](const Expression& a, const Expression& b) { return reduced_aff_poisson(Z, a, b).descended; };
}

}  // namespace affgeo
