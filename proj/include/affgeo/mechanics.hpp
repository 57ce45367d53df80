#pragma once

/**
 * @file mechanics.hpp
 * @brief Time-dependent mechanics from the aff-Poisson bracket, Newtonian
 * space-time with inertial frames and gauge transformations, a fixed-step
 * RK4 integrator and frame comparison of world-lines.
 */

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <json.hpp>

#include "affgeo/affine.hpp"
#include "affgeo/brackets.hpp"
#include "affgeo/errors.hpp"
#include "affgeo/phase.hpp"
#include "affgeo/sampling.hpp"
#include "affgeo/symexpr.hpp"

namespace affgeo {

// ---------------------------------------------------------------------------
// Autonomous ODE systems and RK4
// ---------------------------------------------------------------------------

struct OdeSystem {
  std::vector<std::string> state;
  std::function<Vector(const Vector&)> rhs;
};

/// Compiles a symbolic vector field on `state` into an OdeSystem.
inline OdeSystem compile_field(const std::vector<std::string>& state, const ExprVector& field) {
  if (field.size() != state.size()) throw DimensionMismatch("vector field and state differ in length");
  std::vector<CompiledExpression> parts;
  parts.reserve(field.size());
  for (const auto& e : field) parts.emplace_back(e, std::span<const std::string>(state));
  return {state, [parts = std::move(parts)](const Vector& y) {
            Vector dy(y.size());
            const std::span<const double> ys(y.data(), static_cast<std::size_t>(y.size()));
            for (std::size_t i = 0; i < parts.size(); ++i) dy[static_cast<Eigen::Index>(i)] = parts[i](ys);
            return dy;
          }};
}

struct Trajectory {
  std::vector<std::string> state_names;
  std::vector<std::string> event_names;
  double step = 0.0;
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> events;
  std::map<std::string, std::string> metadata;

  std::size_t size() const noexcept { return states.size(); }
};

/// Maps a state to the event it occupies (empty: no event columns).
using EventMap = std::function<Vector(const Vector&)>;

/// Number of steps for duration T at nominal step h: round(T / h).
inline long long step_count(double h, double T) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("step size must be positive");
  if (!(T >= h) || !std::isfinite(T)) throw DomainError("duration must be at least one step");
  return std::max(1LL, std::llround(T / h));
}

/**
 * Classical fixed-step RK4 over [0, T]. Takes round(T / h) steps of exactly
 * T / steps, so the last sample lands on T; records every step at t_k = k h.
 */
inline Trajectory integrate(const OdeSystem& sys, const Vector& y0, double nominal_h, double T,
                            const EventMap& event = {}, std::vector<std::string> event_names = {}) {
  if (y0.size() != static_cast<Eigen::Index>(sys.state.size())) throw DimensionMismatch("initial state has wrong size");
  const long long n = step_count(nominal_h, T);
  const double h = T / static_cast<double>(n);
  Trajectory out;
  out.state_names = sys.state;
  out.event_names = std::move(event_names);
  out.step = h;
  out.times.reserve(static_cast<std::size_t>(n + 1));
  out.states.reserve(static_cast<std::size_t>(n + 1));

  auto record = [&](long long k, const Vector& y) {
    if (!y.allFinite()) throw DomainError("non-finite state at step " + std::to_string(k));
    out.times.push_back(static_cast<double>(k) * h);
    out.states.push_back(y);
    if (event) out.events.push_back(event(y));
  };

  Vector y = y0;
  record(0, y);
  for (long long k = 1; k <= n; ++k) {
    const Vector k1 = sys.rhs(y);
    const Vector k2 = sys.rhs(y + 0.5 * h * k1);
    const Vector k3 = sys.rhs(y + 0.5 * h * k2);
    const Vector k4 = sys.rhs(y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    record(k, y);
  }
  return out;
}

/// RFC 4180 CSV, header step,time,<state>,<event>, 17 significant digits.
inline void write_csv(std::ostream& os, const Trajectory& tr) {
  os << "step,time";
  for (const auto& n : tr.state_names) os << ',' << n;
  for (const auto& n : tr.event_names) os << ',' << n;
  os << "\r\n";
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    os << k << ',' << format_number(tr.times[k]);
    for (Eigen::Index i = 0; i < tr.states[k].size(); ++i) os << ',' << format_number(tr.states[k][i]);
    if (k < tr.events.size())
      for (Eigen::Index i = 0; i < tr.events[k].size(); ++i) os << ',' << format_number(tr.events[k][i]);
    os << "\r\n";
  }
}

// ---------------------------------------------------------------------------
// Time-dependent mechanics
// ---------------------------------------------------------------------------

/**
 * H(q, p, t) on T*M/<dt> for M = Q x T. The section is
 * H_hat(alpha, t) = (alpha, t, -H) and its function F_H = s + H.
 */
struct TimeDepSystem {
  ExtendedPhase coords;
  Expression H;

  TimeDepSystem(ExtendedPhase c, Expression h) : coords(std::move(c)), H(std::move(h)) {
    for (const auto& v : free_variables(H)) {
      const auto r = coords.reduced();
      if (std::find(r.begin(), r.end(), v) == r.end())
        throw ContractViolation("Hamiltonian depends on \"" + v + "\", which is not one of q, p, t");
    }
  }

  Expression section() const { return -H; }
  Expression F() const { return F_of_section(section(), coords.s); }

  /// Integration state order (q, p, t).
  std::vector<std::string> state() const {
    auto out = coords.q;
    out.insert(out.end(), coords.p.begin(), coords.p.end());
    out.push_back(coords.t);
    return out;
  }
};

struct TimeDepField {
  std::vector<std::string> state;  // (q, p, t)
  ExprVector reduction;            // zeta_* X_{F_H}
  ExprVector closed_form;          // X_{H_t} + d/dt
  double max_deviation = 0.0;      // between the two on the check grid
};

/**
 * The dynamics two ways: the Hamiltonian field of F_H on T*M pushed forward
 * along zeta (drop the s component), and q' = dH/dp, p' = -dH/dq, t' = 1.
 * The reduction route must not depend on s.
 */
inline TimeDepField timedep_dynamics(const TimeDepSystem& sys, int grid_per_axis = 5) {
  const auto& Z = sys.coords;
  const Expression F = sys.F();
  TimeDepField out;
  out.state = sys.state();
  for (const auto& v : out.state) {
    Expression comp = simplify(Z.poisson(F, Expression::variable(v)));
    if (depends_on(comp, Z.s) && !simplify(differentiate(comp, Z.s)).is_zero())
      throw ContractViolation("Hamiltonian field does not descend along zeta");
    out.reduction.push_back(substitute(comp, Z.s, 0.0));
  }
  for (std::size_t i = 0; i < Z.q.size(); ++i) out.closed_form.push_back(simplify(differentiate(sys.H, Z.p[i])));
  for (std::size_t i = 0; i < Z.q.size(); ++i) out.closed_form.push_back(simplify(-differentiate(sys.H, Z.q[i])));
  out.closed_form.push_back(1.0);

  for (const auto& p : grid(out.state, -1.0, 1.0, grid_per_axis)) {
    const Vector d = evaluate(out.reduction, p) - evaluate(out.closed_form, p);
    out.max_deviation = std::max(out.max_deviation, d.cwiseAbs().maxCoeff());
  }
  return out;
}

inline Trajectory integrate_timedep(const TimeDepSystem& sys, const Vector& y0, double h, double T) {
  const auto field = timedep_dynamics(sys);
  const auto ode = compile_field(field.state, field.reduction);
  const auto d = static_cast<Eigen::Index>(sys.coords.q.size());
  auto names = sys.coords.positions();
  for (auto& n : names) n = "event_" + n;
  return integrate(
      ode, y0, h, T,
      [d](const Vector& y) {
        Vector e(d + 1);
        e.head(d) = y.head(d);
        e[d] = y[2 * d];
        return e;
      },
      names);
}

// ---------------------------------------------------------------------------
// Newtonian space-time
// ---------------------------------------------------------------------------

/**
 * N = R^{d+1} with a clock covector tau, a basis E of E0 = ker tau
 * (columns) and the Gram matrix g of the Euclidean metric on E0 in that basis.
 */
class NewtonSpaceTime {
 public:
  NewtonSpaceTime(Vector tau, Matrix E0, Matrix g, std::vector<std::string> names = {})
      : tau_(std::move(tau)), E_(std::move(E0)), g_(std::move(g)), names_(std::move(names)) {
    const auto n = tau_.size();
    const auto d = n - 1;
    if (n < 2) throw DimensionMismatch("space-time needs at least one spatial dimension");
    if (!(tau_.norm() > 0.0)) throw ContractViolation("tau must be non-zero");
    if (E_.rows() != n || E_.cols() != d) throw DimensionMismatch("E0 basis must be (d+1) x d");
    if (g_.rows() != d || g_.cols() != d) throw DimensionMismatch("metric must be d x d");
    if ((E_.transpose() * tau_).cwiseAbs().maxCoeff() > kIdentityTolerance)
      throw ContractViolation("E0 basis vectors must satisfy <tau, e> = 0");
    if (Eigen::FullPivLU<Matrix>(E_).rank() != d) throw ContractViolation("E0 basis is degenerate");
    if ((g_ - g_.transpose()).cwiseAbs().maxCoeff() > kIdentityTolerance)
      throw ContractViolation("metric must be symmetric");
    llt_.compute(g_);
    if (llt_.info() != Eigen::Success) throw ContractViolation("metric must be positive definite");
    if (names_.empty())
      for (Eigen::Index i = 1; i <= n; ++i) names_.push_back("x" + std::to_string(i));
    if (static_cast<Eigen::Index>(names_.size()) != n) throw DimensionMismatch("need one name per event coordinate");
  }

  /// x = (x1..xd, x_{d+1}) with tau = dx_{d+1}, E0 = span(e1..ed), g = identity.
  static NewtonSpaceTime standard(int d = 3) {
    Vector tau = Vector::Zero(d + 1);
    tau[d] = 1.0;
    Matrix E = Matrix::Zero(d + 1, d);
    E.topRows(d) = Matrix::Identity(d, d);
    return NewtonSpaceTime(tau, E, Matrix::Identity(d, d));
  }

  int spatial_dim() const noexcept { return static_cast<int>(E_.cols()); }
  const Vector& tau() const noexcept { return tau_; }
  const Matrix& E0() const noexcept { return E_; }
  const Matrix& metric() const noexcept { return g_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  double clock(const Vector& w) const { return tau_.dot(w); }

  /// g^{-1} p for a covector p on E0.
  Vector raise(const Vector& p) const { return llt_.solve(p); }

  /// Basis components of a vector of E0. Throws unless <tau, v> = 0.
  Vector spatial_components(const Vector& v) const {
    if (v.size() != tau_.size()) throw DimensionMismatch("vector must have d+1 components");
    if (std::abs(clock(v)) > kIdentityTolerance)
      throw ContractViolation("vector is not spatial: <tau, v> = " + format_number(clock(v)));
    const Vector c = E_.colPivHouseholderQr().solve(v);
    if ((E_ * c - v).norm() > 1e-10 * std::max(1.0, v.norm()))
      throw ContractViolation("vector does not lie in E0");
    return c;
  }

 private:
  Vector tau_;
  Matrix E_;
  Matrix g_;
  Eigen::LLT<Matrix> llt_;
  std::vector<std::string> names_;
};

struct InertialFrame {
  Vector u;

  InertialFrame(const NewtonSpaceTime& st, Vector velocity) : u(std::move(velocity)) {
    if (u.size() != st.tau().size()) throw DimensionMismatch("frame velocity must have d+1 components");
    if (std::abs(st.clock(u) - 1.0) > kIdentityTolerance)
      throw ContractViolation("inertial frame must satisfy <tau, u> = 1, got " + format_number(st.clock(u)));
  }
};

/// (x, p, s) observed in the frame u.
struct ObservedPhase {
  Vector x;
  Vector p;  // components on the E0 basis
  double s = 0.0;
  Vector u;
};

enum class GaugeConvention {
  /// p = p' - m g(v), s = s' - <p', v> + m g(v, v) / 2: a cocycle under frame composition.
  Kinematic,
  /// p = p' + m g(v), s = s' + <p, v> + m g(v, v) / 2 with the new p, exactly as displayed.
  AsPrinted,
};

/// Re-expresses an observation made in frame u' in the frame u' + v.
inline ObservedPhase gauge_transform(const NewtonSpaceTime& st, const ObservedPhase& phi, const Vector& v, double m,
                                     GaugeConvention convention = GaugeConvention::Kinematic) {
  if (!(m > 0.0)) throw DomainError("mass must be positive");
  const Vector c = st.spatial_components(v);
  const Vector gv = st.metric() * c;
  const double gvv = c.dot(gv);
  ObservedPhase out{phi.x, phi.p, phi.s, phi.u + v};
  switch (convention) {
    case GaugeConvention::Kinematic:
      out.p = phi.p - m * gv;
      out.s = phi.s - phi.p.dot(c) + 0.5 * m * gvv;
      break;
    case GaugeConvention::AsPrinted:
      out.p = phi.p + m * gv;
      out.s = phi.s + out.p.dot(c) + 0.5 * m * gvv;
      break;
  }
  return out;
}

struct NewtonSystem {
  std::vector<std::string> state;  // (x1..x_{d+1}, p1..pd)
  ExprVector field;
};

inline std::vector<std::string> newton_momentum_names(int d) {
  std::vector<std::string> out;
  for (int i = 1; i <= d; ++i) out.push_back("p" + std::to_string(i));
  return out;
}

/// x' = E g^{-1} p / m + u,  p' = -E^T grad phi.
inline NewtonSystem newton_dynamics(const NewtonSpaceTime& st, const InertialFrame& frame, double m,
                                    const Expression& phi) {
  if (!(m > 0.0)) throw DomainError("mass must be positive");
  const int d = st.spatial_dim();
  NewtonSystem out;
  out.state = st.names();
  const auto pn = newton_momentum_names(d);
  for (const auto& v : free_variables(phi))
    if (std::find(out.state.begin(), out.state.end(), v) == out.state.end())
      throw ContractViolation("potential depends on \"" + v + "\", which is not an event coordinate");
  out.state.insert(out.state.end(), pn.begin(), pn.end());

  const Matrix ginv = st.metric().inverse();
  const Matrix vel = st.E0() * ginv / m;  // (d+1) x d
  for (Eigen::Index r = 0; r <= d; ++r) {
    Expression e = frame.u[r];
    for (Eigen::Index j = 0; j < d; ++j)
      if (vel(r, j) != 0.0) e += Expression(vel(r, j)) * Expression::variable(pn[static_cast<std::size_t>(j)]);
    out.field.push_back(e);
  }
  const auto grad = gradient(phi, st.names());
  for (Eigen::Index j = 0; j < d; ++j) {
    Expression e = 0.0;
    for (Eigen::Index r = 0; r <= d; ++r)
      if (st.E0()(r, j) != 0.0) e -= Expression(st.E0()(r, j)) * grad[static_cast<std::size_t>(r)];
    out.field.push_back(simplify(e));
  }
  return out;
}

/// H_u(x, p) = <p, g^{-1} p> / 2m + phi(x).
inline Expression newton_energy(const NewtonSpaceTime& st, double m, const Expression& phi) {
  const int d = st.spatial_dim();
  const auto pn = newton_momentum_names(d);
  const Matrix ginv = st.metric().inverse();
  Expression kinetic = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (ginv(i, j) != 0.0)
        kinetic += Expression(ginv(i, j) / (2.0 * m)) * Expression::variable(pn[static_cast<std::size_t>(i)]) *
                   Expression::variable(pn[static_cast<std::size_t>(j)]);
  return kinetic + phi;
}

/// Observer split relative to the origin event x0: t = <tau, x - x0>, q = E-components of x - x0 - t u.
inline std::pair<Vector, double> observer_split(const NewtonSpaceTime& st, const InertialFrame& frame, const Vector& x0,
                                                const Vector& x) {
  const Vector w = x - x0;
  const double t = st.clock(w);
  return {st.spatial_components(w - t * frame.u), t};
}

inline Vector state_of(const ObservedPhase& phi) {
  Vector y(phi.x.size() + phi.p.size());
  y << phi.x, phi.p;
  return y;
}

inline Trajectory integrate_newton(const NewtonSpaceTime& st, const InertialFrame& frame, double m,
                                   const Expression& phi, const ObservedPhase& initial, double h, double T) {
  const auto sys = newton_dynamics(st, frame, m, phi);
  const auto n = static_cast<Eigen::Index>(st.names().size());
  auto names = st.names();
  for (auto& s : names) s = "event_" + s;
  auto tr = integrate(compile_field(sys.state, sys.field), state_of(initial), h, T,
                      [n](const Vector& y) { return Vector(y.head(n)); }, names);
  tr.metadata["frame"] = format_vector(frame.u);
  tr.metadata["mass"] = format_number(m);
  return tr;
}

/// Largest |<tau, x'> - 1| along a trajectory, from the field at every recorded state.
inline double clock_residual(const NewtonSpaceTime& st, const NewtonSystem& sys, const Trajectory& tr) {
  const auto ode = compile_field(sys.state, sys.field);
  const auto n = static_cast<Eigen::Index>(st.names().size());
  double worst = 0.0;
  for (const auto& y : tr.states) worst = std::max(worst, std::abs(st.clock(ode.rhs(y).head(n)) - 1.0));
  return worst;
}

/// Largest |H(z(t)) - H(z(0))| along a trajectory.
inline double energy_drift(const Expression& H, const Trajectory& tr) {
  const CompiledExpression f(H, std::span<const std::string>(tr.state_names));
  auto at = [&](const Vector& y) { return f(std::span<const double>(y.data(), static_cast<std::size_t>(y.size()))); };
  const double e0 = at(tr.states.front());
  double worst = 0.0;
  for (const auto& y : tr.states) worst = std::max(worst, std::abs(at(y) - e0));
  return worst;
}

struct FrameComparison {
  Vector u1, u2;
  double max_deviation = 0.0;
  bool pass = false;
  Trajectory first, second;
};

/**
 * Integrates the same motion observed in frames u and u + v, the second
 * starting from the gauge-transformed initial data, and compares the
 * world-lines as events in N.
 */
inline FrameComparison compare_frames(const NewtonSpaceTime& st, double m, const Expression& phi,
                                      const InertialFrame& frame, const Vector& v, const ObservedPhase& initial,
                                      double h, double T, GaugeConvention convention = GaugeConvention::Kinematic,
                                      double tol = kNumericTolerance) {
  const InertialFrame boosted(st, frame.u + v);
  const auto moved = gauge_transform(st, initial, v, m, convention);
  FrameComparison out;
  out.u1 = frame.u;
  out.u2 = boosted.u;
  out.first = integrate_newton(st, frame, m, phi, initial, h, T);
  out.second = integrate_newton(st, boosted, m, phi, moved, h, T);
  for (std::size_t k = 0; k < out.first.events.size(); ++k)
    out.max_deviation = std::max(out.max_deviation, (out.first.events[k] - out.second.events[k]).cwiseAbs().maxCoeff());
  out.pass = out.max_deviation < tol;
  return out;
}

inline nlohmann::ordered_json to_json(const FrameComparison& c, const std::string& scenario) {
  nlohmann::ordered_json j;
  j["scenario"] = scenario;
  j["frames"] = nlohmann::ordered_json::array();
  for (const auto* u : {&c.u1, &c.u2}) j["frames"].push_back(std::vector<double>(u->data(), u->data() + u->size()));
  j["max_deviation"] = c.max_deviation;
  j["pass"] = c.pass;
  return j;
}

}  // namespace affgeo
