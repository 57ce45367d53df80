#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "affgeo/mechanics.hpp"
#include "affgeo/sampling.hpp"

using namespace affgeo;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

OdeSystem scalar_field(const std::string& text) { return compile_field({"x"}, {parse(text)}); }

void expect_field(const TimeDepField& f, const std::vector<std::string>& expected) {
  ASSERT_EQ(f.reduction.size(), expected.size());
  Rng rng(1);
  for (const auto& p : random_points(f.state, 16, rng))
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const double want = evaluate(parse(expected[i]), p);
      EXPECT_NEAR(evaluate(f.reduction[i], p), want, 1e-14) << f.state[i];
      EXPECT_NEAR(evaluate(f.closed_form[i], p), want, 1e-14) << f.state[i];
    }
}

ObservedPhase observed(const Vector& x, const Vector& p, double s, const Vector& u) { return {x, p, s, u}; }

}  // namespace

TEST(Integrate, ConstantField) {
  const auto tr = integrate(scalar_field("0"), vec({3.25}), 1e-2, 1.0);
  ASSERT_EQ(tr.size(), 101u);
  for (const auto& y : tr.states) EXPECT_EQ(y[0], 3.25);
}

TEST(Integrate, ExponentialGrowth) {
  const auto tr = integrate(scalar_field("x"), vec({1.0}), 1e-3, 1.0);
  EXPECT_EQ(tr.size(), 1001u);
  EXPECT_NEAR(tr.states.back()[0], std::exp(1.0), 1e-10);
  EXPECT_DOUBLE_EQ(tr.times.back(), 1.0);
}

TEST(Integrate, OscillatorReturnsAfterOnePeriod) {
  const auto sys = compile_field({"q", "p"}, {parse("p"), parse("-q")});
  const auto tr = integrate(sys, vec({1.0, 0.5}), 1e-3, 2.0 * std::numbers::pi);
  EXPECT_LT((tr.states.back() - vec({1.0, 0.5})).norm(), 1e-9);
}

TEST(Integrate, NonIntegerStepRatioLandsOnT) {
  const auto tr = integrate(scalar_field("1"), vec({0.0}), 0.3, 1.0);
  EXPECT_EQ(step_count(0.3, 1.0), 3);
  ASSERT_EQ(tr.size(), 4u);
  EXPECT_NEAR(tr.times.back(), 1.0, 1e-15);
  EXPECT_NEAR(tr.states.back()[0], 1.0, 1e-15);
}

TEST(Integrate, BlowUpIsADomainError) {
  // x' = x^2 from x = 1 reaches infinity at t = 1.
  EXPECT_THROW(integrate(scalar_field("x^2"), vec({1.0}), 1e-2, 2.0), DomainError);
}

TEST(Integrate, RejectsBadSteps) {
  EXPECT_THROW(integrate(scalar_field("x"), vec({1.0}), 0.0, 1.0), DomainError);
  EXPECT_THROW(integrate(scalar_field("x"), vec({1.0}), 1.0, 0.5), DomainError);
  EXPECT_THROW(integrate(scalar_field("x"), vec({1.0, 2.0}), 0.1, 1.0), DimensionMismatch);
}

TEST(Csv, HeaderRowsAndLineEndings) {
  const auto sys = compile_field({"q", "p"}, {parse("p"), parse("-q")});
  const auto tr = integrate(sys, vec({1.0, 0.0}), 0.25, 1.0, [](const Vector& y) { return Vector(y.head(1)); },
                            {"event_q"});
  std::ostringstream os;
  write_csv(os, tr);
  const auto text = os.str();
  EXPECT_EQ(text.rfind("step,time,q,p,event_q\r\n", 0), 0u);
  std::size_t lines = 0;
  for (std::size_t i = 0; i + 1 < text.size(); ++i)
    if (text[i] == '\r' && text[i + 1] == '\n') ++lines;
  EXPECT_EQ(lines, 6u);
  EXPECT_NE(text.find("\r\n4,1,"), std::string::npos);
  EXPECT_EQ(text.find('\n') - 1, text.find('\r'));
}

TEST(TimeDep, Oscillator) {
  const TimeDepSystem sys(ExtendedPhase::make(1), parse("p^2/2 + q^2/2"));
  const auto f = timedep_dynamics(sys);
  EXPECT_EQ(f.state, (std::vector<std::string>{"q", "p", "t"}));
  expect_field(f, {"p", "-q", "1"});
}

TEST(TimeDep, ZeroHamiltonianStillTicks) {
  const TimeDepSystem sys(ExtendedPhase::make(1), Expression(0.0));
  expect_field(timedep_dynamics(sys), {"0", "0", "1"});
}

TEST(TimeDep, TimeDependentForce) {
  const TimeDepSystem sys(ExtendedPhase::make(1), parse("q*t"));
  expect_field(timedep_dynamics(sys), {"0", "-t", "1"});
}

TEST(TimeDep, ReductionAgreesWithClosedFormForRandomHamiltonians) {
  Rng rng(2);
  const auto Z = ExtendedPhase::make(2);
  for (int trial = 0; trial < 5; ++trial) {
    const TimeDepSystem sys(Z, random_polynomial(Z.reduced(), 3, rng));
    EXPECT_LT(timedep_dynamics(sys).max_deviation, 1e-12);
  }
}

TEST(TimeDep, RejectsForeignVariables) {
  EXPECT_THROW(TimeDepSystem(ExtendedPhase::make(1), parse("q*s")), ContractViolation);
}

TEST(TimeDep, DrivenOscillatorMatchesClosedForm) {
  // q'' + q = cos(2t): q = A cos t + B sin t - cos(2t)/3
  const TimeDepSystem sys(ExtendedPhase::make(1), parse("p^2/2 + q^2/2 - q*cos(2*t)"));
  const auto tr = integrate_timedep(sys, vec({1.0, 0.0, 0.0}), 1e-3, 5.0);
  const double A = 1.0 + 1.0 / 3.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.size(); k += 100) {
    const double t = tr.times[k];
    worst = std::max(worst, std::abs(tr.states[k][0] - (A * std::cos(t) - std::cos(2 * t) / 3.0)));
    EXPECT_NEAR(tr.states[k][2], t, 1e-12);
    EXPECT_EQ(tr.events[k][0], tr.states[k][0]);
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Energy, ConservedForTimeIndependentHamiltonian) {
  const auto sys = compile_field({"q", "p"}, {parse("p"), parse("-q - q^3")});
  const auto tr = integrate(sys, vec({0.8, -0.2}), 1e-3, 10.0);
  EXPECT_EQ(tr.size(), 10001u);
  EXPECT_LT(energy_drift(parse("p^2/2 + q^2/2 + q^4/4"), tr), 1e-6);
}

TEST(Gauge, ZeroBoostIsIdentity) {
  const auto st = NewtonSpaceTime::standard(3);
  const auto phi = observed(vec({1, 2, 3, 4}), vec({0.5, -1, 2}), 0.75, vec({0.1, 0, 0, 1}));
  for (auto conv : {GaugeConvention::Kinematic, GaugeConvention::AsPrinted}) {
    const auto out = gauge_transform(st, phi, Vector::Zero(4), 2.0, conv);
    EXPECT_EQ(out.x, phi.x);
    EXPECT_EQ(out.p, phi.p);
    EXPECT_EQ(out.s, phi.s);
    EXPECT_EQ(out.u, phi.u);
  }
}

TEST(Gauge, AsPrintedExample) {
  const auto st = NewtonSpaceTime::standard(3);
  const auto phi = observed(Vector::Zero(4), Vector::Zero(3), 2.0, vec({0, 0, 0, 1}));
  const auto out = gauge_transform(st, phi, vec({1, 0, 0, 0}), 1.0, GaugeConvention::AsPrinted);
  EXPECT_EQ(out.p, vec({1, 0, 0}));
  EXPECT_DOUBLE_EQ(out.s, 2.0 + 1.5);
  EXPECT_EQ(out.u, vec({1, 0, 0, 1}));
}

TEST(Gauge, AsPrintedDoesNotRoundTrip) {
  // Composing the printed rule with v and -v leaves s shifted by 2 m |v|^2.
  const auto st = NewtonSpaceTime::standard(3);
  const auto phi = observed(Vector::Zero(4), vec({0.2, 0.1, 0}), 0.0, vec({0, 0, 0, 1}));
  const Vector v = vec({0.5, 0, 0, 0});
  const double m = 1.5;
  const auto back = gauge_transform(st, gauge_transform(st, phi, v, m, GaugeConvention::AsPrinted), -v, m,
                                    GaugeConvention::AsPrinted);
  EXPECT_LT((back.p - phi.p).norm(), 1e-15);
  EXPECT_NEAR(back.s - phi.s, 2.0 * m * 0.25, 1e-15);
}

TEST(Gauge, KinematicRoundTripAndComposition) {
  const auto st = NewtonSpaceTime::standard(3);
  Rng rng(3);
  for (int trial = 0; trial < 16; ++trial) {
    const auto phi = observed(random_vector(4, rng), random_vector(3, rng), rng.uniform(-1, 1), vec({0, 0, 0, 1}));
    Vector v1 = Vector::Zero(4), v2 = Vector::Zero(4);
    v1.head(3) = random_vector(3, rng);
    v2.head(3) = random_vector(3, rng);
    const double m = rng.uniform(0.5, 3.0);
    const auto back = gauge_transform(st, gauge_transform(st, phi, v1, m), -v1, m);
    EXPECT_LT((back.p - phi.p).norm(), 1e-14);
    EXPECT_NEAR(back.s, phi.s, 1e-14);
    const auto two = gauge_transform(st, gauge_transform(st, phi, v1, m), v2, m);
    const auto one = gauge_transform(st, phi, v1 + v2, m);
    EXPECT_LT((two.p - one.p).norm(), 1e-14);
    EXPECT_NEAR(two.s, one.s, 1e-14);
    // The kinetic energy relative to the new frame is the expected one: p = m (xdot - u).
    EXPECT_LT((two.p - (phi.p - m * (v1 + v2).head(3))).norm(), 1e-14);
  }
}

TEST(Gauge, RejectsNonSpatialBoost) {
  const auto st = NewtonSpaceTime::standard(2);
  const auto phi = observed(Vector::Zero(3), Vector::Zero(2), 0.0, vec({0, 0, 1}));
  EXPECT_THROW(gauge_transform(st, phi, vec({0, 0, 1}), 1.0), ContractViolation);
  EXPECT_THROW(gauge_transform(st, phi, vec({1, 0, 0}), 0.0), DomainError);
}

TEST(Newton, FreeParticleAtRestFollowsTheFrame) {
  const auto st = NewtonSpaceTime::standard(3);
  const InertialFrame frame(st, vec({0.2, -0.1, 0.4, 1}));
  const Vector x0 = vec({1, 2, 3, 0});
  const auto tr = integrate_newton(st, frame, 2.0, Expression(0.0), observed(x0, Vector::Zero(3), 0.0, frame.u), 1e-2, 5.0);
  for (std::size_t k = 0; k < tr.size(); ++k)
    EXPECT_LT((tr.events[k] - (x0 + tr.times[k] * frame.u)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Newton, ObserverSplitGivesNewtonianPicture) {
  const auto st = NewtonSpaceTime::standard(2);
  const InertialFrame frame(st, vec({0.3, 0, 1}));
  const auto sys = newton_dynamics(st, frame, 2.0, parse("x1^2 + x2"));
  ASSERT_EQ(sys.state, (std::vector<std::string>{"x1", "x2", "x3", "p1", "p2"}));
  const Point at{{"x1", 0.5}, {"x2", -1.0}, {"x3", 2.0}, {"p1", 4.0}, {"p2", -2.0}};
  const Vector d = evaluate(sys.field, at);
  EXPECT_NEAR(d[0], 4.0 / 2.0 + 0.3, 1e-15);
  EXPECT_NEAR(d[1], -2.0 / 2.0, 1e-15);
  EXPECT_EQ(d[2], 1.0);
  EXPECT_NEAR(d[3], -1.0, 1e-15);
  EXPECT_NEAR(d[4], -1.0, 1e-15);
}

TEST(Newton, HarmonicOscillatorInAMovingFrame) {
  // phi = (x1 - u1 t)^2 / 2, so q = x1 - u1 t obeys q'' = -q and x1 = u1 t + q0 cos t + p0 sin t.
  const auto st = NewtonSpaceTime::standard(1);
  const double u1 = 0.4, q0 = 0.7, p0 = -0.2;
  const InertialFrame frame(st, vec({u1, 1}));
  const auto phi = parse("(x1 - 0.4*x2)^2/2");
  const auto tr = integrate_newton(st, frame, 1.0, phi, observed(vec({q0, 0}), vec({p0}), 0.0, frame.u), 1e-3, 10.0);
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.times[k];
    worst = std::max(worst, std::abs(tr.events[k][0] - (u1 * t + q0 * std::cos(t) + p0 * std::sin(t))));
    const auto [q, time] = observer_split(st, frame, Vector::Zero(2), tr.events[k]);
    // The event clock is a sum of 10^4 increments, so rounding grows with t.
    EXPECT_NEAR(time, t, 1e-12 * std::max(1.0, t));
    EXPECT_NEAR(q[0], tr.events[k][0] - u1 * time, 1e-12);
  }
  EXPECT_LT(worst, 1e-9);
  EXPECT_LT(clock_residual(st, newton_dynamics(st, frame, 1.0, phi), tr), 1e-12);
}

TEST(Newton, ClockAdvancesAtUnitRateInSkewedCoordinates) {
  // A space-time whose clock is not a coordinate: tau = (1, 1), E0 spanned by (1, -1), g = 2.
  Matrix E(2, 1);
  E << 1, -1;
  const NewtonSpaceTime st(vec({1, 1}), E, Matrix::Constant(1, 1, 2.0));
  const InertialFrame frame(st, vec({0.25, 0.75}));
  const auto phi = parse("(x1 - x2)^2");
  const auto tr = integrate_newton(st, frame, 1.0, phi, observed(vec({0.1, 0.2}), vec({0.3}), 0.0, frame.u), 1e-3, 2.0);
  EXPECT_LT(clock_residual(st, newton_dynamics(st, frame, 1.0, phi), tr), 1e-12);
  for (std::size_t k = 0; k < tr.size(); k += 250) EXPECT_NEAR(st.clock(tr.events[k] - tr.events[0]), tr.times[k], 1e-12);
}

TEST(Newton, RejectsBadFramesAndSpaceTimes) {
  const auto st = NewtonSpaceTime::standard(2);
  EXPECT_THROW(InertialFrame(st, vec({0, 0, 2})), ContractViolation);
  Matrix E(2, 1);
  E << 1, 1;
  EXPECT_THROW(NewtonSpaceTime(vec({1, 1}), E, Matrix::Identity(1, 1)), ContractViolation);
  EXPECT_THROW(NewtonSpaceTime(vec({0, 1}), Matrix::Identity(2, 1), -Matrix::Identity(1, 1)), ContractViolation);
}

TEST(CompareFrames, FreeMotionAgreesToRoundoff) {
  const auto st = NewtonSpaceTime::standard(3);
  const InertialFrame frame(st, vec({0, 0, 0, 1}));
  Rng rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    Vector v = Vector::Zero(4);
    v.head(3) = random_vector(3, rng);
    const auto c = compare_frames(st, 1.5, Expression(0.0), frame, v,
                                  observed(random_vector(4, rng), random_vector(3, rng), 0.0, frame.u), 1e-3, 10.0);
    EXPECT_LT(c.max_deviation, 1e-12);
    EXPECT_TRUE(c.pass);
  }
}

TEST(CompareFrames, HarmonicPotential) {
  const auto st = NewtonSpaceTime::standard(3);
  const InertialFrame frame(st, vec({0, 0, 0, 1}));
  const auto phi = parse("(x1^2 + x2^2 + x3^2)/2");
  const auto c = compare_frames(st, 1.0, phi, frame, vec({0.3, 0, 0, 0}),
                                observed(vec({1, 0, 0.5, 0}), vec({0, 0.2, 0}), 0.0, frame.u), 1e-3, 10.0);
  EXPECT_LT(c.max_deviation, 1e-6);
  // The first frame's motion is the closed-form oscillator x1 = cos t.
  double worst = 0.0;
  for (std::size_t k = 0; k < c.first.size(); ++k)
    worst = std::max(worst, std::abs(c.first.events[k][0] - std::cos(c.first.times[k])));
  EXPECT_LT(worst, 1e-9);
}

TEST(CompareFrames, ZeroBoostIsBitwiseIdentical) {
  const auto st = NewtonSpaceTime::standard(3);
  const InertialFrame frame(st, vec({0.1, 0, 0, 1}));
  const auto c = compare_frames(st, 1.0, parse("9.81*x3"), frame, Vector::Zero(4),
                                observed(vec({0, 0, 1, 0}), vec({0.1, 0, 2}), 0.0, frame.u), 1e-2, 3.0);
  EXPECT_EQ(c.max_deviation, 0.0);
  ASSERT_EQ(c.first.size(), c.second.size());
  for (std::size_t k = 0; k < c.first.size(); ++k) EXPECT_TRUE(c.first.states[k] == c.second.states[k]);
}

TEST(CompareFrames, AsPrintedConventionBreaksFrameIndependence) {
  const auto st = NewtonSpaceTime::standard(3);
  const InertialFrame frame(st, vec({0, 0, 0, 1}));
  const auto c = compare_frames(st, 1.0, Expression(0.0), frame, vec({0.3, 0, 0, 0}),
                                observed(vec({0, 0, 0, 0}), vec({0, 0, 0}), 0.0, frame.u), 1e-2, 1.0,
                                GaugeConvention::AsPrinted);
  // p picks up +m v instead of -m v, so the world-lines separate at 2 |v| per unit time.
  EXPECT_FALSE(c.pass);
  EXPECT_NEAR(c.max_deviation, 0.6, 1e-12);
}
