#pragma once

/**
 * @file suites.hpp
 * @brief Scenario runners. Each scenario kind maps to one runner that reads
 * its sections, runs the checks and returns a Report plus file artifacts.
 *
 * Reports carry no timestamps or timings, so a run is a pure function of the
 * scenario file and its seed.
 */

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "affgeo/affine.hpp"
#include "affgeo/brackets.hpp"
#include "affgeo/duality.hpp"
#include "affgeo/errors.hpp"
#include "affgeo/mechanics.hpp"
#include "affgeo/phase.hpp"
#include "affgeo/report.hpp"
#include "affgeo/sampling.hpp"
#include "affgeo/scenario.hpp"
#include "affgeo/symexpr.hpp"

#ifndef AFFGEO_SCENARIO_DIR
#define AFFGEO_SCENARIO_DIR "scenarios"
#endif

namespace affgeo {

/// A file written next to report.json.
struct Artifact {
  std::string name;
  std::string content;
};

struct SuiteResult {
  Report report;
  std::vector<Artifact> artifacts;
};

struct SuiteContext {
  const ScenarioFile& file;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;  // where this run's artifacts go
};

namespace suite {

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

inline int positive(const ScenarioSection& sec, const std::string& key, long long fallback) {
  const long long v = sec.integer(key, fallback);
  if (v < 1 || v > 1'000'000) throw ScenarioError(sec.where(key) + ": expected a positive integer");
  return static_cast<int>(v);
}

inline double positive_number(const ScenarioSection& sec, const std::string& key, double fallback) {
  const double v = sec.number(key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) throw ScenarioError(sec.where(key) + ": expected a positive number");
  return v;
}

inline Check renamed(Check c, std::string name) {
  c.name = std::move(name);
  return c;
}

/// A yes/no check: residual 0 on success and 1 otherwise.
inline Check flag(std::string name, bool ok, const std::string& witness) {
  return Check{std::move(name), ok, ok ? 0.0 : 1.0, ok ? std::string() : witness};
}

/**
 * Passes when `inner` fails. The witness of the first failing inner check is
 * kept either way, so a rejected structure still shows why it was rejected.
 */
inline Check expect_rejected(std::string name, const Report& inner) {
  for (const auto& c : inner.checks)
    if (!c.pass) return Check{std::move(name), true, c.residual, c.name + ": " + c.witness};
  return Check{std::move(name), false, 0.0, "every check passed, but a failure was expected"};
}

/// An invertible random chart, away from singular.
inline std::pair<Matrix, Vector> random_chart(int n, Rng& rng) {
  for (;;) {
    Matrix M = Matrix::Identity(n, n) + 0.5 * random_matrix(n, n, rng);
    if (std::abs(M.determinant()) > 0.2) return {M, random_vector(n, rng, -2.0, 2.0)};
  }
}

inline Vector random_nonzero(int n, Rng& rng) {
  for (;;) {
    Vector v = random_vector(n, rng);
    if (v.cwiseAbs().maxCoeff() > 0.5) return v;
  }
}

inline std::vector<std::string> keys_with_prefix(const ScenarioSection& sec, const std::string& prefix) {
  std::vector<std::string> out;
  for (const auto& k : sec.keys())
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

inline std::string csv_of(const Trajectory& tr) {
  std::ostringstream os;
  write_csv(os, tr);
  return os.str();
}

/// Square matrix from a key that may also be "zero", "identity" or "random".
inline Matrix square_matrix(const ScenarioSection& sec, const std::string& key, int n, Rng& rng,
                            const std::string& fallback) {
  const std::string text = sec.string(key, fallback);
  if (text == "zero") return Matrix::Zero(n, n);
  if (text == "identity") return Matrix::Identity(n, n);
  if (text == "random") return random_matrix(n, n, rng, -2.0, 2.0);
  const Matrix M = sec.matrix(key);
  if (M.rows() != n || M.cols() != n)
    throw ScenarioError(sec.where(key) + ": expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  return M;
}

// ---------------------------------------------------------------------------
// affine-axioms
// ---------------------------------------------------------------------------

inline SuiteResult affine_axioms(const SuiteContext& ctx) {
  const auto sec = ctx.file.optional("affine");
  const int n = positive(sec, "dim", 3);
  const int k = positive(sec, "codim", 2);
  const int charts = positive(sec, "charts", 3);
  const int samples = positive(sec, "samples", 64);
  Rng rng(ctx.seed);

  auto A = AffineSpace::make(n, "A");
  for (int c = 1; c <= charts; ++c) {
    const auto [M, b] = random_chart(n, rng);
    A->add_chart("c" + std::to_string(c), M, b);
  }
  const auto names = A->chart_names();
  auto pick = [&] { return names[static_cast<std::size_t>(rng.integer(0, static_cast<int>(names.size()) - 1))]; };
  auto in_random_chart = [&](const Vector& ref) {
    const auto chart = pick();
    return AffinePoint::at(A, A->point_from_reference(chart, ref), chart);
  };

  ResidualTracker roundtrip("chart_roundtrip", kIdentityTolerance), cocycle("cocycle", kIdentityTolerance),
      chart_free("difference_chart_independence", kIdentityTolerance),
      translation("translate_difference", kIdentityTolerance);
  roundtrip.record(A->max_roundtrip_residual(), "largest chart round trip");

  for (int s = 0; s < samples; ++s) {
    const Vector r1 = random_vector(n, rng, -2.0, 2.0), r2 = random_vector(n, rng, -2.0, 2.0),
                 r3 = random_vector(n, rng, -2.0, 2.0);
    const auto a1 = in_random_chart(r1), a2 = in_random_chart(r2), a3 = in_random_chart(r3);
    const std::string where = "sample " + std::to_string(s) + " in charts (" + a1.chart + ", " + a2.chart + ", " +
                              a3.chart + ")";
    cocycle.record(cocycle_check(a1, a2, a3), where);
    chart_free.record((difference(a1, a2).reference_components() - (r1 - r2)).norm(), where);
    const auto back = translate(a2, difference(a1, a2).in_chart(pick()));
    translation.record((back.reference_coords() - r1).norm(), where);
  }

  // Affine maps A -> B -> C.
  auto B = AffineSpace::make(k, "B");
  auto C = AffineSpace::make(2, "C");
  const AffineMap phi(A, B, random_matrix(k, n, rng), random_vector(k, rng));
  const AffineMap psi(B, C, random_matrix(2, k, rng), random_vector(2, rng));
  const auto both = compose(psi, phi);
  ResidualTracker linear("affine_map_linear_part", kIdentityTolerance), composition("composition", kIdentityTolerance);
  composition.record((both.linear_part() - psi.linear_part() * phi.linear_part()).cwiseAbs().maxCoeff(),
                     "linear part of the composite");
  for (int s = 0; s < samples; ++s) {
    const auto a = in_random_chart(random_vector(n, rng, -2.0, 2.0));
    const TangentVec u{A, AffineSpace::kReferenceChart, random_vector(n, rng)};
    const std::string where = "sample " + std::to_string(s);
    const Vector lhs = phi(translate(a, u)).reference_coords() - phi(a).reference_coords();
    linear.record((lhs - phi.apply_linear(u).reference_components()).norm(), where);
    composition.record((both(a).reference_coords() - psi(phi(a)).reference_coords()).norm(), where);
  }

  // Bi-affine maps A x B -> R^k and their parts.
  auto Y = AffineSpace::make(k, "Y");
  std::vector<Matrix> slices;
  for (int i = 0; i < k; ++i) slices.push_back(random_matrix(n, k, rng));
  const BiAffineMap Phi(A, Y, slices, random_matrix(k, n, rng), random_matrix(k, k, rng), random_vector(k, rng));
  const auto parts = biaffine_parts(Phi);
  ResidualTracker first("biaffine_first", kIdentityTolerance), second("biaffine_second", kIdentityTolerance),
      bilinear("biaffine_bilinear", kIdentityTolerance);
  for (int s = 0; s < samples; ++s) {
    const Vector x = random_vector(n, rng, -2.0, 2.0), u = random_vector(n, rng);
    const Vector y = random_vector(k, rng, -2.0, 2.0), w = random_vector(k, rng);
    const std::string where = "sample " + std::to_string(s) + " x=" + format_vector(x) + " y=" + format_vector(y);
    first.record((Phi(x + u, y) - Phi(x, y) - parts.first(u, y)).norm(), where);
    second.record((Phi(x, y + w) - Phi(x, y) - parts.second(x, w)).norm(), where);
    const Vector mixed = Phi(x + u, y + w) - Phi(x + u, y) - Phi(x, y + w) + Phi(x, y);
    bilinear.record((mixed - parts.bilinear(u, w)).norm(), where);
  }

  SuiteResult out;
  for (const auto* t : {&roundtrip, &cocycle, &chart_free, &translation, &linear, &composition, &first, &second,
                        &bilinear})
    out.report.add(t->check());
  return out;
}

// ---------------------------------------------------------------------------
// duality
// ---------------------------------------------------------------------------

inline SuiteResult duality(const SuiteContext& ctx) {
  const auto sec = ctx.file.optional("duality");
  std::vector<int> dims;
  for (const auto& d : sec.has("dims") ? sec.list("dims") : std::vector<std::string>{"1", "2", "3", "4"}) {
    int v = 0;
    try {
      v = std::stoi(d);
    } catch (const std::exception&) {
      throw ScenarioError(sec.where("dims") + ": \"" + d + "\" is not an integer");
    }
    if (v < 1 || v > 32) throw ScenarioError(sec.where("dims") + ": dimensions must lie in 1..32");
    dims.push_back(v);
  }
  const int points = positive(sec, "points", 100);
  Rng rng(ctx.seed);

  ResidualTracker dimension("dual_dimension", 0.5), roundtrip("double_dual_roundtrip", kIdentityTolerance),
      distinguished("double_dual_distinguished", kIdentityTolerance), pairing("pair_identities", kIdentityTolerance),
      iota("iota_invariance", kIdentityTolerance), av("av_chart_roundtrip", kIdentityTolerance);

  for (const int n : dims) {
    const std::string dn = "n=" + std::to_string(n);
    auto A = AffineSpace::make(n, "A");
    const auto [M, b] = random_chart(n, rng);
    A->add_chart("c1", M, b);
    const SpecialAffineSpace S(A, random_nonzero(n, rng));
    const auto dual = special_dual(S);
    const auto dd = double_special_dual(S);

    Matrix span(n + 1, static_cast<Eigen::Index>(dual.model_basis.size()));
    for (std::size_t j = 0; j < dual.model_basis.size(); ++j) {
      span.col(static_cast<Eigen::Index>(j)).head(n) = dual.model_basis[j].w;
      span(n, static_cast<Eigen::Index>(j)) = dual.model_basis[j].c;
    }
    const auto model_rank = Eigen::FullPivLU<Matrix>(span).rank();
    dimension.record(std::abs(dual_dimension(*A) - (n + 1)) + std::abs(static_cast<double>(model_rank) - n),
                     dn + ": dim A-dagger " + std::to_string(dual_dimension(*A)) + ", model rank " +
                         std::to_string(model_rank));
    if (!dual.contains(DualElement{A, dual.particular, 0.0})) dimension.record(1.0, dn + ": particular not special");
    for (const auto& e : dual.model_basis)
      if (!dual.in_model(e)) dimension.record(1.0, dn + ": model basis element outside the model");

    distinguished.record((dd.backward_linear(dd.distinguished()) - S.distinguished).norm(), dn);

    for (int s = 0; s < points; ++s) {
      const std::string chart = (s % 2) ? "c1" : AffineSpace::kReferenceChart;
      const Vector ref = random_vector(n, rng, -2.0, 2.0);
      const auto a = AffinePoint::at(A, A->point_from_reference(chart, ref), chart);
      const std::string where = dn + " point " + std::to_string(s) + " " + format_vector(ref);
      roundtrip.record((dd.backward(dd.forward(a)).reference_coords() - ref).norm(), where);

      const DualElement f{A, random_vector(n, rng), rng.uniform(-1.0, 1.0)};
      const TangentVec u{A, AffineSpace::kReferenceChart, random_vector(n, rng)};
      const double alpha = rng.uniform(-2.0, 2.0), beta = rng.uniform(-2.0, 2.0);
      const HullPoint h1 = embed(a), h2 = embed(u);
      pairing.record(pair(h1 * alpha + h2 * beta, f) - alpha * pair(h1, f) - beta * pair(h2, f), where);
      pairing.record(pair(h1, f) - f(a), where + " (evaluation)");
      pairing.record(pair(h1, one(A)) - 1.0, where + " (weight of a point)");
      pairing.record(pair(h2, one(A)), where + " (weight of a vector)");
      const auto [wc, cc] = f.in_chart(chart);
      pairing.record(wc.dot(a.coords) + cc - f(a), where + " (dual in chart)");
    }

    // iota of a section of V(A): independent of c, and <w, v_A> = 1 on A#.
    const ExprVector X = to_expressions(random_vector(n, rng));
    if (depends_on(iota_dagger(X), kDualConstantName)) iota.record(1.0, dn + ": iota-dagger depends on c");
    const Expression unit = iota_sharp(dual, to_expressions(S.distinguished));
    for (const auto& p : random_points(dual.free_names(), 8, rng)) {
      const double v = evaluate(unit, p);
      iota.record(v - 1.0, dn + " at " + format_point(p) + ": iota#(v_A) = " + format_number(v));
    }

    const AVChart chart(S);
    for (int s = 0; s < 8; ++s) {
      const Vector x = random_vector(n - 1, rng, -2.0, 2.0);
      const double sv = rng.uniform(-2.0, 2.0);
      const auto [x2, s2] = chart.coordinates(chart.point(x, sv));
      av.record((x2 - x).norm() + std::abs(s2 - sv), dn + " (x, s) = (" + format_vector(x) + ", " +
                                                         format_number(sv) + ")");
    }
  }

  // F_sigma on a special affine bundle with base coordinates `base` and fibre s.
  const auto base = sec.has("base") ? sec.list("base") : std::vector<std::string>{"x"};
  const std::string fiber = sec.string("fiber", "s");
  VarContext bctx = VarContext::of(base, VarRole::Base);
  const auto sigmas = sec.has("sections") ? sec.expressions("sections", bctx)
                                          : ExprVector{parse("x^2", bctx), parse("sin(x)", bctx)};
  ResidualTracker ds("F_sigma_ds", 0.5), vanish("F_sigma_vanishes", 0.5), diff("F_sigma_difference", kIdentityTolerance);
  std::vector<std::string> all = base;
  all.push_back(fiber);
  const auto pts = random_points(all, 16, rng);
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const auto F = F_of_section(sigmas[i], fiber);
    const Expression dF = simplify(differentiate(F, fiber));
    ds.record(dF.is_constant(1.0) ? 0.0 : 1.0, "sigma=" + to_string(sigmas[i]) + ": dF/ds = " + to_string(dF));
    const Expression chi = simplify(chi_derivative(F, fiber));
    ds.record(chi.is_constant(-1.0) ? 0.0 : 1.0, "sigma=" + to_string(sigmas[i]) + ": chi(F) = " + to_string(chi));
    const Expression on = simplify(substitute(F, fiber, sigmas[i]));
    vanish.record(on.is_zero() ? 0.0 : 1.0, "sigma=" + to_string(sigmas[i]) + ": F o sigma = " + to_string(on));
    for (std::size_t j = 0; j < sigmas.size(); ++j) {
      const Expression r = F - F_of_section(sigmas[j], fiber) - (sigmas[j] - sigmas[i]);
      for (const auto& p : pts)
        diff.record_lazy(evaluate(r, p), [&] { return "sections " + std::to_string(i) + ", " + std::to_string(j) +
                                                      " at " + format_point(p); });
    }
  }

  SuiteResult out;
  for (const auto* t : {&dimension, &roundtrip, &distinguished, &pairing, &iota, &av, &ds, &vanish, &diff})
    out.report.add(t->check());
  return out;
}

// ---------------------------------------------------------------------------
// affgebra-verify
// ---------------------------------------------------------------------------

inline LieAffgebraData affgebra_from(const ScenarioSection& sec, Rng& rng) {
  const int n = positive(sec, "dim", 3);
  const Matrix D = square_matrix(sec, "D", n, rng, "zero");
  std::vector<Matrix> c;
  const std::string kind = sec.string("c", sec.has("c1") ? "explicit" : "abelian");
  if (kind == "abelian") {
    c.assign(static_cast<std::size_t>(n), Matrix::Zero(n, n));
  } else if (kind == "cross" || kind == "so3") {
    if (n != 3) throw ScenarioError(sec.where("c") + ": \"" + kind + "\" needs dim = 3");
    c = cross_product_constants();
  } else if (kind == "explicit") {
    for (int i = 1; i <= n; ++i) {
      const std::string key = "c" + std::to_string(i);
      const Matrix m = sec.matrix(key);
      if (m.rows() != n || m.cols() != n) throw ScenarioError(sec.where(key) + ": expected an n x n matrix");
      c.push_back(m);
    }
  } else {
    throw ScenarioError(sec.where("c") + ": expected abelian, cross, so3 or explicit c1..cn, got \"" + kind + "\"");
  }
  std::optional<Vector> v;
  if (sec.has("v")) {
    v = sec.vector("v");
    if (v->size() != n) throw ScenarioError(sec.where("v") + ": expected " + std::to_string(n) + " components");
  }
  return LieAffgebraData(D, c, v);
}

inline bool expects_failure(const ScenarioSection& sec) {
  const auto e = sec.string("expect", "pass");
  if (e != "pass" && e != "fail") throw ScenarioError(sec.where("expect") + ": expected pass or fail");
  return e == "fail";
}

inline SuiteResult affgebra_verify(const SuiteContext& ctx) {
  const auto structures = ctx.file.sections_with_prefix("structure");
  if (structures.empty()) throw ScenarioError("affgebra-verify needs at least one [structure:NAME] section");
  Rng rng(ctx.seed);
  SuiteResult out;
  for (const auto& sec : structures) {
    const auto data = affgebra_from(sec, rng);
    const auto rep = verify_affgebra(data, sec.number("tolerance", kIdentityTolerance));
    if (expects_failure(sec))
      out.report.add(expect_rejected(sec.label() + ".rejected", rep));
    else
      out.report.append(rep, sec.label());
  }
  return out;
}

// ---------------------------------------------------------------------------
// affgebroid-verify
// ---------------------------------------------------------------------------

inline LieAffgebroidData affgebroid_from(const ScenarioSection& sec, Rng& rng) {
  const std::string type = sec.string("type", "time_fields");
  if (type == "time_fields") {
    const int d = positive(sec, "dim", 1);
    const auto base = time_field_base(d);
    const VarContext bctx = VarContext::of(base, VarRole::Base);
    ExprVector shift;
    if (sec.has("shift")) {
      shift = sec.expressions("shift", bctx);
      if (static_cast<int>(shift.size()) != d)
        throw ScenarioError(sec.where("shift") + ": expected " + std::to_string(d) + " components");
    } else if (sec.has("random_shift_degree")) {
      const int deg = positive(sec, "random_shift_degree", 2);
      for (int i = 0; i < d; ++i) shift.push_back(random_polynomial(base, deg, rng));
    }
    auto data = time_field_affgebroid(d, shift);
    const double scale = sec.number("anchor_scale", 1.0);
    if (scale != 1.0) {
      Anchor declared = data.anchor();
      declared.reference = Expression(scale) * declared.reference;
      for (auto& f : declared.frame) f = Expression(scale) * f;
      data = data.with_declared_anchor(declared);
    }
    return data;
  }
  if (type == "atiyah") return atiyah_algebroid(positive(sec, "dim", 1));
  throw ScenarioError(sec.where("type") + ": expected time_fields or atiyah, got \"" + type + "\"");
}

inline VerifyOptions verify_options(const ScenarioSection& sec, std::uint64_t seed) {
  VerifyOptions opt;
  opt.seed = seed;
  opt.trials = positive(sec, "trials", opt.trials);
  opt.degree = positive(sec, "degree", opt.degree);
  opt.tolerance = positive_number(sec, "tolerance", opt.tolerance);
  return opt;
}

inline SuiteResult affgebroid_verify(const SuiteContext& ctx) {
  Rng rng(ctx.seed);
  const auto data = affgebroid_from(ctx.file.section("structure"), rng);
  const auto vsec = ctx.file.optional("verify");
  const auto opt = verify_options(vsec, ctx.seed);
  const int per_axis = positive(vsec, "grid", 4);
  const auto points = data.base().empty()
                          ? std::vector<Point>{Point{}}
                          : grid(data.base(), vsec.number("lo", -1.0), vsec.number("hi", 1.0), per_axis);

  SuiteResult out;
  const auto rep = verify_affgebroid(data, points, opt);
  out.report.append(rep, "affgebroid");
  if (vsec.boolean("hull", true)) {
    if (rep.pass()) {
      VerifyOptions hopt = opt;
      hopt.seed = opt.seed + 1;
      out.report.append(verify_hull(HullAlgebroidData(data), points, hopt), "hull");
    } else {
      out.report.add(Check{"hull.extend", false, INFINITY, "input is not a Lie affgebroid, so it has no hull"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// aff-poisson
// ---------------------------------------------------------------------------

inline SuiteResult aff_poisson(const SuiteContext& ctx) {
  const auto structures = ctx.file.sections_with_prefix("structure");
  if (structures.empty()) throw ScenarioError("aff-poisson needs at least one [structure:NAME] section");
  Rng rng(ctx.seed);
  SuiteResult out;
  for (const auto& sec : structures) {
    const std::string name = sec.label();
    const std::string type = sec.string("type", "atiyah");
    std::optional<LieAffgebroidData> data;
    if (type == "atiyah") {
      data = atiyah_algebroid(positive(sec, "dim", 1));
    } else if (type == "affgebra") {
      const auto alg = affgebra_from(sec, rng);
      if (!alg.distinguished) throw ScenarioError(sec.where("v") + " is required for an aff-Poisson check");
      data = alg.to_affgebroid();
    } else {
      throw ScenarioError(sec.where("type") + ": expected atiyah or affgebra, got \"" + type + "\"");
    }
    const AffJacobiBracket B(*data);
    const auto& base = B.data().base();
    const auto& ys = B.fiber_variables();
    const int pairs = positive(sec, "pairs", 5);
    const int samples = positive(sec, "samples", 32);
    const auto points = random_points(B.variables(), static_cast<std::size_t>(samples), rng);

    auto affine_section = [&] {
      const int deg = base.empty() ? 0 : 2;
      Expression s = random_polynomial(base, deg, rng);
      for (const auto& y : ys) s += random_polynomial(base, deg, rng) * Expression::variable(y);
      return s;
    };

    ResidualTracker skew("skew", kBracketTolerance), extension("first_order_extension", kBracketTolerance),
        canonical("canonical", kBracketTolerance);
    const bool compare = type == "atiyah" && sec.boolean("canonical", true);
    for (int t = 0; t < pairs; ++t) {
      const Expression s1 = affine_section(), s2 = affine_section();
      const Expression b12 = B(s1, s2), b21 = B(s2, s1), b11 = B(s1, s1);
      const Expression ext = B.extended(s1, s2);
      const Expression can = compare ? canonical_poisson(s1, s2, base, ys) : Expression(0.0);
      for (const auto& p : points) {
        auto where = [&] { return "pair " + std::to_string(t) + " at " + format_point(p); };
        skew.record_lazy(std::abs(evaluate(b12, p) + evaluate(b21, p)) + std::abs(evaluate(b11, p)), where);
        const double v = evaluate(b12, p);
        extension.record_lazy(evaluate(ext, p) - v, where);
        if (compare) {
          const double c = evaluate(can, p);
          canonical.record_lazy(v - c, [&] {
            return where() + ": aff-Jacobi " + format_number(v) + ", canonical " + format_number(c) +
                   ", sigma=" + to_string(s1) + ", sigma'=" + to_string(s2);
          });
        }
      }
    }
    out.report.add(renamed(skew.check(), name + ".skew"));
    out.report.add(renamed(extension.check(), name + ".first_order_extension"));
    if (compare) out.report.add(renamed(canonical.check(), name + ".canonical"));

    const auto res = is_aff_poisson(B, ctx.seed);
    auto agree = *res.report.find("criteria_agree");
    agree.name = name + ".criteria_agree";
    out.report.add(agree);
    if (sec.has("expect_aff_poisson")) {
      const bool expected = sec.boolean("expect_aff_poisson", true);
      std::string detail = std::string("derivation test ") + (res.derivation ? "passes" : "fails") +
                           ", centrality test " + (res.central ? "passes" : "fails");
      for (const auto& c : res.report.checks)
        if (!c.pass && !c.witness.empty()) detail += "; " + c.name + ": " + c.witness;
      out.report.add(Check{name + ".aff_poisson", res.value() == expected, res.value() == expected ? 0.0 : 1.0,
                           detail});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// phase-invariance
// ---------------------------------------------------------------------------

inline SuiteResult phase_invariance(const SuiteContext& ctx) {
  const auto bundles = ctx.file.sections_with_prefix("bundle");
  if (bundles.empty()) throw ScenarioError("phase-invariance needs at least one [bundle:NAME] section");
  Rng rng(ctx.seed);
  SuiteResult out;
  for (const auto& sec : bundles) {
    const std::string name = sec.label();
    const auto base = sec.has("base") ? sec.list("base") : std::vector<std::string>{"x"};
    AVBundle Z(base, sec.string("fiber", "s"),
               sec.has("momenta") ? sec.list("momenta") : std::vector<std::string>{});
    for (const auto& key : keys_with_prefix(sec, "section_"))
      Z.add_section(key.substr(8), sec.expression(key, Z.context()));
    const auto& tags = Z.section_names();
    if (tags.empty()) throw ScenarioError("[" + sec.name() + "] needs section_<name> keys");

    std::set<std::string> distinct;
    for (const auto& t : tags) distinct.insert(to_string(simplify(Z.section(t))));
    const int min_sections = positive(sec, "min_sections", 3);
    out.report.add(flag(name + ".distinct_sections", static_cast<int>(distinct.size()) >= min_sections,
                        std::to_string(distinct.size()) + " distinct trivializing sections, need " +
                            std::to_string(min_sections)));

    const double lo = sec.number("lo", -1.0), hi = sec.number("hi", 1.0);
    const auto base_points = grid(base, lo, hi, positive(sec, "grid", 5));
    const auto phase_points = grid(Z.phase_variables(), lo, hi, positive(sec, "phase_grid", 3));
    const auto& ref = tags.front();

    ResidualTracker invariance("omega_invariance", kIdentityTolerance), canonical("omega_canonical", kIdentityTolerance);
    const auto omega_ref = omega_Z(Z, ref, ref);
    for (const auto& t : tags) {
      const double d = max_difference(omega_Z(Z, t, ref), omega_ref, phase_points);
      invariance.record(d, "through \"" + t + "\" against \"" + ref + "\"");
    }
    // sum dp ^ dx is the differential of the Liouville form p dx.
    const auto vars = Z.phase_variables();
    ExprVector theta(vars.size(), Expression(0.0));
    for (std::size_t i = 0; i < base.size(); ++i) theta[i] = Expression::variable(Z.momenta()[i]);
    canonical.record(max_difference(omega_ref, exterior_derivative(theta, vars), phase_points),
                     "omega_Z = " + omega_ref.to_string());

    ResidualTracker dd("dd_zero", kIdentityTolerance), oneform("oneform_tag_independence", kIdentityTolerance),
        groupoid("retag_groupoid", kIdentityTolerance);
    const int randoms = positive(sec, "random_sections", 5);
    const int degree = positive(sec, "degree", 3);
    auto pick = [&] { return tags[static_cast<std::size_t>(rng.integer(0, static_cast<int>(tags.size()) - 1))]; };
    for (int r = 0; r < randoms; ++r) {
      const Expression sigma = random_polynomial(base, degree, rng);
      const auto t1 = pick(), t2 = pick(), t3 = pick();
      const std::string label = "sigma=" + to_string(sigma) + " tags " + t1 + "," + t2 + "," + t3;
      const auto alpha = Z.bold_d_section(sigma, t1);
      TwoForm zero(base);
      dd.record(max_difference(bold_d_oneform(Z, alpha), zero, base_points), label);
      const auto moved = Z.retag(alpha, t2);
      const auto direct = Z.bold_d_section(sigma, t2);
      for (const auto& m : base_points) {
        oneform.record_lazy((evaluate(moved.components, m) - evaluate(direct.components, m)).norm(),
                            [&] { return label + " at " + format_point(m); });
        const auto x = Z.bold_d(sigma, m, t1);
        const auto via = Z.retag(Z.retag(x, t2), t3);
        const auto straight = Z.retag(x, t3);
        const auto fresh = Z.bold_d(sigma, m, t3);
        groupoid.record_lazy((via.p - straight.p).norm() + (straight.p - fresh.p).norm(),
                             [&] { return label + " at " + format_point(m); });
      }
    }
    for (const auto* t : {&invariance, &canonical, &dd, &oneform, &groupoid})
      out.report.add(renamed(t->check(), name + "." + t->check().name));
  }
  return out;
}

// ---------------------------------------------------------------------------
// reduction-check
// ---------------------------------------------------------------------------

inline SuiteResult reduction_check(const SuiteContext& ctx) {
  const auto sec = ctx.file.optional("phase");
  const auto Z = ExtendedPhase::make(positive(sec, "dim", 1));
  const int samples = positive(sec, "samples", 32);
  const VarContext rctx = Z.reduced_context();
  Rng rng(ctx.seed);

  ExprVector sections;
  const auto ssec = ctx.file.optional("sections");
  for (const auto& key : keys_with_prefix(ssec, "sigma")) sections.push_back(ssec.expression(key, rctx));
  const int randoms = static_cast<int>(ssec.integer("random", 4));
  const int degree = positive(ssec, "degree", 2);
  for (int r = 0; r < randoms; ++r) sections.push_back(random_polynomial(Z.reduced(), degree, rng));
  if (sections.size() < 2) throw ScenarioError("reduction-check needs at least two sections");

  std::vector<std::pair<Expression, Expression>> pairs;
  for (std::size_t i = 0; i + 1 < sections.size(); ++i) pairs.emplace_back(sections[i], sections[i + 1]);
  pairs.emplace_back(sections.back(), sections.front());

  ResidualTracker fiber("fiber_constancy", kBracketTolerance), closed("bracket_closed_form", kBracketTolerance);
  const auto points = random_points(Z.all(), static_cast<std::size_t>(samples), rng);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& [a, b] = pairs[k];
    const auto br = reduced_aff_poisson(Z, a, b, ctx.seed + k, samples);
    fiber.record(br.fiber_residual, "pair " + std::to_string(k));
    // {s - a, s - b} on T*(Q x T), expanded by hand.
    Expression expected = differentiate(a, Z.t) - differentiate(b, Z.t);
    for (std::size_t i = 0; i < Z.q.size(); ++i)
      expected += differentiate(a, Z.p[i]) * differentiate(b, Z.q[i]) - differentiate(a, Z.q[i]) * differentiate(b, Z.p[i]);
    for (const auto& p : points)
      closed.record_lazy(evaluate(br.descended, p) - evaluate(expected, p), [&] {
        return "sigma=" + to_string(a) + ", sigma'=" + to_string(b) + " at " + format_point(p);
      });
  }

  SuiteResult out;
  out.report.add(fiber.check());
  out.report.add(closed.check());
  const auto rep = check_affine_reduction(time_reduction_morphism(Z), trivial_bundle_bracket(Z), reduced_bracket(Z), pairs,
                                          points);
  out.report.append(rep);
  if (ctx.file.optional("checks").boolean("flipped_rejected", true)) {
    const auto bad = check_affine_reduction(time_reduction_morphism(Z, true), trivial_bundle_bracket(Z), reduced_bracket(Z),
                                            pairs, points);
    out.report.add(expect_rejected("flipped_rejected", bad));
  }
  if (ctx.file.optional("checks").boolean("flipped", false)) {
    // The sign-flipped morphism on its own, for scenarios that demonstrate the failure.
    out.report.append(check_affine_reduction(time_reduction_morphism(Z, true), trivial_bundle_bracket(Z),
                                             reduced_bracket(Z), pairs, points),
                      "flipped");
  }
  return out;
}

// ---------------------------------------------------------------------------
// timedep
// ---------------------------------------------------------------------------

/// Reference solutions keyed by state name, as expressions in t and the initial data.
inline void check_reference(const ScenarioFile& file, const Trajectory& tr, const VarContext& rctx, const Point& bound,
                            Report& report) {
  if (!file.has("reference")) return;
  const auto& sec = file.section("reference");
  const double tol = positive_number(sec, "tolerance", kNumericTolerance);
  for (const auto& key : sec.keys()) {
    if (key == "tolerance") continue;
    std::size_t col = 0;
    bool is_event = false;
    auto it = std::find(tr.state_names.begin(), tr.state_names.end(), key);
    if (it != tr.state_names.end()) {
      col = static_cast<std::size_t>(it - tr.state_names.begin());
    } else {
      auto ev = std::find(tr.event_names.begin(), tr.event_names.end(), "event_" + key);
      if (ev == tr.event_names.end()) throw ScenarioError(sec.where(key) + ": no such state or event coordinate");
      col = static_cast<std::size_t>(ev - tr.event_names.begin());
      is_event = true;
    }
    const Expression ref = sec.expression(key, rctx);
    ResidualTracker t("reference_" + key, tol);
    Point p = bound;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      p["t"] = tr.times[k];
      const double got = is_event ? tr.events[k][static_cast<Eigen::Index>(col)]
                                  : tr.states[k][static_cast<Eigen::Index>(col)];
      const double want = evaluate(ref, p);
      t.record_lazy(got - want, [&] {
        return "step " + std::to_string(k) + " t=" + format_number(tr.times[k]) + ": computed " + format_number(got) +
               ", closed form " + format_number(want);
      });
    }
    report.add(t.check());
  }
}

inline SuiteResult timedep(const SuiteContext& ctx) {
  const auto& ssec = ctx.file.section("system");
  const auto Z = ExtendedPhase::make(positive(ssec, "dim", 1));
  const int d = Z.spatial_dim();
  const TimeDepSystem sys(Z, ssec.expression("H", Z.reduced_context()));
  const auto& run = ctx.file.section("run");
  const Vector q0 = run.vector("q0"), p0 = run.vector("p0");
  if (q0.size() != d || p0.size() != d) throw ScenarioError(run.where("q0") + ": q0 and p0 need dim components");
  const double t0 = run.number("t0", 0.0);
  const double h = positive_number(run, "h", 1e-3), T = positive_number(run, "T", 10.0);
  Vector y0(2 * d + 1);
  y0 << q0, p0, t0;

  const auto csec = ctx.file.optional("checks");
  Rng rng(ctx.seed);
  SuiteResult out;

  ResidualTracker recovery("dynamics_recovery", kIdentityTolerance);
  const int grid_axis = positive(csec, "grid", 5);
  recovery.record(timedep_dynamics(sys, grid_axis).max_deviation, "H=" + to_string(sys.H));
  const int randoms = static_cast<int>(csec.integer("random_hamiltonians", 5));
  const int degree = positive(csec, "degree", 3);
  for (int r = 0; r < randoms; ++r) {
    const TimeDepSystem other(Z, random_polynomial(Z.reduced(), degree, rng));
    recovery.record(timedep_dynamics(other, grid_axis).max_deviation, "H=" + to_string(other.H));
  }
  out.report.add(recovery.check());

  const auto tr = integrate_timedep(sys, y0, h, T);
  VarContext rctx = VarContext::of({"t"}, VarRole::Time);
  Point bound;
  for (int i = 0; i < d; ++i) {
    const std::string suffix = d == 1 ? "" : std::to_string(i + 1);
    rctx.add("q0" + suffix).add("p0" + suffix);
    bound["q0" + suffix] = q0[i];
    bound["p0" + suffix] = p0[i];
  }
  check_reference(ctx.file, tr, rctx, bound, out.report);

  if (csec.has("period")) {
    const double period = positive_number(csec, "period", 1.0);
    const auto loop = integrate_timedep(sys, y0, h, period);
    const Vector end = loop.states.back();
    ResidualTracker ret("period_return", positive_number(csec, "period_tolerance", 1e-9));
    ret.record((end.head(2 * d) - y0.head(2 * d)).cwiseAbs().maxCoeff(),
               "after " + std::to_string(loop.size() - 1) + " steps: " + format_vector(end.head(2 * d)));
    out.report.add(ret.check());
  }
  if (csec.boolean("energy", false)) {
    if (depends_on(sys.H, Z.t)) throw ScenarioError(csec.where("energy") + ": H depends on t, energy is not conserved");
    ResidualTracker e("energy", positive_number(csec, "energy_tolerance", kNumericTolerance));
    e.record(energy_drift(sys.H, tr), "over " + std::to_string(tr.size() - 1) + " steps");
    out.report.add(e.check());
  }
  out.artifacts.push_back({"trajectory.csv", csv_of(tr)});
  return out;
}

// ---------------------------------------------------------------------------
// newton and compare-frames
// ---------------------------------------------------------------------------

inline NewtonSpaceTime spacetime_from(const ScenarioFile& file) {
  const auto sec = file.optional("spacetime");
  const int d = positive(sec, "d", 3);
  if (!sec.has("tau") && !sec.has("E0") && !sec.has("metric") && !sec.has("names"))
    return NewtonSpaceTime::standard(d);
  const auto standard = NewtonSpaceTime::standard(d);
  const Vector tau = sec.has("tau") ? sec.vector("tau") : standard.tau();
  const Matrix E = sec.has("E0") ? sec.matrix("E0") : standard.E0();
  const Matrix g = sec.has("metric") ? sec.matrix("metric") : standard.metric();
  return NewtonSpaceTime(tau, E, g, sec.has("names") ? sec.list("names") : std::vector<std::string>{});
}

struct NewtonRun {
  double mass = 1.0;
  Vector u;
  ObservedPhase initial;
  double h = 1e-3;
  double T = 10.0;
};

inline NewtonRun newton_run_from(const ScenarioSection& run, const NewtonSpaceTime& st) {
  const auto n = static_cast<Eigen::Index>(st.names().size());
  const int d = st.spatial_dim();
  NewtonRun out;
  out.mass = positive_number(run, "mass", 1.0);
  if (run.has("frame")) {
    out.u = run.vector("frame");
  } else {
    // Default frame: u parallel to tau with <tau, u> = 1.
    out.u = st.tau() / st.tau().squaredNorm();
  }
  if (out.u.size() != n) throw ScenarioError(run.where("frame") + ": expected " + std::to_string(n) + " components");
  const Vector x0 = run.has("x0") ? run.vector("x0") : Vector(Vector::Zero(n));
  const Vector p0 = run.has("p0") ? run.vector("p0") : Vector(Vector::Zero(d));
  if (x0.size() != n) throw ScenarioError(run.where("x0") + ": expected " + std::to_string(n) + " components");
  if (p0.size() != d) throw ScenarioError(run.where("p0") + ": expected " + std::to_string(d) + " components");
  out.initial = ObservedPhase{x0, p0, run.number("s0", 0.0), out.u};
  out.h = positive_number(run, "h", 1e-3);
  out.T = positive_number(run, "T", 10.0);
  return out;
}

inline VarContext event_context(const NewtonSpaceTime& st) { return VarContext::of(st.names(), VarRole::Base); }

/// Whether the energy of frame u is conserved: grad(phi) . u vanishes, tested at fixed probe points.
inline bool energy_conserved(const NewtonSpaceTime& st, const Expression& phi, const Vector& u) {
  const auto g = gradient(phi, st.names());
  Expression flow = 0.0;
  for (std::size_t r = 0; r < g.size(); ++r) flow += Expression(u[static_cast<Eigen::Index>(r)]) * g[r];
  flow = simplify(flow);
  if (flow.is_zero()) return true;
  Rng rng(17);
  for (const auto& p : random_points(st.names(), 32, rng, -2.0, 2.0))
    if (!(std::abs(evaluate(flow, p)) < kIdentityTolerance)) return false;
  return true;
}

inline SuiteResult newton(const SuiteContext& ctx) {
  const auto st = spacetime_from(ctx.file);
  const auto& run = ctx.file.section("run");
  const auto cfg = newton_run_from(run, st);
  const InertialFrame frame(st, cfg.u);
  const Expression phi = run.expression("potential", event_context(st));
  const auto sys = newton_dynamics(st, frame, cfg.mass, phi);
  const auto tr = integrate_newton(st, frame, cfg.mass, phi, cfg.initial, cfg.h, cfg.T);

  SuiteResult out;
  ResidualTracker clock("clock", kIdentityTolerance);
  clock.record(clock_residual(st, sys, tr), "frame " + format_vector(cfg.u));
  out.report.add(clock.check());

  ResidualTracker split("observer_time", kBracketTolerance);
  const auto n = static_cast<Eigen::Index>(st.names().size());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto [q, t] = observer_split(st, frame, cfg.initial.x, tr.states[k].head(n));
    split.record_lazy(t - tr.times[k], [&] { return "step " + std::to_string(k) + ": clock reads " + format_number(t); });
  }
  out.report.add(split.check());

  VarContext rctx = VarContext::of({"t"}, VarRole::Time);
  check_reference(ctx.file, tr, rctx, Point{}, out.report);

  const auto csec = ctx.file.optional("checks");
  if (csec.boolean("energy", false)) {
    if (!energy_conserved(st, phi, cfg.u))
      throw ScenarioError(csec.where("energy") + ": the potential changes along the frame, energy is not conserved");
    ResidualTracker e("energy", positive_number(csec, "energy_tolerance", kNumericTolerance));
    e.record(energy_drift(newton_energy(st, cfg.mass, phi), tr), "over " + std::to_string(tr.size() - 1) + " steps");
    out.report.add(e.check());
  }
  out.artifacts.push_back({"trajectory.csv", csv_of(tr)});
  return out;
}

inline GaugeConvention convention_from(const ScenarioSection& sec) {
  const auto c = sec.string("convention", "kinematic");
  if (c == "kinematic") return GaugeConvention::Kinematic;
  if (c == "as_printed") return GaugeConvention::AsPrinted;
  throw ScenarioError(sec.where("convention") + ": expected kinematic or as_printed, got \"" + c + "\"");
}

inline double gauge_roundtrip(const NewtonSpaceTime& st, const ObservedPhase& phi, const Vector& v, double m,
                              GaugeConvention conv) {
  const auto there = gauge_transform(st, phi, v, m, conv);
  const auto back = gauge_transform(st, there, -v, m, conv);
  return std::max((back.p - phi.p).cwiseAbs().maxCoeff(), std::abs(back.s - phi.s));
}

inline SuiteResult compare_frames_suite(const SuiteContext& ctx) {
  const auto st = spacetime_from(ctx.file);
  const int d = st.spatial_dim();
  const auto& run = ctx.file.section("run");
  const auto cfg = newton_run_from(run, st);
  const InertialFrame frame(st, cfg.u);
  const auto conv = convention_from(run);
  const double tol = positive_number(run, "tolerance", kNumericTolerance);
  Rng rng(ctx.seed);

  std::vector<std::pair<std::string, Expression>> potentials;
  for (const auto& sec : ctx.file.sections_with_prefix("potential"))
    potentials.emplace_back(sec.label(), sec.expression("phi", event_context(st)));
  if (potentials.empty()) throw ScenarioError("compare-frames needs at least one [potential:NAME] section");

  std::vector<std::pair<std::string, Vector>> boosts;
  for (const auto& sec : ctx.file.sections_with_prefix("boost")) {
    const Vector v = sec.vector("v");
    if (v.size() != d + 1) throw ScenarioError(sec.where("v") + ": expected " + std::to_string(d + 1) + " components");
    boosts.emplace_back(sec.label(), v);
  }
  const auto bsec = ctx.file.optional("boosts");
  const int randoms = static_cast<int>(bsec.integer("random", 0));
  const double scale = bsec.number("scale", 1.0);
  for (int r = 0; r < randoms; ++r)
    boosts.emplace_back("random" + std::to_string(r + 1), st.E0() * random_vector(d, rng, -scale, scale));
  if (boosts.empty()) throw ScenarioError("compare-frames needs [boost:NAME] sections or [boosts] random = N");

  SuiteResult out;
  nlohmann::ordered_json comparisons = nlohmann::ordered_json::array();
  ResidualTracker clock("clock", kIdentityTolerance);
  for (const auto& [pname, phi] : potentials) {
    for (const auto& [bname, v] : boosts) {
      const auto cmp = compare_frames(st, cfg.mass, phi, frame, v, cfg.initial, cfg.h, cfg.T, conv, tol);
      const std::string label = pname + "." + bname;
      out.report.add(Check{label + ".world_lines", cmp.pass, cmp.max_deviation,
                           cmp.pass ? std::string()
                                    : "frames " + format_vector(cmp.u1) + " and " + format_vector(cmp.u2) +
                                          " disagree by " + format_number(cmp.max_deviation)});
      comparisons.push_back(to_json(cmp, ctx.file.id() + "/" + label));
      const InertialFrame boosted(st, cmp.u2);
      clock.record(clock_residual(st, newton_dynamics(st, frame, cfg.mass, phi), cmp.first), label + " first frame");
      clock.record(clock_residual(st, newton_dynamics(st, boosted, cfg.mass, phi), cmp.second),
                   label + " second frame");
    }
    if (energy_conserved(st, phi, cfg.u)) {
      const auto tr = integrate_newton(st, frame, cfg.mass, phi, cfg.initial, cfg.h, cfg.T);
      ResidualTracker e(pname + ".energy", kNumericTolerance);
      e.record(energy_drift(newton_energy(st, cfg.mass, phi), tr), "over " + std::to_string(tr.size() - 1) + " steps");
      out.report.add(e.check());
      out.artifacts.push_back({"trajectory_" + pname + ".csv", csv_of(tr)});
    }
  }
  out.report.add(clock.check());

  // Gauge transformations on random observed momenta.
  ResidualTracker roundtrip("gauge_roundtrip", kIdentityTolerance), composition("gauge_composition", kIdentityTolerance);
  for (std::size_t i = 0; i < boosts.size(); ++i) {
    const ObservedPhase phi{cfg.initial.x, random_vector(d, rng, -2.0, 2.0), rng.uniform(-2.0, 2.0), cfg.u};
    const auto& [bname, v] = boosts[i];
    roundtrip.record(gauge_roundtrip(st, phi, v, cfg.mass, conv), "boost " + bname);
    const auto& w = boosts[(i + 1) % boosts.size()].second;
    const auto two = gauge_transform(st, gauge_transform(st, phi, v, cfg.mass, conv), w, cfg.mass, conv);
    const auto one = gauge_transform(st, phi, v + w, cfg.mass, conv);
    composition.record(std::max((two.p - one.p).cwiseAbs().maxCoeff(), std::abs(two.s - one.s)),
                       "boosts " + bname + " then " + boosts[(i + 1) % boosts.size()].first);
  }
  out.report.add(roundtrip.check());
  out.report.add(composition.check());

  if (ctx.file.optional("checks").boolean("as_printed_rejected", false)) {
    const ObservedPhase phi{cfg.initial.x, random_vector(d, rng, -2.0, 2.0), rng.uniform(-2.0, 2.0), cfg.u};
    const double r = gauge_roundtrip(st, phi, boosts.front().second, cfg.mass, GaugeConvention::AsPrinted);
    out.report.add(Check{"as_printed_rejected", r > kBracketTolerance, r,
                         "as-printed round trip through boost " + boosts.front().first + " is off by " +
                             format_number(r)});
  }
  out.artifacts.push_back({"comparison.json", comparisons.dump(2) + "\n"});
  return out;
}

}  // namespace suite

// ---------------------------------------------------------------------------
// Running scenarios
// ---------------------------------------------------------------------------

namespace exit_code {
inline constexpr int kPass = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kInputError = 2;
inline constexpr int kRuntimeError = 3;
}  // namespace exit_code

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;  // --out; beats AFFGEO_OUT and the scenario's own setting
  bool use_environment = true;
};

struct RunOutcome {
  int exit_code = exit_code::kPass;
  std::string id;
  std::string kind;
  std::filesystem::path out_dir;
  std::optional<Report> report;
  std::string error;
};

using SuiteRunner = std::function<SuiteResult(const SuiteContext&)>;

inline SuiteResult run_determinism(const SuiteContext& ctx);

inline const std::map<std::string, SuiteRunner>& suite_registry() {
  static const std::map<std::string, SuiteRunner> registry{
      {"affine-axioms", suite::affine_axioms},
      {"duality", suite::duality},
      {"affgebra-verify", suite::affgebra_verify},
      {"affgebroid-verify", suite::affgebroid_verify},
      {"aff-poisson", suite::aff_poisson},
      {"phase-invariance", suite::phase_invariance},
      {"reduction-check", suite::reduction_check},
      {"timedep", suite::timedep},
      {"newton", suite::newton},
      {"compare-frames", suite::compare_frames_suite},
      {"determinism", run_determinism},
  };
  return registry;
}

inline std::filesystem::path output_root(const ScenarioFile& file, const RunOptions& opt) {
  if (opt.out) return *opt.out;
  if (opt.use_environment)
    if (const char* env = std::getenv("AFFGEO_OUT"); env != nullptr && *env != '\0') return env;
  const auto& meta = file.meta();
  if (meta.has("output")) return meta.string("output");
  return "affgeo-out";
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DomainError("cannot write " + path.string());
  os << content;
  if (!os) throw DomainError("failed writing " + path.string());
}

/**
 * Runs one scenario file and writes report.json plus its artifacts to
 * <out>/<id>/. Exit codes: 0 all checks pass, 1 a check failed, 2 the file is
 * missing or malformed, 3 a domain error or contract violation at run time.
 */
inline RunOutcome run_scenario(const std::filesystem::path& path, const RunOptions& opt = {}) {
  RunOutcome out;
  try {
    const auto file = ScenarioFile::load(path);
    out.id = file.id();
    out.kind = file.kind();
    const auto it = suite_registry().find(out.kind);
    if (it == suite_registry().end()) throw ScenarioError("[scenario] kind: unknown scenario kind \"" + out.kind + "\"");
    const long long seed = file.meta().integer("seed", 0);
    if (seed < 0) throw ScenarioError("[scenario] seed: must be non-negative");
    out.out_dir = output_root(file, opt) / out.id;
    std::filesystem::create_directories(out.out_dir);

    const SuiteContext ctx{file, opt.seed.value_or(static_cast<std::uint64_t>(seed)), out.out_dir};
    auto result = it->second(ctx);
    result.report.id = out.id;
    write_file(out.out_dir / "report.json", to_json(result.report).dump(2) + "\n");
    for (const auto& a : result.artifacts) write_file(out.out_dir / a.name, a.content);
    out.exit_code = result.report.pass() ? exit_code::kPass : exit_code::kCheckFailed;
    out.report = std::move(result.report);
  } catch (const ScenarioError& e) {
    out.exit_code = exit_code::kInputError;
    out.error = e.what();
  } catch (const ParseError& e) {
    out.exit_code = exit_code::kInputError;
    out.error = e.what();
  } catch (const std::exception& e) {
    out.exit_code = exit_code::kRuntimeError;
    out.error = e.what();
  }
  return out;
}

struct ScenarioInfo {
  std::string id;
  std::string file;
  std::string kind;
  std::string description;
  int criterion = 0;  // acceptance criterion exercised, 0 for none
};

/// Bundled scenarios in `dir`, sorted by file name. Unreadable files are listed with kind "invalid".
inline std::vector<ScenarioInfo> list_scenarios(const std::filesystem::path& dir = AFFGEO_SCENARIO_DIR,
                                                const std::string& kind = {}) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(dir))
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".ini") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<ScenarioInfo> out;
  for (const auto& f : files) {
    ScenarioInfo info;
    info.file = f.filename().string();
    try {
      const auto file = ScenarioFile::load(f);
      info.id = file.id();
      info.kind = file.kind();
      info.description = file.description();
      info.criterion = static_cast<int>(file.meta().integer("criterion", 0));
    } catch (const Error& e) {
      info.id = f.stem().string();
      info.kind = "invalid";
      info.description = e.what();
    }
    if (kind.empty() || info.kind == kind) out.push_back(std::move(info));
  }
  return out;
}

inline nlohmann::ordered_json to_json(const std::vector<ScenarioInfo>& list) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& s : list) {
    nlohmann::ordered_json e;
    e["id"] = s.id;
    e["file"] = s.file;
    e["kind"] = s.kind;
    e["description"] = s.description;
    e["criterion"] = s.criterion == 0 ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(s.criterion);
    j.push_back(e);
  }
  return j;
}

namespace detail {

inline std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  if (!std::filesystem::exists(root)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[std::filesystem::relative(e.path(), root).generic_string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return out;
}

}  // namespace detail

/**
 * Runs each listed scenario twice into scratch directories and compares the
 * outputs byte for byte. With no list, every other scenario next to this one.
 */
inline SuiteResult run_determinism(const SuiteContext& ctx) {
  const auto sec = ctx.file.optional("determinism");
  const auto dir = ctx.file.path().empty() ? std::filesystem::path(AFFGEO_SCENARIO_DIR) : ctx.file.path().parent_path();
  std::vector<std::filesystem::path> targets;
  if (sec.has("scenarios")) {
    for (const auto& name : sec.list("scenarios")) targets.push_back(dir / name);
  } else {
    for (const auto& info : list_scenarios(dir))
      if (info.kind != "determinism") targets.push_back(dir / info.file);
  }
  if (targets.empty()) throw ScenarioError("[determinism] no scenarios to run");

  const auto scratch = ctx.out_dir / "scratch";
  SuiteResult out;
  for (const auto& target : targets) {
    std::array<std::map<std::string, std::string>, 2> trees;
    std::array<RunOutcome, 2> runs;
    for (int r = 0; r < 2; ++r) {
      const auto root = scratch / ("run" + std::to_string(r + 1));
      std::filesystem::remove_all(root);
      RunOptions opt;
      opt.out = root;
      runs[r] = run_scenario(target, opt);
      trees[r] = detail::read_tree(root);
    }
    const std::string name = target.stem().string();
    std::string witness;
    if (runs[0].exit_code != runs[1].exit_code || runs[0].error != runs[1].error) {
      witness = "exit codes " + std::to_string(runs[0].exit_code) + " and " + std::to_string(runs[1].exit_code);
    } else if (runs[0].exit_code >= exit_code::kInputError) {
      witness = "scenario did not run: " + runs[0].error;
    } else if (trees[0].empty()) {
      witness = "no output written";
    } else {
      for (const auto& [rel, content] : trees[0]) {
        const auto it = trees[1].find(rel);
        if (it == trees[1].end() || it->second != content) {
          witness = "output " + rel + " differs between runs";
          break;
        }
      }
      if (witness.empty() && trees[0].size() != trees[1].size()) witness = "runs wrote different file sets";
    }
    auto c = suite::flag(name + ".identical", witness.empty(), witness);
    out.report.add(c);
  }
  std::filesystem::remove_all(scratch);
  return out;
}

}  // namespace affgeo
