#pragma once

/**
 * @file sampling.hpp
 * @brief Seeded random points, grids and polynomials for the verifiers.
 *
 * Uniform variates are built from raw mt19937_64 output rather than
 * std::uniform_real_distribution so that a seed gives the same samples on
 * every standard library.
 */

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "affgeo/affine.hpp"
#include "affgeo/symexpr.hpp"

namespace affgeo {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  int integer(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(engine_() % span);
  }

 private:
  std::mt19937_64 engine_;
};

/// Entries uniform in [lo, hi), filled column by column.
inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = rng.uniform(lo, hi);
  return out;
}

inline Vector random_vector(Eigen::Index n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = rng.uniform(lo, hi);
  return out;
}

inline Point random_point(const std::vector<std::string>& vars, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Point p;
  for (const auto& v : vars) p[v] = rng.uniform(lo, hi);
  return p;
}

inline std::vector<Point> random_points(const std::vector<std::string>& vars, std::size_t count, Rng& rng,
                                        double lo = -1.0, double hi = 1.0) {
  std::vector<Point> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_point(vars, rng, lo, hi));
  return out;
}

/// Tensor grid with `per_axis` equispaced nodes on [lo, hi] in every variable.
inline std::vector<Point> grid(const std::vector<std::string>& vars, double lo, double hi, int per_axis) {
  std::vector<Point> out{Point{}};
  for (const auto& v : vars) {
    std::vector<Point> next;
    for (const auto& p : out) {
      for (int i = 0; i < per_axis; ++i) {
        Point q = p;
        q[v] = per_axis == 1 ? lo : lo + (hi - lo) * i / (per_axis - 1);
        next.push_back(std::move(q));
      }
    }
    out = std::move(next);
  }
  return out;
}

namespace detail {

inline void monomials(const std::vector<std::string>& vars, std::size_t from, int degree, const Expression& prefix,
                      std::vector<Expression>& out) {
  out.push_back(prefix);
  if (degree == 0) return;
  for (std::size_t i = from; i < vars.size(); ++i)
    monomials(vars, i, degree - 1, prefix * Expression::variable(vars[i]), out);
}

}  // namespace detail

/// All monomials of total degree <= `degree` in `vars`, including 1.
inline std::vector<Expression> monomials(const std::vector<std::string>& vars, int degree) {
  std::vector<Expression> out;
  detail::monomials(vars, 0, degree, Expression(1.0), out);
  return out;
}

/// Dense polynomial of total degree <= `degree` with coefficients uniform in [-1, 1].
inline Expression random_polynomial(const std::vector<std::string>& vars, int degree, Rng& rng) {
  Expression out = 0.0;
  for (const auto& m : monomials(vars, degree)) {
    // Two decimals keep printed scenarios and reports readable.
    const double c = static_cast<double>(rng.integer(-100, 100)) / 100.0;
    out += Expression(c) * m;
  }
  return out;
}

}  // namespace affgeo
