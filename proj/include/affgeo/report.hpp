#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace affgeo {

/// One verified identity: its worst residual and, on failure, where it failed.
struct Check {
  std::string name;
  bool pass = true;
  double residual = 0.0;
  std::string witness;
};

/// Running maximum of a residual with the location that produced it.
class ResidualTracker {
 public:
  ResidualTracker(std::string name, double tolerance) : name_(std::move(name)), tol_(tolerance) {}

  void record(double residual, const std::string& where) {
    const double r = std::isfinite(residual) ? std::abs(residual) : INFINITY;
    if (!seen_ || r > worst_) {
      worst_ = r;
      where_ = where;
      seen_ = true;
    }
  }

  template <class WhereFn>
  void record_lazy(double residual, WhereFn&& where) {
    const double r = std::isfinite(residual) ? std::abs(residual) : INFINITY;
    if (!seen_ || r > worst_) {
      worst_ = r;
      where_ = where();
      seen_ = true;
    }
  }

  double worst() const noexcept { return worst_; }
  double tolerance() const noexcept { return tol_; }

  Check check() const {
    const bool ok = worst_ < tol_;
    return Check{name_, ok, worst_, ok ? std::string() : where_};
  }

 private:
  std::string name_;
  double tol_;
  double worst_ = 0.0;
  std::string where_;
  bool seen_ = false;
};

struct Report {
  std::string id;
  std::vector<Check> checks;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }

  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  void add(Check c) { checks.push_back(std::move(c)); }

  void append(const Report& other, const std::string& prefix = {}) {
    for (auto c : other.checks) {
      if (!prefix.empty()) c.name = prefix + "." + c.name;
      checks.push_back(std::move(c));
    }
  }
};

inline nlohmann::ordered_json to_json(const Check& c) {
  nlohmann::ordered_json j;
  j["check_name"] = c.name;
  j["pass"] = c.pass;
  j["max_residual"] = std::isfinite(c.residual) ? nlohmann::ordered_json(c.residual) : nlohmann::ordered_json("inf");
  j["witness"] = c.witness.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(c.witness);
  return j;
}

inline nlohmann::ordered_json to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["scenario"] = r.id;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) j["checks"].push_back(to_json(c));
  j["pass"] = r.pass();
  return j;
}

}  // namespace affgeo
