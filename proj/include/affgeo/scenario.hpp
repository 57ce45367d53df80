#pragma once

/**
 * @file scenario.hpp
 * @brief Scenario files: sectioned `key = value` text read with Boost's INI
 * parser, with typed accessors that report the offending section and key.
 *
 * Values may be wrapped in double quotes; lists are comma separated and
 * matrices use ';' between rows, e.g. `D = "1 0; 0 1"`.
 */

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "affgeo/affine.hpp"
#include "affgeo/errors.hpp"
#include "affgeo/symexpr.hpp"

namespace affgeo {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

class ScenarioSection {
 public:
  ScenarioSection(std::string name, boost::property_tree::ptree tree) : name_(std::move(name)), tree_(std::move(tree)) {}

  const std::string& name() const noexcept { return name_; }

  /// Part of the section name after ':' (for `[structure:cross]`, "cross").
  std::string label() const {
    const auto pos = name_.find(':');
    return pos == std::string::npos ? name_ : name_.substr(pos + 1);
  }

  bool has(const std::string& key) const { return tree_.find(key) != tree_.not_found(); }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : tree_) out.push_back(k);
    return out;
  }

  std::string string(const std::string& key) const {
    const auto it = tree_.find(key);
    if (it == tree_.not_found()) throw ScenarioError(where(key) + " is required");
    return detail::unquote(it->second.data());
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

  double number(const std::string& key) const { return to_double(string(key), key); }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  long long integer(const std::string& key) const {
    const auto s = string(key);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ScenarioError(where(key) + ": expected an integer, got \"" + s + "\"");
    }
  }
  long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    auto s = string(key);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw ScenarioError(where(key) + ": expected true or false, got \"" + s + "\"");
  }

  Vector vector(const std::string& key) const {
    const auto parts = detail::split(string(key), ',');
    Vector out(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) out[static_cast<Eigen::Index>(i)] = to_double(parts[i], key);
    return out;
  }

  std::vector<std::string> list(const std::string& key) const {
    auto out = detail::split(string(key), ',');
    out.erase(std::remove(out.begin(), out.end(), std::string()), out.end());
    return out;
  }

  /// Rows separated by ';', entries by whitespace or ','.
  Matrix matrix(const std::string& key) const {
    const auto rows = detail::split(string(key), ';');
    std::vector<std::vector<double>> values;
    for (const auto& r : rows) {
      std::string row = r;
      std::replace(row.begin(), row.end(), ',', ' ');
      std::istringstream is(row);
      std::vector<double> vals;
      std::string tok;
      while (is >> tok) vals.push_back(to_double(tok, key));
      values.push_back(std::move(vals));
    }
    const auto cols = values.empty() ? 0 : values.front().size();
    Matrix out(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].size() != cols) throw ScenarioError(where(key) + ": matrix rows have different lengths");
      for (std::size_t j = 0; j < cols; ++j)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i][j];
    }
    return out;
  }

  Expression expression(const std::string& key, const VarContext& ctx) const { return parse_expr(string(key), key, ctx); }

  /// Comma-separated expressions.
  ExprVector expressions(const std::string& key, const VarContext& ctx) const {
    ExprVector out;
    for (const auto& part : detail::split(string(key), ',')) out.push_back(parse_expr(part, key, ctx));
    return out;
  }

  Expression parse_expr(const std::string& text, const std::string& key, const VarContext& ctx) const {
    try {
      return parse(text, ctx);
    } catch (const ParseError& e) {
      throw ScenarioError(where(key) + ": " + e.what() + " in \"" + text + "\"");
    }
  }

  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

 private:
  double to_double(const std::string& s, const std::string& key) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ScenarioError(where(key) + ": expected a number, got \"" + s + "\"");
    }
  }

  std::string name_;
  boost::property_tree::ptree tree_;
};

class ScenarioFile {
 public:
  static ScenarioFile load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file " + path.string());
    ScenarioFile out = from_stream(in, path.string());
    out.path_ = path;
    return out;
  }

  static ScenarioFile from_stream(std::istream& in, const std::string& origin = "<input>") {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ScenarioError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    ScenarioFile out;
    for (const auto& [name, child] : tree) {
      if (!child.data().empty() && child.empty())
        throw ScenarioError(origin + ": key \"" + name + "\" must be inside a [section]");
      out.sections_.emplace_back(name, child);
    }
    return out;
  }

  const std::filesystem::path& path() const noexcept { return path_; }

  bool has(const std::string& name) const {
    return std::any_of(sections_.begin(), sections_.end(), [&](const auto& s) { return s.name() == name; });
  }

  const ScenarioSection& section(const std::string& name) const {
    for (const auto& s : sections_)
      if (s.name() == name) return s;
    throw ScenarioError("section [" + name + "] is required");
  }

  /// The named section, or an empty one.
  ScenarioSection optional(const std::string& name) const {
    for (const auto& s : sections_)
      if (s.name() == name) return s;
    return ScenarioSection(name, {});
  }

  /// Sections named `prefix:label`, in file order.
  std::vector<ScenarioSection> sections_with_prefix(const std::string& prefix) const {
    std::vector<ScenarioSection> out;
    for (const auto& s : sections_)
      if (s.name().rfind(prefix + ":", 0) == 0) out.push_back(s);
    return out;
  }

  const ScenarioSection& meta() const { return section("scenario"); }

  std::string kind() const { return meta().string("kind"); }

  std::string id() const {
    const auto& m = meta();
    if (m.has("id")) return m.string("id");
    return path_.empty() ? std::string("scenario") : path_.stem().string();
  }

  std::string description() const { return meta().string("description", ""); }

 private:
  std::vector<ScenarioSection> sections_;
  std::filesystem::path path_;
};

}  // namespace affgeo
