#ifndef DOA_RMT_CONFIG_HPP
#define DOA_RMT_CONFIG_HPP

// JSON experiment configuration. Scenario fields may be numbers or small
// arithmetic expressions over N, n and pi, e.g. "2*N", "N/3", "N-n".

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "doa_rmt/errors.hpp"
#include "doa_rmt/sigmodel.hpp"

namespace doa {

using json = nlohmann::json;

namespace config {

/// Recursive-descent evaluator for + - * / ( ) with named variables.
class Expression {
 public:
  Expression(std::string text, const std::map<std::string, double>& vars) : s_(std::move(text)), vars_(vars) {}

  double evaluate() {
    pos_ = 0;
    const double v = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("expression \"" + s_ + "\": " + why);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  double sum() {
    double v = product();
    while (true) {
      if (eat('+')) v += product();
      else if (eat('-')) v -= product();
      else return v;
    }
  }
  double product() {
    double v = unary();
    while (true) {
      if (eat('*')) v *= unary();
      else if (eat('/')) {
        const double d = unary();
        if (d == 0.0) fail("division by zero");
        v /= d;
      } else return v;
    }
  }
  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return atom();
  }
  double atom() {
    skip();
    if (eat('(')) {
      const double v = sum();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos_ += used;
      return v;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (name == "pi") return std::numbers::pi;
      const auto it = vars_.find(name);
      if (it == vars_.end()) fail("unknown name '" + name + "'");
      return it->second;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string s_;
  const std::map<std::string, double>& vars_;
  std::size_t pos_ = 0;
};

inline double eval_number(const json& v, const std::map<std::string, double>& vars, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return Expression(v.get<std::string>(), vars).evaluate();
  throw ConfigError("'" + key + "' must be a number or expression string");
}

/// Integer-valued fields truncate toward zero, so "2*N/3" at N = 80 gives 53.
inline std::size_t eval_count(const json& v, const std::map<std::string, double>& vars, const std::string& key) {
  const double x = eval_number(v, vars, key);
  if (!std::isfinite(x) || x < 0.0) throw ConfigError("'" + key + "' must be a non-negative count");
  return static_cast<std::size_t>(std::floor(x + 1e-9));
}

}  // namespace config

enum class SweepAxis { snr_db, N, subarray_n };

inline std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::snr_db: return "snr_db";
    case SweepAxis::N: return "N";
    case SweepAxis::subarray_n: return "subarray_n";
  }
  return "";
}

struct Sweep {
  SweepAxis axis = SweepAxis::snr_db;
  std::vector<double> values;
};

struct SweepPoint {
  SweepAxis axis;
  double value;
};

struct ExperimentConfig {
  json scenario;  // unresolved scenario template
  std::vector<std::string> methods;
  std::size_t trials = 1;
  std::uint64_t master_seed = 0;
  std::optional<Sweep> sweep;
  std::optional<double> c_override;
  std::size_t grid_size = 0;

  /// Concrete scenario, optionally at one sweep point.
  [[nodiscard]] UlaScenario resolve(std::optional<SweepPoint> point = {}) const;
  [[nodiscard]] double snr_db(std::optional<SweepPoint> point = {}) const {
    if (point && point->axis == SweepAxis::snr_db) return point->value;
    return scenario.contains("snr_scale_db") ? scenario.at("snr_scale_db").get<double>() : 0.0;
  }
};

namespace config {

inline cplx parse_complex(const json& v, const std::map<std::string, double>& vars) {
  if (v.is_array()) {
    if (v.size() != 2) throw ConfigError("P entries must be [re, im] pairs");
    return {eval_number(v[0], vars, "P"), eval_number(v[1], vars, "P")};
  }
  return {eval_number(v, vars, "P"), 0.0};
}

inline CMatrix parse_power(const json& p, std::size_t k, const std::map<std::string, double>& vars) {
  if (!p.is_array()) throw ConfigError("'P' must be an array");
  CMatrix m(k, k);
  const bool nested = p.size() == k && k > 1 && p[0].is_array() && p[0].size() == k;
  if (nested) {
    for (std::size_t i = 0; i < k; ++i) {
      if (!p[i].is_array() || p[i].size() != k) throw ConfigError("'P' rows must have K entries");
      for (std::size_t j = 0; j < k; ++j) m(i, j) = parse_complex(p[i][j], vars);
    }
    return m;
  }
  if (p.size() != k * k) throw ConfigError("'P' must hold K*K row-major entries");
  for (std::size_t i = 0; i < k * k; ++i) m(i / k, i % k) = parse_complex(p[i], vars);
  return m;
}

}  // namespace config

namespace config {

inline UlaScenario resolve_scenario(const ExperimentConfig& cfg, std::optional<SweepPoint> point) {
  const json& j = cfg.scenario;
  auto need = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
    return j.at(key);
  };
  std::map<std::string, double> vars;
  UlaScenario s;
  s.N = config::eval_count(need("N"), vars, "N");
  if (point && point->axis == SweepAxis::N) s.N = static_cast<std::size_t>(std::llround(point->value));
  vars["N"] = static_cast<double>(s.N);
  s.T = config::eval_count(need("T"), vars, "T");
  s.K = config::eval_count(need("K"), vars, "K");

  if (j.contains("thetas_rad")) {
    for (const auto& t : j.at("thetas_rad")) s.thetas.push_back(config::eval_number(t, vars, "thetas_rad"));
  } else if (j.contains("thetas_spec")) {
    const auto& spec = j.at("thetas_spec");
    const std::string kind = spec.value("kind", "");
    if (kind != "closely_spaced") throw ConfigError("thetas_spec.kind must be \"closely_spaced\"");
    if (s.K != 2) throw ConfigError("closely_spaced angles need K = 2");
    const double t1 = config::eval_number(spec.at("theta1"), vars, "theta1");
    const double alpha = config::eval_number(spec.at("alpha"), vars, "alpha");
    s.thetas = {t1, t1 + alpha / static_cast<double>(s.N)};
  } else {
    throw ConfigError("missing 'thetas_rad' or 'thetas_spec'");
  }
  s.P = config::parse_power(need("P"), s.K, vars);

  const json sub = j.value("subarray", json::object());
  s.subarray.n = sub.contains("n") ? config::eval_count(sub.at("n"), vars, "subarray.n") : s.N - 1;
  if (point && point->axis == SweepAxis::subarray_n) s.subarray.n = static_cast<std::size_t>(std::llround(point->value));
  vars["n"] = static_cast<double>(s.subarray.n);
  s.subarray.delta = sub.contains("delta") ? config::eval_count(sub.at("delta"), vars, "subarray.delta") : 1;
  s.subarray.start = sub.contains("start") ? config::eval_count(sub.at("start"), vars, "subarray.start") : 1;

  s.snr_scale = std::pow(10.0, cfg.snr_db(point) / 10.0);
  const std::string mode = j.value("power_mode", "exact");
  if (mode == "exact") s.power_mode = PowerMode::exact;
  else if (mode == "iid") s.power_mode = PowerMode::iid;
  else throw ConfigError("power_mode must be \"exact\" or \"iid\"");

  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid scenario: ") + e.what());
  }
  return s;
}

}  // namespace config

inline UlaScenario ExperimentConfig::resolve(std::optional<SweepPoint> point) const {
  try {
    return config::resolve_scenario(*this, point);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
}

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m = {"esprit", "gesprit", "music", "gmusic"};
  return m;
}

inline ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  cfg.scenario = j;
  try {
    if (j.contains("methods")) {
      for (const auto& m : j.at("methods")) {
        const auto name = m.get<std::string>();
        if (std::find(known_methods().begin(), known_methods().end(), name) == known_methods().end())
          throw ConfigError("unknown method '" + name + "'");
        cfg.methods.push_back(name);
      }
    } else {
      cfg.methods = {"esprit", "gesprit"};
    }
    if (cfg.methods.empty()) throw ConfigError("'methods' must not be empty");
    if (j.contains("trials")) {
      const auto t = j.at("trials").get<long long>();
      if (t < 1) throw ConfigError("'trials' must be >= 1");
      cfg.trials = static_cast<std::size_t>(t);
    }
    cfg.master_seed = j.value("master_seed", std::uint64_t{0});
    if (j.contains("c_override")) cfg.c_override = j.at("c_override").get<double>();
    cfg.grid_size = j.value("grid_size", std::size_t{0});
    if (j.contains("sweep")) {
      const auto& sw = j.at("sweep");
      Sweep s;
      const std::string axis = sw.at("axis").get<std::string>();
      if (axis == "snr_db") s.axis = SweepAxis::snr_db;
      else if (axis == "N") s.axis = SweepAxis::N;
      else if (axis == "subarray_n") s.axis = SweepAxis::subarray_n;
      else throw ConfigError("sweep.axis must be snr_db, N or subarray_n");
      s.values = sw.at("values").get<std::vector<double>>();
      if (s.values.empty()) throw ConfigError("sweep.values must not be empty");
      cfg.sweep = s;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  // Fail early on an unresolvable scenario.
  (void)cfg.resolve();
  if (cfg.sweep)
    for (double v : cfg.sweep->values) (void)cfg.resolve(SweepPoint{cfg.sweep->axis, v});
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace doa

#endif  // DOA_RMT_CONFIG_HPP
