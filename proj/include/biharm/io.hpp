#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "biharm/box.hpp"
#include "biharm/error.hpp"
#include "biharm/model_config.hpp"

namespace biharm {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

namespace detail {

inline void exact_keys(const json& j, const std::set<std::string>& keys, const std::string& where) {
  require(j.is_object(), ErrorCode::InvalidConfig, where + " must be an object");
  for (const auto& k : keys)
    require(j.contains(k), ErrorCode::InvalidConfig, "missing key " + where + "." + k);
  for (auto it = j.begin(); it != j.end(); ++it)
    require(keys.count(it.key()) != 0, ErrorCode::InvalidConfig, "unknown key " + where + "." + it.key());
}

inline double number(const json& j, const std::string& key) {
  require(j.at(key).is_number(), ErrorCode::InvalidConfig, key + " must be a number");
  return j.at(key).get<double>();
}

inline int integer(const json& j, const std::string& key) {
  require(j.at(key).is_number_integer(), ErrorCode::InvalidConfig, key + " must be an integer");
  return j.at(key).get<int>();
}

/// Either a number (same value on every axis) or an array of N numbers.
inline std::vector<double> corner(const json& j, const std::string& key, int N) {
  const auto& v = j.at(key);
  if (v.is_number()) return std::vector<double>(static_cast<std::size_t>(N), v.get<double>());
  require(v.is_array() && v.size() == static_cast<std::size_t>(N), ErrorCode::InvalidConfig,
          key + " must be a number or an array of N numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    require(x.is_number(), ErrorCode::InvalidConfig, key + " entries must be numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace detail

/// Parses a problem instance.  Unknown or missing keys are InvalidConfig.
inline ProblemParams params_from_json(const json& j) {
  detail::exact_keys(j, {"N", "a0", "b0", "lambda", "well", "nonlinearity", "modes_per_dim", "quadrature_panels"},
                     "config");
  ProblemParams p;
  p.N = detail::integer(j, "N");
  require(p.N >= 1 && p.N <= 8, ErrorCode::InvalidConfig, "N must be in 1..8");
  p.a0 = detail::number(j, "a0");
  p.b0 = detail::number(j, "b0");
  p.lambda = detail::number(j, "lambda");
  p.modes_per_dim = detail::integer(j, "modes_per_dim");
  p.quadrature_panels = detail::integer(j, "quadrature_panels");

  const auto& w = j.at("well");
  detail::exact_keys(w, {"omega_min", "omega_max", "domain_min", "domain_max", "outside_value", "b_infty"}, "well");
  p.well.omega = Box(detail::corner(w, "omega_min", p.N), detail::corner(w, "omega_max", p.N));
  p.well.domain = Box(detail::corner(w, "domain_min", p.N), detail::corner(w, "domain_max", p.N));
  p.well.outside_value = detail::number(w, "outside_value");
  p.well.b_infty = detail::number(w, "b_infty");

  const auto& n = j.at("nonlinearity");
  detail::exact_keys(n, {"kind", "p", "l_infty"}, "nonlinearity");
  require(n.at("kind").is_string(), ErrorCode::InvalidConfig, "nonlinearity.kind must be a string");
  const auto kind = n.at("kind").get<std::string>();
  if (kind == "power") {
    p.nonlinearity = NonlinearitySpec::power(detail::number(n, "p"));
    p.nonlinearity.l_infty = detail::number(n, "l_infty");
  } else if (kind == "saturating") {
    p.nonlinearity = NonlinearitySpec::saturating(detail::number(n, "l_infty"));
    p.nonlinearity.p = detail::number(n, "p");
  } else if (kind == "zero") {
    p.nonlinearity = NonlinearitySpec::zero();
  } else {
    fail(ErrorCode::InvalidConfig, "nonlinearity.kind must be power, saturating or zero");
  }
  return p;
}

inline ProblemParams load_params(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::InvalidConfig, "cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed JSON: ") + e.what());
  }
  return params_from_json(j);
}

inline json params_to_json(const ProblemParams& p) {
  json j;
  j["N"] = p.N;
  j["a0"] = p.a0;
  j["b0"] = p.b0;
  j["lambda"] = p.lambda;
  j["well"] = {{"omega_min", p.well.omega.lo},    {"omega_max", p.well.omega.hi},
               {"domain_min", p.well.domain.lo},  {"domain_max", p.well.domain.hi},
               {"outside_value", p.well.outside_value}, {"b_infty", p.well.b_infty}};
  j["nonlinearity"] = {{"kind", to_string(p.nonlinearity.kind)},
                       {"p", p.nonlinearity.p},
                       {"l_infty", p.nonlinearity.l_infty}};
  j["modes_per_dim"] = p.modes_per_dim;
  j["quadrature_panels"] = p.quadrature_panels;
  return j;
}

/// CSV text built in memory; numbers use %.17g so reruns are byte-identical.
class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) { row_strings(header); }

  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  Csv& row(const std::vector<std::string>& cells) { return row_strings(cells); }

  const std::string& str() const { return text_; }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::InvalidConfig, "cannot write " + path.string());
    out << text_;
  }

 private:
  Csv& row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      if (cells[i].find_first_of(",\"\n") == std::string::npos) {
        text_ += cells[i];
      } else {
        text_ += '"';
        for (char c : cells[i]) text_ += c == '"' ? std::string("\"\"") : std::string(1, c);
        text_ += '"';
      }
    }
    text_ += '\n';
    return *this;
  }
  std::string text_;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Everything needed to rerun a command.
struct RunManifest {
  std::string command;
  std::string config_path;
  json config;
  std::uint64_t seed = 1;
  int threads = 1;
  json flags = json::object();
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
  json checks = json::object();
  int exit_code = 0;

  json to_json() const {
    return {{"command", command},   {"version", kVersion},   {"config_path", config_path},
            {"config", config},     {"seed", seed},          {"threads", threads},
            {"flags", flags},       {"started", started},    {"finished", finished},
            {"outputs", outputs},   {"checks", checks},      {"exit_code", exit_code}};
  }

  void write(const std::filesystem::path& dir) const {
    std::ofstream out(dir / "manifest.json");
    out << to_json().dump(2) << '\n';
  }
};

}  // namespace biharm
