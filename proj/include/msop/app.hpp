#pragma once

// Configuration loading, subcommand dispatch and CSV/JSON reporting.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "msop/msop.hpp"

namespace msop::app {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kConfigFailure = 1, kMorseSmaleFailure = 2, kNumericalFailure = 3 };

/// Raised when the map fails the Morse-Smale checks a subcommand relies on.
class MorseSmaleError : public Error {
 public:
  using Error::Error;
};

/// Command-line values that replace the corresponding config entries.
struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> s;
  std::optional<std::string> x;
  std::optional<std::string> xi;
  std::optional<std::string> n_range;
  std::optional<std::string> N;
  std::optional<std::string> convention;
  std::optional<std::string> coeffs;
};

struct AnalysisConfig {
  std::string surface = "torus";
  json diffeo;
  std::optional<std::map<int, std::string>> operator_terms;
  int operator_order = 0;
  std::optional<std::string> coefficients;
  std::vector<double> s{0.0};
  SurfacePoint x{0, {0.3, 0.2}};
  Vec2 xi{0.6, 0.8};
  int n_min = -200;
  int n_max = 200;
  std::vector<int> N{256, 512, 1024};
  int sample_count = 8;
  std::uint64_t seed = 0;
  WeightConvention convention = WeightConvention::t1_pinned;
  int grid_n = 16;
  int max_period = 6;
  double tol = 1e-8;
  std::string out = ".";
};

// ---------------------------------------------------------------------------
// Scalar parsing

namespace detail {

inline double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse number '" + text + "'");
  }
}

inline long long parse_integer(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse integer '" + text + "'");
  }
}

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t next = text.find(sep, pos);
    out.push_back(text.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace detail

/// "a:b:h" (inclusive range, values a + i h) or a comma-separated list.
inline std::vector<double> parse_s_values(const std::string& text) {
  if (text.find(':') != std::string::npos) {
    const auto parts = detail::split(text, ':');
    if (parts.size() != 3) throw ConfigError("s range must be 'start:stop:step'");
    const double a = detail::parse_double(parts[0], "s range");
    const double b = detail::parse_double(parts[1], "s range");
    const double h = detail::parse_double(parts[2], "s range");
    if (!(h > 0.0) || b < a) throw ConfigError("s range needs step > 0 and stop >= start");
    const auto count = static_cast<long long>(std::floor((b - a) / h + 1e-9)) + 1;
    if (count > 100000) throw ConfigError("s range has too many points");
    std::vector<double> out;
    for (long long i = 0; i < count; ++i) out.push_back(a + static_cast<double>(i) * h);
    return out;
  }
  std::vector<double> out;
  for (const auto& tok : detail::split(text, ',')) out.push_back(detail::parse_double(tok, "s list"));
  return out;
}

inline std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (const auto& tok : detail::split(text, ',')) {
    out.push_back(static_cast<int>(detail::parse_integer(tok, what)));
  }
  return out;
}

/// "x1,x2" or "chart:x1,x2".
inline SurfacePoint parse_point(const std::string& text) {
  int chart = 0;
  std::string rest = text;
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    chart = static_cast<int>(detail::parse_integer(text.substr(0, colon), "--x chart"));
    rest = text.substr(colon + 1);
  }
  const auto parts = detail::split(rest, ',');
  if (parts.size() != 2) throw ConfigError("point needs two coordinates");
  return {chart, {detail::parse_double(parts[0], "--x"), detail::parse_double(parts[1], "--x")}};
}

inline Vec2 parse_vec2(const std::string& text, const std::string& what) {
  const auto parts = detail::split(text, ',');
  if (parts.size() != 2) throw ConfigError(what + " needs two components");
  return {detail::parse_double(parts[0], what), detail::parse_double(parts[1], what)};
}

inline std::pair<int, int> parse_n_range(const std::string& text) {
  const auto parts = detail::split(text, ':');
  if (parts.size() != 2) throw ConfigError("n range must be 'n_min:n_max'");
  return {static_cast<int>(detail::parse_integer(parts[0], "n range")),
          static_cast<int>(detail::parse_integer(parts[1], "n range"))};
}

// ---------------------------------------------------------------------------
// Config file

namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

inline double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + " must be a number");
  return v.get<double>();
}

inline long long integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
  return v.get<long long>();
}

inline std::string string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + " must be a string");
  return v.get<std::string>();
}

inline Vec2 pair(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) throw ConfigError(where + " must be an array of two numbers");
  return {number(v[0], where), number(v[1], where)};
}

inline void check_diffeo(const json& d, const std::string& surface) {
  if (!d.is_object() || !d.contains("type")) throw ConfigError("diffeo needs a type");
  const std::string type = string(d["type"], "diffeo.type");
  if (type == "torus_sine") {
    check_keys(d, {"type", "a", "b"}, "diffeo");
    number(d.at("a"), "diffeo.a");
    number(d.at("b"), "diffeo.b");
    if (surface != "torus") throw ConfigError("torus_sine needs surface torus");
  } else if (type == "sphere_gradient_flow") {
    check_keys(d, {"type", "f", "step", "time"}, "diffeo");
    string(d.at("f"), "diffeo.f");
    if (d.contains("step")) number(d["step"], "diffeo.step");
    if (d.contains("time")) number(d["time"], "diffeo.time");
    if (surface != "sphere") throw ConfigError("sphere_gradient_flow needs surface sphere");
  } else if (type == "closed_form") {
    check_keys(d, {"type", "map", "inverse", "jacobian"}, "diffeo");
    if (surface != "torus") throw ConfigError("closed_form maps are supported on the torus only");
    auto strings = [](const json& v, std::size_t n, const std::string& where) {
      if (!v.is_array() || v.size() != n) throw ConfigError(where + " must be an array of " + std::to_string(n) + " strings");
      for (const auto& e : v) string(e, where);
    };
    strings(d.at("map"), 2, "diffeo.map");
    if (d.contains("inverse")) strings(d["inverse"], 2, "diffeo.inverse");
    if (d.contains("jacobian")) strings(d["jacobian"], 4, "diffeo.jacobian");
  } else {
    throw ConfigError("unknown diffeo type '" + type + "'");
  }
}

}  // namespace detail

inline AnalysisConfig parse_config(const json& root, const Overrides& ov = {}) {
  using namespace detail;
  AnalysisConfig cfg;
  try {
    check_keys(root, {"surface", "diffeo", "operator", "coefficients", "analysis"}, "config");
    if (!root.contains("surface")) throw ConfigError("config needs 'surface'");
    check_keys(root["surface"], {"type"}, "surface");
    cfg.surface = string(root["surface"].at("type"), "surface.type");
    if (cfg.surface != "torus" && cfg.surface != "sphere") throw ConfigError("surface.type must be torus or sphere");
    if (!root.contains("diffeo")) throw ConfigError("config needs 'diffeo'");
    check_diffeo(root["diffeo"], cfg.surface);
    cfg.diffeo = root["diffeo"];
    if (root.contains("operator")) {
      const json& op = root["operator"];
      check_keys(op, {"order", "terms"}, "operator");
      if (op.contains("order")) cfg.operator_order = static_cast<int>(integer(op["order"], "operator.order"));
      if (!op.contains("terms") || !op["terms"].is_object()) {
        throw ConfigError("operator.terms must be an object mapping k to an expression");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  try {
    if (root.contains("operator")) {
      std::map<int, std::string> terms;
      for (const auto& [key, value] : root["operator"].at("terms").items()) {
        const int k = static_cast<int>(parse_integer(key, "operator.terms key"));
        terms[k] = string(value, "operator.terms[" + key + "]");
      }
      if (terms.empty()) throw ConfigError("operator.terms is empty");
      cfg.operator_terms = terms;
    }
    if (root.contains("coefficients")) cfg.coefficients = string(root["coefficients"], "coefficients");
    if (root.contains("analysis")) {
      const json& a = root["analysis"];
      check_keys(a, {"s", "x", "chart", "xi", "n_range", "N", "sample_count", "seed", "convention", "grid_n",
                     "max_period", "tol"},
                 "analysis");
      if (a.contains("s")) {
        const json& s = a["s"];
        if (s.is_string()) {
          cfg.s = parse_s_values(s.get<std::string>());
        } else if (s.is_number()) {
          cfg.s = {s.get<double>()};
        } else if (s.is_array()) {
          cfg.s.clear();
          for (const auto& v : s) cfg.s.push_back(number(v, "analysis.s"));
        } else {
          throw ConfigError("analysis.s must be a number, array or 'start:stop:step'");
        }
      }
      if (a.contains("x")) cfg.x.coords = pair(a["x"], "analysis.x");
      if (a.contains("chart")) cfg.x.chart = static_cast<int>(integer(a["chart"], "analysis.chart"));
      if (a.contains("xi")) cfg.xi = pair(a["xi"], "analysis.xi");
      if (a.contains("n_range")) {
        const json& r = a["n_range"];
        if (!r.is_array() || r.size() != 2) throw ConfigError("analysis.n_range must be [n_min, n_max]");
        cfg.n_min = static_cast<int>(integer(r[0], "analysis.n_range"));
        cfg.n_max = static_cast<int>(integer(r[1], "analysis.n_range"));
      }
      if (a.contains("N")) {
        cfg.N.clear();
        if (!a["N"].is_array()) throw ConfigError("analysis.N must be an array of integers");
        for (const auto& v : a["N"]) cfg.N.push_back(static_cast<int>(integer(v, "analysis.N")));
      }
      if (a.contains("sample_count")) cfg.sample_count = static_cast<int>(integer(a["sample_count"], "analysis.sample_count"));
      if (a.contains("seed")) {
        const long long seed = integer(a["seed"], "analysis.seed");
        if (seed < 0) throw ConfigError("analysis.seed must be non-negative");
        cfg.seed = static_cast<std::uint64_t>(seed);
      }
      if (a.contains("convention")) cfg.convention = parse_convention(string(a["convention"], "analysis.convention"));
      if (a.contains("grid_n")) cfg.grid_n = static_cast<int>(integer(a["grid_n"], "analysis.grid_n"));
      if (a.contains("max_period")) cfg.max_period = static_cast<int>(integer(a["max_period"], "analysis.max_period"));
      if (a.contains("tol")) cfg.tol = number(a["tol"], "analysis.tol");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (ov.out) cfg.out = *ov.out;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.s) cfg.s = parse_s_values(*ov.s);
  if (ov.x) cfg.x = parse_point(*ov.x);
  if (ov.xi) cfg.xi = parse_vec2(*ov.xi, "--xi");
  if (ov.n_range) std::tie(cfg.n_min, cfg.n_max) = parse_n_range(*ov.n_range);
  if (ov.N) cfg.N = parse_int_list(*ov.N, "--N");
  if (ov.convention) cfg.convention = parse_convention(*ov.convention);
  if (ov.coeffs) cfg.coefficients = *ov.coeffs;

  if (cfg.s.empty()) throw ConfigError("analysis.s is empty");
  if (cfg.N.empty()) throw ConfigError("analysis.N is empty");
  for (int n : cfg.N) {
    if (n < 1 || n > 4096) throw ConfigError("analysis.N entries must lie in [1, 4096]");
  }
  if (cfg.n_min > 0 || cfg.n_max < 0) throw ConfigError("analysis.n_range must contain 0");
  if (cfg.n_min < -10000 || cfg.n_max > 10000) throw ConfigError("analysis.n_range limited to [-10000, 10000]");
  if (cfg.sample_count < 1) throw ConfigError("analysis.sample_count must be >= 1");
  if (cfg.grid_n < 8) throw ConfigError("analysis.grid_n must be >= 8");
  if (cfg.max_period < 2) throw ConfigError("analysis.max_period must be >= 2");
  if (!(cfg.tol > 0.0)) throw ConfigError("analysis.tol must be positive");
  const int charts = cfg.surface == "torus" ? 1 : 2;
  if (cfg.x.chart < 0 || cfg.x.chart >= charts) throw ConfigError("analysis.chart out of range");
  if (cfg.operator_order != 0) throw ConfigError("operator.order must be 0; pre-compose with an order reduction");
  return cfg;
}

inline AnalysisConfig load_config(const std::string& path, const Overrides& ov = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(root, ov);
}

inline std::shared_ptr<DiffeoModel> build_diffeo(const AnalysisConfig& cfg) {
  const json& d = cfg.diffeo;
  const std::string type = d.at("type").get<std::string>();
  try {
    if (type == "torus_sine") return make_torus_sine(d.at("a").get<double>(), d.at("b").get<double>());
    if (type == "sphere_gradient_flow") {
      return make_sphere_gradient_flow(d.at("f").get<std::string>(), d.value("step", 1e-3), d.value("time", 1.0));
    }
    std::optional<std::array<std::string, 2>> inverse;
    std::optional<std::array<std::string, 4>> jacobian;
    if (d.contains("inverse")) inverse = std::array<std::string, 2>{d["inverse"][0], d["inverse"][1]};
    if (d.contains("jacobian")) {
      jacobian = std::array<std::string, 4>{d["jacobian"][0], d["jacobian"][1], d["jacobian"][2], d["jacobian"][3]};
    }
    return make_torus_closed_form({d["map"][0], d["map"][1]}, inverse, jacobian);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("diffeo expression: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const NumericalError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Output helpers

/// Shortest round-trip decimal for finite values; "inf", "-inf" otherwise.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// exp(log_w) as a decimal string, switching to mantissa/exponent text when
/// the value leaves the double range.
inline std::string format_weight(double log_w) {
  if (std::abs(log_w) < 700.0) return format_number(std::exp(log_w));
  const double l10 = log_w / std::numbers::ln10;
  const double e = std::floor(l10);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15fe%+.0f", std::pow(10.0, l10 - e), e);
  return buf;
}

inline json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

inline json json_point(const SurfacePoint& p) {
  return json{{"chart", p.chart}, {"coords", {p.coords.x, p.coords.y}}};
}

inline json json_intervals(const SIntervalSet& set) {
  json arr = json::array();
  for (const auto& iv : set.intervals()) arr.push_back({json_number(iv.lo), json_number(iv.hi)});
  return arr;
}

inline json json_fixed_point(std::size_t index, const FixedPointRecord& r) {
  return json{{"index", index},
              {"point", json_point(r.point)},
              {"type", to_string(r.type)},
              {"dg", {r.dg.a, r.dg.b, r.dg.c, r.dg.d}},
              {"real_eigenvalues", r.real_eigenvalues},
              {"alpha", {r.alpha1, r.alpha2}},
              {"lambda_min", r.lambda_min},
              {"lambda_max", r.lambda_max},
              {"det_codifferential", r.det_codifferential},
              {"direction1", {r.direction1.x, r.direction1.y}},
              {"direction2", {r.direction2.x, r.direction2.y}},
              {"violations", r.violations}};
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class OutputDir {
 public:
  explicit OutputDir(const std::string& path) : root_(path) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + path + "': " + ec.message());
  }

  void write(const std::string& name, const std::string& content) const {
    const auto path = root_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
  }

  void write_json(const std::string& name, const json& j) const { write(name, j.dump(2) + "\n"); }

 private:
  std::filesystem::path root_;
};

// ---------------------------------------------------------------------------
// Subcommands

inline FixedPointSet fixed_points_for(const DiffeoModel& g, const AnalysisConfig& cfg) {
  return find_fixed_points(g, cfg.grid_n, cfg.tol);
}

inline FixedPointSet require_morse_smale(const DiffeoModel& g, const AnalysisConfig& cfg) {
  FixedPointSet fs = fixed_points_for(g, cfg);
  if (!fs.satisfies_definition()) {
    throw MorseSmaleError("map fails the Morse-Smale fixed-point conditions; run 'validate' for details");
  }
  return fs;
}

inline int cmd_validate(const AnalysisConfig& cfg, const OutputDir& out, std::ostream& log) {
  const auto g = build_diffeo(cfg);
  const FixedPointSet fs = fixed_points_for(*g, cfg);
  const PeriodicScanReport scan = scan_periodic(*g, fs, cfg.max_period, cfg.grid_n);
  json fps = json::array();
  for (std::size_t i = 0; i < fs.points.size(); ++i) fps.push_back(json_fixed_point(i, fs.points[i]));
  json violations = json::array();
  for (const auto& v : scan.violations) violations.push_back({{"period", v.period}, {"point", json_point(v.point)}});
  const bool valid = fs.satisfies_definition() && scan.clean();
  json report{{"diffeo", g->name()},
              {"fixed_points", fps},
              {"checks",
               {{"fixed_set_finite", fs.appears_finite},
                {"fixed_points_found", !fs.points.empty()},
                {"eigenvalues_real_positive_distinct_not_one",
                 std::all_of(fs.points.begin(), fs.points.end(), [](const auto& r) { return r.satisfies_definition(); })},
                {"no_periodic_points", scan.violations.empty()}}},
              {"seeds", fs.seeds},
              {"converged_seeds", fs.converged_seeds},
              {"periodic_scan", {{"max_period", scan.max_period}, {"violations", violations}, {"notes", scan.notes}}},
              {"valid", valid}};
  out.write_json("validate.json", report);
  log << "validate: " << fs.points.size() << " fixed points, " << scan.violations.size()
      << " periodic violations up to period " << scan.max_period << ", " << (valid ? "valid" : "INVALID") << "\n";
  return valid ? kOk : kMorseSmaleFailure;
}

inline int cmd_fixed_points(const AnalysisConfig& cfg, const OutputDir& out, std::ostream& log) {
  const auto g = build_diffeo(cfg);
  const FixedPointSet fs = fixed_points_for(*g, cfg);
  std::ostringstream csv;
  csv << "index,chart,x1,x2,type,alpha1,alpha2,lambda_min,lambda_max,det_codifferential,definition_ok\n";
  json fps = json::array();
  for (std::size_t i = 0; i < fs.points.size(); ++i) {
    const auto& r = fs.points[i];
    csv << i << ',' << r.point.chart << ',' << format_number(r.point.coords.x) << ','
        << format_number(r.point.coords.y) << ',' << to_string(r.type) << ',' << format_number(r.alpha1) << ','
        << format_number(r.alpha2) << ',' << format_number(r.lambda_min) << ',' << format_number(r.lambda_max)
        << ',' << format_number(r.det_codifferential) << ',' << (r.satisfies_definition() ? 1 : 0) << "\n";
    fps.push_back(json_fixed_point(i, r));
  }
  out.write("fixed_points.csv", csv.str());
  out.write_json("fixed_points.json", json{{"diffeo", g->name()},
                                           {"fixed_points", fps},
                                           {"appears_finite", fs.appears_finite},
                                           {"satisfies_definition", fs.satisfies_definition()}});
  log << "fixed-points: " << fs.points.size() << " found\n";
  return kOk;
}

inline std::string s_tag(double s) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", s);
  return buf;
}

inline int cmd_weights(const AnalysisConfig& cfg, const OutputDir& out, std::ostream& log) {
  const auto g = build_diffeo(cfg);
  const FixedPointSet fs = require_morse_smale(*g, cfg);
  const Surface& surf = g->surface();
  const SurfacePoint x = surf.canonicalize(cfg.x);
  const OrbitLimit lim = limit_points(*g, fs, x);
  const auto& fp_plus = fs.points[lim.plus];
  const auto& fp_minus = fs.points[lim.minus];
  const Orbit orbit(*g, x, cfg.n_min, cfg.n_max);
  const WeightProfile prof(surf, orbit, make_covector(x, cfg.xi), cfg.convention);

  json series = json::array();
  for (double s : cfg.s) {
    const WeightSeries ws = series_from_profile(prof, x, cfg.xi, s, cfg.convention);
    std::ostringstream csv;
    csv << "n,W,logW\n";
    for (int n = ws.n_min; n <= ws.n_max; ++n) {
      const double lw = ws.log_weight(n);
      csv << n << ',' << format_weight(lw) << ',' << format_number(lw) << "\n";
    }
    const std::string file = "weights_s" + s_tag(s) + ".csv";
    out.write(file, csv.str());
    const PredictedRates pr = predicted_rates(fp_plus, fp_minus, s);
    // Both fits are slopes of log W in n; W(n) ~ theta_minus^n as n -> -inf.
    auto branch = [](double fitted, double generic, double exceptional) {
      return std::abs(fitted - generic) <= std::abs(fitted - exceptional) ? "generic" : "exceptional";
    };
    json entry{{"s", s}, {"file", file}};
    if (ws.n_max >= kRateWindow) {
      entry["plus"] = {{"fixed_point", lim.plus},
                       {"fitted_log_rate", ws.plus.log_rate},
                       {"residual_rms", ws.plus.residual_rms},
                       {"reliable", ws.plus.reliable},
                       {"predicted_log_rate_generic", std::log(pr.plus_generic)},
                       {"predicted_log_rate_exceptional", std::log(pr.plus_exceptional)},
                       {"branch", branch(ws.plus.log_rate, std::log(pr.plus_generic), std::log(pr.plus_exceptional))}};
    }
    if (ws.n_min <= -kRateWindow) {
      entry["minus"] = {{"fixed_point", lim.minus},
                        {"fitted_log_rate", ws.minus.log_rate},
                        {"backward_log_growth", -ws.minus.log_rate},
                        {"residual_rms", ws.minus.residual_rms},
                        {"reliable", ws.minus.reliable},
                        {"predicted_log_rate_generic", std::log(pr.minus_generic)},
                        {"predicted_log_rate_exceptional", std::log(pr.minus_exceptional)},
                        {"branch", branch(ws.minus.log_rate, std::log(pr.minus_generic), std::log(pr.minus_exceptional))}};
    }
    series.push_back(entry);
  }
  out.write_json("weights.json", json{{"x", json_point(x)},
                                      {"xi", {cfg.xi.x, cfg.xi.y}},
                                      {"convention", to_string(cfg.convention)},
                                      {"n_range", {cfg.n_min, cfg.n_max}},
                                      {"rate_window", kRateWindow},
                                      {"series", series}});
  log << "weights: " << cfg.s.size() << " series written\n";
  return kOk;
}

inline int cmd_annulus(const AnalysisConfig& cfg, const OutputDir& out, std::ostream& log) {
  const auto g = build_diffeo(cfg);
  const FixedPointSet fs = require_morse_smale(*g, cfg);
  std::ostringstream csv;
  csv << "s,r,R,log_r,log_R,inner_fixed_point,inner_eigen,outer_fixed_point,outer_eigen\n";
  json rows = json::array();
  for (double s : cfg.s) {
    const AnnulusCriterion a = annulus(fs.points, s);
    csv << format_number(s) << ',' << format_number(a.r) << ',' << format_number(a.R) << ','
        << format_number(std::log(a.r)) << ',' << format_number(std::log(a.R)) << ',' << a.inner.fixed_point << ','
        << a.inner.eigen_index << ',' << a.outer.fixed_point << ',' << a.outer.eigen_index << "\n";
    rows.push_back({{"s", s}, {"r", json_number(a.r)}, {"R", json_number(a.R)}});
  }
  json lines = json::array();
  for (const auto& l : log_radius_lines(fs.points)) {
    lines.push_back({{"fixed_point", l.fixed_point},
                     {"eigen_index", l.eigen_index},
                     {"intercept", l.intercept},
                     {"slope", l.slope}});
  }
  out.write("annulus.csv", csv.str());
  out.write_json("annulus.json", json{{"log_radius_lines", lines}, {"annulus", rows}});
  log << "annulus: " << cfg.s.size() << " values of s\n";
  return kOk;
}

inline LaurentPolynomial polynomial_for(const AnalysisConfig& cfg) {
  if (cfg.coefficients) return parse_coefficients(*cfg.coefficients);
  if (cfg.operator_terms) {
    const OperatorSpec op(*cfg.operator_terms, cfg.operator_order);
    if (auto p = op.constant_polynomial()) return *p;
    throw ConfigError("const-coef needs constant operator terms or a coefficients string");
  }
  throw ConfigError("const-coef needs 'coefficients' (or --coeffs) or a constant operator");
}

inline int cmd_const_coef(const AnalysisConfig& cfg, const OutputDir& out, std::ostream& log) {
  const auto g = build_diffeo(cfg);
  const FixedPointSet fs = require_morse_smale(*g, cfg);
  const LaurentPolynomial p = polynomial_for(cfg);
  const std::vector<Complex> rts = p.is_zero() ? std::vector<Complex>{} : roots(p);
  json jroots = json::array();
  for (const auto& z : rts) jroots.push_back({{"re", z.real()}, {"im", z.imag()}, {"modulus", std::abs(z)}});
  json coeffs = json::array();
  for (int k = p.k_min(); !p.is_zero() && k <= p.k_max(); ++k) {
    const Complex c = p.coefficient(k);
    coeffs.push_back({{"k", k}, {"re", c.real()}, {"im", c.imag()}});
  }
  json at_s = json::array();
  for (double s : cfg.s) {
    const AnnulusCriterion a = annulus(fs.points, s);
    const InvertibilityDecision d = is_invertible_constcoef(p, rts, fs.points, s);
    json row{{"s", s}, {"r", json_number(a.r)}, {"R", json_number(a.R)}, {"invertible", d.invertible}};
    if (d.witness) row["witness"] = {{"re", d.witness->real()}, {"im", d.witness->imag()}};
    at_s.push_back(row);
  }
  const SIntervalSet set = invertible_s_set(p, rts, fs.points);
  out.write_json("const_coef.json", json{{"coefficients", coeffs},
                                         {"roots", jroots},
                                         {"annulus", at_s},
                                         {"intervals", json_intervals(set)},
                                         {"single_interval", set.size() <= 1},
                                         {"multi_interval_flag", set.size() > 1}});
  log << "const-coef: " << rts.size() << " roots, invertible set with " << set.size() << " interval(s)\n";
  return kOk;
}

inline int cmd_probe(const AnalysisConfig& cfg, const OutputDir& out, std::ostream& log) {
  if (!cfg.operator_terms) throw ConfigError("probe needs an 'operator' section");
  const OperatorSpec op(*cfg.operator_terms, cfg.operator_order);
  try {
    op.check_homogeneity();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("operator symbol cannot be evaluated: ") + e.what());
  }
  const auto g = build_diffeo(cfg);
  const FixedPointSet fs = require_morse_smale(*g, cfg);
  ProbeOptions opt;
  opt.s_grid = cfg.s;
  opt.sample_count = cfg.sample_count;
  opt.sizes = cfg.N;
  opt.seed = cfg.seed;
  opt.convention = cfg.convention;
  const ProbeResult res = ellipticity_probe(op, *g, fs, opt);

  std::ostringstream csv;
  csv << "s,sample_id,x1,x2,xi1,xi2,N,sigma_min,limit_plus,limit_minus,verdict\n";
  for (const auto& cell : res.cells) {
    const auto& smp = res.samples[cell.sample];
    for (std::size_t j = 0; j < cell.result.sizes.size(); ++j) {
      csv << format_number(cell.s) << ',' << smp.id << ',' << format_number(smp.x.coords.x) << ','
          << format_number(smp.x.coords.y) << ',' << format_number(smp.xi.x) << ',' << format_number(smp.xi.y)
          << ',' << cell.result.sizes[j] << ',' << format_number(cell.result.sigma_min[j].value) << ','
          << (cell.result.limit_plus.pass() ? "pass" : "fail") << ','
          << (cell.result.limit_minus.pass() ? "pass" : "fail") << ',' << to_string(cell.result.verdict) << "\n";
    }
  }
  out.write("probe.csv", csv.str());

  json samples = json::array();
  for (const auto& smp : res.samples) {
    samples.push_back({{"id", smp.id}, {"kind", smp.kind}, {"point", json_point(smp.x)}, {"xi", {smp.xi.x, smp.xi.y}}});
  }
  json per_s = json::array();
  for (std::size_t i = 0; i < cfg.s.size(); ++i) per_s.push_back({{"s", cfg.s[i]}, {"verdict", to_string(res.per_s[i])}});
  json findings = json::array();
  for (const auto& f : res.findings) {
    json table = json::array();
    for (std::size_t c : f.cells) {
      const auto& cell = res.cells[c];
      for (std::size_t j = 0; j < cell.result.sizes.size(); ++j) {
        table.push_back({{"s", cell.s},
                         {"sample_id", cell.sample},
                         {"N", cell.result.sizes[j]},
                         {"sigma_min", cell.result.sigma_min[j].value},
                         {"verdict", to_string(cell.result.verdict)}});
      }
    }
    findings.push_back({{"kind", f.kind},
                        {"s_left", f.s_left},
                        {"s_middle", f.s_middle},
                        {"s_right", f.s_right},
                        {"sigma_min_table", table}});
  }
  out.write_json("probe.json", json{{"generated_at", utc_timestamp()},
                                    {"seed", cfg.seed},
                                    {"convention", to_string(cfg.convention)},
                                    {"N", cfg.N},
                                    {"samples", samples},
                                    {"skipped_samples", res.skipped},
                                    {"per_s", per_s},
                                    {"estimated_elliptic_set", json_intervals(res.estimate)},
                                    {"single_interval", res.single_interval},
                                    {"findings", findings}});
  log << "probe: " << res.samples.size() << " samples x " << cfg.s.size() << " s values, estimated set with "
      << res.estimate.size() << " interval(s), " << res.findings.size() << " finding(s)\n";
  for (const auto& f : res.findings) {
    log << "FINDING " << f.kind << ": elliptic at s=" << f.s_left << " and s=" << f.s_right
        << " but not at s=" << f.s_middle << " (sigma_min table in probe.json)\n";
  }
  return kOk;
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"validate", "fixed-points", "weights", "annulus", "const-coef", "probe"};
  return names;
}

/// Runs one subcommand and maps failures onto exit codes.
inline int run(const std::string& subcommand, const std::string& config_path, const Overrides& ov,
               std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  try {
    const AnalysisConfig cfg = load_config(config_path, ov);
    const OutputDir out(cfg.out);
    if (subcommand == "validate") return cmd_validate(cfg, out, log);
    if (subcommand == "fixed-points") return cmd_fixed_points(cfg, out, log);
    if (subcommand == "weights") return cmd_weights(cfg, out, log);
    if (subcommand == "annulus") return cmd_annulus(cfg, out, log);
    if (subcommand == "const-coef") return cmd_const_coef(cfg, out, log);
    if (subcommand == "probe") return cmd_probe(cfg, out, log);
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const ParseError& e) {
    err << "config error: expression " << e.what() << "\n";
    return kConfigFailure;
  } catch (const MorseSmaleError& e) {
    err << "morse-smale failure: " << e.what() << "\n";
    return kMorseSmaleFailure;
  } catch (const NumericalError& e) {
    err << "numerical failure [" << e.module() << "]: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }
}

}  // namespace msop::app
