#pragma once

// Run configuration: a versioned JSON document with one section per stage.
// Loading validates every field; unknown keys are rejected so that a
// parse/serialise round trip is lossless.

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nstrip/drift.hpp"
#include "nstrip/estimators.hpp"
#include "nstrip/geometry.hpp"
#include "nstrip/oracle.hpp"
#include "nstrip/sde.hpp"
#include "nstrip/surface.hpp"

namespace nstrip {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct DomainSpec {
  std::string family = "exp_decay";  // flat, exp_decay, power_decay, log_decay, custom
  int dim = 1;
  double lambda1 = -1.0;  // flat: lower level
  double lambda2 = 1.0;   // flat: upper level
  double rate = 1.0;
  double delta = 1.0;
  double smoothing = 0.5;
  std::string lower;  // custom
  std::string upper;
  ProbeGrid probes;
};

struct DriftSpec {
  std::string kind = "zero";  // zero, linear, radial_decay, expression
  std::vector<std::vector<double>> matrix;
  std::vector<double> offset;
  double strength = 1.0;
  std::vector<std::string> components;
  std::optional<double> K;
};

struct FunctionSpec {
  std::string kind = "cos";  // cos, constant, bump, tanh_exp, expression
  double k = 1.0;
  double value = 1.0;
  std::vector<double> center;
  double rho = 0.5;
  double amplitude = 1.0;
  std::string source;
  double shift = 0.0;
};

struct OracleSpec {
  double X = 8.0;
  int n_x = 128;
  int n_v = 32;
  double dt_max = 1e-3;
  double cfl = 0.9;
  double width_tol = 1e-3;
};

struct PairSpec {
  std::vector<double> x, y;
  double t = 0.5;
};

struct HarnessSpec {
  std::vector<double> t_grid = {0.5, 1.0, 2.0};
  std::vector<double> lambda_grid = {0.0, 0.5, 1.0};
  std::string weight = "sigma";  // sigma, indicator
  double level = 0.0;
  std::vector<std::vector<double>> points;
  std::vector<PairSpec> pairs;
  std::vector<FunctionSpec> functions;
  double grid_res = 0.02;
  double p = 2.0;
};

struct RunConfig {
  int schema = kSchemaVersion;
  DomainSpec domain;
  DriftSpec drift;
  SimConfig simulation;
  std::vector<double> start;
  EstimatorConfig estimator;
  std::optional<FunctionSpec> function;
  OracleSpec oracle;
  HarnessSpec harness;
  std::string output = "out";
};

namespace detail {

class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k);
  }
  const Json& raw(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }
  template <class T>
  void get(const std::string& k, T& out) {
    if (!has(k)) return;
    try {
      out = j_.at(k).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + "." + k + ": wrong type");
    }
  }
  const std::string& where() const { return where_; }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

inline FunctionSpec read_function(const Json& j, const std::string& where) {
  FunctionSpec f;
  Reader r(j, where);
  r.get("kind", f.kind);
  r.get("k", f.k);
  r.get("value", f.value);
  r.get("center", f.center);
  r.get("rho", f.rho);
  r.get("amplitude", f.amplitude);
  r.get("source", f.source);
  r.get("shift", f.shift);
  static const std::set<std::string> kinds = {"cos", "constant", "bump", "tanh_exp", "expression"};
  require(kinds.count(f.kind) > 0, where + ".kind: unknown test function '" + f.kind + "'");
  if (f.kind == "bump") require(f.rho > 0.0 && !f.center.empty(), where + ": bump needs center and rho > 0");
  if (f.kind == "expression") require(!f.source.empty(), where + ": expression needs a source");
  return f;
}

inline Json write_function(const FunctionSpec& f) {
  Json j;
  j["kind"] = f.kind;
  if (f.kind == "cos" || f.kind == "tanh_exp") j["k"] = f.k;
  if (f.kind == "constant") j["value"] = f.value;
  if (f.kind == "bump") {
    j["center"] = f.center;
    j["rho"] = f.rho;
    j["amplitude"] = f.amplitude;
  }
  if (f.kind == "expression") j["source"] = f.source;
  if (f.shift != 0.0) j["shift"] = f.shift;
  return j;
}

}  // namespace detail

inline RunConfig config_from_json(const Json& j) {
  using detail::require;
  RunConfig c;
  detail::Reader top(j, "config");
  require(top.has("schema"), "config: missing 'schema'");
  top.get("schema", c.schema);
  require(c.schema == kSchemaVersion, "config: unsupported schema " + std::to_string(c.schema));

  if (top.has("domain")) {
    auto& d = c.domain;
    detail::Reader r(top.raw("domain"), "domain");
    r.get("family", d.family);
    r.get("dim", d.dim);
    r.get("lambda1", d.lambda1);
    r.get("lambda2", d.lambda2);
    r.get("rate", d.rate);
    r.get("delta", d.delta);
    r.get("smoothing", d.smoothing);
    r.get("lower", d.lower);
    r.get("upper", d.upper);
    if (r.has("probes")) {
      detail::Reader p(r.raw("probes"), "domain.probes");
      p.get("radius", d.probes.radius);
      p.get("spacing", d.probes.spacing);
      p.get("y_levels", d.probes.y_levels);
      p.get("max_points", d.probes.max_points);
    }
    static const std::set<std::string> fam = {"flat", "exp_decay", "power_decay", "log_decay", "custom"};
    require(fam.count(d.family) > 0, "domain.family: unknown family '" + d.family + "'");
    require(d.dim >= 1 && d.dim + 1 <= kMaxAmbient, "domain.dim out of range");
    require(d.lambda1 < d.lambda2, "domain: lambda1 must be below lambda2");
    if (d.family != "flat" && d.family != "custom")
      require(d.lambda1 <= 0.0 && d.lambda2 >= 0.0, "domain: need lambda1 <= 0 <= lambda2");
    require(d.rate > 0.0 && d.delta > 0.0, "domain: rate and delta must be positive");
    if (d.family == "exp_decay") require(d.delta <= 1.0, "domain: exp_decay needs delta in (0, 1]");
    require(d.smoothing >= 0.0, "domain.smoothing must be non-negative");
    if (d.family == "custom") require(!d.lower.empty() && !d.upper.empty(), "domain: custom needs lower and upper");
    require(d.probes.radius > 0.0 && d.probes.spacing > 0.0 && d.probes.y_levels >= 2,
            "domain.probes: invalid grid");
  }

  if (top.has("drift")) {
    auto& z = c.drift;
    detail::Reader r(top.raw("drift"), "drift");
    r.get("kind", z.kind);
    r.get("matrix", z.matrix);
    r.get("offset", z.offset);
    r.get("strength", z.strength);
    r.get("components", z.components);
    if (r.has("K")) {
      double k = 0.0;
      r.get("K", k);
      z.K = k;
    }
    static const std::set<std::string> kinds = {"zero", "linear", "radial_decay", "expression"};
    require(kinds.count(z.kind) > 0, "drift.kind: unknown drift '" + z.kind + "'");
    const std::size_t n = static_cast<std::size_t>(c.domain.dim + 1);
    if (z.kind == "linear") {
      require(z.matrix.size() == n, "drift.matrix must be (d+1)x(d+1)");
      for (const auto& row : z.matrix) require(row.size() == n, "drift.matrix must be (d+1)x(d+1)");
      if (z.offset.empty()) z.offset.assign(n, 0.0);
      require(z.offset.size() == n, "drift.offset must have d+1 entries");
    }
    if (z.kind == "expression") require(z.components.size() == n, "drift.components must have d+1 entries");
  }

  if (top.has("simulation")) {
    auto& s = c.simulation;
    detail::Reader r(top.raw("simulation"), "simulation");
    r.get("t", s.t);
    r.get("dt", s.dt);
    r.get("n_paths", s.n_paths);
    r.get("seed", s.seed);
    r.get("threads", s.threads);
    r.get("bridge", s.bridge);
    r.get("start", c.start);
    if (r.has("scheme")) {
      std::string name;
      r.get("scheme", name);
      require(name == "reflection" || name == "projection", "simulation.scheme: unknown scheme");
      s.scheme = name == "reflection" ? Scheme::Reflection : Scheme::Projection;
    }
    s.validate();
  }
  if (c.start.empty()) {
    c.start.assign(static_cast<std::size_t>(c.domain.dim + 1), 0.0);
    if (c.domain.family == "flat") c.start.back() = 0.5 * (c.domain.lambda1 + c.domain.lambda2);
  }
  require(c.start.size() == static_cast<std::size_t>(c.domain.dim + 1), "simulation.start must have d+1 entries");

  if (top.has("estimator")) {
    auto& e = c.estimator;
    detail::Reader r(top.raw("estimator"), "estimator");
    if (r.has("kind")) {
      std::string k;
      r.get("kind", k);
      if (k == "direct") e.kind = EstimatorKind::Direct;
      else if (k == "weighted") e.kind = EstimatorKind::Weighted;
      else if (k == "local") e.kind = EstimatorKind::Local;
      else if (k == "finite_difference") e.kind = EstimatorKind::FiniteDifference;
      else throw ConfigError("estimator.kind: unknown estimator '" + k + "'");
    }
    r.get("p", e.p);
    r.get("c_hat", e.c_hat);
    r.get("n_level", e.n_level);
    r.get("r0", e.r0);
    r.get("time_change", e.time_change);
    r.get("control_variate", e.control_variate);
    r.get("exact_exponential", e.exact_exponential);
    r.get("fd_step", e.fd_step);
    e.validate();
  }

  if (top.has("function")) c.function = detail::read_function(top.raw("function"), "function");

  if (top.has("oracle")) {
    auto& o = c.oracle;
    detail::Reader r(top.raw("oracle"), "oracle");
    r.get("X", o.X);
    r.get("n_x", o.n_x);
    r.get("n_v", o.n_v);
    r.get("dt_max", o.dt_max);
    r.get("cfl", o.cfl);
    r.get("width_tol", o.width_tol);
    require(o.X > 0.0 && o.n_x >= 3 && o.n_v >= 3, "oracle: invalid grid");
    require(o.dt_max > 0.0 && o.cfl > 0.0 && o.cfl <= 1.0, "oracle: invalid time stepping");
  }

  if (top.has("harness")) {
    auto& h = c.harness;
    detail::Reader r(top.raw("harness"), "harness");
    r.get("t_grid", h.t_grid);
    r.get("lambda_grid", h.lambda_grid);
    r.get("weight", h.weight);
    r.get("level", h.level);
    r.get("points", h.points);
    r.get("grid_res", h.grid_res);
    r.get("p", h.p);
    if (r.has("pairs")) {
      const Json& arr = r.raw("pairs");
      require(arr.is_array(), "harness.pairs must be an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        detail::Reader pr(arr[i], "harness.pairs[" + std::to_string(i) + "]");
        PairSpec ps;
        pr.get("x", ps.x);
        pr.get("y", ps.y);
        pr.get("t", ps.t);
        require(ps.x.size() == 2 && ps.y.size() == 2, pr.where() + ": x and y must be 2-vectors");
        require(ps.t > 0.0, pr.where() + ": t must be positive");
        h.pairs.push_back(ps);
      }
    }
    if (r.has("functions")) {
      const Json& arr = r.raw("functions");
      require(arr.is_array(), "harness.functions must be an array");
      for (std::size_t i = 0; i < arr.size(); ++i)
        h.functions.push_back(detail::read_function(arr[i], "harness.functions[" + std::to_string(i) + "]"));
    }
    require(!h.t_grid.empty(), "harness.t_grid must not be empty");
    for (double t : h.t_grid) require(t >= 0.0, "harness.t_grid: negative time");
    for (double l : h.lambda_grid) require(l >= 0.0, "harness.lambda_grid: negative lambda");
    require(h.weight == "sigma" || h.weight == "indicator", "harness.weight must be sigma or indicator");
    require(h.grid_res > 0.0, "harness.grid_res must be positive");
    require(h.p > 1.0 && h.p <= 2.0, "harness.p must lie in (1, 2]");
    for (const auto& pt : h.points)
      require(pt.size() == static_cast<std::size_t>(c.domain.dim + 1), "harness.points must be (d+1)-vectors");
  }

  top.get("output", c.output);
  return c;
}

inline Json config_to_json(const RunConfig& c) {
  Json j;
  j["schema"] = c.schema;
  const auto& d = c.domain;
  Json dj;
  dj["family"] = d.family;
  dj["dim"] = d.dim;
  dj["lambda1"] = d.lambda1;
  dj["lambda2"] = d.lambda2;
  dj["rate"] = d.rate;
  dj["delta"] = d.delta;
  dj["smoothing"] = d.smoothing;
  if (!d.lower.empty()) dj["lower"] = d.lower;
  if (!d.upper.empty()) dj["upper"] = d.upper;
  dj["probes"] = {{"radius", d.probes.radius},
                  {"spacing", d.probes.spacing},
                  {"y_levels", d.probes.y_levels},
                  {"max_points", d.probes.max_points}};
  j["domain"] = dj;

  Json zj;
  zj["kind"] = c.drift.kind;
  if (c.drift.kind == "linear") {
    zj["matrix"] = c.drift.matrix;
    zj["offset"] = c.drift.offset;
  }
  if (c.drift.kind == "radial_decay") zj["strength"] = c.drift.strength;
  if (c.drift.kind == "expression") zj["components"] = c.drift.components;
  if (c.drift.K) zj["K"] = *c.drift.K;
  j["drift"] = zj;

  const auto& s = c.simulation;
  j["simulation"] = {{"t", s.t},
                     {"dt", s.dt},
                     {"n_paths", s.n_paths},
                     {"seed", s.seed},
                     {"threads", s.threads},
                     {"bridge", s.bridge},
                     {"scheme", scheme_name(s.scheme)},
                     {"start", c.start}};
  const auto& e = c.estimator;
  j["estimator"] = {{"kind", kind_name(e.kind)},
                    {"p", e.p},
                    {"c_hat", e.c_hat},
                    {"n_level", e.n_level},
                    {"r0", e.r0},
                    {"time_change", e.time_change},
                    {"control_variate", e.control_variate},
                    {"exact_exponential", e.exact_exponential},
                    {"fd_step", e.fd_step}};
  if (c.function) j["function"] = detail::write_function(*c.function);
  const auto& o = c.oracle;
  j["oracle"] = {{"X", o.X},           {"n_x", o.n_x}, {"n_v", o.n_v},
                 {"dt_max", o.dt_max}, {"cfl", o.cfl}, {"width_tol", o.width_tol}};
  const auto& h = c.harness;
  Json hj;
  hj["t_grid"] = h.t_grid;
  hj["lambda_grid"] = h.lambda_grid;
  hj["weight"] = h.weight;
  hj["level"] = h.level;
  hj["points"] = h.points;
  Json pairs = Json::array();
  for (const auto& p : h.pairs) pairs.push_back({{"x", p.x}, {"y", p.y}, {"t", p.t}});
  hj["pairs"] = pairs;
  Json fns = Json::array();
  for (const auto& f : h.functions) fns.push_back(detail::write_function(f));
  hj["functions"] = fns;
  hj["grid_res"] = h.grid_res;
  hj["p"] = h.p;
  j["harness"] = hj;
  j["output"] = c.output;
  return j;
}

inline RunConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Builders

inline SurfacePtr make_surface(const DomainSpec& d, double lambda) {
  if (d.family == "flat") return constant_surface(d.dim, lambda);
  RadialProfile prof;
  prof.rate = d.rate;
  prof.delta = d.delta;
  if (d.family == "exp_decay") prof.kind = ProfileKind::Exp;
  else if (d.family == "power_decay") prof.kind = ProfileKind::Power;
  else prof.kind = ProfileKind::Log;
  return radial_surface(d.dim, lambda, prof, d.smoothing);
}

inline StripDomain make_domain(const DomainSpec& d) {
  if (d.family == "custom")
    return StripDomain(expression_surface(d.dim, d.lower), expression_surface(d.dim, d.upper), d.probes);
  return StripDomain(make_surface(d, d.lambda1), make_surface(d, d.lambda2), d.probes);
}

inline DriftPtr make_drift(const DriftSpec& z, int dim) {
  const int n = dim + 1;
  std::shared_ptr<DriftField> out;
  if (z.kind == "zero") {
    out = std::make_shared<ZeroDrift>(n);
  } else if (z.kind == "linear") {
    Mat a(n, n);
    Vec b(n);
    for (int i = 0; i < n; ++i) {
      b(i) = z.offset[static_cast<std::size_t>(i)];
      for (int k = 0; k < n; ++k) a(i, k) = z.matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    out = std::make_shared<LinearDrift>(a, b);
  } else if (z.kind == "radial_decay") {
    out = std::make_shared<RadialDecayDrift>(dim, z.strength);
  } else {
    out = std::make_shared<ExpressionDrift>(dim, z.components);
  }
  out->supplied_bound = z.K;
  return out;
}

inline TestFunction make_function(const FunctionSpec& f, const StripDomain& dom) {
  TestFunction out;
  if (f.kind == "cos") {
    out = strip_cosine(dom, static_cast<int>(f.k));
  } else if (f.kind == "constant") {
    out = constant_function(dom.ambient(), f.value);
  } else if (f.kind == "bump") {
    if (f.center.size() != static_cast<std::size_t>(dom.ambient()))
      throw ConfigError("bump center must be a (d+1)-vector");
    out = bump_function(dom, Eigen::Map<const Eigen::VectorXd>(f.center.data(), dom.ambient()), f.rho,
                        f.amplitude);
  } else if (f.kind == "tanh_exp") {
    out = tanh_exponential(dom, f.k);
  } else {
    out = expression_function(dom, f.source);
  }
  return f.shift != 0.0 ? shifted(out, f.shift) : out;
}

inline Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<int>(i)) = v[i];
  return out;
}

}  // namespace nstrip
