// nstrip: command-line runner for domain checks, simulation, gradient
// estimation, inequality reports and oracle comparisons.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>

#include "nstrip/conditions.hpp"
#include "nstrip/config.hpp"
#include "nstrip/estimators.hpp"
#include "nstrip/harness.hpp"
#include "nstrip/io.hpp"
#include "nstrip/oracle.hpp"
#include "nstrip/sde.hpp"

namespace fs = std::filesystem;
using namespace nstrip;

namespace {

struct Context {
  RunConfig cfg;
  fs::path out;
};

std::shared_ptr<const MappedGrid> make_grid(const RunConfig& cfg, const StripDomain& dom, int refine = 1) {
  GridOptions go;
  go.width_tol = cfg.oracle.width_tol;
  go.allow_wide_ends = cfg.domain.family == "flat";
  return std::make_shared<const MappedGrid>(dom, cfg.oracle.X, cfg.oracle.n_x * refine,
                                            cfg.oracle.n_v * refine, go);
}

SolveOptions solve_options(const RunConfig& cfg, int refine = 1) {
  SolveOptions so;
  so.cfl = cfg.oracle.cfl;
  so.dt_max = cfg.oracle.dt_max / (refine * refine);
  return so;
}

std::vector<TestFunction> function_suite(const RunConfig& cfg, const StripDomain& dom) {
  std::vector<TestFunction> out;
  for (const auto& f : cfg.harness.functions) out.push_back(make_function(f, dom));
  if (out.empty()) {
    if (is_flat(dom)) out.push_back(strip_cosine(dom, 1));
    out.push_back(tanh_exponential(dom, 1.0));
    out.push_back(tanh_exponential(dom, 4.0));
  }
  return out;
}

int cmd_check_domain(const Context& c) {
  const StripDomain dom = make_domain(c.cfg.domain);
  const DriftPtr z = make_drift(c.cfg.drift, dom.dim());
  const ConditionReport rep = check_conditions(dom, *z);
  CsvWriter w({"condition", "quantity", "value", "refined_value", "pass"});
  for (const auto& r : rep.conditions) w.add({r.id, r.quantity, r.value, r.refined_value, r.pass ? 1 : 0});
  write_atomic(c.out / "conditions.csv", w.str());
  Json body = conditions_json(rep);
  body["domain"] = config_to_json(c.cfg)["domain"];
  write_atomic(c.out / "conditions.json", with_meta(body, "check-domain").dump(2) + "\n");
  for (const auto& r : rep.conditions)
    std::cout << "(" << r.id << ") " << (r.pass ? "pass" : "fail") << "  " << r.quantity << " = "
              << format_double(r.value) << "\n";
  return 0;
}

int cmd_simulate(const Context& c) {
  const StripDomain dom = make_domain(c.cfg.domain);
  const DriftPtr z = make_drift(c.cfg.drift, dom.dim());
  const Vec start = to_vec(c.cfg.start);
  const auto records = batch_simulate(dom, *z, c.cfg.simulation, start);
  std::vector<std::string> header = {"path"};
  const int n = dom.ambient();
  for (int i = 0; i + 1 < n; ++i) header.push_back(n == 2 ? "x" : "x" + std::to_string(i + 1));
  for (const char* h : {"y", "l1", "l2", "events", "fallbacks"}) header.push_back(h);
  CsvWriter w(header);
  for (std::size_t p = 0; p < records.size(); ++p) {
    const auto& r = records[p];
    std::vector<std::string> row = {std::to_string(p)};
    for (int i = 0; i < n; ++i) row.push_back(format_double(r.states.back()(i)));
    row.push_back(format_double(pairwise_sum(r.dl1)));
    row.push_back(format_double(pairwise_sum(r.dl2)));
    row.push_back(std::to_string(r.events.size()));
    row.push_back(std::to_string(r.fallbacks));
    w.row(row);
  }
  write_atomic(c.out / "ledger.csv", w.str());
  write_atomic(c.out / "path_0.csv", path_csv(records.front()));
  std::cout << "simulated " << records.size() << " paths\n";
  return 0;
}

int cmd_gradient(const Context& c, const std::vector<std::string>& kinds) {
  if (!c.cfg.function) throw ConfigError("gradient: missing 'function' section");
  const StripDomain dom = make_domain(c.cfg.domain);
  const DriftPtr z = make_drift(c.cfg.drift, dom.dim());
  const TestFunction f = make_function(*c.cfg.function, dom);
  const Vec start = to_vec(c.cfg.start);
  std::vector<EstimatorKind> list;
  for (const auto& k : kinds) {
    if (k == "direct") list.push_back(EstimatorKind::Direct);
    else if (k == "weighted") list.push_back(EstimatorKind::Weighted);
    else if (k == "local") list.push_back(EstimatorKind::Local);
    else if (k == "finite_difference") list.push_back(EstimatorKind::FiniteDifference);
    else throw ConfigError("unknown estimator kind '" + k + "'");
  }
  if (list.empty()) list.push_back(c.cfg.estimator.kind);
  CsvWriter w({"kind", "component", "value", "stderr", "n_paths"});
  for (EstimatorKind kind : list) {
    EstimatorConfig est = c.cfg.estimator;
    est.kind = kind;
    const GradientEstimate g = estimate_gradient(dom, *z, c.cfg.simulation, est, f, start);
    const std::string name = kind_name(kind);
    Json body = gradient_json(g, c.cfg.simulation.t, start);
    body["function"] = f.name;
    write_atomic(c.out / ("gradient_" + name + ".json"), with_meta(body, "gradient").dump(2) + "\n");
    for (int i = 0; i < g.value.size(); ++i) w.add({name, i, g.value(i), g.stderr_(i), g.n_paths});
    std::cout << name << ":";
    for (int i = 0; i < g.value.size(); ++i)
      std::cout << " " << format_double(g.value(i)) << " +- " << format_double(g.stderr_(i));
    std::cout << "\n";
  }
  write_atomic(c.out / "gradient.csv", w.str());
  return 0;
}

int cmd_inequalities(const Context& c) {
  const RunConfig& cfg = c.cfg;
  const StripDomain dom = make_domain(cfg.domain);
  const DriftPtr z = make_drift(cfg.drift, dom.dim());
  const Vec start = to_vec(cfg.start);
  const auto suite = function_suite(cfg, dom);
  Json summary;
  std::string rows;
  bool first_csv = true;
  auto append = [&](const InequalityReport& r) {
    std::string csv = report_csv(r);
    if (!first_csv) csv.erase(0, csv.find('\n') + 1);
    first_csv = false;
    rows += csv;
    summary["reports"].push_back(report_json(r));
  };

  // Local-time exponential moments.
  MomentOptions mo;
  mo.weight = cfg.harness.weight == "sigma" ? MomentWeight::Sigma : MomentWeight::Indicator;
  mo.level = cfg.harness.level;
  mo.r0 = cfg.estimator.r0;
  const MomentCurve curve =
      local_time_moment(dom, *z, cfg.simulation, start, cfg.harness.lambda_grid, cfg.harness.t_grid, mo);
  write_atomic(c.out / "moments.csv", moment_csv(curve));
  summary["moments"] = moment_json(curve);

  // Gradient bounds by Monte Carlo.
  std::vector<Vec> points;
  for (const auto& p : cfg.harness.points) points.push_back(to_vec(p));
  if (points.empty()) points.push_back(start);
  std::vector<double> positive_t;
  for (double t : cfg.harness.t_grid)
    if (t > 0.0) positive_t.push_back(t);
  GradientBoundOptions go;
  go.p = cfg.harness.p;
  go.estimator = cfg.estimator;
  if (go.estimator.kind == EstimatorKind::Local) go.estimator.kind = EstimatorKind::Weighted;
  const auto gb = gradient_bound_check(dom, *z, cfg.simulation, suite, points, positive_t, go);
  append(gb.first);
  append(gb.second);
  append(gb.variance);

  // Oracle-based inequalities (d = 1).
  if (dom.dim() == 1) {
    const OracleSemigroup oracle(make_grid(cfg, dom), z, solve_options(cfg));
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
      for (const auto& f : suite) {
        const Vec x = points[pi];
        auto sg = [&](const std::function<double(const Vec&)>& g, double t) { return oracle.at(g, t, x); };
        PoincareResult pr = poincare_check(sg, f, positive_t);
        for (auto& r : pr.report.rows) r.cell = f.name + "@" + std::to_string(pi);
        pr.report.meta["shape_rate"] = pr.shape.rate;
        pr.report.meta["shape_amplitude"] = pr.shape.amplitude;
        pr.report.meta["shape_residual_rel"] = pr.shape.residual_rel;
        pr.report.meta["ratio_increasing"] = pr.shape.increasing ? 1.0 : 0.0;
        append(pr.report);
      }
    }
    std::vector<PairCell> cells;
    for (const auto& p : cfg.harness.pairs) cells.push_back({to_vec(p.x), to_vec(p.y), p.t});
    if (!cells.empty()) {
      std::vector<TestFunction> positive;
      for (const auto& f : suite) {
        bool ok = true;
        for (int i = 0; i < oracle.grid().n_x() && ok; ++i)
          for (int j = 0; j < oracle.grid().n_v() && ok; ++j) ok = f.value(oracle.grid().physical(i, j)) > 0.0;
        if (ok) positive.push_back(f);
      }
      if (!positive.empty()) {
        LogHarnackResult lh = log_harnack_check(oracle, dom, cells, positive, cfg.harness.grid_res);
        double min_jensen = std::numeric_limits<double>::infinity();
        for (double s : lh.jensen_slack) min_jensen = std::min(min_jensen, s);
        if (!lh.jensen_slack.empty()) lh.report.meta["jensen_min_slack"] = min_jensen;
        append(lh.report);
      }
      if (z->is_zero()) {
        EntropyKernelResult ek = entropy_and_kernel_checks(oracle, dom, cells, cfg.harness.grid_res);
        ek.kernel.meta["min_overlap"] = ek.min_overlap;
        append(ek.entropy);
        append(ek.kernel);
      }
    }
  }
  write_atomic(c.out / "inequalities.csv", rows);
  write_atomic(c.out / "inequalities.json", with_meta(summary, "inequalities").dump(2) + "\n");
  for (const auto& r : summary["reports"])
    std::cout << r["id"].get<std::string>() << ": c = " << r["fitted_constant"].dump()
              << (r["holds"].get<bool>() ? "" : "  (violated)") << "\n";
  return 0;
}

int cmd_oracle_compare(const Context& c) {
  const RunConfig& cfg = c.cfg;
  CsvWriter w({"check", "value", "threshold", "pass"});
  const DriftPtr zero = zero_drift(2);

  // Eigenfunction benchmark on the unit flat strip.
  {
    const StripDomain flat(constant_surface(1, 0.0), constant_surface(1, 1.0), ProbeGrid{4.0, 0.5, 5, 1000});
    GridOptions go;
    go.allow_wide_ends = true;
    auto g = std::make_shared<const MappedGrid>(flat, 1.0, 4, 128, go);
    const double t = 0.1;
    SolveOptions so;
    so.dt_max = 2e-5;
    const auto sol = solve_neumann_heat(g, *zero, [](const Vec& p) { return std::cos(std::numbers::pi * p(1)); }, t, so);
    double err = 0.0;
    for (int i = 0; i < g->n_x(); ++i)
      for (int j = 0; j < g->n_v(); ++j) {
        const double exact = std::exp(-std::numbers::pi * std::numbers::pi * t) * std::cos(std::numbers::pi * g->v_center(j));
        err = std::max(err, std::abs(sol.u[g->index(i, j)] - exact));
      }
    w.add({"eigenfunction_max_error", err, 1e-3, err < 1e-3 ? 1 : 0});
  }

  // Refinement order and conservation on the configured domain.
  const StripDomain dom = make_domain(cfg.domain);
  const DriftPtr z = make_drift(cfg.drift, dom.dim());
  const TestFunction f = cfg.function ? make_function(*cfg.function, dom) : tanh_exponential(dom, 1.0);
  const double t = cfg.simulation.t;
  std::vector<GridSolution> sols;
  for (int r : {1, 2, 4}) sols.push_back(solve_neumann_heat(make_grid(cfg, dom, r), *z, f.value, t, solve_options(cfg, r)));
  const double order = refinement_study(sols[0], sols[1], sols[2]).order;
  w.add({"refinement_order", order, 2.0, std::abs(order - 2.0) <= 0.3 ? 1 : 0});
  if (z->is_zero()) {
    const double drift = sols[0].conservation_drift();
    w.add({"conservation_drift", drift, 1e-6, drift < 1e-6 ? 1 : 0});
  }
  w.add({"max_principle_excess", sols[0].max_principle_excess, 1e-8, sols[0].max_principle_excess <= 1e-8 ? 1 : 0});
  write_atomic(c.out / "oracle_compare.csv", w.str());
  write_atomic(c.out / "solution.csv", solution_csv(sols[0]));
  const auto bin = encode_solution(sols[0]);
  write_atomic(c.out / "solution.nsol", std::string(bin.begin(), bin.end()));
  std::cout << w.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reflected diffusion on narrow strips: checks, estimators and reports"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "worker threads");
    sub->add_option("--seed", seed, "seed override");
  };
  auto* check = app.add_subcommand("check-domain", "evaluate the admissibility conditions");
  auto* sim = app.add_subcommand("simulate", "simulate reflected paths and write the ledger");
  auto* grad = app.add_subcommand("gradient", "estimate the semigroup gradient");
  auto* ineq = app.add_subcommand("inequalities", "fit constants of the gradient and functional inequalities");
  auto* orc = app.add_subcommand("oracle-compare", "verify the grid solver");
  std::vector<std::string> kinds;
  grad->add_option("--kind", kinds, "estimator kind(s); default from the config");
  for (auto* s : {check, sim, grad, ineq, orc}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Context c;
    c.cfg = load_config(config_path);
    if (threads) {
      if (*threads < 1) throw ConfigError("--threads must be at least 1");
      c.cfg.simulation.threads = *threads;
    }
    if (seed) c.cfg.simulation.seed = *seed;
    c.out = out_dir.empty() ? fs::path(c.cfg.output) : fs::path(out_dir);
    if (*check) return cmd_check_domain(c);
    if (*sim) return cmd_simulate(c);
    if (*grad) return cmd_gradient(c, kinds);
    if (*ineq) return cmd_inequalities(c);
    if (*orc) return cmd_oracle_compare(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
