#pragma once

// Empirical checks of local-time exponential moments, gradient bounds and the
// functional inequalities (Poincare, log-Harnack, entropy, heat-kernel lower
// bound). Every inequality is reported through the smallest constant that
// makes it hold on the probed cells.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nstrip/distance.hpp"
#include "nstrip/estimators.hpp"
#include "nstrip/oracle.hpp"

namespace nstrip {

// ---------------------------------------------------------------------------
// Constant families. Each is increasing in c >= 0; value(0) is the c -> 0 limit.

// c e^c / (1 - e^{-c t})
inline double harnack_factor(double c, double t) {
  if (c < 1e-12) return 1.0 / t;
  return c * std::exp(c) / -std::expm1(-c * t);
}
// c e^c / (1 - e^{-c t / 2})
inline double kernel_factor(double c, double t) { return harnack_factor(c, 0.5 * t); }
// e^c (e^{c t} - 1) / c
inline double poincare_factor(double c, double t) {
  if (c < 1e-12) return t;
  return std::exp(c) * std::expm1(c * t) / c;
}
// c p / (2 (p-1)^2 (1 - e^{-c p t / (p-1)}))
inline double gradient_factor(double c, double p, double t) {
  const double k = p * t / (p - 1.0);
  if (c < 1e-12) return 1.0 / (2.0 * (p - 1.0) * t);
  return c * p / (2.0 * (p - 1.0) * (p - 1.0) * -std::expm1(-c * k));
}

// Smallest c >= 0 with factor(c) >= target; infinity when none below 1e3.
inline double minimal_constant(const std::function<double(double)>& factor, double target) {
  if (!std::isfinite(target)) return std::numeric_limits<double>::infinity();
  if (factor(0.0) >= target) return 0.0;
  double hi = 1.0;
  while (factor(hi) < target) {
    hi *= 2.0;
    if (hi > 1e3) return std::numeric_limits<double>::infinity();
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (factor(mid) >= target ? hi : lo) = mid;
  }
  return hi;
}

// Relative-change stability used for fitted constants: both zero counts as stable.
inline bool constants_stable(double a, double b, double rel) {
  if (!std::isfinite(a) || !std::isfinite(b)) return false;
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

// ---------------------------------------------------------------------------
// Reports

struct InequalityRow {
  std::string cell;
  double t = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;  // evaluated with the report's fitted constant
  double stderr_ = 0.0;
  double constant = 0.0;  // minimal constant for this row alone
  // Share of the c -> 0 bound used by this row (c > 0 is needed iff usage > 1);
  // zero where not applicable.
  double usage = 0.0;
  double slack() const { return rhs - lhs; }
};

struct InequalityReport {
  std::string id;
  std::vector<InequalityRow> rows;
  double fitted_constant = 0.0;
  bool holds = true;
  std::string note;
  std::map<std::string, double> meta;
};

// ---------------------------------------------------------------------------
// Local-time exponential moments

enum class MomentWeight { Sigma, Indicator };

struct MomentCell {
  double t = 0.0;
  double lambda = 0.0;
  double log_moment = 0.0;
  double stderr_ = 0.0;
  double ess = 0.0;
  bool low_ess = false;
};

struct MomentFit {
  double lambda = 0.0;
  double a = 0.0;  // intercept
  double b = 0.0;  // slope in t
  double r2 = 1.0;
  double residual_rel = 0.0;
};

struct MomentCurve {
  MomentWeight weight = MomentWeight::Sigma;
  double level = 0.0;  // R for the indicator weight
  std::vector<MomentCell> cells;
  std::vector<MomentFit> fits;
  double c_fit = 0.0;
  std::size_t low_ess_cells = 0;
};

struct MomentOptions {
  MomentWeight weight = MomentWeight::Sigma;
  double level = 0.0;
  double r0 = 0.0;  // Lyapunov clamp for the indicator; 0 selects the default
  double fit_t_min = 0.5;
  int bootstrap = 200;
  double ess_min = 100.0;
};

inline double log_mean_exp(const std::vector<double>& x, double lambda) {
  if (x.empty()) return 0.0;
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, lambda * v);
  std::vector<double> e(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) e[i] = std::exp(lambda * x[i] - m);
  return std::log(pairwise_sum(e) / static_cast<double>(x.size())) + m;
}

inline MomentFit fit_affine(double lambda, const std::vector<double>& t, const std::vector<double>& y) {
  MomentFit f;
  f.lambda = lambda;
  const double n = static_cast<double>(t.size());
  if (t.size() < 2) return f;
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
    stt += t[i] * t[i];
    sty += t[i] * y[i];
  }
  const double den = n * stt - st * st;
  f.b = den != 0.0 ? (n * sty - st * sy) / den : 0.0;
  f.a = (sy - f.b * st) / n;
  const double ym = sy / n;
  double ss_res = 0, ss_tot = 0, worst = 0;
  double ymin = y[0], ymax = y[0];
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = y[i] - (f.a + f.b * t[i]);
    ss_res += r * r;
    ss_tot += (y[i] - ym) * (y[i] - ym);
    worst = std::max(worst, std::abs(r));
    ymin = std::min(ymin, y[i]);
    ymax = std::max(ymax, y[i]);
  }
  f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  f.residual_rel = ymax > ymin ? worst / (ymax - ymin) : 0.0;
  return f;
}

// Accumulated weighted local time at each requested grid time (one row per path).
inline std::vector<std::vector<double>> local_time_samples(const StripDomain& dom,
                                                           const DriftField& z, SimConfig sim,
                                                           const Vec& start,
                                                           const std::vector<double>& t_grid,
                                                           const MomentOptions& opt) {
  if (t_grid.empty()) throw ConfigError("empty t-grid");
  const double t_max = *std::max_element(t_grid.begin(), t_grid.end());
  for (double t : t_grid)
    if (t < 0.0) throw ConfigError("negative time in t-grid");
  sim.t = t_max;
  sim.validate();
  const double h = sim.step_size();
  std::vector<std::size_t> at(t_grid.size());
  for (std::size_t m = 0; m < t_grid.size(); ++m) {
    const double k = h > 0.0 ? t_grid[m] / h : 0.0;
    if (std::abs(k - std::round(k)) > 1e-6) throw ConfigError("t-grid values must be multiples of dt");
    at[m] = static_cast<std::size_t>(std::llround(k));
  }
  const Lyapunov lyap(opt.r0 > 0.0 ? opt.r0 : (opt.weight == MomentWeight::Indicator ? default_r0(dom) : 1.0));
  struct Visitor {
    const StripDomain& dom;
    const Lyapunov& lyap;
    const MomentOptions& opt;
    const std::vector<std::size_t>& at;
    std::vector<double>& out;
    double acc = 0.0;
    void on_step(std::size_t k, double, const Vec&, const Vec&, const StepResult& r) {
      for (const auto& e : r.events) {
        if (e.dl <= 0.0) continue;
        if (opt.weight == MomentWeight::Sigma) {
          acc += dom.sff_lower_bound(dom.boundary_point(e.base, e.face)) * e.dl;
        } else if (lyap(dom, e.base).w <= opt.level) {
          acc += e.dl;
        }
      }
      for (std::size_t m = 0; m < at.size(); ++m)
        if (at[m] == k + 1) out[m] = acc;
    }
  };
  std::vector<std::vector<double>> samples(sim.n_paths, std::vector<double>(t_grid.size(), 0.0));
  for_each_path(sim.n_paths, sim.threads, [&](std::size_t i) {
    Visitor v{dom, lyap, opt, at, samples[i]};
    run_path(dom, z, sim, start, i, v);
  });
  return samples;
}

inline MomentCurve local_time_moment(const StripDomain& dom, const DriftField& z,
                                     const SimConfig& sim, const Vec& start,
                                     const std::vector<double>& lambdas,
                                     const std::vector<double>& t_grid,
                                     const MomentOptions& opt = {}) {
  for (double l : lambdas)
    if (l < 0.0) throw ConfigError("lambda grid must be non-negative");
  const auto samples = local_time_samples(dom, z, sim, start, t_grid, opt);
  MomentCurve curve;
  curve.weight = opt.weight;
  curve.level = opt.level;
  const std::size_t n = samples.size();
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    const double lambda = lambdas[li];
    std::vector<double> fit_t, fit_y;
    for (std::size_t m = 0; m < t_grid.size(); ++m) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = samples[i][m];
      MomentCell cell;
      cell.t = t_grid[m];
      cell.lambda = lambda;
      cell.log_moment = log_mean_exp(col, lambda);
      // effective sample size of the exponential weights
      double mx = -std::numeric_limits<double>::infinity();
      for (double v : col) mx = std::max(mx, lambda * v);
      std::vector<double> w(n), w2(n);
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(lambda * col[i] - mx);
        w2[i] = w[i] * w[i];
      }
      const double sw = pairwise_sum(w);
      cell.ess = sw * sw / pairwise_sum(w2);
      cell.low_ess = cell.ess < opt.ess_min;
      if (cell.low_ess) ++curve.low_ess_cells;
      // bootstrap standard error; the resampling stream depends only on the cell
      if (lambda != 0.0 && opt.bootstrap > 1) {
        RandomStream rng(sim.seed, kAuxStreamBase + 1000 + li * 4096 + m);
        std::vector<double> reps(static_cast<std::size_t>(opt.bootstrap));
        std::vector<double> res(n);
        for (int b = 0; b < opt.bootstrap; ++b) {
          for (std::size_t i = 0; i < n; ++i)
            res[i] = col[static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n];
          reps[static_cast<std::size_t>(b)] = log_mean_exp(res, lambda);
        }
        cell.stderr_ = std::sqrt(sample_stats(reps).variance);
      }
      curve.cells.push_back(cell);
      if (cell.t >= opt.fit_t_min) {
        fit_t.push_back(cell.t);
        fit_y.push_back(cell.log_moment);
      }
    }
    const MomentFit f = fit_affine(lambda, fit_t, fit_y);
    curve.fits.push_back(f);
    if (lambda > 0.0)
      curve.c_fit = std::max({curve.c_fit, f.a / lambda, f.b / (lambda * (1.0 + lambda))});
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Gradient bounds (Monte Carlo)

struct GradientBoundOptions {
  double p = 2.0;
  EstimatorConfig estimator;
  // statistical allowance: |grad| is reduced by this many standard errors
  double z_score = 3.0;
};

struct GradientBoundResult {
  InequalityReport first;   // |grad P f| <= (P|grad f|^p)^{1/p} exp(c + c p t/(p-1))
  InequalityReport second;  // |grad P f|^2 <= gradient_factor(c) (P|f|^p)^{2/p}
  InequalityReport variance;  // |grad P f|^2 <= C/(t ^ 1) (P f^2 - (P f)^2)
};

inline GradientBoundResult gradient_bound_check(const StripDomain& dom, const DriftField& z,
                                                const SimConfig& sim,
                                                const std::vector<TestFunction>& suite,
                                                const std::vector<Vec>& points,
                                                const std::vector<double>& t_grid,
                                                const GradientBoundOptions& opt = {}) {
  if (t_grid.empty()) throw ConfigError("empty t-grid");
  const double p = opt.p;
  if (!(p > 1.0 && p <= 2.0)) throw ConfigError("p must lie in (1, 2]");
  GradientBoundResult res;
  res.first.id = "gradient_lp";
  res.second.id = "gradient_reverse";
  res.variance.id = "gradient_variance";
  struct Cell {
    std::string name;
    double t, grad, grad_se, pgrad, pabs, var;
  };
  std::vector<Cell> cells;
  for (const auto& f : suite) {
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
      for (double t : t_grid) {
        SimConfig s = sim;
        s.t = t;
        EstimatorConfig est = opt.estimator;
        est.p = p;
        if (est.kind == EstimatorKind::Direct && !f.neumann_ok) est.kind = EstimatorKind::Weighted;
        const GradientEstimate g = estimate_gradient(dom, z, s, est, f, points[pi]);
        const auto ends = sample_endpoints(dom, z, s, points[pi]);
        const double pg = mean_of_function(ends, [&](const Vec& q) {
                            return std::pow(f.gradient(q).norm(), p);
                          }).value;
        const double pa = mean_of_function(ends, [&](const Vec& q) {
                            return std::pow(std::abs(f.value(q)), p);
                          }).value;
        const double m1 = mean_of_function(ends, f.value).value;
        const double m2 = mean_of_function(ends, [&](const Vec& q) {
                            const double v = f.value(q);
                            return v * v;
                          }).value;
        const double gnorm = std::max(0.0, g.value.norm() - opt.z_score * g.stderr_.norm());
        cells.push_back({f.name + "@" + std::to_string(pi), t, gnorm, g.stderr_.norm(), pg, pa,
                         std::max(0.0, m2 - m1 * m1)});
      }
    }
  }
  auto finish = [](InequalityReport& r) {
    r.fitted_constant = 0.0;
    for (const auto& row : r.rows) r.fitted_constant = std::max(r.fitted_constant, row.constant);
    r.holds = std::isfinite(r.fitted_constant);
  };
  for (const auto& c : cells) {
    InequalityRow r1{c.name, c.t, c.grad, 0.0, c.grad_se, 0.0};
    const double base1 = std::pow(c.pgrad, 1.0 / p);
    if (c.grad > 0.0) {
      r1.constant = base1 > 0.0 ? std::max(0.0, std::log(c.grad / base1) / (1.0 + p * c.t / (p - 1.0)))
                                : std::numeric_limits<double>::infinity();
    }
    res.first.rows.push_back(r1);
    InequalityRow r2{c.name, c.t, c.grad * c.grad, 0.0, c.grad_se, 0.0};
    const double base2 = std::pow(c.pabs, 2.0 / p);
    if (c.grad > 0.0) {
      r2.constant = base2 > 0.0 ? minimal_constant([&](double k) { return gradient_factor(k, p, c.t); },
                                                   c.grad * c.grad / base2)
                                : std::numeric_limits<double>::infinity();
    }
    res.second.rows.push_back(r2);
    InequalityRow r3{c.name, c.t, c.grad * c.grad, 0.0, c.grad_se, 0.0};
    if (c.grad > 0.0) {
      r3.constant = c.var > 0.0 ? c.grad * c.grad * std::min(c.t, 1.0) / c.var
                                : std::numeric_limits<double>::infinity();
    }
    res.variance.rows.push_back(r3);
  }
  finish(res.first);
  finish(res.second);
  finish(res.variance);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& c = cells[k];
    const double c1 = res.first.fitted_constant, c2 = res.second.fitted_constant,
                 c3 = res.variance.fitted_constant;
    res.first.rows[k].rhs = std::pow(c.pgrad, 1.0 / p) * std::exp(c1 + c1 * p * c.t / (p - 1.0));
    res.second.rows[k].rhs = gradient_factor(c2, p, c.t) * std::pow(c.pabs, 2.0 / p);
    res.variance.rows[k].rhs = c3 / std::min(c.t, 1.0) * c.var;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Oracle-based checks (d = 1)

// Semigroup values from grid solves; f is evaluated on the grid nodes.
class OracleSemigroup {
 public:
  OracleSemigroup(std::shared_ptr<const MappedGrid> grid, DriftPtr drift, SolveOptions opt = {})
      : grid_(std::move(grid)), drift_(std::move(drift)), opt_(opt) {}

  const MappedGrid& grid() const { return *grid_; }
  std::shared_ptr<const MappedGrid> grid_ptr() const { return grid_; }

  GridSolution solve(const std::function<double(const Vec&)>& f, double t) const {
    return solve_neumann_heat(grid_, *drift_, f, t, opt_);
  }
  double at(const std::function<double(const Vec&)>& f, double t, const Vec& x) const {
    return solve(f, t).value_at(x);
  }
  GridSolution density(const Vec& x, double t) const {
    return oracle_density(grid_, *drift_, x, t, opt_);
  }

 private:
  std::shared_ptr<const MappedGrid> grid_;
  DriftPtr drift_;
  SolveOptions opt_;
};

struct PoincareShape {
  double amplitude = 0.0;  // A in A (e^{k t} - 1) / k
  double rate = 0.0;       // k
  double residual_rel = 0.0;
  bool increasing = true;
};

// Least-squares fit of A (e^{k t} - 1)/k to the ratio curve (k scanned, A closed form).
inline PoincareShape fit_poincare_shape(const std::vector<double>& t, const std::vector<double>& ratio) {
  PoincareShape best;
  best.residual_rel = std::numeric_limits<double>::infinity();
  auto basis_fn = [](double k, double s) { return std::abs(k) < 1e-12 ? s : std::expm1(k * s) / k; };
  auto evaluate = [&](double k) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double b = basis_fn(k, t[i]);
      num += b * ratio[i];
      den += b * b;
    }
    const double a = den > 0 ? num / den : 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double r = std::abs(a * basis_fn(k, t[i]) - ratio[i]);
      worst = std::max(worst, ratio[i] != 0.0 ? r / std::abs(ratio[i]) : r);
    }
    return std::make_pair(a, worst);
  };
  double kmax = 50.0 / std::max(1e-9, *std::max_element(t.begin(), t.end()));
  for (int s = -2000; s <= 2000; ++s) {
    const double k = kmax * s / 2000.0;
    const auto [a, worst] = evaluate(k);
    if (worst < best.residual_rel) {
      best.residual_rel = worst;
      best.amplitude = a;
      best.rate = k;
    }
  }
  for (std::size_t i = 1; i < ratio.size(); ++i)
    if (ratio[i] < ratio[i - 1]) best.increasing = false;
  return best;
}

struct PoincareResult {
  InequalityReport report;
  std::vector<double> ratio;
  PoincareShape shape;
};

// Variance ratio (P_t f^2 - (P_t f)^2) / P_t |grad f|^2 at x over the t-grid,
// with the minimal constant of e^c (e^{ct} - 1)/c P_t|grad f|^2.
inline PoincareResult poincare_check(
    const std::function<double(const std::function<double(const Vec&)>&, double)>& semigroup,
    const TestFunction& f, const std::vector<double>& t_grid) {
  if (t_grid.empty()) throw ConfigError("empty t-grid");
  PoincareResult out;
  out.report.id = "poincare";
  auto sq = [&](const Vec& p) { return f.value(p) * f.value(p); };
  auto g2 = [&](const Vec& p) { return f.gradient(p).squaredNorm(); };
  std::vector<double> ts;
  for (double t : t_grid) {
    const double m1 = semigroup(f.value, t);
    const double m2 = semigroup(sq, t);
    const double gg = semigroup(g2, t);
    const double var = m2 - m1 * m1;
    InequalityRow r{f.name, t, var, 0.0, 0.0, 0.0};
    if (gg > 0.0) {
      r.constant = minimal_constant([&](double c) { return poincare_factor(c, t); }, var / gg);
      out.ratio.push_back(var / gg);
      ts.push_back(t);
    } else if (var > 1e-12) {
      r.constant = std::numeric_limits<double>::infinity();
    }
    r.rhs = gg;  // scaled below
    out.report.rows.push_back(r);
  }
  double c = 0.0;
  for (const auto& r : out.report.rows) c = std::max(c, r.constant);
  out.report.fitted_constant = c;
  for (auto& r : out.report.rows) {
    const double gg = r.rhs;
    r.rhs = poincare_factor(c, r.t) * gg;
  }
  out.report.holds = std::isfinite(c);
  if (ts.size() >= 2) out.shape = fit_poincare_shape(ts, out.ratio);
  return out;
}

struct PairCell {
  Vec x;
  Vec y;
  double t = 0.0;
};

struct LogHarnackResult {
  InequalityReport report;
  std::vector<double> jensen_slack;  // x = y cells
};

// P_t log f(x) <= log P_t f(y) + harnack_factor(c, t) rho(x, y)^2.
inline LogHarnackResult log_harnack_check(const OracleSemigroup& oracle, const StripDomain& dom,
                                          const std::vector<PairCell>& cells,
                                          const std::vector<TestFunction>& suite,
                                          double grid_res) {
  LogHarnackResult out;
  out.report.id = "log_harnack";
  std::vector<double> rho2;
  for (const auto& cell : cells) {
    const double rho = intrinsic_distance(dom, cell.x, cell.y, grid_res);
    for (const auto& f : suite) {
      auto logf = [&](const Vec& p) {
        const double v = f.value(p);
        if (!(v > 0.0)) throw DomainError("log-Harnack needs a positive test function");
        return std::log(v);
      };
      const double lhs = oracle.at(logf, cell.t, cell.x);
      const double pf = oracle.at(f.value, cell.t, cell.y);
      InequalityRow r{f.name, cell.t, lhs, std::log(pf), 0.0, 0.0};
      if (rho == 0.0) {
        out.jensen_slack.push_back(std::log(pf) - lhs);
      } else {
        const double target = (lhs - std::log(pf)) / (rho * rho);
        r.constant = minimal_constant([&](double c) { return harnack_factor(c, cell.t); }, target);
        r.usage = target / harnack_factor(0.0, cell.t);
      }
      out.report.rows.push_back(r);
      rho2.push_back(rho * rho);
    }
  }
  double c = 0.0;
  for (const auto& r : out.report.rows) c = std::max(c, r.constant);
  out.report.fitted_constant = c;
  for (std::size_t k = 0; k < out.report.rows.size(); ++k) {
    auto& r = out.report.rows[k];
    r.rhs += harnack_factor(c, r.t) * rho2[k];
  }
  out.report.holds = std::isfinite(c);
  for (double s : out.jensen_slack)
    if (s < -1e-3) out.report.holds = false;
  return out;
}

struct KernelCell {
  double t = 0.0;
  double rho = 0.0;
  double entropy = 0.0;
  double kernel = 0.0;      // p_t(x, y)
  double overlap_x = 0.0;   // int p_t(x, .)^2 dmu
  double c_entropy = 0.0;
  double c_kernel = 0.0;
  double usage_entropy = 0.0;
  double usage_kernel = 0.0;
  std::size_t nonpositive = 0;  // density nodes clipped before taking logs
};

struct EntropyKernelResult {
  InequalityReport entropy;
  InequalityReport kernel;
  std::vector<KernelCell> cells;
  double min_overlap = std::numeric_limits<double>::infinity();
};

inline EntropyKernelResult entropy_and_kernel_checks(const OracleSemigroup& oracle,
                                                     const StripDomain& dom,
                                                     const std::vector<PairCell>& cells,
                                                     double grid_res) {
  EntropyKernelResult out;
  out.entropy.id = "entropy";
  out.kernel.id = "heat_kernel_lower";
  const MappedGrid& g = oracle.grid();
  for (const auto& cell : cells) {
    KernelCell kc;
    kc.t = cell.t;
    kc.rho = intrinsic_distance(dom, cell.x, cell.y, grid_res);
    const GridSolution px = oracle.density(cell.x, cell.t);
    const GridSolution py = (cell.x - cell.y).norm() == 0.0 ? px : oracle.density(cell.y, cell.t);
    std::vector<double> ent(g.size()), sq(g.size());
    const double floor = 1e-300;
    for (std::size_t k = 0; k < g.size(); ++k) {
      double a = px.u[k], b = py.u[k];
      if (a <= 0.0 || b <= 0.0) ++kc.nonpositive;
      a = std::max(a, floor);
      b = std::max(b, floor);
      ent[k] = px.u[k] > 0.0 ? a * std::log(a / b) : 0.0;
      sq[k] = px.u[k] * px.u[k];
    }
    kc.entropy = g.mean(ent);
    kc.overlap_x = g.mean(sq);
    kc.kernel = px.value_at(cell.y);
    out.min_overlap = std::min(out.min_overlap, kc.overlap_x);
    if (kc.rho > 0.0) {
      const double r2 = kc.rho * kc.rho;
      kc.c_entropy = minimal_constant([&](double c) { return harnack_factor(c, cell.t); },
                                      kc.entropy / r2);
      kc.usage_entropy = kc.entropy / r2 / harnack_factor(0.0, cell.t);
      kc.usage_kernel = kc.kernel > 0.0 ? -std::log(kc.kernel) / r2 / kernel_factor(0.0, cell.t)
                                        : std::numeric_limits<double>::infinity();
      kc.c_kernel = kc.kernel > 0.0
                        ? minimal_constant([&](double c) { return kernel_factor(c, cell.t); },
                                           -std::log(kc.kernel) / r2)
                        : std::numeric_limits<double>::infinity();
    }
    out.cells.push_back(kc);
  }
  double ce = 0.0, ck = 0.0;
  for (const auto& kc : out.cells) {
    ce = std::max(ce, kc.c_entropy);
    ck = std::max(ck, kc.c_kernel);
  }
  out.entropy.fitted_constant = ce;
  out.kernel.fitted_constant = ck;
  for (const auto& kc : out.cells) {
    const std::string name = "rho=" + std::to_string(kc.rho);
    const double r2 = kc.rho * kc.rho;
    out.entropy.rows.push_back(
        {name, kc.t, kc.entropy, harnack_factor(ce, kc.t) * r2, 0.0, kc.c_entropy, kc.usage_entropy});
    out.kernel.rows.push_back(
        {name, kc.t, std::exp(-kernel_factor(ck, kc.t) * r2), kc.kernel, 0.0, kc.c_kernel, kc.usage_kernel});
  }
  out.entropy.holds = std::isfinite(ce);
  out.kernel.holds = std::isfinite(ck) && out.min_overlap >= 1.0 - 1e-3;
  return out;
}

}  // namespace nstrip
