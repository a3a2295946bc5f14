#pragma once

// Monte-Carlo estimators of P_t f and grad P_t f: direct (Q_t^* grad f), the
// weighted global formula with an exponential control h, the localised formula
// with a time-changed adapted control, and common-random-number central
// differences.

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "nstrip/drift.hpp"
#include "nstrip/expression.hpp"
#include "nstrip/geometry.hpp"
#include "nstrip/parallel.hpp"
#include "nstrip/sde.hpp"
#include "nstrip/transport.hpp"

namespace nstrip {

struct TestFunction {
  std::string name;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  bool neumann_ok = false;
};

inline bool is_flat(const StripDomain& dom) {
  return dynamic_cast<const ConstantSurface*>(dom.lower_ptr().get()) != nullptr &&
         dynamic_cast<const ConstantSurface*>(dom.upper_ptr().get()) != nullptr;
}

inline TestFunction constant_function(int ambient, double c) {
  return {"constant", [c](const Vec&) { return c; },
          [ambient](const Vec&) { return Vec(Vec::Zero(ambient)); }, true};
}

// Largest |<N, grad f>| over boundary probes.
inline double verify_neumann(const StripDomain& dom, const TestFunction& f) {
  double worst = 0.0;
  for (const Vec& x : dom.probes().points(dom.dim())) {
    for (int face = 1; face <= 2; ++face) {
      const BoundaryPoint b = dom.boundary_point(x, face);
      worst = std::max(worst, std::abs(dom.inward_normal(b).dot(f.gradient(b.position))));
    }
  }
  return worst;
}

// cos(k pi v) with v = (y - phi1(x)) / (phi2(x) - phi1(x)). The gradient is a
// multiple of sin(k pi v) and so vanishes on both faces of any strip.
inline TestFunction strip_cosine(const StripDomain& dom, int k) {
  const int d = dom.dim();
  SurfacePtr lo = dom.lower_ptr(), hi = dom.upper_ptr();
  const double kp = k * std::numbers::pi;
  auto value = [lo, hi, d, kp](const Vec& p) {
    const Vec x = p.head(d);
    const double a = lo->value(x);
    return std::cos(kp * (p(d) - a) / (hi->value(x) - a));
  };
  auto gradient = [lo, hi, d, kp](const Vec& p) {
    const Vec x = p.head(d);
    const double a = lo->value(x);
    const double w = hi->value(x) - a;
    const double v = (p(d) - a) / w;
    const double s = -kp * std::sin(kp * v);
    const Vec ga = lo->gradient(x);
    const Vec gw = hi->gradient(x) - ga;
    Vec g(d + 1);
    g.head(d) = s * (-(ga + v * gw) / w);
    g(d) = s / w;
    return g;
  };
  TestFunction f{"cos(" + std::to_string(k) + "*pi*v)", value, gradient, false};
  f.neumann_ok = verify_neumann(dom, f) < 1e-6;
  return f;
}

// Smooth bump A exp(1 - 1/(1 - |p-c|^2/rho^2)) supported in the ball B(c, rho).
// Marked Neumann-compatible when sampled points of the support sphere lie in D.
inline TestFunction bump_function(const StripDomain& dom, const Vec& center, double rho,
                                  double amplitude = 1.0) {
  if (!(rho > 0.0)) throw ConfigError("bump radius must be positive");
  const int n = dom.ambient();
  if (center.size() != n) throw ConfigError("bump center has wrong dimension");
  auto value = [center, rho, amplitude](const Vec& p) {
    const double s = (p - center).squaredNorm() / (rho * rho);
    if (s >= 1.0) return 0.0;
    return amplitude * std::exp(1.0 - 1.0 / (1.0 - s));
  };
  auto gradient = [center, rho, amplitude, n](const Vec& p) {
    const double s = (p - center).squaredNorm() / (rho * rho);
    if (s >= 1.0) return Vec(Vec::Zero(n));
    const double f = amplitude * std::exp(1.0 - 1.0 / (1.0 - s));
    return Vec(-f / ((1.0 - s) * (1.0 - s)) * 2.0 * (p - center) / (rho * rho));
  };
  bool inside = dom.contains(center);
  RandomStream rng(0xb0b0ull, kAuxStreamBase + 11);
  for (int k = 0; inside && k < 2000; ++k) {
    Vec u(n);
    for (int i = 0; i < n; ++i) u(i) = rng.normal();
    inside = dom.contains(center + rho * u.normalized());
  }
  return {"bump", value, gradient, inside};
}

inline TestFunction shifted(TestFunction f, double c) {
  auto v = f.value;
  f.value = [v, c](const Vec& p) { return v(p) + c; };
  f.name += "+" + std::to_string(c);
  return f;
}

// exp(k tanh(x_1)): positive and bounded, varying along the strip only.
inline TestFunction tanh_exponential(const StripDomain& dom, double k) {
  const int n = dom.ambient();
  auto value = [k](const Vec& p) { return std::exp(k * std::tanh(p(0))); };
  auto gradient = [k, n](const Vec& p) {
    const double th = std::tanh(p(0));
    Vec g = Vec::Zero(n);
    g(0) = k * (1.0 - th * th) * std::exp(k * th);
    return g;
  };
  TestFunction f{"exp(" + std::to_string(k) + "*tanh(x))", value, gradient, false};
  f.neumann_ok = verify_neumann(dom, f) < 1e-6;
  return f;
}

// f from an expression in the base variables and y; central-difference gradient.
inline TestFunction expression_function(const StripDomain& dom, const std::string& source,
                                        double h = 1e-5) {
  const int d = dom.dim();
  std::vector<std::string> names = ExpressionSurface::variable_names(d);
  names.push_back("y");
  auto expr = std::make_shared<const Expression>(source, names);
  auto value = [expr](const Vec& p) { return (*expr)(p); };
  auto gradient = [expr, h](const Vec& p) {
    Vec g(p.size());
    Vec q = p;
    for (int i = 0; i < p.size(); ++i) {
      q(i) = p(i) + h;
      const double up = (*expr)(q);
      q(i) = p(i) - h;
      const double dn = (*expr)(q);
      q(i) = p(i);
      g(i) = (up - dn) / (2.0 * h);
    }
    return g;
  };
  TestFunction f{source, value, gradient, false};
  f.neumann_ok = verify_neumann(dom, f) < 1e-6;
  return f;
}

enum class EstimatorKind { Direct, Weighted, Local, FiniteDifference };

inline const char* kind_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Direct: return "direct";
    case EstimatorKind::Weighted: return "weighted";
    case EstimatorKind::Local: return "local";
    case EstimatorKind::FiniteDifference: return "finite_difference";
  }
  return "?";
}

struct EstimatorConfig {
  double p = 2.0;
  double c_hat = 1.0;
  EstimatorKind kind = EstimatorKind::Weighted;
  double n_level = 0.0;   // W-threshold of the localising set (local kind)
  double r0 = 0.0;        // Lyapunov clamp level; 0 selects the probe-grid default
  bool time_change = true;
  bool control_variate = false;
  bool exact_exponential = false;
  double fd_step = 0.02;

  double q() const { return p / (p - 1.0); }

  void validate() const {
    if (!(p > 1.0 && p <= 2.0)) throw ConfigError("p must lie in (1, 2]");
    if (!(c_hat > 0.0)) throw ConfigError("c_hat must be positive");
    if (!(fd_step > 0.0)) throw ConfigError("fd_step must be positive");
  }
};

// h_0 = 0, h_t = 1, h'_s = e^{-r s} / int_0^t e^{-r u} du with r = c_hat q.
class ControlH {
 public:
  ControlH(double t, double rate) : t_(t), rate_(rate) {
    if (!(t > 0.0)) throw DomainError("control horizon must be positive");
    if (!(rate >= 0.0)) throw DomainError("control rate must be non-negative");
  }
  double h(double s) const {
    if (rate_ * t_ < 1e-12) return s / t_;
    return std::expm1(-rate_ * s) / std::expm1(-rate_ * t_);
  }
  double h_prime(double s) const {
    if (rate_ * t_ < 1e-12) return 1.0 / t_;
    return rate_ * std::exp(-rate_ * s) / -std::expm1(-rate_ * t_);
  }
  double horizon() const { return t_; }
  double rate() const { return rate_; }

 private:
  double t_;
  double rate_;
};

inline ControlH control_h(const EstimatorConfig& cfg, double t) {
  return ControlH(t, cfg.c_hat * cfg.q());
}

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

struct GradientEstimate {
  Vec value;
  Vec stderr_;
  std::size_t n_paths = 0;
  EstimatorKind kind = EstimatorKind::Direct;
  double mean_bound_exponent = 0.0;
  double boundary_hit_fraction = 0.0;
  double flagged_fraction = 0.0;
  double max_h_defect = 0.0;   // local kind: max |h_end - 1| on unflagged paths
  double hh_moment = 0.0;      // local kind: mean of sum |h'|^2 ||Q||^2 ds
  std::size_t fallback_steps = 0;
};

namespace detail {

// Column-wise statistics of per-path vector samples stored row-major.
inline void vector_stats(const std::vector<double>& rows, int n, std::size_t paths, Vec& mean,
                         Vec& se) {
  mean.resize(n);
  se.resize(n);
  std::vector<double> col(paths);
  for (int i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < paths; ++k) col[k] = rows[k * n + static_cast<std::size_t>(i)];
    const SampleStats s = sample_stats(col);
    mean(i) = s.mean;
    se(i) = s.stderr_;
  }
}

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

struct EndpointVisitor {
  bool hit = false;
  std::size_t fallbacks = 0;
  void on_step(std::size_t, double, const Vec&, const Vec&, const StepResult& r) {
    if (!r.events.empty()) hit = true;
    if (r.fallback) ++fallbacks;
  }
};

struct TransportVisitor {
  const StripDomain& dom;
  const DriftField& z;
  double dt;
  double K;
  bool exact;
  TransportState s;
  bool hit = false;
  std::size_t fallbacks = 0;
  // weighted accumulation (disabled when control is null)
  const ControlH* control = nullptr;
  Vec acc = Vec();

  void on_step(std::size_t, double time, const Vec& before, const Vec& dB, const StepResult& r) {
    if (control) acc += control->h_prime(time) * (s.Q.transpose() * dB);
    transport_step(s, dom, z, before, r, dt, K, exact);
    if (!r.events.empty()) hit = true;
    if (r.fallback) ++fallbacks;
  }
};

}  // namespace detail

// Endpoints X_t of all paths, in path order.
inline std::vector<Vec> sample_endpoints(const StripDomain& dom, const DriftField& z,
                                         const SimConfig& sim, const Vec& start) {
  sim.validate();
  std::vector<Vec> out(sim.n_paths);
  for_each_path(sim.n_paths, sim.threads, [&](std::size_t i) {
    detail::EndpointVisitor v;
    out[i] = run_path(dom, z, sim, start, i, v);
  });
  return out;
}

inline Estimate mean_of_function(const std::vector<Vec>& endpoints,
                                 const std::function<double(const Vec&)>& g) {
  std::vector<double> vals(endpoints.size());
  for (std::size_t i = 0; i < endpoints.size(); ++i) vals[i] = g(endpoints[i]);
  const SampleStats s = sample_stats(vals);
  return {s.mean, s.stderr_, s.n};
}

inline Estimate estimate_semigroup(const StripDomain& dom, const DriftField& z,
                                   const SimConfig& sim, const TestFunction& f, const Vec& start) {
  return mean_of_function(sample_endpoints(dom, z, sim, start), f.value);
}

inline GradientEstimate estimate_gradient_direct(const StripDomain& dom, const DriftField& z,
                                                 const SimConfig& sim, const TestFunction& f,
                                                 const Vec& start, bool exact = false) {
  sim.validate();
  if (!f.neumann_ok)
    throw DomainError("direct gradient estimator needs a Neumann-compatible test function");
  const int n = dom.ambient();
  const double K = dissipativity_bound(dom, z);
  std::vector<double> rows(sim.n_paths * static_cast<std::size_t>(n));
  std::vector<double> expo(sim.n_paths), hit(sim.n_paths), fb(sim.n_paths);
  for_each_path(sim.n_paths, sim.threads, [&](std::size_t i) {
    detail::TransportVisitor v{dom, z, sim.step_size(), K, exact, TransportState::identity(n)};
    const Vec end = run_path(dom, z, sim, start, i, v);
    const Vec g = v.s.Q.transpose() * f.gradient(end);
    for (int c = 0; c < n; ++c) rows[i * n + static_cast<std::size_t>(c)] = g(c);
    expo[i] = v.s.bound_exponent;
    hit[i] = v.hit ? 1.0 : 0.0;
    fb[i] = static_cast<double>(v.fallbacks);
  });
  GradientEstimate out;
  detail::vector_stats(rows, n, sim.n_paths, out.value, out.stderr_);
  out.n_paths = sim.n_paths;
  out.kind = EstimatorKind::Direct;
  out.mean_bound_exponent = detail::mean_of(expo);
  out.boundary_hit_fraction = detail::mean_of(hit);
  out.fallback_steps = static_cast<std::size_t>(pairwise_sum(fb));
  return out;
}

inline GradientEstimate estimate_gradient_weighted(const StripDomain& dom, const DriftField& z,
                                                   const SimConfig& sim,
                                                   const EstimatorConfig& est,
                                                   const TestFunction& f, const Vec& start) {
  sim.validate();
  est.validate();
  if (!(sim.t > 0.0)) throw DomainError("weighted estimator needs t > 0");
  const int n = dom.ambient();
  const double K = dissipativity_bound(dom, z);
  const ControlH h = control_h(est, sim.t);
  std::vector<double> weights(sim.n_paths * static_cast<std::size_t>(n));
  std::vector<double> fvals(sim.n_paths), expo(sim.n_paths), hit(sim.n_paths), fb(sim.n_paths);
  for_each_path(sim.n_paths, sim.threads, [&](std::size_t i) {
    detail::TransportVisitor v{dom, z, sim.step_size(), K, est.exact_exponential,
                               TransportState::identity(n)};
    v.control = &h;
    v.acc = Vec::Zero(n);
    const Vec end = run_path(dom, z, sim, start, i, v);
    for (int c = 0; c < n; ++c)
      weights[i * n + static_cast<std::size_t>(c)] = v.acc(c) / std::numbers::sqrt2;
    fvals[i] = f.value(end);
    expo[i] = v.s.bound_exponent;
    hit[i] = v.hit ? 1.0 : 0.0;
    fb[i] = static_cast<double>(v.fallbacks);
  });
  const double centre = est.control_variate ? detail::mean_of(fvals) : 0.0;
  std::vector<double> rows(weights.size());
  for (std::size_t i = 0; i < sim.n_paths; ++i)
    for (int c = 0; c < n; ++c) {
      const std::size_t k = i * n + static_cast<std::size_t>(c);
      rows[k] = (fvals[i] - centre) * weights[k];
    }
  GradientEstimate out;
  detail::vector_stats(rows, n, sim.n_paths, out.value, out.stderr_);
  out.n_paths = sim.n_paths;
  out.kind = EstimatorKind::Weighted;
  out.mean_bound_exponent = detail::mean_of(expo);
  out.boundary_hit_fraction = detail::mean_of(hit);
  out.fallback_steps = static_cast<std::size_t>(pairwise_sum(fb));
  return out;
}

namespace detail {

// Adapted control h_s = (1/t) int_0^s g(X_r)^{-2} 1{r < tau(t)} dr with
// g = cos(pi W / (2 n)), Q stopped when X leaves B = {W <= n}.
struct LocalVisitor {
  const StripDomain& dom;
  const DriftField& z;
  const Lyapunov& lyap;
  double n_level;
  double horizon;
  bool time_change;
  double dt;
  double K;
  TransportState s;
  Vec acc;
  double clock = 0.0;  // T
  double h = 0.0;
  double hh = 0.0;
  bool done = false;
  bool flagged = false;
  bool hit = false;
  std::size_t fallbacks = 0;

  void on_step(std::size_t, double, const Vec& before, const Vec& dB, const StepResult& r) {
    if (!r.events.empty()) hit = true;
    if (r.fallback) ++fallbacks;
    if (done) return;
    const double w = lyap(dom, StripDomain::base_of(before)).w;
    if (w >= n_level) {
      // left B before tau(t): remaining control mass goes into this step
      flagged = true;
      done = true;
      const double dh = 1.0 - h;
      acc += (dh / dt) * (s.Q.transpose() * dB);
      h = 1.0;
      return;
    }
    double rate = 1.0;
    if (time_change) {
      const double g = std::cos(std::numbers::pi * w / (2.0 * n_level));
      rate = 1.0 / (g * g);
    }
    const double portion = std::min(dt, (horizon - clock) / rate);
    const double dh = portion * rate / horizon;
    acc += (dh / dt) * (s.Q.transpose() * dB);
    const double qn = s.norm();
    hh += (dh / dt) * (dh / dt) * qn * qn * dt;
    h += dh;
    clock += portion * rate;
    if (clock >= horizon * (1.0 - 1e-13)) {
      done = true;
      return;
    }
    transport_step(s, dom, z, before, r, dt, K, false);
  }
};

}  // namespace detail

inline GradientEstimate estimate_gradient_local(const StripDomain& dom, const DriftField& z,
                                                const SimConfig& sim, const EstimatorConfig& est,
                                                const TestFunction& f, const Vec& start) {
  sim.validate();
  est.validate();
  if (!(sim.t > 0.0)) throw DomainError("local estimator needs t > 0");
  const double r0 = est.r0 > 0.0 ? est.r0 : default_r0(dom);
  const Lyapunov lyap(r0);
  const double w_start = lyap(dom, StripDomain::base_of(start)).w;
  // unset level: 8 W(start), raised if needed to clear the admissibility threshold
  const double n_level = est.n_level > 0.0 ? est.n_level : std::max(8.0 * w_start, w_start + r0 + 2.0);
  if (!(n_level > w_start + r0 + 1.0))
    throw DomainError("n_level must exceed W(start) + r0 + 1 (= " +
                      std::to_string(w_start + r0 + 1.0) + ")");
  const int n = dom.ambient();
  const double K = dissipativity_bound(dom, z);
  std::vector<double> rows(sim.n_paths * static_cast<std::size_t>(n));
  std::vector<double> expo(sim.n_paths), hit(sim.n_paths), fb(sim.n_paths), flag(sim.n_paths),
      defect(sim.n_paths), hh(sim.n_paths);
  for_each_path(sim.n_paths, sim.threads, [&](std::size_t i) {
    detail::LocalVisitor v{dom, z, lyap, n_level, sim.t, est.time_change, sim.step_size(), K,
                           TransportState::identity(n), Vec::Zero(n)};
    const Vec end = run_path(dom, z, sim, start, i, v);
    const double fx = f.value(end);
    for (int c = 0; c < n; ++c)
      rows[i * n + static_cast<std::size_t>(c)] = fx * v.acc(c) / std::numbers::sqrt2;
    expo[i] = v.s.bound_exponent;
    hit[i] = v.hit ? 1.0 : 0.0;
    fb[i] = static_cast<double>(v.fallbacks);
    flag[i] = v.flagged ? 1.0 : 0.0;
    defect[i] = v.flagged ? 0.0 : std::abs(v.h - 1.0);
    hh[i] = v.hh;
  });
  GradientEstimate out;
  detail::vector_stats(rows, n, sim.n_paths, out.value, out.stderr_);
  out.n_paths = sim.n_paths;
  out.kind = EstimatorKind::Local;
  out.mean_bound_exponent = detail::mean_of(expo);
  out.boundary_hit_fraction = detail::mean_of(hit);
  out.flagged_fraction = detail::mean_of(flag);
  out.max_h_defect = *std::max_element(defect.begin(), defect.end());
  out.hh_moment = detail::mean_of(hh);
  out.fallback_steps = static_cast<std::size_t>(pairwise_sum(fb));
  return out;
}

// Central differences of P_t f with common random numbers: the paths started
// at start +- h e_i share their stream ids.
inline GradientEstimate finite_diff_gradient(const StripDomain& dom, const DriftField& z,
                                             const SimConfig& sim, const TestFunction& f,
                                             const Vec& start, double h_fd) {
  sim.validate();
  if (!(h_fd > 0.0)) throw ConfigError("finite-difference step must be positive");
  const int n = dom.ambient();
  for (int c = 0; c < n; ++c) {
    if (!dom.contains(start + h_fd * basis(n, c)) || !dom.contains(start - h_fd * basis(n, c)))
      throw DomainError("finite-difference stencil leaves the domain");
  }
  std::vector<double> rows(sim.n_paths * static_cast<std::size_t>(n));
  for_each_path(sim.n_paths, sim.threads, [&](std::size_t i) {
    for (int c = 0; c < n; ++c) {
      detail::EndpointVisitor vp, vm;
      const Vec ep = run_path(dom, z, sim, start + h_fd * basis(n, c), i, vp);
      const Vec em = run_path(dom, z, sim, start - h_fd * basis(n, c), i, vm);
      rows[i * n + static_cast<std::size_t>(c)] = (f.value(ep) - f.value(em)) / (2.0 * h_fd);
    }
  });
  GradientEstimate out;
  detail::vector_stats(rows, n, sim.n_paths, out.value, out.stderr_);
  out.n_paths = sim.n_paths;
  out.kind = EstimatorKind::FiniteDifference;
  return out;
}

inline GradientEstimate estimate_gradient(const StripDomain& dom, const DriftField& z,
                                          const SimConfig& sim, const EstimatorConfig& est,
                                          const TestFunction& f, const Vec& start) {
  switch (est.kind) {
    case EstimatorKind::Direct: return estimate_gradient_direct(dom, z, sim, f, start, est.exact_exponential);
    case EstimatorKind::Weighted: return estimate_gradient_weighted(dom, z, sim, est, f, start);
    case EstimatorKind::Local: return estimate_gradient_local(dom, z, sim, est, f, start);
    case EstimatorKind::FiniteDifference: return finite_diff_gradient(dom, z, sim, f, start, est.fd_step);
  }
  throw ConfigError("unknown estimator kind");
}

}  // namespace nstrip
