#pragma once

// Euler schemes for the reflected diffusion d(X,Y) = sqrt(2) dB + Z dt + N dl
// on a strip, with a per-face local-time ledger and boundary-event log.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nstrip/drift.hpp"
#include "nstrip/geometry.hpp"
#include "nstrip/parallel.hpp"
#include "nstrip/rng.hpp"

namespace nstrip {

enum class Scheme {
  Reflection,  // fold the overshoot back across the tangent plane, dl = 2 dist
  Projection,  // project the overshoot onto D, dl = dist
};

inline const char* scheme_name(Scheme s) { return s == Scheme::Reflection ? "reflection" : "projection"; }

struct SimConfig {
  double t = 1.0;
  double dt = 1e-3;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::Reflection;
  // Brownian-bridge boundary contact test for steps that stay inside D.
  bool bridge = true;
  int threads = 1;

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(t >= 0.0)) throw ConfigError("t must be non-negative");
    if (t > 0.0 && dt > t * (1.0 + 1e-12)) throw ConfigError("dt must not exceed t");
    if (n_paths < 1) throw ConfigError("n_paths must be at least 1");
    if (threads < 1) throw ConfigError("threads must be at least 1");
  }

  // Uniform grid ending exactly at t.
  std::size_t steps() const {
    if (t == 0.0) return 0;
    return static_cast<std::size_t>(std::max(1.0, std::round(t / dt)));
  }
  double step_size() const { return steps() == 0 ? 0.0 : t / static_cast<double>(steps()); }
};

// One boundary interaction inside a step. dl == 0 marks a bridge contact.
struct BoundaryEvent {
  int face = 0;
  Vec base;
  double dl = 0.0;
};

struct StepResult {
  Vec state;
  double dl1 = 0.0;
  double dl2 = 0.0;
  int face = 0;  // 0 none, 1 or 2, 3 when both faces were hit in the step
  bool fallback = false;
  std::vector<BoundaryEvent> events;

  double dl() const { return dl1 + dl2; }
};

namespace detail {
inline void add_event(StepResult& r, int face, const Vec& base, double dl) {
  r.events.push_back({face, base, dl});
  (face == 1 ? r.dl1 : r.dl2) += dl;
  r.face = r.face == 0 ? face : (r.face == face ? face : 3);
}
}  // namespace detail

// Advances `state` by one step. The proposal is state + sqrt(2) dB + Z dt; an
// exit is handled by the selected scheme. Reflection repeats up to 8 times and
// then projects.
inline StepResult step(const StripDomain& dom, const DriftField& z, const Vec& state,
                       const Vec& dB, double dt, Scheme scheme = Scheme::Reflection) {
  StepResult r;
  Vec q = state + std::sqrt(2.0) * dB;
  if (!z.is_zero()) q += dt * z.value(state);
  if (dom.contains(q)) {
    r.state = q;
    return r;
  }
  if (scheme == Scheme::Reflection) {
    for (int it = 0; it < 8; ++it) {
      const Projection pr = dom.project(q);
      if (pr.face == 0) {
        r.state = q;
        return r;
      }
      const BoundaryPoint bp = dom.boundary_point(StripDomain::base_of(pr.point), pr.face);
      detail::add_event(r, pr.face, bp.base, 2.0 * pr.dist);
      q = pr.point + pr.dist * dom.inward_normal(bp);
    }
    if (dom.contains(q)) {
      r.state = q;
      return r;
    }
    r.fallback = true;
  }
  const Projection pr = dom.project(q);
  detail::add_event(r, pr.face, StripDomain::base_of(pr.point), pr.dist);
  r.state = pr.point;
  return r;
}

// Signed distance proxy to face `face` for an interior point.
inline double face_gap(const StripDomain& dom, const Vec& p, int face) {
  const Vec x = StripDomain::base_of(p);
  const double y = p(p.size() - 1);
  const ScalarSurface& s = dom.surface(face);
  const double g = std::sqrt(1.0 + s.gradient(x).squaredNorm());
  return face == 1 ? (y - s.value(x)) / g : (s.value(x) - y) / g;
}

// For a step with both endpoints inside D, decide with one uniform whether the
// Brownian bridge between them touched a face (touch probability
// exp(-g0 g1 / dt) per face for noise variance 2 dt). Returns 0, 1 or 2.
inline int bridge_contact(const StripDomain& dom, const Vec& before, const Vec& after, double dt,
                          double u) {
  const double p1 = std::exp(-std::max(0.0, face_gap(dom, before, 1)) *
                             std::max(0.0, face_gap(dom, after, 1)) / dt);
  const double p2 = std::exp(-std::max(0.0, face_gap(dom, before, 2)) *
                             std::max(0.0, face_gap(dom, after, 2)) / dt);
  if (u < p1) return 1;
  if (u < p1 + p2) return 2;
  return 0;
}

struct PathEvent {
  std::size_t step = 0;
  int face = 0;
  Vec contact;
  Vec normal;
  double dl = 0.0;
};

struct PathRecord {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> increments;  // dB_k for step k (states[k] -> states[k+1])
  std::vector<double> dl1;
  std::vector<double> dl2;
  std::vector<int> faces;
  std::vector<PathEvent> events;
  std::size_t fallbacks = 0;

  double local_time() const {
    double s = 0.0;
    for (std::size_t k = 0; k < dl1.size(); ++k) s += dl1[k] + dl2[k];
    return s;
  }
};

// Drives one path. The visitor receives
//   on_step(k, s_k, before, dB, result)
// after each step, with s_k the time at the start of the step. The RNG stream
// is (seed, path index); each step draws d+1 normals and, when the bridge test
// is on, one uniform.
template <class Visitor>
inline Vec run_path(const StripDomain& dom, const DriftField& z, const SimConfig& cfg,
                    const Vec& start, std::uint64_t index, Visitor& visitor) {
  const int n = dom.ambient();
  if (start.size() != n) throw DomainError("start has wrong dimension");
  if (!dom.contains(start, 1e-12)) throw DomainError("start point outside the domain");
  RandomStream rng(cfg.seed, index);
  const std::size_t steps = cfg.steps();
  const double h = cfg.step_size();
  const double sq = std::sqrt(h);
  Vec state = start;
  Vec dB(n);
  for (std::size_t k = 0; k < steps; ++k) {
    for (int i = 0; i < n; ++i) dB(i) = sq * rng.normal();
    StepResult r = step(dom, z, state, dB, h, cfg.scheme);
    if (cfg.bridge) {
      const double u = rng.uniform();
      if (r.events.empty()) {
        const int face = bridge_contact(dom, state, r.state, h, u);
        if (face != 0) {
          detail::add_event(r, face, StripDomain::base_of(state), 0.0);
        }
      }
    }
    visitor.on_step(k, static_cast<double>(k) * h, state, dB, r);
    state = r.state;
  }
  return state;
}

struct RecordingVisitor {
  const StripDomain& dom;
  PathRecord& rec;
  double h;

  void on_step(std::size_t k, double s, const Vec&, const Vec& dB, const StepResult& r) {
    rec.times.push_back(s + h);
    rec.increments.push_back(dB);
    rec.dl1.push_back(r.dl1);
    rec.dl2.push_back(r.dl2);
    rec.faces.push_back(r.face);
    rec.states.push_back(r.state);
    if (r.fallback) ++rec.fallbacks;
    for (const auto& e : r.events) {
      const BoundaryPoint bp = dom.boundary_point(e.base, e.face);
      rec.events.push_back({k, e.face, bp.position, dom.inward_normal(bp), e.dl});
    }
  }
};

inline PathRecord simulate(const StripDomain& dom, const DriftField& z, const SimConfig& cfg,
                           const Vec& start, std::uint64_t index = 0) {
  cfg.validate();
  PathRecord rec;
  rec.times.reserve(cfg.steps() + 1);
  rec.times.push_back(0.0);
  rec.states.push_back(start);
  RecordingVisitor v{dom, rec, cfg.step_size()};
  run_path(dom, z, cfg, start, index, v);
  return rec;
}

// Runs body(index) for every path in parallel. Exceptions are collected per
// path and rethrown together with the failing indices.
inline void for_each_path(std::size_t n_paths, int threads,
                          const std::function<void(std::size_t)>& body) {
  std::vector<std::string> errors(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t i) {
    try {
      body(i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::string msg;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    if (errors[i].empty()) continue;
    if (failed < 5) msg += "\n  path " + std::to_string(i) + ": " + errors[i];
    ++failed;
  }
  if (failed) throw Error(std::to_string(failed) + " path(s) failed:" + msg);
}

inline std::vector<PathRecord> batch_simulate(const StripDomain& dom, const DriftField& z,
                                              const SimConfig& cfg, const Vec& start) {
  cfg.validate();
  std::vector<PathRecord> out(cfg.n_paths);
  for_each_path(cfg.n_paths, cfg.threads,
                [&](std::size_t i) { out[i] = simulate(dom, z, cfg, start, i); });
  return out;
}

}  // namespace nstrip
