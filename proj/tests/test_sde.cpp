#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "nstrip/estimators.hpp"
#include "nstrip/sde.hpp"

using namespace nstrip;
using fixtures::v1;
using fixtures::v2;

namespace {

double ks_distance(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  return d;
}

}  // namespace

TEST(Step, InsideProposalKept) {
  const auto dom = fixtures::flat_strip();
  const auto r = step(dom, *zero_drift(2), v2(0, 0.5), v2(0.01, 0.02), 1e-3);
  EXPECT_EQ(r.face, 0);
  EXPECT_EQ(r.dl(), 0.0);
  EXPECT_NEAR((r.state - v2(0.01 * std::sqrt(2.0), 0.5 + 0.02 * std::sqrt(2.0))).norm(), 0.0, 1e-15);
}

TEST(Step, ProjectionOvershoot) {
  const auto dom = fixtures::flat_strip();
  const auto r = step(dom, *zero_drift(2), v2(0, 0.9), v2(0, 0.4 / std::sqrt(2.0)), 1e-3, Scheme::Projection);
  EXPECT_EQ(r.face, 2);
  EXPECT_NEAR(r.state(1), 1.0, 1e-12);
  EXPECT_NEAR(r.dl2, 0.3, 1e-12);
  EXPECT_EQ(r.dl1, 0.0);
}

TEST(Step, ReflectionOvershoot) {
  const auto dom = fixtures::flat_strip();
  const auto r = step(dom, *zero_drift(2), v2(0, 0.9), v2(0, 0.4 / std::sqrt(2.0)), 1e-3, Scheme::Reflection);
  EXPECT_EQ(r.face, 2);
  EXPECT_NEAR(r.state(1), 0.7, 1e-12);
  EXPECT_NEAR(r.dl2, 0.6, 1e-12);
}

TEST(Step, CurvedProjectionLiesAlongNormal) {
  const auto dom = fixtures::exp_strip();
  RandomStream rng(5, 0);
  for (int k = 0; k < 100; ++k) {
    const Vec s = v2(-1.0 + 2.0 * rng.uniform(), 0.0);
    Vec dB = v2(0.3 * rng.normal(), 0.8 + 0.2 * rng.uniform());
    const Vec proposal = s + std::sqrt(2.0) * dB;
    const auto r = step(dom, *zero_drift(2), s, dB, 1e-3, Scheme::Projection);
    if (r.face == 0) continue;
    const Vec n = dom.inward_normal(dom.boundary_point(StripDomain::base_of(r.state), r.face));
    EXPECT_NEAR((r.state - r.dl() * n - proposal).norm(), 0.0, 1e-8);
  }
}

TEST(Simulate, ZeroHorizon) {
  SimConfig cfg;
  cfg.t = 0.0;
  const auto rec = simulate(fixtures::flat_strip(), *zero_drift(2), cfg, v2(0, 0.5));
  EXPECT_EQ(rec.states.size(), 1u);
  EXPECT_EQ(rec.local_time(), 0.0);
}

TEST(Simulate, LedgerInvariants) {
  const auto dom = fixtures::exp_strip();
  SimConfig cfg;
  cfg.t = 1.0;
  cfg.dt = 1e-3;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto rec = simulate(dom, *zero_drift(2), cfg, v2(0.5, 0.0), i);
    ASSERT_EQ(rec.states.size(), cfg.steps() + 1);
    for (const auto& s : rec.states) EXPECT_TRUE(dom.contains(s, 1e-12));
    for (std::size_t k = 0; k < rec.dl1.size(); ++k) {
      EXPECT_GE(rec.dl1[k], 0.0);
      EXPECT_GE(rec.dl2[k], 0.0);
      if (rec.dl1[k] + rec.dl2[k] > 0.0) {
        EXPECT_NE(rec.faces[k], 0);
      }
    }
  }
}

TEST(Simulate, FlatMarginalMatchesTransitionDensity) {
  const auto dom = fixtures::flat_strip();
  SimConfig cfg;
  cfg.t = 0.1;
  cfg.dt = 1e-3;
  cfg.n_paths = 100000;
  cfg.seed = 42;
  const auto ends = sample_endpoints(dom, *zero_drift(2), cfg, v2(0, 0.3));
  std::vector<double> ys;
  for (const auto& e : ends) ys.push_back(e(1));
  const double d = ks_distance(ys, [](double y) { return fixtures::flat_cdf(0.1, 0.3, y); });
  EXPECT_LT(d, 0.01);
}

TEST(Simulate, FlatConvergesToUniform) {
  const auto dom = fixtures::flat_strip();
  SimConfig cfg;
  cfg.t = 5.0;
  cfg.dt = 5e-3;
  cfg.n_paths = 20000;
  cfg.seed = 8;
  const auto ends = sample_endpoints(dom, *zero_drift(2), cfg, v2(0, 0.1));
  std::vector<double> ys;
  for (const auto& e : ends) ys.push_back(e(1));
  EXPECT_LT(ks_distance(ys, [](double y) { return y; }), 0.02);
}

TEST(Simulate, LocalTimeStableUnderStepHalving) {
  const auto dom = fixtures::flat_strip();
  auto mean_l = [&](double dt) {
    SimConfig cfg;
    cfg.t = 1.0;
    cfg.dt = dt;
    cfg.n_paths = 4000;
    cfg.seed = 77;
    const auto recs = batch_simulate(dom, *zero_drift(2), cfg, v2(0, 0.5));
    std::vector<double> l;
    for (const auto& r : recs) l.push_back(r.local_time());
    return sample_stats(l).mean;
  };
  const double a = mean_l(2e-3), b = mean_l(1e-3);
  EXPECT_LT(std::abs(a - b) / b, 0.05) << a << " vs " << b;
}

TEST(Simulate, LyapunovGrowthRateStable) {
  // E W(X_t) <= W(X_0) e^{Ct}: the fitted C should not move much under dt -> dt/2
  const auto dom = fixtures::exp_strip();
  const Lyapunov lyap(default_r0(dom));
  const Vec start = v2(1.0, 0.0);
  const double w_start = lyap(dom, v1(1.0)).w;
  auto fitted = [&](double dt) {
    double c = 0.0;
    for (double t : {0.5, 1.0, 2.0}) {
      SimConfig cfg;
      cfg.t = t;
      cfg.dt = dt;
      cfg.n_paths = 4000;
      cfg.seed = 3;
      const auto ends = sample_endpoints(dom, *zero_drift(2), cfg, start);
      const auto m = mean_of_function(ends, [&](const Vec& p) { return lyap(dom, StripDomain::base_of(p)).w; });
      c = std::max(c, std::log(m.value / w_start) / t);
    }
    return c;
  };
  const double a = fitted(4e-3), b = fitted(2e-3);
  EXPECT_TRUE(std::isfinite(a) && std::isfinite(b));
  EXPECT_LE(std::abs(a - b), 0.25 * std::max(std::abs(a), std::abs(b)) + 0.05) << a << " vs " << b;
}

TEST(Batch, Deterministic) {
  const auto dom = fixtures::exp_strip();
  SimConfig cfg;
  cfg.t = 0.3;
  cfg.n_paths = 20;
  cfg.seed = 123;
  const auto a = batch_simulate(dom, *zero_drift(2), cfg, v2(0, 0));
  cfg.threads = 3;
  const auto b = batch_simulate(dom, *zero_drift(2), cfg, v2(0, 0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].states.size(), b[i].states.size());
    for (std::size_t k = 0; k < a[i].states.size(); ++k) EXPECT_EQ(a[i].states[k], b[i].states[k]);
    EXPECT_EQ(a[i].dl1, b[i].dl1);
    EXPECT_EQ(a[i].dl2, b[i].dl2);
  }
}

TEST(Batch, SinglePathEqualsSimulate) {
  const auto dom = fixtures::exp_strip();
  SimConfig cfg;
  cfg.t = 0.3;
  cfg.n_paths = 1;
  const auto a = batch_simulate(dom, *zero_drift(2), cfg, v2(0, 0));
  const auto b = simulate(dom, *zero_drift(2), cfg, v2(0, 0));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].dl1, b.dl1);
  EXPECT_EQ(a[0].states.back(), b.states.back());
}

TEST(Batch, DisjointSeedsAgree) {
  const auto dom = fixtures::flat_strip();
  auto run = [&](std::uint64_t seed) {
    SimConfig cfg;
    cfg.t = 0.2;
    cfg.n_paths = 20000;
    cfg.seed = seed;
    return mean_of_function(sample_endpoints(dom, *zero_drift(2), cfg, v2(0, 0.25)),
                            [](const Vec& p) { return std::cos(std::numbers::pi * p(1)); });
  };
  const auto a = run(1), b = run(2);
  EXPECT_LT(std::abs(a.value - b.value), 3.0 * std::hypot(a.stderr_, b.stderr_));
}

TEST(Batch, ErrorsCarryPathIndices) {
  const auto dom = fixtures::flat_strip();
  SimConfig cfg;
  cfg.t = 0.1;
  cfg.n_paths = 3;
  EXPECT_THROW(batch_simulate(dom, *zero_drift(2), cfg, v2(0, 1.5)), Error);
  try {
    for_each_path(4, 1, [](std::size_t i) {
      if (i % 2) throw Error("boom");
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("path 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("path 3"), std::string::npos);
  }
}

TEST(SimConfigTest, Validation) {
  SimConfig c;
  c.dt = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SimConfig{};
  c.t = 0.1;
  c.dt = 0.2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SimConfig{};
  c.n_paths = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Drift, DissipativityBoundHolds) {
  const auto dom = fixtures::exp_strip();
  const RadialDecayDrift z(1, 0.7);
  const double K = dissipativity_bound(dom, z);
  RandomStream rng(1, 0);
  for (int k = 0; k < 2000; ++k) {
    const double x = -8.0 + 16.0 * rng.uniform();
    Vec v = v2(rng.normal(), rng.normal());
    const Vec p = v2(x, 0.0);
    EXPECT_LE(v.dot(z.jacobian(p) * v), K * v.squaredNorm() + 1e-8);
  }
}

TEST(Drift, ExpressionJacobianMatchesLinear) {
  Mat a(2, 2);
  a << -1.0, 0.5, 0.2, -0.3;
  Vec b = v2(0.1, 0.0);
  const LinearDrift lin(a, b);
  const ExpressionDrift ex(1, {"-x + 0.5*y + 0.1", "0.2*x - 0.3*y"});
  const Vec p = v2(0.4, -0.2);
  EXPECT_NEAR((lin.value(p) - ex.value(p)).norm(), 0.0, 1e-14);
  EXPECT_NEAR((lin.jacobian(p) - ex.jacobian(p)).norm(), 0.0, 1e-8);
}
