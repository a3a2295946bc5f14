#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "nstrip/harness.hpp"

using namespace nstrip;
using fixtures::v2;

namespace {

const double kPi = std::numbers::pi;

std::shared_ptr<const MappedGrid> exp_grid(int refine = 1) {
  return std::make_shared<const MappedGrid>(fixtures::exp_strip(), 7.5, 60 * refine, 12 * refine);
}

OracleSemigroup exp_oracle(int refine = 1) { return OracleSemigroup(exp_grid(refine), zero_drift(2)); }

}  // namespace

TEST(Factors, SmallConstantLimits) {
  for (double t : {0.1, 1.0, 3.0}) {
    EXPECT_DOUBLE_EQ(harnack_factor(0.0, t), 1.0 / t);
    EXPECT_NEAR(harnack_factor(1e-7, t), 1.0 / t, 1e-5 / t);
    EXPECT_DOUBLE_EQ(kernel_factor(0.0, t), 2.0 / t);
    EXPECT_DOUBLE_EQ(poincare_factor(0.0, t), t);
    EXPECT_NEAR(poincare_factor(1e-7, t), t, 1e-5);
    EXPECT_DOUBLE_EQ(gradient_factor(0.0, 2.0, t), 1.0 / (2.0 * t));
    EXPECT_NEAR(gradient_factor(1e-7, 1.5, t), 1.0 / t, 1e-5 / t);
    double prev = 0.0;
    for (double c : {0.0, 0.1, 0.5, 1.0, 3.0}) {
      const double h = harnack_factor(c, t);
      EXPECT_GE(h, prev);
      prev = h;
    }
  }
  EXPECT_NEAR(harnack_factor(1.0, 1.0), std::exp(1.0) / (1.0 - std::exp(-1.0)), 1e-14);
}

TEST(Factors, MinimalConstant) {
  auto lin = [](double c) { return 1.0 + c; };
  EXPECT_EQ(minimal_constant(lin, 0.5), 0.0);
  EXPECT_NEAR(minimal_constant(lin, 3.5), 2.5, 1e-10);
  EXPECT_TRUE(std::isinf(minimal_constant(lin, 5e3)));
  EXPECT_TRUE(std::isinf(minimal_constant(lin, std::numeric_limits<double>::infinity())));
  const double c = minimal_constant([](double k) { return harnack_factor(k, 0.5); }, 7.0);
  EXPECT_NEAR(harnack_factor(c, 0.5), 7.0, 1e-9);
  EXPECT_TRUE(constants_stable(0.0, 0.0, 0.1));
  EXPECT_TRUE(constants_stable(1.0, 1.09, 0.1));
  EXPECT_FALSE(constants_stable(1.0, 1.2, 0.1));
  EXPECT_FALSE(constants_stable(1.0, std::numeric_limits<double>::infinity(), 0.1));
}

TEST(Moments, AffineFitAndLogMeanExp) {
  const auto f = fit_affine(1.0, {0.5, 1.0, 2.0}, {1.25, 1.5, 2.0});
  EXPECT_NEAR(f.a, 1.0, 1e-14);
  EXPECT_NEAR(f.b, 0.5, 1e-14);
  EXPECT_NEAR(f.r2, 1.0, 1e-14);
  EXPECT_NEAR(log_mean_exp({0.0, std::log(3.0)}, 1.0), std::log(2.0), 1e-14);
  EXPECT_NEAR(log_mean_exp({1000.0, 1000.0}, 2.0), 2000.0, 1e-10);
}

TEST(Moments, TrivialRowsAndMonotonicity) {
  const auto dom = fixtures::exp_strip();
  SimConfig sim;
  sim.dt = 2e-3;
  sim.n_paths = 1000;
  MomentOptions opt;
  opt.weight = MomentWeight::Indicator;
  opt.level = 1e6;
  opt.bootstrap = 50;
  const std::vector<double> lambdas = {0.0, 0.25, 0.5, 1.0};
  const std::vector<double> ts = {0.0, 0.5, 1.0};
  const auto curve = local_time_moment(dom, *zero_drift(2), sim, v2(0.0, 0.0), lambdas, ts, opt);
  ASSERT_EQ(curve.cells.size(), lambdas.size() * ts.size());
  for (const auto& c : curve.cells)
    if (c.lambda == 0.0 || c.t == 0.0) {
      EXPECT_EQ(c.log_moment, 0.0);
      EXPECT_EQ(c.stderr_, 0.0);
    }
  auto at = [&](std::size_t li, std::size_t m) { return curve.cells[li * ts.size() + m].log_moment; };
  for (std::size_t li = 0; li < lambdas.size(); ++li)
    for (std::size_t m = 0; m < ts.size(); ++m) {
      if (li > 0) {
        EXPECT_GE(at(li, m), at(li - 1, m));
      }
      if (m > 0) {
        EXPECT_GE(at(li, m), at(li, m - 1));
      }
    }
  EXPECT_GT(curve.c_fit, 0.0);
}

TEST(Moments, FlatIndicatorAffineInTime) {
  const auto dom = fixtures::flat_strip();
  SimConfig sim;
  sim.dt = 2e-3;
  sim.n_paths = 2000;
  sim.seed = 3;
  MomentOptions opt;
  opt.weight = MomentWeight::Indicator;
  opt.level = 1e6;
  opt.bootstrap = 50;
  const auto curve =
      local_time_moment(dom, *zero_drift(2), sim, v2(0.0, 0.5), {0.5}, {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0}, opt);
  ASSERT_EQ(curve.fits.size(), 1u);
  EXPECT_GT(curve.fits[0].r2, 0.99);
  EXPECT_LT(curve.fits[0].residual_rel, 0.05);
  EXPECT_EQ(curve.low_ess_cells, 0u);
}

TEST(Moments, EffectiveSampleSizeGuard) {
  const auto dom = fixtures::flat_strip();
  SimConfig sim;
  sim.dt = 2e-3;
  sim.n_paths = 500;
  MomentOptions opt;
  opt.weight = MomentWeight::Indicator;
  opt.level = 1e6;
  opt.bootstrap = 0;
  const auto curve = local_time_moment(dom, *zero_drift(2), sim, v2(0.0, 0.5), {100.0}, {1.0}, opt);
  EXPECT_EQ(curve.low_ess_cells, 1u);
  EXPECT_TRUE(curve.cells[0].low_ess);
  EXPECT_TRUE(std::isfinite(curve.cells[0].log_moment));
}

TEST(Moments, GridValidation) {
  const auto dom = fixtures::flat_strip();
  SimConfig sim;
  sim.dt = 2e-3;
  sim.n_paths = 10;
  EXPECT_THROW(local_time_moment(dom, *zero_drift(2), sim, v2(0, 0.5), {0.5}, {}), ConfigError);
  EXPECT_THROW(local_time_moment(dom, *zero_drift(2), sim, v2(0, 0.5), {0.5}, {0.0011}), ConfigError);
  EXPECT_THROW(local_time_moment(dom, *zero_drift(2), sim, v2(0, 0.5), {-1.0}, {0.5}), ConfigError);
}

TEST(GradientBounds, ConstantFunctionGivesZero) {
  const auto dom = fixtures::flat_strip();
  SimConfig sim;
  sim.n_paths = 500;
  const auto r = gradient_bound_check(dom, *zero_drift(2), sim, {constant_function(2, 2.0)}, {v2(0, 0.5)}, {0.1, 0.5});
  for (const auto* rep : {&r.first, &r.second, &r.variance}) {
    EXPECT_EQ(rep->fitted_constant, 0.0) << rep->id;
    EXPECT_TRUE(rep->holds);
    for (const auto& row : rep->rows) EXPECT_EQ(row.lhs, 0.0);
  }
}

TEST(GradientBounds, FlatVarianceRatioMatchesClosedForm) {
  // At y = 1/2: |grad P_t f|^2 / Var = 2 pi^2 e^{-2 pi^2 t} / (1 - e^{-4 pi^2 t}) ~ 1/(2t).
  const auto dom = fixtures::flat_strip();
  const auto f = strip_cosine(dom, 1);
  SimConfig sim;
  sim.n_paths = 20000;
  sim.dt = 5e-4;
  sim.seed = 21;
  GradientBoundOptions opt;
  opt.z_score = 0.0;
  opt.estimator.kind = EstimatorKind::Direct;
  const std::vector<double> ts = {0.02, 0.05, 0.1};
  const auto r = gradient_bound_check(dom, *zero_drift(2), sim, {f}, {v2(0, 0.5)}, ts, opt);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double t = ts[k];
    const double ratio = 2.0 * kPi * kPi * std::exp(-2.0 * kPi * kPi * t) / -std::expm1(-4.0 * kPi * kPi * t);
    EXPECT_NEAR(r.variance.rows[k].constant, ratio * t, 0.05 * ratio * t) << t;
  }
  EXPECT_NEAR(r.variance.rows[0].constant, 0.5, 0.05);
  EXPECT_TRUE(r.variance.holds);
  for (const auto& row : r.variance.rows) EXPECT_GE(row.slack(), -1e-12 * row.lhs);
}

TEST(Poincare, ConstantFunctionTrivial) {
  auto sg = [](const std::function<double(const Vec&)>& g, double) { return g(v2(0, 0.5)); };
  const auto r = poincare_check(sg, constant_function(2, 3.0), {0.1, 1.0});
  EXPECT_EQ(r.report.fitted_constant, 0.0);
  for (const auto& row : r.report.rows) {
    EXPECT_NEAR(row.lhs, 0.0, 1e-12);
    EXPECT_EQ(row.rhs, 0.0);
  }
}

TEST(Poincare, FlatEigenfunctionCurve) {
  GridOptions go;
  go.allow_wide_ends = true;
  SolveOptions so;
  so.dt_max = 2e-5;
  const OracleSemigroup oracle(
      std::make_shared<const MappedGrid>(fixtures::flat_strip(), 1.0, 4, 128, go), zero_drift(2), so);
  const auto f = strip_cosine(fixtures::flat_strip(), 1);
  const double y0 = 0.5;
  const Vec x = v2(0.0, y0);
  auto sg = [&](const std::function<double(const Vec&)>& g, double t) { return oracle.at(g, t, x); };
  const std::vector<double> ts = {0.005, 0.01, 0.02, 0.05, 0.1};
  const auto r = poincare_check(sg, f, ts);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double e4 = std::exp(-4.0 * kPi * kPi * ts[k]), e2 = std::exp(-kPi * kPi * ts[k]);
    const double c2 = std::cos(2.0 * kPi * y0), c1 = std::cos(kPi * y0);
    const double var = 0.5 * (1.0 + e4 * c2) - e2 * e2 * c1 * c1;
    const double gg = kPi * kPi * 0.5 * (1.0 - e4 * c2);
    EXPECT_NEAR(r.report.rows[k].lhs, var, 1e-4) << ts[k];
    EXPECT_NEAR(r.ratio[k], var / gg, 1e-4) << ts[k];
  }
  // short-time slope of the ratio: variance ~ 2 t |grad f|^2
  EXPECT_NEAR(r.ratio[0] / ts[0], 2.0, 0.1);
  EXPECT_TRUE(r.shape.increasing);
  EXPECT_TRUE(r.report.holds);
  for (const auto& row : r.report.rows) EXPECT_GE(row.slack(), -1e-9);
}

TEST(LogHarnack, JensenAndConstantCases) {
  const auto dom = fixtures::exp_strip();
  const auto oracle = exp_oracle();
  const std::vector<PairCell> cells = {{v2(0.0, 0.0), v2(0.0, 0.0), 0.5}, {v2(1.0, 0.1), v2(1.0, 0.1), 1.0}};
  const auto r = log_harnack_check(oracle, dom, cells, {tanh_exponential(dom, 1.0), tanh_exponential(dom, 4.0)}, 0.02);
  ASSERT_EQ(r.jensen_slack.size(), 4u);
  for (double s : r.jensen_slack) EXPECT_GE(s, -1e-3);
  EXPECT_TRUE(r.report.holds);

  const auto rc = log_harnack_check(oracle, dom, {{v2(0.0, 0.0), v2(1.0, 0.0), 0.5}}, {constant_function(2, 2.0)}, 0.02);
  EXPECT_EQ(rc.report.fitted_constant, 0.0);
  EXPECT_NEAR(rc.report.rows[0].lhs, std::log(2.0), 1e-10);
  EXPECT_GE(rc.report.rows[0].slack(), 0.0);
}

TEST(LogHarnack, BumpAwayFromXHasPositiveSlack) {
  const auto dom = fixtures::exp_strip();
  const auto oracle = exp_oracle();
  TestFunction f = shifted(bump_function(dom, v2(1.5, 0.0), 0.2, 5.0), 1.0);
  const auto r = log_harnack_check(oracle, dom, {{v2(-1.0, 0.0), v2(1.2, 0.0), 0.2}, {v2(-1.0, 0.0), v2(1.2, 0.0), 1.0}},
                                   {f}, 0.02);
  for (const auto& row : r.report.rows) {
    EXPECT_GT(row.rhs - row.lhs, 0.0);
    EXPECT_EQ(row.constant, 0.0);
  }
}

TEST(LogHarnack, ConstantAndUsageStableUnderRefinement) {
  // f = exp(4 tanh x) is larger near x than near y; the c -> 0 bound still holds
  // here, and the share of it in use must be resolution independent.
  const auto dom = fixtures::exp_strip();
  const std::vector<PairCell> cells = {{v2(1.0, 0.1), v2(0.0, 0.0), 0.25}, {v2(2.0, 0.0), v2(0.0, 0.2), 0.5}};
  const auto suite = std::vector<TestFunction>{tanh_exponential(dom, 4.0)};
  const auto a = log_harnack_check(exp_oracle(1), dom, cells, suite, 0.02);
  const auto b = log_harnack_check(exp_oracle(2), dom, cells, suite, 0.01);
  EXPECT_TRUE(std::isfinite(a.report.fitted_constant));
  EXPECT_TRUE(constants_stable(a.report.fitted_constant, b.report.fitted_constant, 0.1))
      << a.report.fitted_constant << " vs " << b.report.fitted_constant;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    EXPECT_GT(a.report.rows[k].usage, 0.1);
    EXPECT_NEAR(a.report.rows[k].usage, b.report.rows[k].usage, 0.1 * b.report.rows[k].usage);
    EXPECT_EQ(a.report.rows[k].constant > 0.0, a.report.rows[k].usage > 1.0);
    EXPECT_GE(a.report.rows[k].slack(), -1e-12);
  }
}

TEST(EntropyKernel, DiagonalAndOverlap) {
  const auto dom = fixtures::exp_strip();
  const auto oracle = exp_oracle(2);
  const std::vector<PairCell> cells = {{v2(0.0, 0.0), v2(0.0, 0.0), 0.3}, {v2(-1.0, 0.1), v2(0.5, 0.0), 0.5},
                                       {v2(2.0, 0.0), v2(0.0, 0.3), 1.0}};
  const auto r = entropy_and_kernel_checks(oracle, dom, cells, 0.02);
  ASSERT_EQ(r.cells.size(), 3u);
  EXPECT_NEAR(r.cells[0].entropy, 0.0, 1e-12);
  EXPECT_GE(r.min_overlap, 1.0 - 1e-3);
  for (const auto& kc : r.cells) {
    EXPECT_GE(kc.overlap_x, 1.0 - 1e-3);
    EXPECT_GE(kc.entropy, -1e-3);
    EXPECT_TRUE(std::isfinite(kc.c_entropy));
    EXPECT_TRUE(std::isfinite(kc.c_kernel));
  }
  EXPECT_TRUE(r.kernel.holds);
  EXPECT_TRUE(r.entropy.holds);
  for (const auto& row : r.entropy.rows) EXPECT_GE(row.slack(), -1e-12);
  for (const auto& row : r.kernel.rows) EXPECT_GE(row.slack(), -1e-12);
}
