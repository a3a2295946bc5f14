#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "nstrip/estimators.hpp"
#include "nstrip/oracle.hpp"

using namespace nstrip;
using fixtures::v2;

namespace {

const double kPi = std::numbers::pi;

std::shared_ptr<const MappedGrid> flat_grid(int n_x, int n_v) {
  GridOptions go;
  go.allow_wide_ends = true;
  return std::make_shared<const MappedGrid>(fixtures::flat_strip(), 1.0, n_x, n_v, go);
}

std::shared_ptr<const MappedGrid> exp_grid(int refine = 1) {
  return std::make_shared<const MappedGrid>(fixtures::exp_strip(), 7.5, 60 * refine, 12 * refine);
}

SolveOptions capped(double dt_max) {
  SolveOptions so;
  so.dt_max = dt_max;
  return so;
}

}  // namespace

TEST(Grid, RejectsWideTruncation) {
  EXPECT_THROW(MappedGrid(fixtures::exp_strip(), 3.0, 30, 8), DomainError);
  EXPECT_THROW(MappedGrid(fixtures::flat_strip(), 3.0, 30, 8), DomainError);
  EXPECT_NO_THROW(exp_grid());
  EXPECT_THROW(MappedGrid(fixtures::exp_strip(), 7.5, 2, 8), DomainError);
}

TEST(Grid, AreaMatchesWidthIntegral) {
  const auto g = exp_grid(2);
  double area = 0.0;
  const int m = 200000;
  for (int k = 0; k < m; ++k) area += g->width_at(-7.5 + (k + 0.5) * 15.0 / m) * 15.0 / m;
  EXPECT_NEAR(g->total_area(), area, 1e-3 * area);
}

TEST(Oracle, ConstantsInvariant) {
  const auto g = exp_grid();
  for (const DriftPtr& z : {zero_drift(2), DriftPtr(std::make_shared<RadialDecayDrift>(1, 0.5))}) {
    const auto sol = solve_neumann_heat(g, *z, [](const Vec&) { return 1.0; }, 0.5);
    for (double u : sol.u) EXPECT_NEAR(u, 1.0, 1e-10);
  }
}

TEST(Oracle, FlatEigenfunction) {
  const auto g = flat_grid(4, 128);
  const double t = 0.1;
  const auto sol = solve_neumann_heat(g, *zero_drift(2), [](const Vec& p) { return std::cos(kPi * p(1)); }, t,
                                      capped(2e-5));
  double err = 0.0;
  for (int i = 0; i < g->n_x(); ++i)
    for (int j = 0; j < g->n_v(); ++j)
      err = std::max(err, std::abs(sol.u[g->index(i, j)] - fixtures::flat_cos_value(t, g->v_center(j))));
  EXPECT_LT(err, 1e-4);

  for (double y : {0.2, 0.5, 0.8}) {
    const Vec grad = oracle_gradient(sol, v2(0.1, y));
    EXPECT_NEAR(grad(1), fixtures::flat_cos_dy(t, y), 1e-3) << y;
    EXPECT_NEAR(grad(0), 0.0, 1e-12);
  }
}

TEST(Oracle, ConstantGradientZero) {
  const auto g = exp_grid();
  const auto sol = solve_neumann_heat(g, *zero_drift(2), [](const Vec&) { return 2.0; }, 0.1);
  for (double x : {-1.0, 0.0, 2.0}) EXPECT_LT(oracle_gradient(sol, v2(x, 0.0)).norm(), 1e-9);
}

TEST(Oracle, SecondOrderRefinement) {
  const auto f = tanh_exponential(fixtures::exp_strip(), 1.0);
  std::vector<GridSolution> sols;
  for (int r : {1, 2, 4}) sols.push_back(solve_neumann_heat(exp_grid(r), *zero_drift(2), f.value, 0.5, capped(1e-3 / (r * r))));
  const auto study = refinement_study(sols[0], sols[1], sols[2]);
  EXPECT_NEAR(study.order, 2.0, 0.3) << study.coarse_error << " " << study.fine_error;
}

TEST(Oracle, ConservationAndMaxPrinciple) {
  const auto g = exp_grid(2);
  const auto f = tanh_exponential(fixtures::exp_strip(), 4.0);
  const auto sol = solve_neumann_heat(g, *zero_drift(2), f.value, 1.0);
  EXPECT_LT(sol.conservation_drift(), 1e-6);
  EXPECT_LE(sol.max_principle_excess, 1e-8);
  EXPECT_GT(sol.steps, 1u);
  EXPECT_EQ(sol.mass.size(), sol.steps + 1);
}

TEST(Oracle, ChapmanKolmogorov) {
  const auto f = tanh_exponential(fixtures::exp_strip(), 1.0);
  const auto z = std::make_shared<RadialDecayDrift>(1, 0.5);
  const auto coarse = solve_neumann_heat(exp_grid(1), *z, f.value, 0.6);
  const auto fine = solve_neumann_heat(exp_grid(2), *z, f.value, 0.6);
  const auto ref = restrict_solution(fine, *coarse.grid, 2);
  double single = 0.0;
  for (std::size_t k = 0; k < ref.size(); ++k) single = std::max(single, std::abs(coarse.u[k] - ref[k]));

  const auto half = solve_neumann_heat(exp_grid(1), *z, f.value, 0.25);
  const auto composed = solve_neumann_heat(half.grid, *z, half.u, 0.35);
  double defect = 0.0;
  for (std::size_t k = 0; k < ref.size(); ++k) defect = std::max(defect, std::abs(composed.u[k] - coarse.u[k]));
  EXPECT_LT(defect, 2.0 * single) << defect << " vs " << single;
}

TEST(Density, MassAndErrors) {
  const auto g = exp_grid(2);
  const Vec a = v2(-0.5, 0.1);
  const auto pa = oracle_density(g, *zero_drift(2), a, 0.3);
  EXPECT_NEAR(g->mean(pa.u), 1.0, 1e-3);
  EXPECT_NEAR(g->mean(density_source(*g, a)), 1.0, 1e-12);
  EXPECT_THROW(oracle_density(g, *zero_drift(2), a, 0.001), DomainError);
  EXPECT_THROW(oracle_density(g, RadialDecayDrift(1, 0.5), a, 0.3), DomainError);
  EXPECT_THROW(oracle_density(g, *zero_drift(2), v2(9.0, 0.0), 0.3), DomainError);
}

TEST(Density, Symmetry) {
  // Both solves start from smoothed sources K_a, K_b, so the symmetric quantity is
  // the pairing <K_b, P_t K_a> against <K_a, P_t K_b>.
  const Vec a = v2(-0.5, 0.1), b = v2(0.8, -0.2);
  std::vector<double> defect;
  for (int r : {2, 4}) {
    const auto g = exp_grid(r);
    const auto pa = oracle_density(g, *zero_drift(2), a, 0.3);
    const auto pb = oracle_density(g, *zero_drift(2), b, 0.3);
    const auto ka = density_source(*g, a), kb = density_source(*g, b);
    std::vector<double> ab(g->size()), ba(g->size());
    for (std::size_t k = 0; k < ab.size(); ++k) {
      ab[k] = kb[k] * pa.u[k];
      ba[k] = ka[k] * pb.u[k];
    }
    defect.push_back(std::abs(g->mean(ab) - g->mean(ba)));
  }
  EXPECT_LT(defect[1], defect[0]);
  EXPECT_LT(defect[1], 1e-3);
}

TEST(Density, LargeTimeTowardsUniform) {
  // Relaxation is slowest in the narrow ends, so the sup over the whole truncated
  // strip lags the bulk; at t = 10 the bulk is within 5%.
  const auto g = exp_grid();
  const auto p10 = oracle_density(g, *zero_drift(2), v2(0.0, 0.0), 10.0);
  const auto p20 = oracle_density(g, *zero_drift(2), v2(0.0, 0.0), 20.0);
  double bulk = 0.0, sup10 = 0.0, sup20 = 0.0;
  for (int i = 0; i < g->n_x(); ++i)
    for (int j = 0; j < g->n_v(); ++j) {
      const double d = std::abs(p10.u[g->index(i, j)] - 1.0);
      sup10 = std::max(sup10, d);
      if (std::abs(g->x_center(i)) <= 5.0) bulk = std::max(bulk, d);
      sup20 = std::max(sup20, std::abs(p20.u[g->index(i, j)] - 1.0));
    }
  EXPECT_LT(bulk, 0.05);
  EXPECT_LT(sup20, 0.01);
  EXPECT_LT(sup20, sup10);
}

TEST(Oracle, AgreesWithMonteCarlo) {
  const auto dom = fixtures::exp_strip();
  const std::vector<TestFunction> fs = {tanh_exponential(dom, 1.0), tanh_exponential(dom, 4.0),
                                        bump_function(dom, v2(0.3, 0.0), 0.35), strip_cosine(dom, 1)};
  RandomStream rng(77, kAuxStreamBase + 5);
  int failures = 0;
  for (int k = 0; k < 20; ++k) {
    const TestFunction& f = fs[static_cast<std::size_t>(k) % fs.size()];
    const double t = 0.1 + 0.9 * rng.uniform();
    const double x = -2.0 + 4.0 * rng.uniform();
    const double w = dom.width(fixtures::v1(x));
    const double lo = dom.lower_ptr()->value(fixtures::v1(x));
    const Vec start = v2(x, lo + w * (0.1 + 0.8 * rng.uniform()));
    const auto coarse = solve_neumann_heat(exp_grid(1), *zero_drift(2), f.value, t);
    const auto fine = solve_neumann_heat(exp_grid(2), *zero_drift(2), f.value, t);
    const double oracle = fine.value_at(start);
    const double oracle_err = std::abs(coarse.value_at(start) - oracle);
    SimConfig sim;
    sim.t = t;
    sim.dt = 1e-3;
    sim.n_paths = 2000;
    sim.seed = 100 + static_cast<std::uint64_t>(k);
    const auto mc = estimate_semigroup(dom, *zero_drift(2), sim, f, start);
    const bool ok = std::abs(mc.value - oracle) < 3.0 * mc.stderr_ + oracle_err;
    if (!ok) ++failures;
    EXPECT_TRUE(ok) << f.name << " t=" << t << " start=(" << start(0) << "," << start(1) << ") mc=" << mc.value
                    << "+-" << mc.stderr_ << " oracle=" << oracle << "+-" << oracle_err;
  }
  EXPECT_EQ(failures, 0);
}

TEST(NodalDump, RoundTrip) {
  const auto g = exp_grid();
  const auto sol = solve_neumann_heat(g, *zero_drift(2), [](const Vec& p) { return p(0) + 2.0 * p(1); }, 0.05);
  const auto buf = encode_solution(sol);
  ASSERT_EQ(buf.size(), 4 + 3 * 4 + 2 * 8 + sol.u.size() * 8);
  EXPECT_EQ(std::string(buf.begin(), buf.begin() + 4), "NSOL");
  const auto d = decode_solution(buf);
  EXPECT_EQ(d.version, 1u);
  EXPECT_EQ(static_cast<int>(d.n_x), g->n_x());
  EXPECT_EQ(static_cast<int>(d.n_v), g->n_v());
  EXPECT_EQ(d.X, 7.5);
  EXPECT_EQ(d.t, 0.05);
  EXPECT_EQ(d.values, sol.u);
  auto bad = buf;
  bad[0] = 'X';
  EXPECT_THROW(decode_solution(bad), Error);
  bad = buf;
  bad.pop_back();
  EXPECT_THROW(decode_solution(bad), Error);
}
