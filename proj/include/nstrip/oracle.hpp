#pragma once

// Finite-volume solver for u_t = Laplace u + Z . grad u with zero normal flux on
// a truncated planar strip, in mapped coordinates v = (y - phi1(x)) / w(x).
//
// In (x, v) the equation reads
//   w U_t = d_x[w (U_x + v_x U_v)] + d_v[w v_x U_x + (w v_x^2 + 1/w) U_v] + w Z.grad u
// with v_x = -(phi1' + v w') / w. Cells are centred on a uniform grid; the
// vertical diffusion is implicit (one tridiagonal solve per column), the rest
// explicit with a Gershgorin step bound.

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "nstrip/drift.hpp"
#include "nstrip/geometry.hpp"

namespace nstrip {

struct GridOptions {
  double width_tol = 1e-3;       // relative to width(0)
  bool allow_wide_ends = false;  // skip the end-width check (flat strips)
};

class MappedGrid {
 public:
  MappedGrid(const StripDomain& dom, double X, int n_x, int n_v, GridOptions opt = {})
      : lower_(dom.lower_ptr()), upper_(dom.upper_ptr()), X_(X), nx_(n_x), nv_(n_v) {
    if (dom.dim() != 1) throw DomainError("the grid solver supports d = 1 only");
    if (!(X > 0.0)) throw DomainError("truncation radius must be positive");
    if (n_x < 3 || n_v < 3) throw DomainError("grid needs at least 3 cells per direction");
    hx_ = 2.0 * X / n_x;
    hv_ = 1.0 / n_v;
    const double w0 = width_at(0.0);
    if (!opt.allow_wide_ends) {
      const double tol = opt.width_tol * w0;
      if (!(width_at(-X) < tol && width_at(X) < tol))
        throw DomainError("strip is not narrow enough at the truncation radius; increase X");
    }
    wc_.resize(static_cast<std::size_t>(nx_));
    for (int i = 0; i < nx_; ++i) {
      double a1, dw;
      geometry(x_center(i), wc_[static_cast<std::size_t>(i)], a1, dw);
      if (!(wc_[static_cast<std::size_t>(i)] > 0.0) || !std::isfinite(dw) || !std::isfinite(a1))
        throw DomainError("invalid metric coefficients on the grid");
    }
    area_ = 0.0;
    for (int i = 0; i < nx_; ++i) area_ += wc_[static_cast<std::size_t>(i)] * hx_;
  }

  int n_x() const { return nx_; }
  int n_v() const { return nv_; }
  double X() const { return X_; }
  double hx() const { return hx_; }
  double hv() const { return hv_; }
  std::size_t size() const { return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(nv_); }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(nv_) + static_cast<std::size_t>(j);
  }
  double x_center(int i) const { return -X_ + (i + 0.5) * hx_; }
  double v_center(int j) const { return (j + 0.5) * hv_; }
  double width(int i) const { return wc_[static_cast<std::size_t>(i)]; }
  // Cell measure w hx hv (area of the physical cell to leading order).
  double cell_mass(int i) const { return wc_[static_cast<std::size_t>(i)] * hx_ * hv_; }
  double total_area() const { return area_; }

  // w, phi1', w' at x
  void geometry(double x, double& w, double& dphi1, double& dw) const {
    Vec xv(1);
    xv(0) = x;
    const double a = lower_->value(xv);
    w = upper_->value(xv) - a;
    dphi1 = lower_->gradient(xv)(0);
    dw = upper_->gradient(xv)(0) - dphi1;
  }
  double width_at(double x) const {
    double w, a, b;
    geometry(x, w, a, b);
    return w;
  }

  Vec physical(int i, int j) const {
    Vec p(2);
    const double x = x_center(i);
    Vec xv(1);
    xv(0) = x;
    const double a = lower_->value(xv);
    p(0) = x;
    p(1) = a + v_center(j) * wc_[static_cast<std::size_t>(i)];
    return p;
  }

  // (x, v) of a physical point.
  void to_mapped(const Vec& p, double& x, double& v) const {
    x = p(0);
    Vec xv(1);
    xv(0) = x;
    const double a = lower_->value(xv);
    v = (p(1) - a) / (upper_->value(xv) - a);
  }

  std::vector<double> sample(const std::function<double(const Vec&)>& f) const {
    std::vector<double> u(size());
    for (int i = 0; i < nx_; ++i)
      for (int j = 0; j < nv_; ++j) u[index(i, j)] = f(physical(i, j));
    return u;
  }

  double integrate(const std::vector<double>& u) const {
    double s = 0.0;
    for (int i = 0; i < nx_; ++i) {
      double col = 0.0;
      for (int j = 0; j < nv_; ++j) col += u[index(i, j)];
      s += col * cell_mass(i);
    }
    return s;
  }

  // Integral against the normalised area measure.
  double mean(const std::vector<double>& u) const { return integrate(u) / area_; }

 private:
  SurfacePtr lower_, upper_;
  double X_;
  int nx_, nv_;
  double hx_ = 0.0, hv_ = 0.0, area_ = 0.0;
  std::vector<double> wc_;
};

struct SolveOptions {
  double cfl = 0.9;
  double dt_max = std::numeric_limits<double>::infinity();
};

struct GridSolution {
  std::shared_ptr<const MappedGrid> grid;
  std::vector<double> u;
  double t = 0.0;
  double dt = 0.0;
  std::size_t steps = 0;
  std::vector<double> mass;  // integral of u per step (index 0: initial)
  double mass_scale = 0.0;   // integral of |u0|
  double max_principle_excess = 0.0;  // largest overshoot beyond [min u0, max u0]

  // Largest relative change of the integral of u, relative to the integral of |u0|.
  double conservation_drift() const {
    if (mass.empty()) return 0.0;
    double worst = 0.0;
    const double scale = std::max(mass_scale, 1e-300);
    for (double m : mass) worst = std::max(worst, std::abs(m - mass.front()) / scale);
    return worst;
  }

  // Bilinear interpolation in (x, v) with linear extrapolation past the outer
  // cell centres.
  double value_at(const Vec& p) const { return interpolate(u, p); }

  double interpolate(const std::vector<double>& field, const Vec& p) const {
    const MappedGrid& g = *grid;
    double x, v;
    g.to_mapped(p, x, v);
    return bilinear(field, x, v);
  }

  double bilinear(const std::vector<double>& field, double x, double v) const {
    const MappedGrid& g = *grid;
    const double fx = (x + g.X()) / g.hx() - 0.5;
    const double fv = v / g.hv() - 0.5;
    const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, g.n_x() - 2);
    const int j = std::clamp(static_cast<int>(std::floor(fv)), 0, g.n_v() - 2);
    const double sx = fx - i, sv = fv - j;
    const double u00 = field[g.index(i, j)], u01 = field[g.index(i, j + 1)];
    const double u10 = field[g.index(i + 1, j)], u11 = field[g.index(i + 1, j + 1)];
    return (1 - sx) * ((1 - sv) * u00 + sv * u01) + sx * ((1 - sv) * u10 + sv * u11);
  }
};

namespace detail {

// Second-order derivative along one grid direction; one-sided at the ends.
inline double grid_diff(const std::vector<double>& u, const MappedGrid& g, int i, int j, bool along_x) {
  const int n = along_x ? g.n_x() : g.n_v();
  const double h = along_x ? g.hx() : g.hv();
  const int k = along_x ? i : j;
  auto at = [&](int m) { return along_x ? u[g.index(m, j)] : u[g.index(i, m)]; };
  if (k == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
  if (k == n - 1) return (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
  return (at(k + 1) - at(k - 1)) / (2.0 * h);
}

// Coefficients of the same difference: list of (offset, weight).
inline void diff_weights(int k, int n, double h, int* off, double* wt) {
  if (k == 0) {
    off[0] = 0; off[1] = 1; off[2] = 2;
    wt[0] = -3.0 / (2 * h); wt[1] = 4.0 / (2 * h); wt[2] = -1.0 / (2 * h);
  } else if (k == n - 1) {
    off[0] = 0; off[1] = -1; off[2] = -2;
    wt[0] = 3.0 / (2 * h); wt[1] = -4.0 / (2 * h); wt[2] = 1.0 / (2 * h);
  } else {
    off[0] = -1; off[1] = 1; off[2] = 0;
    wt[0] = -1.0 / (2 * h); wt[1] = 1.0 / (2 * h); wt[2] = 0.0;
  }
}

struct Operator {
  Eigen::SparseMatrix<double, Eigen::RowMajor> explicit_part;
  // implicit vertical part per column: lower, diag, upper (length n_v each)
  std::vector<double> lo, di, up;
  std::vector<double> mass;
  std::vector<double> row_sum;  // rounding residue of the explicit rows (zero in exact arithmetic)
  double step_bound = 0.0;
};

inline Operator assemble(const MappedGrid& g, const DriftField& z) {
  const int nx = g.n_x(), nv = g.n_v();
  const double hx = g.hx(), hv = g.hv();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.size() * 20);
  Operator op;
  op.lo.assign(g.size(), 0.0);
  op.di.assign(g.size(), 0.0);
  op.up.assign(g.size(), 0.0);
  op.mass.resize(g.size());
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nv; ++j) op.mass[g.index(i, j)] = g.cell_mass(i);

  auto add = [&](int ri, int rj, int ci, int cj, double val) {
    if (val != 0.0)
      trip.emplace_back(static_cast<int>(g.index(ri, rj)), static_cast<int>(g.index(ci, cj)), val);
  };
  auto vx = [](double w, double a1, double dw, double v) { return -(a1 + v * dw) / w; };

  // x-faces: flux F between cells (i, j) and (i + 1, j), scaled by hv.
  for (int i = 0; i + 1 < nx; ++i) {
    double w, a1, dw;
    g.geometry(-g.X() + (i + 1) * hx, w, a1, dw);
    for (int j = 0; j < nv; ++j) {
      const double vxf = vx(w, a1, dw, g.v_center(j));
      // F = w (U_{i+1} - U_i)/hx + w vx * 0.5 (Dv U_i + Dv U_{i+1})
      std::vector<std::pair<std::pair<int, int>, double>> terms;
      terms.push_back({{i + 1, j}, w / hx});
      terms.push_back({{i, j}, -w / hx});
      int off[3];
      double wt[3];
      diff_weights(j, nv, hv, off, wt);
      for (int s = 0; s < 3; ++s) {
        if (wt[s] == 0.0) continue;
        terms.push_back({{i, j + off[s]}, 0.5 * w * vxf * wt[s]});
        terms.push_back({{i + 1, j + off[s]}, 0.5 * w * vxf * wt[s]});
      }
      for (const auto& [c, val] : terms) {
        add(i, j, c.first, c.second, hv * val);
        add(i + 1, j, c.first, c.second, -hv * val);
      }
    }
  }
  // v-faces: flux G between (i, j) and (i, j + 1), scaled by hx.
  for (int i = 0; i < nx; ++i) {
    const double w = g.width(i);
    double ww, a1, dw;
    g.geometry(g.x_center(i), ww, a1, dw);
    int off[3];
    double wt[3];
    diff_weights(i, nx, hx, off, wt);
    for (int j = 0; j + 1 < nv; ++j) {
      const double vxf = vx(w, a1, dw, (j + 1) * hv);
      const double diff = (w * vxf * vxf + 1.0 / w) / hv;
      // implicit: diff (U_{j+1} - U_j)
      const std::size_t r0 = g.index(i, j), r1 = g.index(i, j + 1);
      op.di[r0] -= hx * diff;
      op.up[r0] += hx * diff;
      op.di[r1] -= hx * diff;
      op.lo[r1] += hx * diff;
      // explicit mixed part: w vx * 0.5 (Dx U_j + Dx U_{j+1})
      for (int s = 0; s < 3; ++s) {
        if (wt[s] == 0.0) continue;
        for (int jj : {j, j + 1}) {
          const double val = hx * 0.5 * w * vxf * wt[s];
          add(i, j, i + off[s], jj, val);
          add(i, j + 1, i + off[s], jj, -val);
        }
      }
    }
  }
  // drift: M (Z1 (Dx U + vx Dv U) + Z2 Dv U / w)
  if (!z.is_zero()) {
    for (int i = 0; i < nx; ++i) {
      double w, a1, dw;
      g.geometry(g.x_center(i), w, a1, dw);
      int ox[3], ov[3];
      double wx[3], wv[3];
      diff_weights(i, nx, hx, ox, wx);
      for (int j = 0; j < nv; ++j) {
        const Vec zp = z.value(g.physical(i, j));
        const double m = g.cell_mass(i);
        const double vxc = vx(w, a1, dw, g.v_center(j));
        diff_weights(j, nv, hv, ov, wv);
        for (int s = 0; s < 3; ++s) {
          add(i, j, i + ox[s], j, m * zp(0) * wx[s]);
          add(i, j, i, j + ov[s], m * (zp(0) * vxc + zp(1) / w) * wv[s]);
        }
      }
    }
  }
  op.explicit_part.resize(static_cast<int>(g.size()), static_cast<int>(g.size()));
  op.explicit_part.setFromTriplets(trip.begin(), trip.end());
  op.explicit_part.makeCompressed();

  double bound = 0.0;
  op.row_sum.assign(g.size(), 0.0);
  for (int r = 0; r < op.explicit_part.outerSize(); ++r) {
    double s = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(op.explicit_part, r); it; ++it) {
      s += std::abs(it.value());
      op.row_sum[static_cast<std::size_t>(r)] += it.value();
    }
    bound = std::max(bound, s / op.mass[static_cast<std::size_t>(r)]);
  }
  op.step_bound = bound;
  return op;
}

}  // namespace detail

// Solves from nodal data u0 up to time t.
inline GridSolution solve_neumann_heat(std::shared_ptr<const MappedGrid> grid, const DriftField& z,
                                       std::vector<double> u0, double t, SolveOptions opt = {}) {
  const MappedGrid& g = *grid;
  if (u0.size() != g.size()) throw DomainError("initial data does not match the grid");
  if (!(t >= 0.0)) throw DomainError("t must be non-negative");
  if (!(opt.cfl > 0.0 && opt.cfl <= 1.0)) throw DomainError("cfl must lie in (0, 1]");
  const detail::Operator op = detail::assemble(g, z);
  double dt_cap = opt.dt_max;
  if (op.step_bound > 0.0) dt_cap = std::min(dt_cap, opt.cfl * 2.0 / op.step_bound);
  GridSolution sol;
  sol.grid = grid;
  sol.u = std::move(u0);
  for (double v : sol.u)
    if (!std::isfinite(v)) throw DomainError("initial data is not finite");
  const auto [mn, mx] = std::minmax_element(sol.u.begin(), sol.u.end());
  const double lo = *mn, hi = *mx;
  const double tol_scale = std::max({1.0, std::abs(lo), std::abs(hi)});
  sol.mass.push_back(g.integrate(sol.u));
  {
    std::vector<double> a(sol.u.size());
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = std::abs(sol.u[k]);
    sol.mass_scale = g.integrate(a);
  }
  if (t == 0.0) return sol;
  const std::size_t steps = static_cast<std::size_t>(std::ceil(t / dt_cap - 1e-9));
  const double dt = t / static_cast<double>(std::max<std::size_t>(steps, 1));
  sol.dt = dt;
  sol.steps = std::max<std::size_t>(steps, 1);

  const int nx = g.n_x(), nv = g.n_v();
  Eigen::Map<Eigen::VectorXd> u(sol.u.data(), static_cast<Eigen::Index>(sol.u.size()));
  Eigen::VectorXd rhs(u.size());
  std::vector<double> cp(static_cast<std::size_t>(nv)), dp(static_cast<std::size_t>(nv));
  for (std::size_t n = 0; n < sol.steps; ++n) {
    // delta form: (M - dt A_v) du = dt (A_e u + A_v u), which keeps constants exact
    rhs = op.explicit_part * u;
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nv; ++j) {
        const std::size_t r = g.index(i, j);
        const double ur = u(static_cast<Eigen::Index>(r));
        double av = 0.0;
        if (j > 0) av += op.lo[r] * (u(static_cast<Eigen::Index>(r - 1)) - ur);
        if (j + 1 < nv) av += op.up[r] * (u(static_cast<Eigen::Index>(r + 1)) - ur);
        rhs(static_cast<Eigen::Index>(r)) = dt * (rhs(static_cast<Eigen::Index>(r)) - op.row_sum[r] * ur + av);
      }
    // Thomas algorithm per column
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < nv; ++j) {
        const std::size_t r = g.index(i, j);
        const double a = -dt * op.lo[r];
        const double b = op.mass[r] - dt * op.di[r];
        const double c = -dt * op.up[r];
        const double denom = j == 0 ? b : b - a * cp[static_cast<std::size_t>(j - 1)];
        if (!(std::abs(denom) > 0.0)) throw Error("grid solver: singular tridiagonal system");
        cp[static_cast<std::size_t>(j)] = c / denom;
        dp[static_cast<std::size_t>(j)] =
            (rhs(static_cast<Eigen::Index>(r)) - (j == 0 ? 0.0 : a * dp[static_cast<std::size_t>(j - 1)])) / denom;
      }
      for (int j = nv - 1; j >= 0; --j) {
        if (j < nv - 1) dp[static_cast<std::size_t>(j)] -= cp[static_cast<std::size_t>(j)] * dp[static_cast<std::size_t>(j + 1)];
        u(static_cast<Eigen::Index>(g.index(i, j))) += dp[static_cast<std::size_t>(j)];
      }
    }
    if (!u.allFinite()) throw Error("grid solver: solution became non-finite (stability violation)");
    sol.mass.push_back(g.integrate(sol.u));
    const double over = std::max(u.maxCoeff() - hi, lo - u.minCoeff());
    sol.max_principle_excess = std::max(sol.max_principle_excess, over / tol_scale);
  }
  sol.t = t;
  return sol;
}

inline GridSolution solve_neumann_heat(std::shared_ptr<const MappedGrid> grid, const DriftField& z,
                                       const std::function<double(const Vec&)>& u0, double t,
                                       SolveOptions opt = {}) {
  auto data = grid->sample(u0);
  return solve_neumann_heat(grid, z, std::move(data), t, opt);
}

// Physical gradient of the solution at p via the chain rule of the mapping.
inline Vec oracle_gradient(const GridSolution& sol, const Vec& p) {
  const MappedGrid& g = *sol.grid;
  std::vector<double> ux(g.size()), uv(g.size());
  for (int i = 0; i < g.n_x(); ++i)
    for (int j = 0; j < g.n_v(); ++j) {
      ux[g.index(i, j)] = detail::grid_diff(sol.u, g, i, j, true);
      uv[g.index(i, j)] = detail::grid_diff(sol.u, g, i, j, false);
    }
  double x, v;
  g.to_mapped(p, x, v);
  const double Ux = sol.bilinear(ux, x, v);
  const double Uv = sol.bilinear(uv, x, v);
  double w, a1, dw;
  g.geometry(x, w, a1, dw);
  const double vx = -(a1 + v * dw) / w;
  Vec grad(2);
  grad(0) = Ux + vx * Uv;
  grad(1) = Uv / w;
  return grad;
}

// Block average of a solution computed on a grid refined k times per direction.
inline std::vector<double> restrict_solution(const GridSolution& fine, const MappedGrid& coarse, int k) {
  const MappedGrid& g = *fine.grid;
  if (g.n_x() != k * coarse.n_x() || g.n_v() != k * coarse.n_v())
    throw DomainError("grids are not nested by the given factor");
  std::vector<double> out(coarse.size(), 0.0);
  for (int i = 0; i < coarse.n_x(); ++i)
    for (int j = 0; j < coarse.n_v(); ++j) {
      double s = 0.0;
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) s += fine.u[g.index(i * k + a, j * k + b)];
      out[coarse.index(i, j)] = s / (k * k);
    }
  return out;
}

// Observed order from three solutions on grids refined by 1, 2, 4. `coarse_error`
// (max |u_h - u_{h/2}|) doubles as the error estimate of a single coarse solve.
struct RefinementStudy {
  double coarse_error = 0.0;
  double fine_error = 0.0;
  double order = 0.0;
};

inline RefinementStudy refinement_study(const GridSolution& h, const GridSolution& h2, const GridSolution& h4) {
  const MappedGrid& g0 = *h.grid;
  const auto u1 = restrict_solution(h2, g0, 2);
  const auto u2 = restrict_solution(h4, g0, 4);
  RefinementStudy r;
  for (std::size_t k = 0; k < g0.size(); ++k) {
    r.coarse_error = std::max(r.coarse_error, std::abs(h.u[k] - u1[k]));
    r.fine_error = std::max(r.fine_error, std::abs(u1[k] - u2[k]));
  }
  r.order = std::log2(r.coarse_error / r.fine_error);
  return r;
}

inline constexpr double kDensityMinTime = 0.01;

// Normalised narrow Gaussian around x0, two cells wide in each mapped direction:
// the initial datum of the density solve (mean 1 under the area measure).
inline std::vector<double> density_source(const MappedGrid& g, const Vec& x0) {
  double xs, vs;
  g.to_mapped(x0, xs, vs);
  if (!(vs >= 0.0 && vs <= 1.0) || std::abs(xs) > g.X()) throw DomainError("density source outside the grid");
  const double sx = 2.0 * g.hx(), sv = 2.0 * g.hv();
  std::vector<double> u0(g.size());
  for (int i = 0; i < g.n_x(); ++i)
    for (int j = 0; j < g.n_v(); ++j) {
      const double dx = (g.x_center(i) - xs) / sx, dv = (g.v_center(j) - vs) / sv;
      u0[g.index(i, j)] = std::exp(-0.5 * (dx * dx + dv * dv));
    }
  const double norm = g.mean(u0);
  for (double& v : u0) v /= norm;
  return u0;
}

// Density z -> p_t(x0, z) with respect to the normalised area measure.
inline GridSolution oracle_density(std::shared_ptr<const MappedGrid> grid, const DriftField& z,
                                   const Vec& x0, double t, SolveOptions opt = {},
                                   double t_min = kDensityMinTime) {
  if (!z.is_zero()) throw DomainError("densities are computed for Z = 0 only");
  if (t < t_min) throw DomainError("density time below t_min");
  auto u0 = density_source(*grid, x0);
  return solve_neumann_heat(std::move(grid), z, std::move(u0), t, opt);
}

struct NodalDump {
  std::uint32_t version = 0;
  std::uint32_t n_x = 0, n_v = 0;
  double X = 0.0, t = 0.0;
  std::vector<double> values;
};

inline std::vector<char> encode_solution(const GridSolution& sol) {
  std::vector<char> buf;
  auto put = [&](const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf.insert(buf.end(), c, c + n);
  };
  const char magic[4] = {'N', 'S', 'O', 'L'};
  put(magic, 4);
  const std::uint32_t version = 1;
  const auto nx = static_cast<std::uint32_t>(sol.grid->n_x());
  const auto nv = static_cast<std::uint32_t>(sol.grid->n_v());
  const double X = sol.grid->X();
  put(&version, 4);
  put(&nx, 4);
  put(&nv, 4);
  put(&X, 8);
  put(&sol.t, 8);
  put(sol.u.data(), sol.u.size() * sizeof(double));
  return buf;
}

inline NodalDump decode_solution(const std::vector<char>& buf) {
  NodalDump d;
  std::size_t pos = 0;
  auto get = [&](void* p, std::size_t n) {
    if (pos + n > buf.size()) throw Error("nodal dump truncated");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, "NSOL", 4) != 0) throw Error("not a nodal dump");
  get(&d.version, 4);
  if (d.version != 1) throw Error("unsupported nodal dump version");
  get(&d.n_x, 4);
  get(&d.n_v, 4);
  get(&d.X, 8);
  get(&d.t, 8);
  d.values.resize(static_cast<std::size_t>(d.n_x) * d.n_v);
  get(d.values.data(), d.values.size() * sizeof(double));
  if (pos != buf.size()) throw Error("trailing bytes in nodal dump");
  return d;
}

}  // namespace nstrip
