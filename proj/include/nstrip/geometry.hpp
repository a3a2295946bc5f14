#pragma once

// Narrow strip D = {(x, y) : phi1(x) <= y <= phi2(x)} over R^d and its
// boundary geometry.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "nstrip/rng.hpp"
#include "nstrip/surface.hpp"
#include "nstrip/types.hpp"

namespace nstrip {

// A point (x, phi_face(x)) on the boundary piece of the given face (1 or 2).
struct BoundaryPoint {
  Vec base;
  int face = 0;
  Vec position;
};

// Probe grid over [-radius, radius]^d used for all grid-based estimates.
struct ProbeGrid {
  double radius = 16.0;
  double spacing = 0.25;
  int y_levels = 9;
  std::size_t max_points = 200000;

  ProbeGrid refined() const {
    ProbeGrid g = *this;
    g.radius *= 2.0;
    g.spacing /= 2.0;
    return g;
  }

  // Tensor grid of base points; sampled uniformly (seeded) when too large.
  std::vector<Vec> points(int d) const {
    const int per_axis = static_cast<int>(std::floor(2.0 * radius / spacing + 1e-9)) + 1;
    double total = std::pow(static_cast<double>(per_axis), d);
    std::vector<Vec> out;
    if (total <= static_cast<double>(max_points)) {
      out.reserve(static_cast<std::size_t>(total));
      std::vector<int> idx(static_cast<std::size_t>(d), 0);
      for (;;) {
        Vec x(d);
        for (int i = 0; i < d; ++i) x(i) = -radius + spacing * idx[static_cast<std::size_t>(i)];
        out.push_back(x);
        int k = 0;
        while (k < d && ++idx[static_cast<std::size_t>(k)] == per_axis) {
          idx[static_cast<std::size_t>(k)] = 0;
          ++k;
        }
        if (k == d) break;
      }
    } else {
      RandomStream rng(0x5eed5eedull, kAuxStreamBase + 17);
      out.reserve(max_points);
      for (std::size_t n = 0; n < max_points; ++n) {
        Vec x(d);
        for (int i = 0; i < d; ++i) x(i) = -radius + 2.0 * radius * rng.uniform();
        out.push_back(x);
      }
    }
    return out;
  }
};

struct Projection {
  Vec point;
  double dist = 0.0;
  int face = 0;  // 0 when the query was already inside D
  bool tie = false;
};

class StripDomain {
 public:
  StripDomain(SurfacePtr lower, SurfacePtr upper, ProbeGrid probes = {})
      : lower_(std::move(lower)), upper_(std::move(upper)), probes_(probes) {
    if (!lower_ || !upper_) throw DomainError("strip needs two surfaces");
    if (lower_->dim() != upper_->dim()) throw DomainError("surface dimensions differ");
    d_ = lower_->dim();
    if (d_ < 1 || d_ + 1 > kMaxAmbient) throw DomainError("unsupported base dimension");
    width_sup_ = 0.0;
    for (const Vec& x : probes_.points(d_)) {
      const double w = width(x);
      if (!(w > 0.0)) throw DomainError("phi1 < phi2 violated at a probe point");
      width_sup_ = std::max(width_sup_, w);
    }
  }

  int dim() const { return d_; }
  int ambient() const { return d_ + 1; }
  const ProbeGrid& probes() const { return probes_; }
  double width_sup() const { return width_sup_; }
  double check_radius() const { return probes_.radius; }

  const ScalarSurface& surface(int face) const {
    if (face == 1) return *lower_;
    if (face == 2) return *upper_;
    throw DomainError("face must be 1 or 2");
  }
  SurfacePtr lower_ptr() const { return lower_; }
  SurfacePtr upper_ptr() const { return upper_; }

  double width(const Vec& x) const { return upper_->value(x) - lower_->value(x); }
  Vec width_gradient(const Vec& x) const { return upper_->gradient(x) - lower_->gradient(x); }

  static Vec base_of(const Vec& p) { return p.head(p.size() - 1); }

  bool contains(const Vec& p, double tol = 0.0) const {
    const Vec x = base_of(p);
    const double y = p(p.size() - 1);
    return lower_->value(x) - tol <= y && y <= upper_->value(x) + tol;
  }

  BoundaryPoint boundary_point(const Vec& base, int face) const {
    BoundaryPoint b;
    b.base = base;
    b.face = face;
    b.position.resize(d_ + 1);
    b.position.head(d_) = base;
    b.position(d_) = surface(face).value(base);
    return b;
  }

  // Unit inward normal (-1)^face (grad phi, -1) / sqrt(1 + |grad phi|^2).
  Vec inward_normal(const BoundaryPoint& p) const {
    const Vec g = surface(p.face).gradient(p.base);
    Vec n(d_ + 1);
    n.head(d_) = g;
    n(d_) = -1.0;
    const double s = p.face == 1 ? -1.0 : 1.0;
    return s * n / std::sqrt(1.0 + g.squaredNorm());
  }

  // sigma_face(x) with II >= -sigma: sup over unit a of
  // (-1)^face Hess(a,a) / (sqrt(1+|grad|^2) (1 + (grad.a)^2)).
  double sff_lower_bound(const BoundaryPoint& p) const {
    const ScalarSurface& s = surface(p.face);
    const Vec g = s.gradient(p.base);
    const Mat h = (p.face == 1 ? -1.0 : 1.0) * s.hessian(p.base);
    const double c = std::sqrt(1.0 + g.squaredNorm());
    auto ratio = [&](const Vec& a) {
      const double ga = g.dot(a);
      return a.dot(h * a) / (c * (1.0 + ga * ga));
    };
    if (d_ == 1) {
      Vec a(1);
      a(0) = 1.0;
      return ratio(a);
    }
    return sphere_sup(h, g, c);
  }

  // Matrix of the second fundamental form extended by tangential projections:
  // <II a, b> = II(P a, P b), II(u, v) = -(-1)^face u_x^T Hess v_x / sqrt(1+|grad|^2).
  Mat sff_matrix(const BoundaryPoint& p) const {
    const ScalarSurface& s = surface(p.face);
    const Vec g = s.gradient(p.base);
    const double sign = p.face == 1 ? -1.0 : 1.0;
    Mat m = Mat::Zero(d_ + 1, d_ + 1);
    m.topLeftCorner(d_, d_) = -sign * s.hessian(p.base) / std::sqrt(1.0 + g.squaredNorm());
    const Vec n = inward_normal(p);
    const Mat proj = Mat::Identity(d_ + 1, d_ + 1) - n * n.transpose();
    Mat ii = proj * m * proj;
    return 0.5 * (ii + ii.transpose());
  }

  // 2 (phi2 - phi1)(1 + <grad phi1, grad phi2>) / sqrt(1 + |grad phi_face|^2).
  double aux_sigma_tilde(const BoundaryPoint& p) const {
    const Vec g1 = lower_->gradient(p.base);
    const Vec g2 = upper_->gradient(p.base);
    const Vec& gf = p.face == 1 ? g1 : g2;
    return 2.0 * width(p.base) * (1.0 + g1.dot(g2)) / std::sqrt(1.0 + gf.squaredNorm());
  }

  // Nearest point of D. Newton on the squared distance to each boundary graph,
  // several starts per face; ties go to the smaller face index.
  Projection project(const Vec& q) const {
    Projection out;
    if (contains(q)) {
      out.point = q;
      return out;
    }
    const Vec qx = base_of(q);
    const double qy = q(d_);
    std::array<Vec, 2> best_x;
    std::array<double, 2> best_d{std::numeric_limits<double>::infinity(),
                                 std::numeric_limits<double>::infinity()};
    for (int face = 1; face <= 2; ++face) {
      nearest_on_graph(surface(face), qx, qy, best_x[static_cast<std::size_t>(face - 1)],
                       best_d[static_cast<std::size_t>(face - 1)], q);
    }
    const double scale = 1e-13 * (1.0 + q.norm());
    int face;
    if (std::abs(best_d[0] - best_d[1]) <= scale) {
      face = 1;
      out.tie = true;
    } else {
      face = best_d[0] < best_d[1] ? 1 : 2;
    }
    const BoundaryPoint b = boundary_point(best_x[static_cast<std::size_t>(face - 1)], face);
    out.point = b.position;
    out.face = face;
    out.dist = (q - out.point).norm();
    return out;
  }

 private:
  // Minimizes 0.5|x - qx|^2 + 0.5(phi(x) - qy)^2 from several starts.
  void nearest_on_graph(const ScalarSurface& s, const Vec& qx, double qy, Vec& best_x,
                        double& best_d, const Vec& q) const {
    const double r = std::abs(s.value(qx) - qy);
    std::vector<Vec> starts;
    starts.push_back(qx);
    if (r > 0.0) {
      for (int i = 0; i < d_; ++i) {
        for (double f : {-0.5, 0.5}) {
          Vec x0 = qx;
          x0(i) += f * r;
          starts.push_back(x0);
        }
      }
    }
    bool any = false;
    for (const Vec& x0 : starts) {
      Vec x = x0;
      if (!newton_nearest(s, qx, qy, x)) continue;
      any = true;
      const double fx = s.value(x) - qy;
      const double dd = std::sqrt((x - qx).squaredNorm() + fx * fx);
      if (dd < best_d) {
        best_d = dd;
        best_x = x;
      }
    }
    if (!any) throw ConvergenceError("nearest-point projection did not converge", q);
  }

  static bool newton_nearest(const ScalarSurface& s, const Vec& qx, double qy, Vec& x) {
    const int d = static_cast<int>(qx.size());
    auto objective = [&](const Vec& z) {
      const double f = s.value(z) - qy;
      return 0.5 * ((z - qx).squaredNorm() + f * f);
    };
    double obj = objective(x);
    const double tol = 1e-13 * (1.0 + qx.norm() + std::abs(qy));
    for (int it = 0; it < 100; ++it) {
      const double f = s.value(x) - qy;
      const Vec g = s.gradient(x);
      const Vec grad = (x - qx) + f * g;
      if (grad.norm() <= tol) return true;
      Mat hess = Mat::Identity(d, d) + g * g.transpose() + f * s.hessian(x);
      Vec step;
      Eigen::LLT<Mat> llt(hess);
      if (llt.info() == Eigen::Success) {
        step = -llt.solve(grad);
      } else {
        step = -grad;
      }
      double t = 1.0;
      Vec trial = x + step;
      double trial_obj = objective(trial);
      while (trial_obj > obj && t > 1e-12) {
        t *= 0.5;
        trial = x + t * step;
        trial_obj = objective(trial);
      }
      if (trial_obj > obj) return grad.norm() <= 1e3 * tol;
      const double moved = (trial - x).norm();
      x = trial;
      obj = trial_obj;
      if (moved <= 1e-15 * (1.0 + x.norm())) return true;
    }
    return false;
  }

  // Multistart projected-gradient ascent on the unit sphere.
  double sphere_sup(const Mat& h, const Vec& g, double c) const {
    auto ratio = [&](const Vec& a) {
      const double ga = g.dot(a);
      return a.dot(h * a) / (c * (1.0 + ga * ga));
    };
    auto grad = [&](const Vec& a) {
      const double ga = g.dot(a);
      const double den = 1.0 + ga * ga;
      const double num = a.dot(h * a);
      return Vec((2.0 * (h * a) * den - num * 2.0 * ga * g) / (c * den * den));
    };
    std::vector<Vec> starts;
    Eigen::SelfAdjointEigenSolver<Mat> eig(h);
    for (int i = 0; i < d_; ++i) starts.push_back(eig.eigenvectors().col(i));
    if (g.norm() > 0.0) starts.push_back(g.normalized());
    RandomStream rng(0xa11ce5ull, kAuxStreamBase + 3);
    while (starts.size() < 32 + static_cast<std::size_t>(d_) + 1) {
      Vec a(d_);
      for (int i = 0; i < d_; ++i) a(i) = rng.normal();
      if (a.norm() > 1e-12) starts.push_back(a.normalized());
    }
    double best = -std::numeric_limits<double>::infinity();
    for (Vec a : starts) {
      double val = ratio(a);
      double step = 1.0;
      for (int it = 0; it < 500; ++it) {
        Vec gr = grad(a);
        gr -= gr.dot(a) * a;
        if (gr.norm() < 1e-8) break;
        bool improved = false;
        while (step > 1e-14) {
          const Vec trial = (a + step * gr).normalized();
          const double tv = ratio(trial);
          if (tv > val) {
            a = trial;
            val = tv;
            improved = true;
            step *= 2.0;
            break;
          }
          step *= 0.5;
        }
        if (!improved) break;
      }
      best = std::max(best, val);
    }
    return best;
  }

  SurfacePtr lower_;
  SurfacePtr upper_;
  ProbeGrid probes_;
  int d_ = 0;
  double width_sup_ = 0.0;
};

// W0 = 1/width and W = beta(W0); beta clamps to r0 below r0, is the identity
// above r0 + 1 and uses the C^2 quintic bridge r0 + 6s^3 - 8s^4 + 3s^5 between.
class Lyapunov {
 public:
  explicit Lyapunov(double r0) : r0_(r0) {
    if (!(r0 > 0.0)) throw DomainError("r0 must be positive");
  }

  double r0() const { return r0_; }

  double beta(double r) const {
    if (r <= r0_) return r0_;
    if (r >= r0_ + 1.0) return r;
    const double s = r - r0_;
    return r0_ + s * s * s * (6.0 - 8.0 * s + 3.0 * s * s);
  }

  double beta_prime(double r) const {
    if (r <= r0_) return 0.0;
    if (r >= r0_ + 1.0) return 1.0;
    const double s = r - r0_;
    return s * s * (18.0 - 32.0 * s + 15.0 * s * s);
  }

  struct Value {
    double w0;
    double w;
  };

  Value operator()(const StripDomain& dom, const Vec& x) const {
    const double width = dom.width(x);
    if (!(width > 0.0)) throw DomainError("lyapunov: width must be positive");
    const double w0 = 1.0 / width;
    return {w0, beta(w0)};
  }

  // Gradient of W in the base variables.
  Vec gradient(const StripDomain& dom, const Vec& x) const {
    const double width = dom.width(x);
    const double w0 = 1.0 / width;
    return -beta_prime(w0) * dom.width_gradient(x) / (width * width);
  }

 private:
  double r0_;
};

// <(grad W0, 0), N> at a boundary point.
inline double normal_derivative_w0(const StripDomain& dom, const BoundaryPoint& p) {
  const double width = dom.width(p.base);
  Vec lifted = Vec::Zero(dom.ambient());
  lifted.head(dom.dim()) = -dom.width_gradient(p.base) / (width * width);
  return lifted.dot(dom.inward_normal(p));
}

// Smallest level r0 such that N W0 <= 0 on every boundary probe with W0 >= r0.
inline double default_r0(const StripDomain& dom) {
  double violating = 0.0;
  double min_w0 = std::numeric_limits<double>::infinity();
  for (const Vec& x : dom.probes().points(dom.dim())) {
    const double w0 = 1.0 / dom.width(x);
    min_w0 = std::min(min_w0, w0);
    for (int face = 1; face <= 2; ++face) {
      const double nw = normal_derivative_w0(dom, dom.boundary_point(x, face));
      if (nw > 1e-10 * (1.0 + w0 * w0)) violating = std::max(violating, w0);
    }
  }
  if (violating > 0.0) return std::nextafter(violating, std::numeric_limits<double>::infinity());
  return min_w0;
}

}  // namespace nstrip
