#pragma once

// Scalar surfaces phi: R^d -> R bounding a strip, with gradient and Hessian.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "nstrip/expression.hpp"
#include "nstrip/types.hpp"

namespace nstrip {

class ScalarSurface {
 public:
  virtual ~ScalarSurface() = default;
  virtual int dim() const = 0;
  virtual double value(const Vec& x) const = 0;
  virtual Vec gradient(const Vec& x) const = 0;
  virtual Mat hessian(const Vec& x) const = 0;
  virtual std::string describe() const = 0;
};

using SurfacePtr = std::shared_ptr<const ScalarSurface>;

class ConstantSurface final : public ScalarSurface {
 public:
  ConstantSurface(int d, double level) : d_(d), level_(level) {}
  int dim() const override { return d_; }
  double value(const Vec&) const override { return level_; }
  Vec gradient(const Vec&) const override { return Vec::Zero(d_); }
  Mat hessian(const Vec&) const override { return Mat::Zero(d_, d_); }
  std::string describe() const override { return "constant(" + std::to_string(level_) + ")"; }

 private:
  int d_;
  double level_;
};

// Decay profiles psi(r) for radial strips, r = |x|.
enum class ProfileKind { Exp, Power, Log };

struct RadialProfile {
  ProfileKind kind = ProfileKind::Exp;
  double rate = 1.0;   // a in exp(-a r^delta)
  double delta = 1.0;

  // psi, psi', psi'' at r > 0.
  void eval(double r, double& p0, double& p1, double& p2) const {
    switch (kind) {
      case ProfileKind::Exp: {
        // psi = exp(-a r^d)
        const double rd = std::pow(r, delta);
        p0 = std::exp(-rate * rd);
        const double g1 = rate * delta * std::pow(r, delta - 1.0);           // (a r^d)'
        const double g2 = rate * delta * (delta - 1.0) * std::pow(r, delta - 2.0);
        p1 = -g1 * p0;
        p2 = (g1 * g1 - g2) * p0;
        break;
      }
      case ProfileKind::Power: {
        p0 = std::pow(r, -delta);
        p1 = -delta * std::pow(r, -delta - 1.0);
        p2 = delta * (delta + 1.0) * std::pow(r, -delta - 2.0);
        break;
      }
      case ProfileKind::Log: {
        const double s = std::numbers::e + r;
        const double l = std::log(s);
        p0 = std::pow(l, -delta);
        p1 = -delta * std::pow(l, -delta - 1.0) / s;
        p2 = delta * (delta + 1.0) * std::pow(l, -delta - 2.0) / (s * s) +
             delta * std::pow(l, -delta - 1.0) / (s * s);
        break;
      }
    }
  }
};

// phi(x) = scale * psi(|x|), with psi replaced inside `smoothing` by the even
// quartic c0 + c2 r^2 + c4 r^4 matching value, slope and curvature at the
// smoothing radius. The result is C^2 and smooth at the origin.
class RadialSurface final : public ScalarSurface {
 public:
  RadialSurface(int d, double scale, RadialProfile profile, double smoothing)
      : d_(d), scale_(scale), profile_(profile), rs_(smoothing) {
    if (rs_ < 0.0) throw DomainError("smoothing radius must be non-negative");
    if (profile_.kind == ProfileKind::Power && rs_ <= 0.0)
      throw DomainError("power_decay profile needs a positive smoothing radius");
    if (rs_ > 0.0) {
      double p0 = 0.0, p1 = 0.0, p2 = 0.0;
      profile_.eval(rs_, p0, p1, p2);
      c4_ = (p2 - p1 / rs_) / (8.0 * rs_ * rs_);
      c2_ = (p1 / rs_ - 4.0 * c4_ * rs_ * rs_) / 2.0;
      c0_ = p0 - c2_ * rs_ * rs_ - c4_ * rs_ * rs_ * rs_ * rs_;
      // the bridge must stay positive (psi > 0)
      for (int k = 0; k <= 64; ++k) {
        const double r = rs_ * k / 64.0;
        if (c0_ + c2_ * r * r + c4_ * r * r * r * r <= 0.0)
          throw DomainError("smoothed profile is not positive; reduce the smoothing radius");
      }
    }
  }

  int dim() const override { return d_; }

  double profile(double r) const {
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
    radial(r, p0, p1, p2);
    return p0;
  }

  double value(const Vec& x) const override {
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
    radial(x.norm(), p0, p1, p2);
    return scale_ * p0;
  }

  Vec gradient(const Vec& x) const override {
    const double r = x.norm();
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
    radial(r, p0, p1, p2);
    return scale_ * slope_over_r(r, p1) * x;
  }

  Mat hessian(const Vec& x) const override {
    const double r = x.norm();
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
    radial(r, p0, p1, p2);
    const double s = slope_over_r(r, p1);
    Mat h = s * Mat::Identity(d_, d_);
    if (r > 0.0) {
      const Vec u = x / r;
      h += (p2 - s) * (u * u.transpose());
    }
    return scale_ * h;
  }

  std::string describe() const override {
    static const char* names[] = {"exp", "power", "log"};
    return std::to_string(scale_) + "*" + names[static_cast<int>(profile_.kind)] +
           "_decay(|x|)";
  }

 private:
  void radial(double r, double& p0, double& p1, double& p2) const {
    if (r < rs_) {
      p0 = c0_ + c2_ * r * r + c4_ * r * r * r * r;
      p1 = 2.0 * c2_ * r + 4.0 * c4_ * r * r * r;
      p2 = 2.0 * c2_ + 12.0 * c4_ * r * r;
      return;
    }
    if (r == 0.0) {
      // Unsmoothed kink at the origin: psi(0) = 1 for exp and log profiles;
      // derivatives are reported as zero.
      p0 = 1.0;
      p1 = 0.0;
      p2 = 0.0;
      return;
    }
    profile_.eval(r, p0, p1, p2);
  }

  // psi'(r)/r, finite at the origin for the smoothed branch.
  double slope_over_r(double r, double p1) const {
    if (r < rs_) return 2.0 * c2_ + 4.0 * c4_ * r * r;
    if (r == 0.0) return 0.0;
    return p1 / r;
  }

  int d_;
  double scale_;
  RadialProfile profile_;
  double rs_;
  double c0_ = 0.0, c2_ = 0.0, c4_ = 0.0;
};

// User-supplied expression in x (d = 1) or x1..xd. Derivatives by central
// finite differences.
class ExpressionSurface final : public ScalarSurface {
 public:
  ExpressionSurface(int d, const std::string& source, double h_fd = 1e-5)
      : d_(d), expr_(source, variable_names(d)), h_(h_fd), h2_(1e-4) {}

  static std::vector<std::string> variable_names(int d) {
    if (d == 1) return {"x"};
    std::vector<std::string> names;
    for (int i = 1; i <= d; ++i) names.push_back("x" + std::to_string(i));
    return names;
  }

  int dim() const override { return d_; }
  double value(const Vec& x) const override { return expr_(x); }

  Vec gradient(const Vec& x) const override {
    Vec g(d_);
    Vec p = x;
    for (int i = 0; i < d_; ++i) {
      p(i) = x(i) + h_;
      const double fp = expr_(p);
      p(i) = x(i) - h_;
      const double fm = expr_(p);
      p(i) = x(i);
      g(i) = (fp - fm) / (2.0 * h_);
    }
    return g;
  }

  Mat hessian(const Vec& x) const override {
    Mat hm(d_, d_);
    const double f0 = expr_(x);
    const double h = h2_;
    Vec p = x;
    for (int i = 0; i < d_; ++i) {
      p(i) = x(i) + h;
      const double fp = expr_(p);
      p(i) = x(i) - h;
      const double fm = expr_(p);
      p(i) = x(i);
      hm(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
      for (int j = 0; j < i; ++j) {
        double acc = 0.0;
        for (int si = -1; si <= 1; si += 2) {
          for (int sj = -1; sj <= 1; sj += 2) {
            p(i) = x(i) + si * h;
            p(j) = x(j) + sj * h;
            acc += si * sj * expr_(p);
          }
        }
        p(i) = x(i);
        p(j) = x(j);
        hm(i, j) = hm(j, i) = acc / (4.0 * h * h);
      }
    }
    return hm;
  }

  std::string describe() const override { return expr_.source(); }

 private:
  int d_;
  Expression expr_;
  double h_;
  double h2_;
};

inline SurfacePtr constant_surface(int d, double level) {
  return std::make_shared<ConstantSurface>(d, level);
}
inline SurfacePtr radial_surface(int d, double scale, RadialProfile profile, double smoothing) {
  return std::make_shared<RadialSurface>(d, scale, profile, smoothing);
}
inline SurfacePtr expression_surface(int d, const std::string& source, double h_fd = 1e-5) {
  return std::make_shared<ExpressionSurface>(d, source, h_fd);
}

}  // namespace nstrip
