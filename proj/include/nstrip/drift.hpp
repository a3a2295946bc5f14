#pragma once

// Drift vector fields Z on R^{d+1} with Jacobians and a dissipativity bound K
// satisfying <(grad_v Z) v, v> <= K |v|^2.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nstrip/expression.hpp"
#include "nstrip/geometry.hpp"
#include "nstrip/rng.hpp"
#include "nstrip/types.hpp"

namespace nstrip {

class DriftField {
 public:
  virtual ~DriftField() = default;
  virtual int ambient() const = 0;
  virtual Vec value(const Vec& p) const = 0;
  // J(i, j) = dZ_i / dp_j
  virtual Mat jacobian(const Vec& p) const = 0;
  virtual bool is_zero() const { return false; }
  // Jacobian independent of the point (enables exact exponential transport).
  virtual bool constant_jacobian() const { return false; }
  virtual std::string describe() const = 0;

  std::optional<double> supplied_bound;
};

using DriftPtr = std::shared_ptr<const DriftField>;

class ZeroDrift final : public DriftField {
 public:
  explicit ZeroDrift(int ambient) : n_(ambient) {}
  int ambient() const override { return n_; }
  Vec value(const Vec&) const override { return Vec::Zero(n_); }
  Mat jacobian(const Vec&) const override { return Mat::Zero(n_, n_); }
  bool is_zero() const override { return true; }
  bool constant_jacobian() const override { return true; }
  std::string describe() const override { return "zero"; }

 private:
  int n_;
};

// Z(p) = A p + b
class LinearDrift final : public DriftField {
 public:
  LinearDrift(Mat a, Vec b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() != a_.cols() || a_.rows() != b_.size())
      throw ConfigError("linear drift: matrix and offset sizes disagree");
  }
  int ambient() const override { return static_cast<int>(a_.rows()); }
  Vec value(const Vec& p) const override { return a_ * p + b_; }
  Mat jacobian(const Vec&) const override { return a_; }
  bool constant_jacobian() const override { return true; }
  std::string describe() const override { return "linear"; }
  const Mat& matrix() const { return a_; }

 private:
  Mat a_;
  Vec b_;
};

// Z = (-k x / sqrt(1 + |x|^2), 0): a bounded inward pull in the base variables,
// which keeps |phi'| |Z_1| / phi bounded on exponential strips.
class RadialDecayDrift final : public DriftField {
 public:
  RadialDecayDrift(int d, double strength) : d_(d), k_(strength) {}
  int ambient() const override { return d_ + 1; }
  Vec value(const Vec& p) const override {
    Vec z = Vec::Zero(d_ + 1);
    const Vec x = p.head(d_);
    z.head(d_) = -k_ * x / std::sqrt(1.0 + x.squaredNorm());
    return z;
  }
  Mat jacobian(const Vec& p) const override {
    Mat j = Mat::Zero(d_ + 1, d_ + 1);
    const Vec x = p.head(d_);
    const double s = 1.0 + x.squaredNorm();
    const double r = std::sqrt(s);
    j.topLeftCorner(d_, d_) =
        -k_ * (Mat::Identity(d_, d_) / r - x * x.transpose() / (s * r));
    return j;
  }
  std::string describe() const override { return "radial_decay(" + std::to_string(k_) + ")"; }

 private:
  int d_;
  double k_;
};

// Components given as expressions in x (or x1..xd) and y; Jacobian by
// central differences.
class ExpressionDrift final : public DriftField {
 public:
  ExpressionDrift(int d, const std::vector<std::string>& components, double h_fd = 1e-5)
      : d_(d), h_(h_fd) {
    if (static_cast<int>(components.size()) != d + 1)
      throw ConfigError("expression drift needs d+1 components");
    std::vector<std::string> names = ExpressionSurface::variable_names(d);
    names.push_back("y");
    for (const auto& c : components) exprs_.emplace_back(c, names);
  }
  int ambient() const override { return d_ + 1; }
  Vec value(const Vec& p) const override {
    Vec z(d_ + 1);
    for (int i = 0; i <= d_; ++i) z(i) = exprs_[static_cast<std::size_t>(i)](p);
    return z;
  }
  Mat jacobian(const Vec& p) const override {
    Mat j(d_ + 1, d_ + 1);
    Vec q = p;
    for (int c = 0; c <= d_; ++c) {
      q(c) = p(c) + h_;
      const Vec zp = value(q);
      q(c) = p(c) - h_;
      const Vec zm = value(q);
      q(c) = p(c);
      j.col(c) = (zp - zm) / (2.0 * h_);
    }
    return j;
  }
  std::string describe() const override {
    std::string s = "expression(";
    for (std::size_t i = 0; i < exprs_.size(); ++i) s += (i ? ", " : "") + exprs_[i].source();
    return s + ")";
  }

 private:
  int d_;
  double h_;
  std::vector<Expression> exprs_;
};

inline DriftPtr zero_drift(int ambient) { return std::make_shared<ZeroDrift>(ambient); }

// Largest sampled <J v, v> over 10^4 random points of D and unit v, plus a 10%
// margin. Returns the supplied bound when one is set.
inline double dissipativity_bound(const StripDomain& dom, const DriftField& z,
                                  std::size_t samples = 10000, std::uint64_t seed = 0x4b4b4bull) {
  if (z.supplied_bound) return *z.supplied_bound;
  if (z.is_zero()) return 0.0;
  const int d = dom.dim();
  const int n = d + 1;
  RandomStream rng(seed, kAuxStreamBase + 5);
  const double radius = dom.check_radius();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x(i) = -radius + 2.0 * radius * rng.uniform();
    const double lo = dom.surface(1).value(x);
    const double hi = dom.surface(2).value(x);
    Vec p(n);
    p.head(d) = x;
    p(d) = lo + (hi - lo) * rng.uniform();
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal();
    v.normalize();
    best = std::max(best, v.dot(z.jacobian(p) * v));
  }
  return best + 0.1 * std::abs(best);
}

}  // namespace nstrip
