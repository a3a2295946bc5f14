#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace nstrip {

// Ambient dimension d+1 is capped so that small vectors and matrices live on
// the stack; the path loops call into them millions of times.
inline constexpr int kMaxAmbient = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAmbient, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAmbient, kMaxAmbient>;

// Base error for everything thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid domain / surface data (non-positive width, bad face index, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid user configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An iterative routine failed to converge. Carries the input that triggered it.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Vec input)
      : Error(what), input_(std::move(input)) {}
  const Vec& input() const { return input_; }

 private:
  Vec input_;
};

// Numeric overflow in multiplicative functionals.
class OverflowError : public Error {
 public:
  using Error::Error;
};

inline Vec zeros(int n) { return Vec::Zero(n); }

inline Vec basis(int n, int i) {
  Vec e = Vec::Zero(n);
  e(i) = 1.0;
  return e;
}

// Operator 2-norm of a small matrix.
inline double operator_norm(const Mat& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

}  // namespace nstrip
