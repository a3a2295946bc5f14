#pragma once

#include <cmath>
#include <numbers>

#include "nstrip/config.hpp"

namespace fixtures {

using nstrip::Vec;

inline Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
inline Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

inline nstrip::ProbeGrid small_probes() { return nstrip::ProbeGrid{4.0, 0.25, 5, 20000}; }

// Unit flat strip [0, 1].
inline nstrip::StripDomain flat_strip() {
  return nstrip::StripDomain(nstrip::constant_surface(1, 0.0), nstrip::constant_surface(1, 1.0), small_probes());
}

// phi_i = lambda_i e^{-|x|}, lambda = (-1, 1), smoothed inside |x| < 0.5.
inline nstrip::StripDomain exp_strip(nstrip::ProbeGrid probes = {}) {
  nstrip::DomainSpec d;
  d.family = "exp_decay";
  d.probes = probes;
  return nstrip::make_domain(d);
}

inline nstrip::StripDomain expr_strip(const std::string& lower, const std::string& upper,
                                      nstrip::ProbeGrid probes = small_probes()) {
  return nstrip::StripDomain(nstrip::expression_surface(1, lower), nstrip::expression_surface(1, upper), probes);
}

// Closed forms for the reflected heat semigroup on [0, 1] with generator d^2/dy^2.
inline double flat_cos_value(double t, double y) {
  return std::exp(-std::numbers::pi * std::numbers::pi * t) * std::cos(std::numbers::pi * y);
}
inline double flat_cos_dy(double t, double y) {
  return -std::numbers::pi * std::exp(-std::numbers::pi * std::numbers::pi * t) * std::sin(std::numbers::pi * y);
}
// CDF of Y_t started at y0 (eigen expansion, truncated once terms fall below 1e-17).
inline double flat_cdf(double t, double y0, double y) {
  double s = y;
  for (int k = 1; k < 2000; ++k) {
    const double kp = k * std::numbers::pi;
    const double term = 2.0 * std::exp(-kp * kp * t) * std::cos(kp * y0) * std::sin(kp * y) / kp;
    s += term;
    if (std::exp(-kp * kp * t) < 1e-17) break;
  }
  return s;
}

}  // namespace fixtures
