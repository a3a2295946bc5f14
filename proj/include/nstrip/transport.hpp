#pragma once

// Matrix transport Q_s along a discretised path: interior flow by grad Z and,
// at boundary events, curvature correction followed by projection onto the
// tangent space. The ledger bound_exponent accumulates K ds + sigma dl.

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "nstrip/drift.hpp"
#include "nstrip/geometry.hpp"
#include "nstrip/sde.hpp"

namespace nstrip {

struct TransportState {
  Mat Q;
  double bound_exponent = 0.0;

  static TransportState identity(int n) { return {Mat::Identity(n, n), 0.0}; }

  double norm() const { return operator_norm(Q); }
  double bound() const { return std::exp(bound_exponent); }
  // ||Q|| <= e^{bound_exponent} (1 + rel_tol)
  bool within_bound(double rel_tol = 1e-6) const {
    return norm() <= bound() * (1.0 + rel_tol);
  }
};

inline constexpr double kMaxBoundExponent = 700.0;

// Q <- Q + dt (grad Z) Q, or Q <- exp(dt grad Z) Q when `exact`.
inline void transport_interior(TransportState& s, const Mat& jac, double dt, double K,
                               bool exact = false) {
  if (exact) {
    const Eigen::MatrixXd a = (dt * jac).eval();
    const Eigen::MatrixXd e = a.exp();
    s.Q = Mat(e) * s.Q;
  } else {
    s.Q += dt * (jac * s.Q);
  }
  s.bound_exponent += K * dt;
  if (s.bound_exponent > kMaxBoundExponent) throw OverflowError("transport bound exponent overflow");
}

// Boundary event at `p` with local-time increment dl:
//   Q <- (I - N N^T)(I - dl II) Q,  bound += sigma(p) dl.
inline void transport_event(TransportState& s, const StripDomain& dom, const BoundaryPoint& p,
                            double dl) {
  const Vec nrm = dom.inward_normal(p);
  if (dl > 0.0) {
    const Mat ii = dom.sff_matrix(p);
    s.Q -= dl * (ii * s.Q);
    s.bound_exponent += dom.sff_lower_bound(p) * dl;
  }
  s.Q -= nrm * (nrm.transpose() * s.Q);
  if (s.bound_exponent > kMaxBoundExponent) throw OverflowError("transport bound exponent overflow");
}

// Applies one recorded step (interior part at the pre-step point, then events).
inline void transport_step(TransportState& s, const StripDomain& dom, const DriftField& z,
                           const Vec& before, const StepResult& r, double dt, double K,
                           bool exact = false) {
  if (!z.is_zero()) {
    transport_interior(s, z.jacobian(before), dt, K, exact && z.constant_jacobian());
  } else {
    s.bound_exponent += K * dt;
  }
  for (const auto& e : r.events) transport_event(s, dom, dom.boundary_point(e.base, e.face), e.dl);
}

// Replays the transport over a recorded path, calling check(k, state) after
// every step.
template <class Check>
inline TransportState replay_transport(const StripDomain& dom, const DriftField& z,
                                       const PathRecord& rec, double K, Check&& check) {
  TransportState s = TransportState::identity(dom.ambient());
  std::size_t ev = 0;
  for (std::size_t k = 0; k + 1 < rec.states.size(); ++k) {
    const double dt = rec.times[k + 1] - rec.times[k];
    if (!z.is_zero()) transport_interior(s, z.jacobian(rec.states[k]), dt, K, false);
    else s.bound_exponent += K * dt;
    while (ev < rec.events.size() && rec.events[ev].step == k) {
      const auto& e = rec.events[ev];
      transport_event(s, dom, dom.boundary_point(StripDomain::base_of(e.contact), e.face), e.dl);
      ++ev;
    }
    check(k, s);
  }
  return s;
}

}  // namespace nstrip
