#pragma once

#include "healsim/kinematics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace healsim {

/// Per-quadrature-point history.
///
/// Constituent 1 is the original tissue (subject to damage), constituent 2 the newly
/// deposited tissue occupying volume fraction `lambda`. `phi` and `grad_phi` are the
/// nonlocal damage field and its referential gradient interpolated to the point.
struct InternalState {
  double jg1 = 1.0;
  double jg2 = 1.0;
  double lambda = 0.0;
  double d = 0.0;
  double phi = 0.0;
  Vec2 grad_phi = Vec2::Zero();

  bool operator==(const InternalState& o) const {
    return jg1 == o.jg1 && jg2 == o.jg2 && lambda == o.lambda && d == o.d && phi == o.phi &&
           grad_phi == o.grad_phi;
  }
};

/// Throws std::logic_error when the state leaves its admissible set.
inline void check_invariants(const InternalState& s) {
  if (!(s.jg1 > 0.0) || !(s.jg2 > 0.0) || !(s.lambda >= 0.0) || !(s.lambda <= 1.0) || !(s.d >= 0.0) ||
      !std::isfinite(s.phi)) {
    throw std::logic_error("internal state out of bounds: Jg1=" + std::to_string(s.jg1) +
                           " Jg2=" + std::to_string(s.jg2) + " lambda=" + std::to_string(s.lambda) +
                           " d=" + std::to_string(s.d));
  }
}

/// Stiffness reduction f(d) = exp(-d).
inline double damage_function(double d) {
  if (d < 0.0) throw std::domain_error("damage_function: negative damage " + std::to_string(d));
  return std::exp(-d);
}

/// f'(d).
inline double damage_function_derivative(double d) { return -damage_function(d); }

/// H = (1 - lambda) f(d) + lambda.
inline double healing_parameter(const InternalState& s) {
  return (1.0 - s.lambda) * damage_function(s.d) + s.lambda;
}

}  // namespace healsim
