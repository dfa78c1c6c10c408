#pragma once

// Driving forces and explicit evolution of the healing internal variables:
// growth of both constituents (J_g1, J_g2), remodeling (lambda) and damage (d).
//
// Every driving force is the negative derivative of the total free energy
//
//   psi = (1 - lambda) J_g1 ( f(d) psi_1 + c_d/2 |grad phi|^2 + beta_d/2 (phi - gamma_d d)^2 + g(d) )
//       + lambda J_g2 psi_2
//
// with respect to its conjugate variable, divided by the composite prefactor that
// also multiplies the matching dissipation potential. g(d) is treated as an
// external (physiological) potential and is held fixed when differentiating in d.

#include "healsim/kinematics.hpp"
#include "healsim/material.hpp"
#include "healsim/state.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace healsim {

/// Physiological potential g(d).
struct PhysiologicalPotential {
  enum class Mode { constant, saturating };
  Mode mode = Mode::constant;
  double value = 0.001;     // constant mode
  double amplitude = 0.0;   // saturating mode: a (1 - exp(-d))

  double operator()(double d) const {
    if (d < 0.0) throw std::domain_error("physiological_potential: negative damage");
    return mode == Mode::constant ? value : amplitude * (1.0 - std::exp(-d));
  }
};

inline double physiological_potential(double d, const PhysiologicalPotential& g) { return g(d); }

struct NonlocalParams {
  double c_d = 1.0;      // gradient regularization
  double beta_d = 0.001; // penalty coupling phi to d
  double gamma_d = 1.0;  // local/nonlocal switch
};

struct HealingParams {
  double mg1 = 0.0;  // growth mobility, original tissue
  double mg2 = 0.0;  // growth mobility, new tissue
  double rg1 = 0.0;  // growth limits (energy density)
  double rg2 = 0.0;
  double mrm = 0.0;  // remodeling mobility
  double rrm = 0.0;  // remodeling threshold
  double eta = 0.0;  // cap on the healable fraction
  double md = 0.0;   // damage mobility
  double rd = 0.0;   // damage threshold
  PhysiologicalPotential g;
  /// Mobilities act on driving forces divided by this stress (the shear modulus of the
  /// original tissue), so a mobility in 1/day produces a rate in 1/day.
  double stress_scale = 1.0;

  void validate() const {
    if (mg1 < 0 || mg2 < 0 || mrm < 0 || md < 0) throw std::domain_error("mobilities must be non-negative");
    if (rg1 < 0 || rg2 < 0 || rrm < 0 || rd < 0) throw std::domain_error("thresholds must be non-negative");
    if (eta < 0 || eta > 1) throw std::domain_error("eta must lie in [0,1]");
    if (!(stress_scale > 0)) throw std::domain_error("stress_scale must be positive");
  }
};

struct Constituents {
  NeoHookeanParams original;
  NeoHookeanParams renewed;
};

struct DrivingForces {
  Tensor2 qg1 = Tensor2::Zero();
  Tensor2 qg2 = Tensor2::Zero();
  double qrm = 0.0;
  double qd = 0.0;
};

/// c_d/2 |grad phi|^2 + beta_d/2 (phi - gamma_d d)^2.
inline double nonlocal_energy(const InternalState& s, const NonlocalParams& nl) {
  const double gap = s.phi - nl.gamma_d * s.d;
  return 0.5 * nl.c_d * s.grad_phi.squaredNorm() + 0.5 * nl.beta_d * gap * gap;
}

inline DrivingForces driving_forces(const Tensor2& f, const InternalState& s, const Constituents& mats,
                                    const HealingParams& hp, const NonlocalParams& nl) {
  const Tensor2 fe1 = elastic_part(f, s.jg1);
  const Tensor2 fe2 = elastic_part(f, s.jg2);
  const double psi1 = elastic_energy(fe1, mats.original);
  const double psi2 = elastic_energy(fe2, mats.renewed);
  const double fd = damage_function(s.d);
  const double g = hp.g(s.d);
  const double stored1 = fd * psi1 + nonlocal_energy(s, nl) + g;

  DrivingForces q;
  q.qg1 = -stored1 * Tensor2::Identity() + fd * fe1.transpose() * energy_gradient(fe1, mats.original);
  q.qg2 = -psi2 * Tensor2::Identity() + fe2.transpose() * energy_gradient(fe2, mats.renewed);
  q.qrm = s.jg1 * stored1 - s.jg2 * psi2;
  q.qd = -damage_function_derivative(s.d) * psi1 + nl.beta_d * nl.gamma_d * (s.phi - nl.gamma_d * s.d);
  return q;
}

/// Total free energy per reference volume for general (not necessarily spherical)
/// growth tensors. `g` is the physiological potential value.
inline double total_energy(const Tensor2& f, const Tensor2& fg1, const Tensor2& fg2, double lambda, double d,
                           double phi, const Vec2& grad_phi, double g, const Constituents& mats,
                           const NonlocalParams& nl) {
  const double jg1 = fg1.determinant();
  const double jg2 = fg2.determinant();
  const double psi1 = elastic_energy(f * fg1.inverse(), mats.original);
  const double psi2 = elastic_energy(f * fg2.inverse(), mats.renewed);
  const double gap = phi - nl.gamma_d * d;
  const double nonlocal = 0.5 * nl.c_d * grad_phi.squaredNorm() + 0.5 * nl.beta_d * gap * gap;
  return (1.0 - lambda) * jg1 * (std::exp(-d) * psi1 + nonlocal + g) + lambda * jg2 * psi2;
}

inline double total_energy(const Tensor2& f, const InternalState& s, const Constituents& mats,
                           const HealingParams& hp, const NonlocalParams& nl) {
  return total_energy(f, GrowthDeformation{s.jg1}.tensor(), GrowthDeformation{s.jg2}.tensor(), s.lambda, s.d,
                      s.phi, s.grad_phi, hp.g(s.d), mats, nl);
}

/// Volumetric growth rate J_g'/J_g = tr(L_g) for the flow L_g = M (|q| - r)_+ sign(q).
inline double growth_rate(const Tensor2& q, double mobility, double limit, double stress_scale) {
  const double n = q.norm();
  const double excess = std::max(n - limit, 0.0);
  if (excess == 0.0 || mobility == 0.0) return 0.0;
  return mobility / stress_scale * excess * sign_tensor(q).trace();
}

inline double remodeling_rate(double qrm, double lambda, const HealingParams& hp) {
  const double excess = std::max(std::abs(qrm) - hp.rrm, 0.0);
  const double sign = qrm > 0 ? 1.0 : (qrm < 0 ? -1.0 : 0.0);
  double rate = hp.mrm / hp.stress_scale * std::max(hp.eta - lambda, 0.0) * excess * sign;
  // lambda cannot drop below zero: no new tissue left to convert back.
  if (lambda <= 0.0 && rate < 0.0) rate = 0.0;
  return rate;
}

inline double damage_rate(double qd, const HealingParams& hp) {
  return hp.md / hp.stress_scale * std::max(qd - hp.rd, 0.0);
}

/// Outcome of one explicit step, with the diagnostics the adaptive driver needs.
struct EvolveStep {
  InternalState state;
  DrivingForces forces;  // evaluated at the incoming state
  bool clamped = false;         // an invariant had to be enforced by clamping
  bool growth_excess_grew = false;  // |q_g| - r_g increased over the step
};

inline EvolveStep evolve_step(const InternalState& s, const Tensor2& f, const HealingParams& hp,
                              const Constituents& mats, const NonlocalParams& nl, double dt) {
  if (!(dt > 0.0)) throw std::domain_error("evolve: time step must be positive, got " + std::to_string(dt));
  EvolveStep out;
  out.forces = driving_forces(f, s, mats, hp, nl);
  const DrivingForces& q = out.forces;
  InternalState n = s;

  const double gr1 = growth_rate(q.qg1, hp.mg1, hp.rg1, hp.stress_scale);
  const double gr2 = growth_rate(q.qg2, hp.mg2, hp.rg2, hp.stress_scale);
  n.jg1 = s.jg1 * (1.0 + dt * gr1);
  n.jg2 = s.jg2 * (1.0 + dt * gr2);
  if (!(n.jg1 > 0.0)) {
    n.jg1 = 0.5 * s.jg1;
    out.clamped = true;
  }
  if (!(n.jg2 > 0.0)) {
    n.jg2 = 0.5 * s.jg2;
    out.clamped = true;
  }

  n.lambda = s.lambda + dt * remodeling_rate(q.qrm, s.lambda, hp);
  // Reaching zero from above is the constrained flow hitting its bound, not a clamp.
  if (n.lambda < 0.0) n.lambda = 0.0;
  const double lambda_cap = std::max(hp.eta, s.lambda);
  if (n.lambda > lambda_cap) {
    n.lambda = lambda_cap;
    out.clamped = true;
  }

  n.d = s.d + dt * damage_rate(q.qd, hp);

  if (hp.mg1 > 0.0 || hp.mg2 > 0.0) {
    const DrivingForces qn = driving_forces(f, n, mats, hp, nl);
    const auto grew = [](const Tensor2& before, const Tensor2& after, double limit, double mobility) {
      if (mobility == 0.0) return false;
      const double e0 = before.norm() - limit;
      const double e1 = after.norm() - limit;
      return e0 > 0.0 && e1 > e0 + 1e-9 * before.norm() + 1e-14;
    };
    out.growth_excess_grew = grew(q.qg1, qn.qg1, hp.rg1, hp.mg1) || grew(q.qg2, qn.qg2, hp.rg2, hp.mg2);
  }
  out.state = n;
  return out;
}

/// One forward-Euler step of all internal variables, clamped to their invariants.
inline InternalState evolve(const InternalState& s, const Tensor2& f, const HealingParams& hp,
                            const Constituents& mats, const NonlocalParams& nl, double dt) {
  InternalState n = evolve_step(s, f, hp, mats, nl, dt).state;
  check_invariants(n);
  return n;
}

/// sum q . dz over all internal variables, weighted by the prefactors of the dissipation
/// potential (growth terms contracted with L_g dt = (d ln J_g / 3) I).
inline double dissipation_increment(const InternalState& before, const InternalState& after,
                                    const DrivingForces& q, double /*dt*/) {
  const double dlog1 = std::log(after.jg1 / before.jg1) / 3.0;
  const double dlog2 = std::log(after.jg2 / before.jg2) / 3.0;
  const double w1 = (1.0 - before.lambda) * before.jg1;
  const double w2 = before.lambda * before.jg2;
  return w1 * (q.qg1.trace() * dlog1 + q.qd * (after.d - before.d)) + w2 * q.qg2.trace() * dlog2 +
         q.qrm * (after.lambda - before.lambda);
}

/// Result of integrating one increment at a quadrature point with automatic halving.
struct LocalIntegration {
  InternalState state;
  double dissipation = 0.0;
  int clamps = 0;          // clamps that survived the maximum halving depth
  int unresolved = 0;      // growth excess still increasing at maximum depth
  int substeps = 0;
};

inline void integrate_local_impl(const InternalState& s, const Tensor2& f, const HealingParams& hp,
                                 const Constituents& mats, const NonlocalParams& nl, double dt, int depth,
                                 int max_depth, LocalIntegration& acc) {
  EvolveStep step = evolve_step(s, f, hp, mats, nl, dt);
  if ((step.clamped || step.growth_excess_grew) && depth < max_depth) {
    LocalIntegration half;
    integrate_local_impl(s, f, hp, mats, nl, 0.5 * dt, depth + 1, max_depth, half);
    integrate_local_impl(half.state, f, hp, mats, nl, 0.5 * dt, depth + 1, max_depth, half);
    acc.state = half.state;
    acc.dissipation += half.dissipation;
    acc.clamps += half.clamps;
    acc.unresolved += half.unresolved;
    acc.substeps += half.substeps;
    return;
  }
  acc.dissipation += dissipation_increment(s, step.state, step.forces, dt);
  acc.clamps += step.clamped ? 1 : 0;
  acc.unresolved += step.growth_excess_grew ? 1 : 0;
  acc.substeps += 1;
  acc.state = step.state;
}

/// Advances the state over dt at fixed deformation, halving the local step (up to
/// `max_halvings` times) whenever a clamp activates or the growth excess grows.
inline LocalIntegration integrate_local(const InternalState& s, const Tensor2& f, const HealingParams& hp,
                                        const Constituents& mats, const NonlocalParams& nl, double dt,
                                        int max_halvings = 10) {
  LocalIntegration acc;
  acc.state = s;
  integrate_local_impl(s, f, hp, mats, nl, dt, 0, max_halvings, acc);
  check_invariants(acc.state);
  return acc;
}

/// Growth limits |q_g1|, |q_g2| at the current state; frozen as r_g1, r_g2 afterwards.
inline std::pair<double, double> capture_growth_limit(const Tensor2& f, const InternalState& s,
                                                      const Constituents& mats, const HealingParams& hp,
                                                      const NonlocalParams& nl) {
  const DrivingForces q = driving_forces(f, s, mats, hp, nl);
  return {q.qg1.norm(), q.qg2.norm()};
}

}  // namespace healsim
