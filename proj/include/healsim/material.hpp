#pragma once

// Compressible neo-Hookean response of the undamaged constituents:
//
//   psi(F_e) = mu/2 (J_e^{-2/3} tr C_e - 3) + kappa/2 (J_e - 1)^2
//
// plus the two-constituent composite used by the finite-element kernels, in which
// constituent 1 is weighted by (1 - lambda) f(d) and constituent 2 by lambda.

#include "healsim/kinematics.hpp"
#include "healsim/state.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace healsim {

struct NeoHookeanParams {
  double mu = 1.0;     // shear modulus
  double kappa = 1.0;  // bulk modulus

  void validate() const {
    if (!(mu > 0.0) || !(kappa > 0.0)) {
      throw std::domain_error("neo-Hookean moduli must be positive (mu=" + std::to_string(mu) +
                              ", kappa=" + std::to_string(kappa) + ")");
    }
  }
};

struct StressState {
  Tensor2 cauchy = Tensor2::Zero();
  Tensor2 first_pk = Tensor2::Zero();
  double energy_density = 0.0;
};

namespace detail {
inline double checked_jacobian(const Tensor2& f, const char* where) {
  const double j = f.determinant();
  if (!(j > 0.0)) {
    throw std::domain_error(std::string(where) + ": non-positive Jacobian " + std::to_string(j));
  }
  return j;
}
}  // namespace detail

inline double elastic_energy(const Tensor2& fe, const NeoHookeanParams& p) {
  const double j = detail::checked_jacobian(fe, "elastic_energy");
  const double i1 = (fe.transpose() * fe).trace();
  return 0.5 * p.mu * ((1.0 / pow_two_thirds(j)) * i1 - 3.0) + 0.5 * p.kappa * (j - 1.0) * (j - 1.0);
}

/// d psi / d F_e.
inline Tensor2 energy_gradient(const Tensor2& fe, const NeoHookeanParams& p) {
  const double j = detail::checked_jacobian(fe, "energy_gradient");
  const double i1 = (fe.transpose() * fe).trace();
  const Tensor2 h = fe.inverse().transpose();
  return p.mu * (1.0 / pow_two_thirds(j)) * (fe - (i1 / 3.0) * h) + p.kappa * (j - 1.0) * j * h;
}

/// d^2 psi / d F_e d F_e, stored as A(i,J,k,L) = d P_iJ / d F_kL.
inline Tensor4 energy_hessian(const Tensor2& fe, const NeoHookeanParams& p) {
  const double j = detail::checked_jacobian(fe, "energy_hessian");
  const double i1 = (fe.transpose() * fe).trace();
  const Tensor2 h = fe.inverse().transpose();
  const double m = p.mu * (1.0 / pow_two_thirds(j));
  const double v1 = p.kappa * (2.0 * j * j - j);
  const double v2 = p.kappa * (j * j - j);
  Tensor4 a;
  for (int i = 0; i < 3; ++i)
    for (int jj = 0; jj < 3; ++jj)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          double val = m * (-2.0 / 3.0 * (fe(i, jj) * h(k, l) + h(i, jj) * fe(k, l)) +
                            2.0 / 9.0 * i1 * h(i, jj) * h(k, l) + i1 / 3.0 * h(i, l) * h(k, jj));
          if (i == k && jj == l) val += m;
          val += v1 * h(i, jj) * h(k, l) - v2 * h(i, l) * h(k, jj);
          a(i, jj, k, l) = val;
        }
  return a;
}

/// Cauchy stress of one constituent grown by J_g: (1/J_e) dpsi/dF_e F_e^T.
inline Tensor2 cauchy_stress(const Tensor2& f, double growth_jacobian, const NeoHookeanParams& p) {
  detail::checked_jacobian(f, "cauchy_stress");
  const Tensor2 fe = elastic_part(f, growth_jacobian);
  const double je = fe.determinant();
  const double i1 = (fe.transpose() * fe).trace();
  // mu J_e^{-5/3} dev(b_e) + kappa (J_e - 1) I, written so that F_e = I gives exactly zero
  const Tensor2 b = fe * fe.transpose();
  return p.mu * (1.0 / (je * pow_two_thirds(je))) * (b - (i1 / 3.0) * Tensor2::Identity()) +
         p.kappa * (je - 1.0) * Tensor2::Identity();
}

/// First Piola-Kirchhoff stress weight * J_g * dpsi/dF_e * F_g^{-T}.
///
/// `stiffness_factor` is the constituent weight ((1 - lambda) f(d) or lambda); the growth
/// volume factor J_g is applied here.
inline Tensor2 first_pk_stress(const Tensor2& f, double growth_jacobian, const NeoHookeanParams& p,
                               double stiffness_factor = 1.0) {
  detail::checked_jacobian(f, "first_pk_stress");
  const Tensor2 fe = elastic_part(f, growth_jacobian);
  return stiffness_factor * pow_two_thirds(growth_jacobian) * energy_gradient(fe, p);
}

inline StressState stress_state(const Tensor2& f, double growth_jacobian, const NeoHookeanParams& p) {
  StressState s;
  s.cauchy = cauchy_stress(f, growth_jacobian, p);
  s.first_pk = first_pk_stress(f, growth_jacobian, p);
  s.energy_density = growth_jacobian * elastic_energy(elastic_part(f, growth_jacobian), p);
  return s;
}

/// Mechanical response of the two-constituent mixture at fixed internal variables.
struct CompositeResponse {
  double energy = 0.0;                 // elastic energy per reference volume
  Tensor2 first_pk = Tensor2::Zero();  // P = d energy / d F
  Tensor4 tangent;                     // A = d P / d F
};

struct ConstituentWeights {
  double original = 1.0;  // (1 - lambda) f(d)
  double renewed = 0.0;   // lambda
};

inline ConstituentWeights constituent_weights(const InternalState& s) {
  return {(1.0 - s.lambda) * damage_function(s.d), s.lambda};
}

inline CompositeResponse composite_response(const Tensor2& f, const InternalState& s,
                                            const NeoHookeanParams& p1, const NeoHookeanParams& p2,
                                            bool with_tangent = true) {
  detail::checked_jacobian(f, "composite_response");
  const ConstituentWeights w = constituent_weights(s);
  CompositeResponse r;
  auto add = [&](double weight, double jg, const NeoHookeanParams& p) {
    if (weight == 0.0) return;
    const Tensor2 fe = elastic_part(f, jg);
    r.energy += weight * jg * elastic_energy(fe, p);
    r.first_pk += weight * pow_two_thirds(jg) * energy_gradient(fe, p);
    if (with_tangent) r.tangent += (weight * std::cbrt(jg)) * energy_hessian(fe, p);
  };
  add(w.original, s.jg1, p1);
  add(w.renewed, s.jg2, p2);
  return r;
}

/// Referential tangent 4 d^2 psi / dC dC of the mixture, recovered from A = dP/dF.
inline Tensor4 material_tangent_referential(const Tensor2& f, const InternalState& s,
                                            const NeoHookeanParams& p1, const NeoHookeanParams& p2) {
  const CompositeResponse r = composite_response(f, s, p1, p2);
  const Tensor2 finv = f.inverse();
  const Tensor2 pk2 = finv * r.first_pk;
  Tensor4 reduced = r.tangent;
  for (int i = 0; i < 3; ++i)
    for (int jj = 0; jj < 3; ++jj)
      for (int l = 0; l < 3; ++l) reduced(i, jj, i, l) -= pk2(jj, l);
  Tensor4 c;
  for (int ii = 0; ii < 3; ++ii)
    for (int jj = 0; jj < 3; ++jj)
      for (int kk = 0; kk < 3; ++kk)
        for (int ll = 0; ll < 3; ++ll) {
          double v = 0.0;
          for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) v += finv(ii, i) * finv(kk, k) * reduced(i, jj, k, ll);
          c(ii, jj, kk, ll) = v;
        }
  return c;
}

/// Spatial tangent of the mixture, c_ijkl = (1/J) F_iI F_jJ F_kK F_lL C_IJKL.
inline Tensor4 material_tangent(const Tensor2& f, const InternalState& s, const NeoHookeanParams& p1,
                                const NeoHookeanParams& p2) {
  const Tensor4 cref = material_tangent_referential(f, s, p1, p2);
  const double j = f.determinant();
  // Two-step push-forward to keep the cost at O(3^5) per index pair.
  Tensor4 half;
  for (int i = 0; i < 3; ++i)
    for (int jj = 0; jj < 3; ++jj)
      for (int kk = 0; kk < 3; ++kk)
        for (int ll = 0; ll < 3; ++ll) {
          double v = 0.0;
          for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) v += f(i, a) * f(jj, b) * cref(a, b, kk, ll);
          half(i, jj, kk, ll) = v;
        }
  Tensor4 c;
  for (int i = 0; i < 3; ++i)
    for (int jj = 0; jj < 3; ++jj)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          double v = 0.0;
          for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) v += f(k, a) * f(l, b) * half(i, jj, a, b);
          c(i, jj, k, l) = v / j;
        }
  return c;
}

}  // namespace healsim
