#pragma once

// Independent reference computations shared by the unit tests and the acceptance binary.

#include "healsim/fem/assembly.hpp"
#include "healsim/healing.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace healsim::oracle {

/// Term-by-term re-evaluation of the total free energy for spherical growth.
inline double total_energy(const Tensor2& f, const InternalState& s, const Constituents& m, double g,
                           const NonlocalParams& nl) {
  auto psi = [](const Tensor2& fe, const NeoHookeanParams& p) {
    const double j = fe.determinant();
    const double i1 = (fe.transpose() * fe).trace();
    return 0.5 * p.mu * (i1 / std::pow(j, 2.0 / 3.0) - 3.0) + 0.5 * p.kappa * (j - 1.0) * (j - 1.0);
  };
  const double psi1 = psi(f / std::pow(s.jg1, 1.0 / 3.0), m.original);
  const double psi2 = psi(f / std::pow(s.jg2, 1.0 / 3.0), m.renewed);
  const double grad2 = s.grad_phi.x() * s.grad_phi.x() + s.grad_phi.y() * s.grad_phi.y();
  const double gap = s.phi - nl.gamma_d * s.d;
  const double term1 = std::exp(-s.d) * psi1 + nl.c_d / 2.0 * grad2 + nl.beta_d / 2.0 * gap * gap + g;
  return (1.0 - s.lambda) * s.jg1 * term1 + s.lambda * s.jg2 * psi2;
}

/// Richardson-extrapolated central difference of fn(eps) at eps = 0.
template <class Fn>
double derivative(Fn&& fn, double h) {
  const auto central = [&](double s) { return (fn(s) - fn(-s)) / (2.0 * s); };
  return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

/// Driving forces by differences of the total energy:
///   q_g1 = -1/((1-lambda) J_g1) dpsi/dF_g1 F_g1^T,   q_g2 = -1/(lambda J_g2) dpsi/dF_g2 F_g2^T,
///   q_rm = -dpsi/dlambda,                               q_d = -1/((1-lambda) J_g1) dpsi/dd,
/// with g held at its current value. Requires 0 < lambda < 1.
inline DrivingForces fd_driving_forces(const Tensor2& f, const InternalState& s, const Constituents& m,
                                       double g, const NonlocalParams& nl, double h = 1e-4) {
  const Tensor2 fg1 = std::cbrt(s.jg1) * Tensor2::Identity();
  const Tensor2 fg2 = std::cbrt(s.jg2) * Tensor2::Identity();
  auto energy = [&](const Tensor2& a, const Tensor2& b, double lambda, double d) {
    return healsim::total_energy(f, a, b, lambda, d, s.phi, s.grad_phi, g, m, nl);
  };
  auto unit = [](int i, int j) {
    Tensor2 e = Tensor2::Zero();
    e(i, j) = 1.0;
    return e;
  };
  DrivingForces q;
  Tensor2 d1, d2;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      d1(i, j) = derivative([&](double e) { return energy(fg1 + e * unit(i, j), fg2, s.lambda, s.d); }, h);
      d2(i, j) = derivative([&](double e) { return energy(fg1, fg2 + e * unit(i, j), s.lambda, s.d); }, h);
    }
  const double w1 = (1.0 - s.lambda) * s.jg1;
  const double w2 = s.lambda * s.jg2;
  q.qg1 = -(d1 * fg1.transpose()) / w1;
  q.qg2 = -(d2 * fg2.transpose()) / w2;
  q.qrm = -derivative([&](double e) { return energy(fg1, fg2, s.lambda + e, s.d); }, h);
  q.qd = -derivative([&](double e) { return energy(fg1, fg2, s.lambda, s.d + e); }, h) / w1;
  return q;
}

/// Random deformation gradient with det(F) uniform-ish in [jmin, jmax].
inline Tensor2 random_deformation(std::mt19937& rng, double jmin, double jmax) {
  std::uniform_real_distribution<double> u(-0.3, 0.3), uj(jmin, jmax);
  Tensor2 f = Tensor2::Identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) f(i, j) += u(rng);
  if (f.determinant() <= 0.0) f.col(0) *= -1.0;
  return std::cbrt(uj(rng) / f.determinant()) * f;
}

inline double relative_error(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

inline double relative_error(const Tensor2& a, const Tensor2& b, double floor = 1e-12) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

/// A 2x2-element square [0, 2]^2 with randomly perturbed interior and edge nodes.
inline fem::Mesh random_four_element_mesh(std::mt19937& rng, double jitter = 0.2) {
  std::uniform_real_distribution<double> u(-jitter, jitter);
  fem::Mesh m;
  for (int j = 0; j <= 2; ++j)
    for (int i = 0; i <= 2; ++i) {
      Vec2 p(i, j);
      if (i == 1) p.x() += u(rng);
      if (j == 1) p.y() += u(rng);
      m.nodes.push_back(p);
    }
  auto id = [](int i, int j) { return j * 3 + i; };
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      m.elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      m.region.push_back(0);
    }
  return m;
}

/// Dense central-difference Jacobian of the full assembled residual.
inline Eigen::MatrixXd fd_tangent(const fem::Model& model, const std::vector<fem::QuadraturePoint>& qps,
                                  const Eigen::VectorXd& x, double h = 1e-6) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd k(n, n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    k.col(j) = (fem::assemble_residual(model, qps, xp) - fem::assemble_residual(model, qps, xm)) / (2 * h);
  }
  return k;
}

/// Dense Gaussian elimination with partial pivoting, independent of the library factorizations.
inline Eigen::VectorXd dense_lu_solve(Eigen::MatrixXd a, Eigen::VectorXd b) {
  const int n = static_cast<int>(a.rows());
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (a(p, k) == 0.0) throw std::runtime_error("dense_lu_solve: singular matrix");
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      std::swap(b[k], b[p]);
    }
    for (int i = k + 1; i < n; ++i) {
      const double l = a(i, k) / a(k, k);
      for (int j = k; j < n; ++j) a(i, j) -= l * a(k, j);
      b[i] -= l * b[k];
    }
  }
  Eigen::VectorXd x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

}  // namespace healsim::oracle
