#pragma once

// Residual and tangent of the coupled displacement / nonlocal-damage problem,
// written in the reference configuration. Internal variables are frozen.
//
//   R_u   = int P : grad(dN) dV - int B N dV - int_edge T N dA
//   R_phi = int w (c_d grad(phi) . grad(N) + beta_d (phi - gamma_d d) N) dV,   w = (1 - lambda) J_g1

#include "healsim/fem/mesh.hpp"
#include "healsim/healing.hpp"
#include "healsim/material.hpp"
#include "healsim/state.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace healsim::fem {

enum class PlaneMode { strain, stress };

inline constexpr int dofs_per_node = 3;  // u_x, u_y, phi

/// Lower bound for the weight of the nonlocal equation once the original tissue is fully replaced.
inline constexpr double nonlocal_weight_floor = 1e-6;

struct RegionMaterial {
  std::string name;
  Constituents mats;
  HealingParams healing;
  NonlocalParams nonlocal;
};

/// Dead load on a boundary edge, per unit reference length.
struct EdgeLoad {
  int node_a = 0;
  int node_b = 0;
  Vec2 traction = Vec2::Zero();
};

struct Model {
  Mesh mesh;
  PlaneMode plane = PlaneMode::strain;
  std::vector<RegionMaterial> regions;
  Vec2 body_force = Vec2::Zero();  // per unit reference volume
  std::vector<EdgeLoad> edge_loads;

  int num_dofs() const { return dofs_per_node * mesh.num_nodes(); }
  const RegionMaterial& material_of(int element) const { return regions.at(mesh.region.at(element)); }
};

inline int dof(int node, int component) { return dofs_per_node * node + component; }

/// Global numbering of free and constrained dofs.
class DofMap {
 public:
  DofMap() = default;
  DofMap(int num_dofs, const std::vector<int>& constrained) : free_index_(num_dofs, -1) {
    std::vector<char> is_c(num_dofs, 0);
    for (int c : constrained) {
      if (c < 0 || c >= num_dofs) throw std::out_of_range("constrained dof out of range");
      is_c[c] = 1;
    }
    for (int i = 0; i < num_dofs; ++i) {
      if (is_c[i]) {
        constrained_.push_back(i);
      } else {
        free_index_[i] = static_cast<int>(free_.size());
        free_.push_back(i);
      }
    }
  }

  int num_dofs() const { return static_cast<int>(free_index_.size()); }
  int num_free() const { return static_cast<int>(free_.size()); }
  bool is_free(int d) const { return free_index_[d] >= 0; }
  int free_index(int d) const { return free_index_[d]; }
  const std::vector<int>& free_dofs() const { return free_; }
  const std::vector<int>& constrained_dofs() const { return constrained_; }

  Eigen::VectorXd restrict_free(const Eigen::VectorXd& full) const {
    Eigen::VectorXd r(num_free());
    for (int i = 0; i < num_free(); ++i) r[i] = full[free_[i]];
    return r;
  }

 private:
  std::vector<int> free_index_;
  std::vector<int> free_;
  std::vector<int> constrained_;
};

struct QuadraturePoint {
  int element = 0;
  Vec2 xi = Vec2::Zero();
  double weight = 0.0;  // Gauss weight times reference Jacobian
  std::array<double, 4> n{};
  std::array<Vec2, 4> grad{};
  InternalState state;
  double rg1 = std::numeric_limits<double>::infinity();
  double rg2 = std::numeric_limits<double>::infinity();
  double f33 = 1.0;  // out-of-plane stretch at the last converged state
};

inline std::vector<QuadraturePoint> make_quadrature(const Mesh& mesh) {
  std::vector<QuadraturePoint> qps;
  qps.reserve(4 * mesh.elements.size());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    for (const auto& gp : gauss_2x2()) {
      const ReferenceShape rs = reference_shape(mesh, e, gp.xi);
      QuadraturePoint q;
      q.element = e;
      q.xi = gp.xi;
      q.weight = gp.weight * rs.det_j;
      q.n = rs.n;
      q.grad = rs.grad;
      qps.push_back(q);
    }
  }
  return qps;
}

class AssemblyError : public std::runtime_error {
 public:
  AssemblyError(int element, const std::string& what)
      : std::runtime_error("element " + std::to_string(element) + ": " + what), element_(element) {}
  int element() const { return element_; }

 private:
  int element_;
};

/// In-plane deformation gradient at a quadrature point.
inline Eigen::Matrix2d in_plane_gradient(const Mesh& mesh, const QuadraturePoint& q, const Eigen::VectorXd& x) {
  Eigen::Matrix2d f = Eigen::Matrix2d::Identity();
  for (int a = 0; a < 4; ++a) {
    const int node = mesh.elements[q.element][a];
    f += Vec2(x[dof(node, 0)], x[dof(node, 1)]) * q.grad[a].transpose();
  }
  return f;
}

inline double interpolate_phi(const Mesh& mesh, const QuadraturePoint& q, const Eigen::VectorXd& x) {
  double v = 0.0;
  for (int a = 0; a < 4; ++a) v += q.n[a] * x[dof(mesh.elements[q.element][a], 2)];
  return v;
}

inline Vec2 gradient_phi(const Mesh& mesh, const QuadraturePoint& q, const Eigen::VectorXd& x) {
  Vec2 g = Vec2::Zero();
  for (int a = 0; a < 4; ++a) g += x[dof(mesh.elements[q.element][a], 2)] * q.grad[a];
  return g;
}

/// P_33 and A_3333 of the composite for a block-diagonal F = diag(F2, f33), in closed form.
inline std::pair<double, double> out_of_plane_response(const Eigen::Matrix2d& f2, double f33, const InternalState& s,
                                                       const Constituents& mats) {
  const ConstituentWeights w = constituent_weights(s);
  const double det2 = f2.determinant();
  const double sq2 = f2.squaredNorm();
  double p = 0.0, a = 0.0;
  auto add = [&](double weight, double jg, const NeoHookeanParams& m) {
    if (weight == 0.0) return;
    const double cg = std::cbrt(jg);
    const double c = 1.0 / cg;  // F_e = c F
    const double e33 = c * f33;
    const double j = det2 * f33 / jg;
    if (!(j > 0.0)) throw std::domain_error("plane stress: non-positive elastic Jacobian");
    const double i1 = c * c * (sq2 + f33 * f33);
    const double mj = m.mu * (1.0 / pow_two_thirds(j));
    const double dpsi = mj * (e33 - i1 / (3.0 * e33)) + m.kappa * (j - 1.0) * j / e33;
    const double d2psi = mj * (-1.0 / 3.0 + 5.0 / 9.0 * i1 / (e33 * e33)) + m.kappa * j * j / (e33 * e33);
    p += weight * cg * cg * dpsi;
    a += weight * cg * d2psi;
  };
  add(w.original, s.jg1, mats.original);
  add(w.renewed, s.jg2, mats.renewed);
  return {p, a};
}

/// Plane response: 3D composite at the solved out-of-plane stretch, with the tangent
/// statically condensed for plane stress (P_33 = 0).
struct PlaneResponse {
  Tensor2 f = Tensor2::Identity();
  Tensor2 first_pk = Tensor2::Zero();
  Tensor4 tangent;
  double energy = 0.0;
};

inline PlaneResponse plane_response(const Eigen::Matrix2d& f2, double f33_guess, PlaneMode mode,
                                    const InternalState& s, const Constituents& mats, bool with_tangent) {
  PlaneResponse out;
  if (mode == PlaneMode::strain) {
    out.f = embed_plane(f2, 1.0);
    const CompositeResponse r = composite_response(out.f, s, mats.original, mats.renewed, with_tangent);
    out.first_pk = r.first_pk;
    out.tangent = r.tangent;
    out.energy = r.energy;
    return out;
  }

  double f33 = f33_guess > 0.0 ? f33_guess : 1.0;
  bool converged = false;
  for (int it = 0; it < 60; ++it) {
    const auto [p33, a3333] = out_of_plane_response(f2, f33, s, mats);
    if (!(a3333 > 0.0)) throw std::runtime_error("plane stress: non-positive out-of-plane stiffness");
    double step = -p33 / a3333;
    // Keep the stretch positive.
    if (f33 + step <= 0.0) step = -0.5 * f33;
    f33 += step;
    if (std::abs(step) <= 1e-14 * f33) {
      converged = true;
      break;
    }
  }
  if (!converged) throw std::runtime_error("plane stress: out-of-plane stretch did not converge");
  out.f = embed_plane(f2, f33);
  const CompositeResponse r = composite_response(out.f, s, mats.original, mats.renewed, with_tangent);
  out.first_pk = r.first_pk;
  out.energy = r.energy;
  if (with_tangent) {
    const double a33 = r.tangent(2, 2, 2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
          for (int l = 0; l < 2; ++l)
            out.tangent(i, j, k, l) = r.tangent(i, j, k, l) - r.tangent(i, j, 2, 2) * r.tangent(2, 2, k, l) / a33;
  }
  return out;
}

/// Full 3x3 deformation gradient at a quadrature point (out-of-plane stretch solved for plane stress).
inline Tensor2 deformation_gradient(const Model& model, const QuadraturePoint& q, const Eigen::VectorXd& x) {
  const Eigen::Matrix2d f2 = in_plane_gradient(model.mesh, q, x);
  if (!(f2.determinant() > 0.0)) throw AssemblyError(q.element, "inverted element");
  if (model.plane == PlaneMode::strain) return embed_plane(f2, 1.0);
  return plane_response(f2, q.f33, model.plane, q.state, model.material_of(q.element).mats, false).f;
}

inline double nonlocal_weight(const InternalState& s) {
  return std::max((1.0 - s.lambda) * s.jg1, nonlocal_weight_floor);
}

/// Output of one assembly pass. The tangent is over all dofs; constraints are applied by the solver.
struct AssemblyResult {
  Eigen::VectorXd residual;
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> f33;  // solved out-of-plane stretch per quadrature point
};

inline AssemblyResult assemble(const Model& model, const std::vector<QuadraturePoint>& qps, const Eigen::VectorXd& x,
                               double load_factor, bool with_tangent) {
  const Mesh& mesh = model.mesh;
  AssemblyResult out;
  out.residual = Eigen::VectorXd::Zero(model.num_dofs());
  out.f33.resize(qps.size(), 1.0);
  if (with_tangent) out.triplets.reserve(qps.size() / 4 * 144 + 16);

  Eigen::Matrix<double, 12, 12> ke;
  Eigen::Matrix<double, 12, 1> re;
  int current = -1;
  auto flush = [&](int e) {
    if (e < 0) return;
    const auto& conn = mesh.elements[e];
    for (int a = 0; a < 4; ++a)
      for (int i = 0; i < 3; ++i) {
        const int gi = dof(conn[a], i);
        out.residual[gi] += re[3 * a + i];
        if (!with_tangent) continue;
        for (int b = 0; b < 4; ++b)
          for (int k = 0; k < 3; ++k) {
            // u-phi coupling vanishes identically at frozen internal variables
            if ((i == 2) != (k == 2)) continue;
            out.triplets.emplace_back(gi, dof(conn[b], k), ke(3 * a + i, 3 * b + k));
          }
      }
  };

  for (std::size_t p = 0; p < qps.size(); ++p) {
    const QuadraturePoint& q = qps[p];
    if (q.element != current) {
      flush(current);
      current = q.element;
      ke.setZero();
      re.setZero();
    }
    const RegionMaterial& rm = model.material_of(q.element);
    const Eigen::Matrix2d f2 = in_plane_gradient(mesh, q, x);
    if (!(f2.determinant() > 0.0)) throw AssemblyError(q.element, "inverted element (det F = " +
                                                                       std::to_string(f2.determinant()) + ")");
    PlaneResponse pr;
    try {
      pr = plane_response(f2, q.f33, model.plane, q.state, rm.mats, with_tangent);
    } catch (const std::exception& ex) {
      throw AssemblyError(q.element, ex.what());
    }
    out.f33[p] = pr.f(2, 2);
    const double w = q.weight;

    const double omega = nonlocal_weight(q.state);
    const double phi = interpolate_phi(mesh, q, x);
    const Vec2 gphi = gradient_phi(mesh, q, x);
    const NonlocalParams& nl = rm.nonlocal;
    const double source = nl.beta_d * (phi - nl.gamma_d * q.state.d);

    for (int a = 0; a < 4; ++a) {
      for (int i = 0; i < 2; ++i) {
        double v = 0.0;
        for (int jj = 0; jj < 2; ++jj) v += pr.first_pk(i, jj) * q.grad[a][jj];
        re[3 * a + i] += w * (v - load_factor * model.body_force[i] * q.n[a]);
      }
      re[3 * a + 2] += w * omega * (nl.c_d * gphi.dot(q.grad[a]) + source * q.n[a]);
    }
    if (!with_tangent) continue;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        for (int i = 0; i < 2; ++i)
          for (int k = 0; k < 2; ++k) {
            double v = 0.0;
            for (int jj = 0; jj < 2; ++jj)
              for (int l = 0; l < 2; ++l) v += q.grad[a][jj] * pr.tangent(i, jj, k, l) * q.grad[b][l];
            ke(3 * a + i, 3 * b + k) += w * v;
          }
        ke(3 * a + 2, 3 * b + 2) += w * omega * (nl.c_d * q.grad[a].dot(q.grad[b]) + nl.beta_d * q.n[a] * q.n[b]);
      }
  }
  flush(current);

  // Edge tractions, two-point rule on each straight reference edge.
  for (const EdgeLoad& el : model.edge_loads) {
    const double len = (mesh.nodes[el.node_b] - mesh.nodes[el.node_a]).norm();
    for (int i = 0; i < 2; ++i) {
      out.residual[dof(el.node_a, i)] -= load_factor * 0.5 * len * el.traction[i];
      out.residual[dof(el.node_b, i)] -= load_factor * 0.5 * len * el.traction[i];
    }
  }
  return out;
}

inline Eigen::VectorXd assemble_residual(const Model& model, const std::vector<QuadraturePoint>& qps,
                                         const Eigen::VectorXd& x, double load_factor = 1.0) {
  return assemble(model, qps, x, load_factor, false).residual;
}

inline Eigen::SparseMatrix<double> assemble_tangent(const Model& model, const std::vector<QuadraturePoint>& qps,
                                                    const Eigen::VectorXd& x) {
  const AssemblyResult r = assemble(model, qps, x, 1.0, true);
  Eigen::SparseMatrix<double> k(model.num_dofs(), model.num_dofs());
  k.setFromTriplets(r.triplets.begin(), r.triplets.end());
  return k;
}

}  // namespace healsim::fem
