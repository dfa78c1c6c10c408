#pragma once

// Four-node quadrilateral meshes, bilinear shape functions and 2x2 Gauss quadrature.

#include "healsim/kinematics.hpp"

#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace healsim::fem {

struct Mesh {
  std::vector<Vec2> nodes;                       // reference coordinates (mm)
  std::vector<std::array<int, 4>> elements;      // counter-clockwise connectivity
  std::vector<int> region;                       // material region per element
  std::map<std::string, std::vector<int>> node_sets;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_elements() const { return static_cast<int>(elements.size()); }

  const std::vector<int>& node_set(const std::string& name) const {
    auto it = node_sets.find(name);
    if (it == node_sets.end()) throw std::out_of_range("mesh has no node set '" + name + "'");
    return it->second;
  }
};

struct ShapeValues {
  std::array<double, 4> n{};
  std::array<Vec2, 4> dn{};  // derivatives with respect to (xi, eta)
};

/// Bilinear shape functions on [-1,1]^2, nodes ordered (-1,-1), (1,-1), (1,1), (-1,1).
inline ShapeValues shape_eval(const Vec2& xi) {
  static constexpr double sx[4] = {-1.0, 1.0, 1.0, -1.0};
  static constexpr double sy[4] = {-1.0, -1.0, 1.0, 1.0};
  ShapeValues s;
  for (int a = 0; a < 4; ++a) {
    s.n[a] = 0.25 * (1.0 + sx[a] * xi.x()) * (1.0 + sy[a] * xi.y());
    s.dn[a] = Vec2(0.25 * sx[a] * (1.0 + sy[a] * xi.y()), 0.25 * sy[a] * (1.0 + sx[a] * xi.x()));
  }
  return s;
}

struct GaussPoint {
  Vec2 xi;
  double weight;
};

inline std::array<GaussPoint, 4> gauss_2x2() {
  const double g = 1.0 / std::sqrt(3.0);
  return {{{Vec2(-g, -g), 1.0}, {Vec2(g, -g), 1.0}, {Vec2(g, g), 1.0}, {Vec2(-g, g), 1.0}}};
}

/// Reference-configuration shape data at one point of one element.
struct ReferenceShape {
  std::array<double, 4> n{};
  std::array<Vec2, 4> grad{};  // d N / d X
  double det_j = 0.0;
};

inline ReferenceShape reference_shape(const Mesh& mesh, int e, const Vec2& xi) {
  const ShapeValues s = shape_eval(xi);
  Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();  // dX/dxi
  for (int a = 0; a < 4; ++a) jac += mesh.nodes[mesh.elements[e][a]] * s.dn[a].transpose();
  ReferenceShape r;
  r.det_j = jac.determinant();
  if (!(r.det_j > 0.0)) {
    throw std::runtime_error("element " + std::to_string(e) + " has non-positive Jacobian " +
                             std::to_string(r.det_j));
  }
  const Eigen::Matrix2d inv_t = jac.inverse().transpose();
  for (int a = 0; a < 4; ++a) {
    r.n[a] = s.n[a];
    r.grad[a] = inv_t * s.dn[a];
  }
  return r;
}

/// Checks connectivity, region tags and positive Jacobians at all Gauss points.
inline void validate(const Mesh& mesh) {
  if (mesh.region.size() != mesh.elements.size()) throw std::runtime_error("mesh: region tags missing");
  for (int e = 0; e < mesh.num_elements(); ++e) {
    for (int id : mesh.elements[e]) {
      if (id < 0 || id >= mesh.num_nodes()) {
        throw std::runtime_error("element " + std::to_string(e) + " references invalid node " + std::to_string(id));
      }
    }
    for (const auto& gp : gauss_2x2()) reference_shape(mesh, e, gp.xi);
  }
  for (const auto& [name, ids] : mesh.node_sets)
    for (int id : ids)
      if (id < 0 || id >= mesh.num_nodes()) throw std::runtime_error("node set '" + name + "' has invalid node");
}

inline double element_area(const Mesh& mesh, int e) {
  double a = 0.0;
  for (const auto& gp : gauss_2x2()) a += gp.weight * reference_shape(mesh, e, gp.xi).det_j;
  return a;
}

inline Vec2 element_centroid(const Mesh& mesh, int e) {
  Vec2 c = Vec2::Zero();
  for (int id : mesh.elements[e]) c += mesh.nodes[id];
  return 0.25 * c;
}

}  // namespace healsim::fem
