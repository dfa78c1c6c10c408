#pragma once

// Tensor algebra and the multiplicative elastic-growth split.
//
// All second-order tensors are 3x3 in a fixed orthonormal frame. Two-dimensional
// problems embed their in-plane deformation into the upper-left 2x2 block; the
// out-of-plane stretch lives in component (2,2).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace healsim {

using Tensor2 = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;

/// Fourth-order tensor with full (non-symmetrized) storage, indexed T(i,j,k,l).
class Tensor4 {
 public:
  Tensor4() { data_.fill(0.0); }

  double& operator()(int i, int j, int k, int l) { return data_[index(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return data_[index(i, j, k, l)]; }

  Tensor4& operator+=(const Tensor4& o) {
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
    return *this;
  }
  Tensor4& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }
  friend Tensor4 operator*(double s, Tensor4 t) { return t *= s; }
  friend Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }

  /// Frobenius norm over all 81 components.
  double norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  /// Double contraction with a second-order tensor on the right: (T:B)_ij = T_ijkl B_kl.
  Tensor2 contract(const Tensor2& b) const {
    Tensor2 r = Tensor2::Zero();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) r(i, j) += (*this)(i, j, k, l) * b(k, l);
    return r;
  }

  const std::array<double, 81>& data() const { return data_; }

 private:
  static constexpr int index(int i, int j, int k, int l) { return ((i * 3 + j) * 3 + k) * 3 + l; }
  std::array<double, 81> data_;
};

/// x^{2/3} for x > 0.
inline double pow_two_thirds(double x) {
  const double c = std::cbrt(x);
  return c * c;
}

inline Tensor2 identity() { return Tensor2::Identity(); }

/// Frobenius norm sqrt(sum T_ij^2).
inline double frobenius_norm(const Tensor2& t) { return t.norm(); }

inline double double_contraction(const Tensor2& a, const Tensor2& b) { return (a.array() * b.array()).sum(); }

/// det(F), the local volume ratio dv/dV.
inline double jacobian(const Tensor2& f) { return f.determinant(); }

/// Elastic part of F for spherical growth F_g = J_g^{1/3} I, i.e. F_e = J_g^{-1/3} F.
inline Tensor2 elastic_part(const Tensor2& f, double growth_jacobian) {
  if (!(growth_jacobian > 0.0)) {
    throw std::domain_error("elastic_part: growth volume ratio must be positive, got " +
                            std::to_string(growth_jacobian));
  }
  return std::cbrt(1.0 / growth_jacobian) * f;
}

/// C = F^T F.
inline Tensor2 right_cauchy_green(const Tensor2& f) { return f.transpose() * f; }

/// Volume-preserving part J^{-1/3} F.
inline Tensor2 isochoric_part(const Tensor2& f) {
  const double j = jacobian(f);
  if (!(j > 0.0)) throw std::domain_error("isochoric_part: det(F) must be positive");
  return std::cbrt(1.0 / j) * f;
}

/// Selection from the set-valued tensor sign: T/|T| for T != 0, the zero tensor otherwise.
inline Tensor2 sign_tensor(const Tensor2& t) {
  const double n = t.norm();
  if (n == 0.0) return Tensor2::Zero();
  return t / n;
}

inline Tensor2 deviator(const Tensor2& t) { return t - (t.trace() / 3.0) * Tensor2::Identity(); }

/// Volume ratio of a spherical growth tensor and its reconstruction.
struct GrowthDeformation {
  double volume_ratio = 1.0;

  Tensor2 tensor() const { return std::cbrt(volume_ratio) * Tensor2::Identity(); }
  Tensor2 inverse() const { return std::cbrt(1.0 / volume_ratio) * Tensor2::Identity(); }
};

/// Embeds an in-plane 2x2 gradient into a 3x3 tensor with the given out-of-plane stretch.
inline Tensor2 embed_plane(const Eigen::Matrix2d& f2, double out_of_plane_stretch = 1.0) {
  Tensor2 f = Tensor2::Zero();
  f.topLeftCorner<2, 2>() = f2;
  f(2, 2) = out_of_plane_stretch;
  return f;
}

/// Symmetric fourth-order identity (I_ik I_jl + I_il I_jk)/2.
inline Tensor4 symmetric_identity4() {
  Tensor4 t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      t(i, j, i, j) += 0.5;
      t(i, j, j, i) += 0.5;
    }
  return t;
}

/// I (x) I.
inline Tensor4 identity_dyad4() {
  Tensor4 t;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) t(i, i, k, k) = 1.0;
  return t;
}

}  // namespace healsim
