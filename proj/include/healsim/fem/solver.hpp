#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace healsim::fem {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Direct sparse solver. Symmetric systems go through an LDL^T factorization; anything
/// else, or a symmetric system the LDL^T cannot handle, through LU with partial pivoting.
/// Symbolic analyses are reused while the sparsity pattern is unchanged.
class LinearSolver {
 public:
  Eigen::VectorXd solve(const SparseMatrix& a, const Eigen::VectorXd& b) {
    if (a.rows() != a.cols() || a.rows() != b.size()) throw SolverError("linear_solve: dimension mismatch");
    if (a.rows() == 0) return Eigen::VectorXd();
    SparseMatrix m = a;
    m.makeCompressed();
    const bool same_pattern = m.nonZeros() == nnz_ && m.rows() == rows_;
    if (!same_pattern) {
      ldlt_ready_ = false;
      lu_ready_ = false;
      nnz_ = m.nonZeros();
      rows_ = m.rows();
    }
    const double bn = b.norm();
    if (is_symmetric(m)) {
      if (!ldlt_ready_) {
        ldlt_.analyzePattern(m);
        ldlt_ready_ = true;
      }
      ldlt_.factorize(m);
      if (ldlt_.info() == Eigen::Success) {
        Eigen::VectorXd x = ldlt_.solve(b);
        if (refine(m, b, bn, x, [&](const Eigen::VectorXd& r) { return Eigen::VectorXd(ldlt_.solve(r)); })) return x;
      }
    }
    if (!lu_ready_) {
      lu_.analyzePattern(m);
      lu_ready_ = true;
    }
    lu_.factorize(m);
    if (lu_.info() != Eigen::Success) {
      lu_ready_ = false;
      throw SolverError("linear_solve: singular matrix (" + lu_.lastErrorMessage() + ")");
    }
    Eigen::VectorXd x = lu_.solve(b);
    if (!refine(m, b, bn, x, [&](const Eigen::VectorXd& r) { return Eigen::VectorXd(lu_.solve(r)); })) {
      throw SolverError("linear_solve: relative residual " + std::to_string((b - m * x).norm() / bn) +
                        " after refinement");
    }
    return x;
  }

 private:
  static bool is_symmetric(const SparseMatrix& m) {
    const SparseMatrix t = m.transpose();
    return (m - t).norm() <= 1e-12 * m.norm();
  }

  /// Iterative refinement; true when the relative residual ends below 1e-10.
  template <class Solve>
  static bool refine(const SparseMatrix& m, const Eigen::VectorXd& b, double bn, Eigen::VectorXd& x, Solve&& solve) {
    if (bn == 0.0) return x.allFinite();
    double rel = (b - m * x).norm() / bn;
    for (int pass = 0; pass < 3 && std::isfinite(rel) && rel > 1e-12; ++pass) {
      x += solve(b - m * x);
      rel = (b - m * x).norm() / bn;
    }
    return std::isfinite(rel) && rel <= 1e-10;
  }

  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
  bool ldlt_ready_ = false;
  bool lu_ready_ = false;
  Eigen::Index nnz_ = -1;
  Eigen::Index rows_ = -1;
};

inline Eigen::VectorXd linear_solve(const SparseMatrix& a, const Eigen::VectorXd& b) {
  LinearSolver s;
  return s.solve(a, b);
}

struct SolveControls {
  double tolerance = 1e-8;  // relative to the initial residual norm plus the floor
  double residual_floor = 0.0;
  int max_iterations = 25;
  bool line_search = false;
  int max_subdivisions = 6;  // times a failed increment may be halved
  double dt = 0.1;           // days
  double duration = 1000.0;  // days

  void validate() const {
    if (!(tolerance > 0.0)) throw std::domain_error("solver tolerance must be positive");
    if (max_iterations < 1) throw std::domain_error("max_iterations must be at least 1");
    if (!(dt > 0.0)) throw std::domain_error("dt must be positive");
    if (!(duration > 0.0)) throw std::domain_error("duration must be positive");
    if (max_subdivisions < 0) throw std::domain_error("max_subdivisions must be non-negative");
  }
};

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  std::vector<double> norms;  // residual norm before each iteration, plus the final one
  std::string message;
};

/// Evaluates the free residual and, when the pointer is non-null, also the free tangent.
using NewtonSystem = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r, SparseMatrix* k)>;

/// Newton iteration on x. On failure x is left at the last iterate; callers roll back.
inline NewtonReport newton_solve(const NewtonSystem& system, Eigen::VectorXd& x, const SolveControls& c,
                                 LinearSolver& linear) {
  NewtonReport rep;
  Eigen::VectorXd r;
  SparseMatrix k;
  try {
    system(x, r, nullptr);
  } catch (const std::exception& ex) {
    rep.message = ex.what();
    return rep;
  }
  const double r0 = r.norm();
  const double target = c.tolerance * (r0 + c.residual_floor);
  rep.norms.push_back(r0);
  if (r0 <= target || r.size() == 0) {
    rep.converged = true;
    return rep;
  }
  for (int it = 1; it <= c.max_iterations; ++it) {
    rep.iterations = it;
    Eigen::VectorXd dx;
    try {
      system(x, r, &k);
      dx = linear.solve(k, -r);
    } catch (const std::exception& ex) {
      rep.message = std::string("iteration ") + std::to_string(it) + ": " + ex.what();
      return rep;
    }
    double step = 1.0;
    const double before = r.norm();
    for (int ls = 0;; ++ls) {
      Eigen::VectorXd trial = x + step * dx;
      try {
        system(trial, r, nullptr);
      } catch (const std::exception& ex) {
        if (!c.line_search || ls >= 8) {
          rep.message = std::string("iteration ") + std::to_string(it) + ": " + ex.what();
          return rep;
        }
        step *= 0.5;
        continue;
      }
      if (c.line_search && ls < 8 && !(r.norm() < before)) {
        step *= 0.5;
        continue;
      }
      x = trial;
      break;
    }
    const double rn = r.norm();
    rep.norms.push_back(rn);
    if (!std::isfinite(rn) || rn > 1e12 * (r0 + c.residual_floor)) {
      rep.message = "diverged at iteration " + std::to_string(it) + " (residual " + std::to_string(rn) + ")";
      return rep;
    }
    if (rn <= target) {
      rep.converged = true;
      return rep;
    }
  }
  rep.message = "no convergence in " + std::to_string(c.max_iterations) + " iterations (residual " +
                std::to_string(rep.norms.back()) + ", initial " + std::to_string(r0) + ")";
  return rep;
}

/// Coordinate-format dump, one "row col value" triple per line, 0-based.
inline void write_coo(std::ostream& os, const SparseMatrix& a) {
  os.precision(17);
  for (int col = 0; col < a.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(a, col); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace healsim::fem
