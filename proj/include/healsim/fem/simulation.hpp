#pragma once

// Staggered time march: at every increment the boundary data are updated, equilibrium is
// solved with frozen internal variables, growth limits are captured when their rule
// fires, and the internal variables are advanced at every quadrature point.

#include "healsim/fem/assembly.hpp"
#include "healsim/fem/solver.hpp"
#include "healsim/healing.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace healsim::fem {

/// Linear ramp of the load factor from 0 to 1 over `ramp_duration`, then held.
struct LoadSchedule {
  double ramp_duration = 100.0;

  double factor(double t) const {
    if (t <= 0.0) return 0.0;
    if (ramp_duration <= 0.0) return 1.0;
    return std::min(t / ramp_duration, 1.0);
  }
};

struct PrescribedDof {
  int dof = 0;
  double full_value = 0.0;  // value at load factor 1
};

struct CaptureRule {
  enum class Kind { none, time, load_factor };
  Kind kind = Kind::time;
  double value = 50.0;
};

struct Problem {
  Model model;
  std::vector<PrescribedDof> prescribed;
  LoadSchedule schedule;
  CaptureRule capture;
  double activation_time = 0.0;  // growth and remodeling start here
};

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(int increment, double time, const std::string& what)
      : std::runtime_error("increment " + std::to_string(increment) + " (t=" + std::to_string(time) +
                           "): " + what),
        increment_(increment),
        time_(time) {}
  int increment() const { return increment_; }
  double time() const { return time_; }

 private:
  int increment_;
  double time_;
};

class CaptureNotReached : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Counters for the thermodynamic invariants, accumulated over every local update.
struct InvariantLog {
  long local_updates = 0;
  long local_substeps = 0;
  long clamps = 0;               // clamps that survived maximal local halving
  long unresolved_growth = 0;    // growth excess still increasing at maximal halving
  long damage_decreases = 0;
  long lambda_violations = 0;
  long healing_violations = 0;
  double min_dissipation = std::numeric_limits<double>::infinity();
  double total_dissipation = 0.0;
  long newton_failures = 0;
  long subdivisions = 0;
  int max_newton_iterations = 0;

  bool clean() const {
    return clamps == 0 && damage_decreases == 0 && lambda_violations == 0 && healing_violations == 0 &&
           !(min_dissipation < -1e-12);
  }
};

class Simulation {
 public:
  using Logger = std::function<void(const std::string&)>;

  Simulation(Problem problem, SolveControls controls, Logger logger = {})
      : p_(std::move(problem)), c_(controls), log_fn_(std::move(logger)) {
    c_.validate();
    validate(p_.model.mesh);
    if (p_.model.regions.empty()) throw std::invalid_argument("model has no material regions");
    for (int r : p_.model.mesh.region)
      if (r < 0 || r >= static_cast<int>(p_.model.regions.size()))
        throw std::invalid_argument("element region tag without material");
    for (const auto& rm : p_.model.regions) {
      rm.mats.original.validate();
      rm.mats.renewed.validate();
      rm.healing.validate();
    }
    std::vector<int> constrained;
    for (const auto& pd : p_.prescribed) constrained.push_back(pd.dof);
    dofs_ = DofMap(p_.model.num_dofs(), constrained);
    qps_ = make_quadrature(p_.model.mesh);
    u_ = Eigen::VectorXd::Zero(p_.model.num_dofs());
    internal_ = Eigen::VectorXd::Zero(p_.model.num_dofs());
    steps_total_ = static_cast<int>(std::llround(c_.duration / c_.dt));
    if (c_.residual_floor <= 0.0) {
      double mu = 0.0, area = 0.0;
      for (const auto& rm : p_.model.regions) mu = std::max({mu, rm.mats.original.mu, rm.mats.renewed.mu});
      for (int e = 0; e < p_.model.mesh.num_elements(); ++e) area += element_area(p_.model.mesh, e);
      c_.residual_floor = 1e-4 * mu * std::sqrt(area);
    }
    if (p_.capture.kind != CaptureRule::Kind::none && rule_fires(0.0)) capture(0.0);
  }

  const Problem& problem() const { return p_; }
  const SolveControls& controls() const { return c_; }
  const DofMap& dofs() const { return dofs_; }
  const Eigen::VectorXd& fields() const { return u_; }
  const std::vector<QuadraturePoint>& points() const { return qps_; }
  /// Internal minus external nodal forces at the last converged state; reactions on constrained dofs.
  const Eigen::VectorXd& nodal_forces() const { return internal_; }
  const InvariantLog& invariants() const { return log_; }
  const NewtonReport& last_newton() const { return last_newton_; }
  bool captured() const { return captured_; }
  double capture_time() const { return capture_time_; }
  int increment() const { return k_; }
  int total_increments() const { return steps_total_; }
  double time() const { return k_ * c_.dt; }
  double load_factor() const { return p_.schedule.factor(time()); }
  bool finished() const { return k_ >= steps_total_; }

  /// Sum of a nodal force component over a node set.
  double reaction(const std::vector<int>& nodes, int component) const {
    double s = 0.0;
    for (int n : nodes) s += internal_[dof(n, component)];
    return s;
  }

  Tensor2 deformation_at(std::size_t q) const {
    const QuadraturePoint& qp = qps_[q];
    const Eigen::Matrix2d f2 = in_plane_gradient(p_.model.mesh, qp, u_);
    return embed_plane(f2, p_.model.plane == PlaneMode::stress ? qp.f33 : 1.0);
  }

  HealingParams healing_params_at(std::size_t q, double t_start) const {
    const QuadraturePoint& qp = qps_[q];
    HealingParams hp = p_.model.material_of(qp.element).healing;
    hp.rg1 = std::isfinite(qp.rg1) ? qp.rg1 : 0.0;
    hp.rg2 = std::isfinite(qp.rg2) ? qp.rg2 : 0.0;
    const bool active = t_start >= p_.activation_time - 1e-9 * c_.dt;
    if (!active || !captured_) {
      hp.mg1 = 0.0;
      hp.mg2 = 0.0;
    }
    if (!active) hp.mrm = 0.0;
    return hp;
  }

  DrivingForces forces_at(std::size_t q) const {
    const QuadraturePoint& qp = qps_[q];
    const RegionMaterial& rm = p_.model.material_of(qp.element);
    return driving_forces(deformation_at(q), qp.state, rm.mats, rm.healing, rm.nonlocal);
  }

  /// Advances one nominal increment. Throws SolverFailure when halving cannot rescue it, with
  /// fields and internal states restored to the last converged increment.
  void step() {
    if (finished()) throw std::logic_error("simulation already finished");
    const double t0 = k_ * c_.dt;
    const double t1 = (k_ + 1) * c_.dt;
    // Subdivision may evolve part of the increment before failing, so restore everything.
    const Eigen::VectorXd u0 = u_, r0 = internal_;
    const std::vector<QuadraturePoint> q0 = qps_;
    const bool captured0 = captured_;
    const double capture_time0 = capture_time_;
    if (!advance(t0, t1, 0, true)) {
      u_ = u0;
      internal_ = r0;
      qps_ = q0;
      captured_ = captured0;
      capture_time_ = capture_time0;
      throw SolverFailure(k_ + 1, t1, last_newton_.message.empty() ? "Newton failure" : last_newton_.message);
    }
    ++k_;
  }

  /// Solves equilibrium at time t with frozen internal variables. Leaves all state untouched on failure.
  bool solve_at(double t) {
    const double lf = p_.schedule.factor(t);
    Eigen::VectorXd full = u_;
    for (const auto& pd : p_.prescribed) full[pd.dof] = lf * pd.full_value;
    Eigen::VectorXd xf = dofs_.restrict_free(full);
    AssemblyResult last;
    const auto& free = dofs_.free_dofs();
    NewtonSystem system = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, SparseMatrix* k) {
      for (int i = 0; i < dofs_.num_free(); ++i) full[free[i]] = x[i];
      last = assemble(p_.model, qps_, full, lf, k != nullptr);
      r = dofs_.restrict_free(last.residual);
      if (k == nullptr) return;
      std::vector<Eigen::Triplet<double>> ff;
      ff.reserve(last.triplets.size());
      for (const auto& tr : last.triplets) {
        const int a = dofs_.free_index(tr.row());
        const int b = dofs_.free_index(tr.col());
        if (a >= 0 && b >= 0) ff.emplace_back(a, b, tr.value());
      }
      k->resize(dofs_.num_free(), dofs_.num_free());
      k->setFromTriplets(ff.begin(), ff.end());
    };
    last_newton_ = newton_solve(system, xf, c_, linear_);
    log_.max_newton_iterations = std::max(log_.max_newton_iterations, last_newton_.iterations);
    if (!last_newton_.converged) {
      ++log_.newton_failures;
      return false;
    }
    for (int i = 0; i < dofs_.num_free(); ++i) full[free[i]] = xf[i];
    u_ = full;
    internal_ = last.residual;
    for (std::size_t q = 0; q < qps_.size(); ++q) qps_[q].f33 = last.f33[q];
    return true;
  }

  /// Freezes r_g1, r_g2 at every point to the current driving-force norms.
  void capture(double t) {
    for (std::size_t q = 0; q < qps_.size(); ++q) {
      sync_phi(q);
      const QuadraturePoint& qp = qps_[q];
      const RegionMaterial& rm = p_.model.material_of(qp.element);
      const auto [r1, r2] = capture_growth_limit(deformation_at(q), qp.state, rm.mats, rm.healing, rm.nonlocal);
      qps_[q].rg1 = r1;
      qps_[q].rg2 = r2;
    }
    captured_ = true;
    capture_time_ = t;
  }

 private:
  bool rule_fires(double t) const {
    switch (p_.capture.kind) {
      case CaptureRule::Kind::none:
        return false;
      case CaptureRule::Kind::time:
        return t >= p_.capture.value - 1e-9 * c_.dt;
      case CaptureRule::Kind::load_factor:
        return p_.schedule.factor(t) >= p_.capture.value - 1e-12;
    }
    return false;
  }

  void sync_phi(std::size_t q) {
    QuadraturePoint& qp = qps_[q];
    qp.state.phi = interpolate_phi(p_.model.mesh, qp, u_);
    qp.state.grad_phi = gradient_phi(p_.model.mesh, qp, u_);
  }

  bool advance(double t0, double t1, int level, bool nominal_end) {
    if (solve_at(t1)) {
      if (nominal_end && !captured_ && rule_fires(t1)) {
        capture(t1);
      }
      evolve_points(t0, t1 - t0);
      return true;
    }
    if (log_fn_) log_fn_("Newton failure at t=" + std::to_string(t1) + ": " + last_newton_.message);
    if (level >= c_.max_subdivisions) return false;
    ++log_.subdivisions;
    const double tm = 0.5 * (t0 + t1);
    if (!advance(t0, tm, level + 1, false)) return false;
    return advance(tm, t1, level + 1, nominal_end);
  }

  void evolve_points(double t0, double h) {
    for (std::size_t q = 0; q < qps_.size(); ++q) {
      sync_phi(q);
      QuadraturePoint& qp = qps_[q];
      const RegionMaterial& rm = p_.model.material_of(qp.element);
      const HealingParams hp = healing_params_at(q, t0);
      const InternalState before = qp.state;
      const LocalIntegration li = integrate_local(before, deformation_at(q), hp, rm.mats, rm.nonlocal, h);
      InternalState after = li.state;
      ++log_.local_updates;
      log_.local_substeps += li.substeps;
      log_.clamps += li.clamps;
      log_.unresolved_growth += li.unresolved;
      log_.min_dissipation = std::min(log_.min_dissipation, li.dissipation);
      log_.total_dissipation += qp.weight * li.dissipation;
      if (after.d < before.d) ++log_.damage_decreases;
      if (after.lambda < 0.0 || after.lambda > std::max(hp.eta, before.lambda)) ++log_.lambda_violations;
      const double h_val = healing_parameter(after);
      if (h_val < 0.0 || h_val > 1.0) ++log_.healing_violations;
      qp.state = after;
    }
  }

  Problem p_;
  SolveControls c_;
  Logger log_fn_;
  DofMap dofs_;
  std::vector<QuadraturePoint> qps_;
  Eigen::VectorXd u_;
  Eigen::VectorXd internal_;
  LinearSolver linear_;
  NewtonReport last_newton_;
  InvariantLog log_;
  bool captured_ = false;
  double capture_time_ = std::numeric_limits<double>::quiet_NaN();
  int k_ = 0;
  int steps_total_ = 0;
};

/// Runs all remaining increments, calling `observer` at the initial state and after each increment.
inline void time_march(Simulation& sim, const std::function<void(const Simulation&)>& observer) {
  if (observer && sim.increment() == 0) observer(sim);
  while (!sim.finished()) {
    sim.step();
    if (observer) observer(sim);
  }
  const Problem& p = sim.problem();
  bool growth = false;
  for (const auto& rm : p.model.regions) growth = growth || rm.healing.mg1 > 0.0 || rm.healing.mg2 > 0.0;
  if (growth && p.capture.kind != CaptureRule::Kind::none && !sim.captured()) {
    throw CaptureNotReached("growth-limit capture rule never fired during the run");
  }
}

}  // namespace healsim::fem
