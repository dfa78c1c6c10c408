#pragma once

// Built-in problems: uniaxial tension of a square plate, a plate with a central hole
// (quarter model) and balloon inflation of a plaque-laden artery (half model).

#include "healsim/fem/simulation.hpp"
#include "healsim/parameters.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace healsim {

enum class ScenarioKind { uniaxial, open_hole, angioplasty };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::uniaxial:
      return "uniaxial";
    case ScenarioKind::open_hole:
      return "open_hole";
    case ScenarioKind::angioplasty:
      return "angioplasty";
  }
  return "?";
}

inline ScenarioKind scenario_kind(const std::string& name) {
  if (name == "uniaxial") return ScenarioKind::uniaxial;
  if (name == "open_hole") return ScenarioKind::open_hole;
  if (name == "angioplasty") return ScenarioKind::angioplasty;
  throw ConfigError("unknown scenario '" + name + "' (expected uniaxial, open_hole or angioplasty)");
}

namespace detail {

inline void add_solver_and_time(ParameterSet& ps, double duration, double ramp, const std::string& ramp_src,
                                double activation, const std::string& activation_src) {
  ps.add_number("time.dt", 0.1, "default", "time increment (days)", 0.0, 1e6, true);
  ps.add_number("time.duration", duration, "default", "simulated time (days)", 0.0, 1e7, true);
  ps.add_number("load.ramp_duration", ramp, ramp_src, "duration of the linear loading ramp (days)", 0.0, 1e7, true);
  ps.add_number("activation_time", activation, activation_src, "growth and remodeling start time (days)", 0.0, 1e7);
  ps.add_number("solver.tolerance", 1e-8, "default", "relative Newton tolerance", 0.0, 1.0, true);
  ps.add_integer("solver.max_iterations", 25, "default", "Newton iteration limit", 1, 1000);
  ps.add_integer("solver.max_subdivisions", 6, "default", "halvings of a failed increment", 0, 30);
  ps.add_integer("solver.line_search", 0, "default", "backtracking line search (0 or 1)", 0, 1);
}

inline void add_healing(ParameterSet& ps, const std::string& src, double mg, const std::string& mg_src, double mrm,
                        const std::string& mrm_src, double eta, double kappa_d, double c_d, double beta_d) {
  ps.add_number("healing.M_g1", mg, mg_src, "growth mobility, original tissue (1/day)", 0.0);
  ps.add_number("healing.M_g2", mg, mg_src, "growth mobility, new tissue (1/day)", 0.0);
  ps.add_number("healing.M_rm", mrm, mrm_src, "remodeling mobility (1/day)", 0.0);
  ps.add_number("healing.r_rm", 0.0, "default", "remodeling threshold (energy density)", 0.0);
  ps.add_number("healing.eta", eta, src, "irreversible stiffness loss cap", 0.0, 1.0);
  ps.add_number("healing.M_d", 1.0, "default", "damage mobility (1/day)", 0.0);
  ps.add_number("healing.kappa_d", kappa_d, src, "damage threshold (energy density)", 0.0);
  ps.add_number("nonlocal.c_d", c_d, src, "gradient regularization", 0.0);
  ps.add_number("nonlocal.beta_d", beta_d, src, "penalty parameter", 0.0);
  ps.add_number("nonlocal.gamma_d", 1.0, src, "local/nonlocal switch", 0.0, 1.0);
}

}  // namespace detail

/// Default parameter table of a scenario, tagged with where each value comes from.
inline ParameterSet default_parameters(ScenarioKind kind) {
  ParameterSet ps;
  ps.add_text("scenario", to_string(kind), "user", "scenario", {"uniaxial", "open_hole", "angioplasty"});
  switch (kind) {
    case ScenarioKind::uniaxial:
      ps.add_text("plane", "stress", "default", "out-of-plane condition", {"stress", "strain"});
      ps.add_number("geometry.edge", 10.0, "example-1", "plate edge length (mm)", 0.0, 1e6, true);
      ps.add_number("load.stretch", 0.1, "default", "applied edge displacement / edge length", -0.9, 10.0);
      detail::add_solver_and_time(ps, 1000.0, 100.0, "example-1", 100.0, "example-1");
      ps.add_number("capture.time", 50.0, "example-1", "time at which r_g is captured (days)", 0.0);
      ps.add_number("material.mu1", 1.0, "table-1", "shear modulus, original tissue (MPa)", 0.0, 1e9, true);
      ps.add_number("material.kappa1", 1.0, "table-1", "bulk modulus, original tissue (MPa)", 0.0, 1e9, true);
      ps.add_number("material.mu2", 1.0, "table-1", "shear modulus, new tissue (MPa)", 0.0, 1e9, true);
      ps.add_number("material.kappa2", 1.0, "table-1", "bulk modulus, new tissue (MPa)", 0.0, 1e9, true);
      detail::add_healing(ps, "table-1", 0.01, "table-1", 0.01, "table-1", 0.0, 0.2, 1.0, 0.001);
      ps.add_text("healing.g.mode", "constant", "default", "physiological potential", {"constant", "saturating"});
      ps.add_number("healing.g.value", 0.001, "example-1", "constant physiological potential (MPa)", 0.0);
      ps.add_number("healing.g.amplitude", 0.0, "default", "saturating amplitude a in a(1-exp(-d)) (MPa)", 0.0);
      break;
    case ScenarioKind::open_hole:
      ps.add_text("plane", "stress", "default", "out-of-plane condition", {"stress", "strain"});
      ps.add_number("geometry.width", 100.0, "table-2", "plate width and height (mm)", 0.0, 1e6, true);
      ps.add_number("geometry.hole_radius", 25.0, "table-2", "hole radius (mm)", 0.0, 1e6, true);
      ps.add_text("mesh.level", "medium", "default", "mesh refinement", {"coarse", "medium", "fine"});
      ps.add_number("load.displacement", 5.0, "default", "right-edge displacement of the quarter model (mm)", -50.0, 1e3);
      detail::add_solver_and_time(ps, 1000.0, 100.0, "default", 100.0, "default");
      ps.add_number("capture.time", 50.0, "example-2", "time at which r_g is captured (days)", 0.0);
      ps.add_number("material.mu1", 1.0, "table-2", "shear modulus, original tissue (MPa)", 0.0, 1e9, true);
      ps.add_number("material.kappa1", 40.0, "table-2", "bulk modulus, original tissue (MPa)", 0.0, 1e9, true);
      ps.add_number("material.mu2", 1.0, "table-2", "shear modulus, new tissue (MPa)", 0.0, 1e9, true);
      ps.add_number("material.kappa2", 40.0, "table-2", "bulk modulus, new tissue (MPa)", 0.0, 1e9, true);
      detail::add_healing(ps, "table-2", 0.03, "example-2", 0.1, "example-2", 0.0, 0.01, 1.0, 1.0);
      ps.add_text("healing.g.mode", "constant", "default", "physiological potential", {"constant", "saturating"});
      ps.add_number("healing.g.value", 0.001, "example-1", "constant physiological potential (MPa)", 0.0);
      ps.add_number("healing.g.amplitude", 0.0, "default", "saturating amplitude a in a(1-exp(-d)) (MPa)", 0.0);
      break;
    case ScenarioKind::angioplasty:
      ps.add_text("plane", "strain", "default", "out-of-plane condition", {"stress", "strain"});
      ps.add_number("geometry.artery_inner", 1.8, "example-3", "artery inner radius (mm)", 0.0, 1e3, true);
      ps.add_number("geometry.artery_outer", 2.0, "example-3", "artery outer radius (mm)", 0.0, 1e3, true);
      ps.add_number("geometry.lumen_radius", 1.0, "example-3", "lumen radius (mm)", 0.0, 1e3, true);
      ps.add_number("geometry.eccentricity", 0.5, "example-3", "lumen offset from the artery centre (mm)", 0.0, 1e3);
      ps.add_number("geometry.lipid_inner", 1.25, "example-3", "lipid pool inner radius about the lumen centre (mm)", 0.0, 1e3, true);
      ps.add_number("geometry.lipid_outer", 1.75, "example-3", "lipid pool outer radius about the lumen centre (mm)", 0.0, 1e3, true);
      ps.add_number("geometry.lipid_angle", 140.0, "example-3", "lipid crescent opening angle (degrees)", 0.0, 360.0, true);
      ps.add_integer("mesh.n_circ", 36, "default", "elements along the half circumference", 4, 1000);
      ps.add_integer("mesh.n_cap", 3, "default", "radial elements between lumen and lipid pool", 1, 100);
      ps.add_integer("mesh.n_lipid", 5, "default", "radial elements across the lipid pool", 1, 100);
      ps.add_integer("mesh.n_outer", 2, "default", "radial elements between lipid pool and artery", 1, 100);
      ps.add_integer("mesh.n_artery", 2, "default", "radial elements across the artery wall", 1, 100);
      ps.add_number("load.inflation_radius", 1.40, "example-3", "final luminal radius (mm)", 1.0, 1.6, true);
      detail::add_solver_and_time(ps, 410.0, 10.0, "example-3", 10.0, "example-3");
      ps.add_number("capture.lumen_radius", 1.2, "example-3", "lumen radius at which r_g is captured (mm)", 1.0, 10.0, true);
      ps.add_number("material.artery.mu", 15.0, "table-3", "artery shear modulus (kPa)", 0.0, 1e9, true);
      ps.add_number("material.artery.kappa", 4.0, "table-3", "artery bulk modulus (kPa)", 0.0, 1e9, true);
      ps.add_number("material.plaque.mu1", 78.9, "table-3", "plaque shear modulus, original (kPa)", 0.0, 1e9, true);
      ps.add_number("material.plaque.kappa1", 23.7, "table-3", "plaque bulk modulus, original (kPa)", 0.0, 1e9, true);
      ps.add_number("material.plaque.mu2", 78.9, "table-3", "plaque shear modulus, new tissue (kPa)", 0.0, 1e9, true);
      ps.add_number("material.plaque.kappa2", 23.7, "table-3", "plaque bulk modulus, new tissue (kPa)", 0.0, 1e9, true);
      ps.add_number("material.lipid.mu", 0.1, "table-3", "lipid shear modulus (kPa)", 0.0, 1e9, true);
      ps.add_number("material.lipid.kappa", 0.5, "table-3", "lipid bulk modulus (kPa)", 0.0, 1e9, true);
      detail::add_healing(ps, "table-3", 0.01, "table-3", 0.1, "table-3", 1.0, 5.0, 1.0, 20.0);
      // Damage completes within the inflation ramp.
      ps.set_number("healing.M_d", 50.0, "default");
      ps.add_text("healing.g.mode", "saturating", "default", "physiological potential", {"constant", "saturating"});
      ps.add_number("healing.g.value", 0.0, "default", "constant physiological potential (kPa)", 0.0);
      ps.add_number("healing.g.amplitude", 40.0, "default", "saturating amplitude a in a(1-exp(-d)) (kPa)", 0.0);
      ps.add_text("healing.lipid", "inert", "default", "lipid pool takes part in damage, growth and remodeling",
                  {"inert", "active"});
      break;
  }
  return ps;
}

/// A ready-to-run problem plus the probes needed to report its outputs.
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::uniaxial;
  ParameterSet params;
  fem::Problem problem;
  fem::SolveControls controls;
  std::vector<std::string> region_names;
  std::vector<int> stress_edge;  // nodes whose x-reactions define sigma_x
  int probe_node = -1;           // displacement probe (top-right corner, node A)
  std::vector<int> lumen_nodes;
  std::vector<int> outer_nodes;
  Vec2 lumen_center = Vec2::Zero();
  double lumen_radius = 1.0;
  double outer_radius = 1.0;
};

namespace detail {

inline fem::SolveControls controls_from(const ParameterSet& ps) {
  fem::SolveControls c;
  c.dt = ps.number("time.dt");
  c.duration = ps.number("time.duration");
  c.tolerance = ps.number("solver.tolerance");
  c.max_iterations = ps.integer("solver.max_iterations");
  c.max_subdivisions = ps.integer("solver.max_subdivisions");
  c.line_search = ps.integer("solver.line_search") != 0;
  return c;
}

inline PhysiologicalPotential potential_from(const ParameterSet& ps) {
  PhysiologicalPotential g;
  g.mode = ps.text("healing.g.mode") == "saturating" ? PhysiologicalPotential::Mode::saturating
                                                      : PhysiologicalPotential::Mode::constant;
  g.value = ps.number("healing.g.value");
  g.amplitude = ps.number("healing.g.amplitude");
  return g;
}

inline fem::RegionMaterial region_from(const ParameterSet& ps, const std::string& name, NeoHookeanParams p1,
                                       NeoHookeanParams p2) {
  fem::RegionMaterial rm;
  rm.name = name;
  rm.mats = {p1, p2};
  HealingParams& h = rm.healing;
  h.mg1 = ps.number("healing.M_g1");
  h.mg2 = ps.number("healing.M_g2");
  h.mrm = ps.number("healing.M_rm");
  h.rrm = ps.number("healing.r_rm");
  h.eta = ps.number("healing.eta");
  h.md = ps.number("healing.M_d");
  h.rd = ps.number("healing.kappa_d");
  h.g = potential_from(ps);
  h.stress_scale = p1.mu;
  rm.nonlocal = {ps.number("nonlocal.c_d"), ps.number("nonlocal.beta_d"), ps.number("nonlocal.gamma_d")};
  return rm;
}

inline void common_setup(ScenarioSpec& s) {
  const ParameterSet& ps = s.params;
  s.controls = controls_from(ps);
  s.problem.model.plane = ps.text("plane") == "stress" ? fem::PlaneMode::stress : fem::PlaneMode::strain;
  s.problem.schedule.ramp_duration = ps.number("load.ramp_duration");
  s.problem.activation_time = ps.number("activation_time");
}

/// Prescribes dofs, keeping the last value given for a dof.
class PrescribedSet {
 public:
  void set(int node, int comp, double v) { values_[fem::dof(node, comp)] = v; }
  std::vector<fem::PrescribedDof> list() const {
    std::vector<fem::PrescribedDof> out;
    for (const auto& [d, v] : values_) out.push_back({d, v});
    return out;
  }

 private:
  std::map<int, double> values_;
};

}  // namespace detail

inline ScenarioSpec build_uniaxial(const ParameterSet& ps) {
  ScenarioSpec s;
  s.kind = ScenarioKind::uniaxial;
  s.params = ps;
  detail::common_setup(s);
  const double l = ps.number("geometry.edge");
  fem::Mesh& m = s.problem.model.mesh;
  m.nodes = {Vec2(0, 0), Vec2(l, 0), Vec2(l, l), Vec2(0, l)};
  m.elements = {{0, 1, 2, 3}};
  m.region = {0};
  m.node_sets = {{"left", {0, 3}}, {"right", {1, 2}}, {"bottom", {0, 1}}, {"top", {3, 2}}, {"top_right", {2}}};
  s.problem.model.regions.push_back(detail::region_from(
      ps, "tissue", {ps.number("material.mu1"), ps.number("material.kappa1")},
      {ps.number("material.mu2"), ps.number("material.kappa2")}));
  s.region_names = {"tissue"};

  const double ux = ps.number("load.stretch") * l;
  detail::PrescribedSet bc;
  bc.set(0, 0, 0.0);
  bc.set(0, 1, 0.0);
  bc.set(3, 0, 0.0);
  bc.set(1, 1, 0.0);
  bc.set(1, 0, ux);
  bc.set(2, 0, ux);
  s.problem.prescribed = bc.list();
  s.problem.capture = {fem::CaptureRule::Kind::time, ps.number("capture.time")};
  s.stress_edge = {1, 2};
  s.probe_node = 2;
  return s;
}

inline ScenarioSpec build_uniaxial() { return build_uniaxial(default_parameters(ScenarioKind::uniaxial)); }

/// Element counts (tangential per block, radial) of the open-hole mesh levels.
inline std::pair<int, int> open_hole_divisions(const std::string& level) {
  if (level == "coarse") return {5, 8};
  if (level == "medium") return {9, 16};
  if (level == "fine") return {14, 28};
  throw ConfigError("unknown mesh level '" + level + "'");
}

inline ScenarioSpec build_open_hole(const ParameterSet& ps) {
  ScenarioSpec s;
  s.kind = ScenarioKind::open_hole;
  s.params = ps;
  detail::common_setup(s);
  const double w = ps.number("geometry.width");
  const double a = ps.number("geometry.hole_radius");
  if (!(a < w)) throw ConfigError("hole radius must be smaller than the plate width");
  const auto [nt, nr] = open_hole_divisions(ps.text("mesh.level"));
  const int nj = 2 * nt;  // tangential element count over the quarter
  // Radial grading: outermost element 4x the innermost.
  const double q = nr > 1 ? std::pow(4.0, 1.0 / (nr - 1)) : 1.0;
  auto radial = [&](int i) { return q == 1.0 ? double(i) / nr : (std::pow(q, i) - 1.0) / (std::pow(q, nr) - 1.0); };

  fem::Mesh& m = s.problem.model.mesh;
  auto id = [&](int i, int j) { return i * (nj + 1) + j; };
  for (int i = 0; i <= nr; ++i)
    for (int j = 0; j <= nj; ++j) {
      const double theta = 0.5 * std::numbers::pi * j / nj;
      const Vec2 inner(a * std::cos(theta), a * std::sin(theta));
      const Vec2 outer = j <= nt ? Vec2(w, w * j / nt) : Vec2(w * (nj - j) / nt, w);
      m.nodes.push_back(inner + radial(i) * (outer - inner));
    }
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nj; ++j) {
      m.elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      m.region.push_back(0);
    }
  // Snap boundary coordinates exactly.
  for (int i = 0; i <= nr; ++i) {
    m.nodes[id(i, 0)].y() = 0.0;
    m.nodes[id(i, nj)].x() = 0.0;
  }
  std::vector<int> right, top, left, bottom, hole;
  for (int j = 0; j <= nt; ++j) right.push_back(id(nr, j));
  for (int j = nt; j <= nj; ++j) top.push_back(id(nr, j));
  for (int i = 0; i <= nr; ++i) {
    bottom.push_back(id(i, 0));
    left.push_back(id(i, nj));
  }
  for (int j = 0; j <= nj; ++j) hole.push_back(id(0, j));
  m.node_sets = {{"right", right}, {"top", top}, {"left", left}, {"bottom", bottom}, {"hole", hole},
                 {"node_A", {id(0, nj)}}};

  s.problem.model.regions.push_back(detail::region_from(
      ps, "plate", {ps.number("material.mu1"), ps.number("material.kappa1")},
      {ps.number("material.mu2"), ps.number("material.kappa2")}));
  s.region_names = {"plate"};

  detail::PrescribedSet bc;
  for (int n : left) bc.set(n, 0, 0.0);
  for (int n : bottom) bc.set(n, 1, 0.0);
  for (int n : right) bc.set(n, 0, ps.number("load.displacement"));
  s.problem.prescribed = bc.list();
  s.problem.capture = {fem::CaptureRule::Kind::time, ps.number("capture.time")};
  s.stress_edge = right;
  s.probe_node = id(0, nj);
  return s;
}

inline ScenarioSpec build_open_hole(const std::string& level) {
  ParameterSet ps = default_parameters(ScenarioKind::open_hole);
  ps.set_text("mesh.level", level);
  return build_open_hole(ps);
}

/// Region tags of the angioplasty model.
enum AngioplastyRegion { artery = 0, plaque = 1, lipid = 2 };

inline ScenarioSpec build_angioplasty(const ParameterSet& ps) {
  ScenarioSpec s;
  s.kind = ScenarioKind::angioplasty;
  s.params = ps;
  detail::common_setup(s);
  const double ri = ps.number("geometry.artery_inner");
  const double ro = ps.number("geometry.artery_outer");
  const double rl = ps.number("geometry.lumen_radius");
  const double ecc = ps.number("geometry.eccentricity");
  const double l_in = ps.number("geometry.lipid_inner");
  const double l_out = ps.number("geometry.lipid_outer");
  const double l_angle = ps.number("geometry.lipid_angle");
  const double rf = ps.number("load.inflation_radius");
  if (!(ro > ri) || !(ecc + rl < ri)) throw ConfigError("angioplasty: inconsistent artery/lumen geometry");
  if (!(rl < l_in && l_in < l_out)) throw ConfigError("angioplasty: lipid radii must satisfy lumen < inner < outer");
  if (!(rf > 1.0 * rl && rf < 1.6 * rl)) throw std::domain_error("angioplasty: inflation radius must lie in (1.0, 1.6) mm");

  const int nc = ps.integer("mesh.n_circ");
  const int n_cap = ps.integer("mesh.n_cap");
  const int n_lip = ps.integer("mesh.n_lipid");
  const int n_out = ps.integer("mesh.n_outer");
  const int n_art = ps.integer("mesh.n_artery");
  const int np = n_cap + n_lip + n_out;
  const Vec2 c(0.0, ecc);
  // Angles measured at the lumen centre from +y, clockwise through +x; the lipid pool is centred on -y.
  const double pi = std::numbers::pi;
  const double alpha_lip = pi - 0.5 * l_angle * pi / 180.0;
  auto dir = [](double alpha) { return Vec2(std::sin(alpha), std::cos(alpha)); };
  auto rho_wall = [&](double alpha) {
    const double ce = c.dot(dir(alpha));
    return -ce + std::sqrt(ce * ce - c.squaredNorm() + ri * ri);
  };
  const double wall_lip = rho_wall(alpha_lip);
  if (!(l_out < wall_lip)) throw ConfigError("angioplasty: lipid pool does not fit inside the plaque");

  fem::Mesh& m = s.problem.model.mesh;
  const int ni = np + n_art;
  auto id = [&](int i, int j) { return i * (nc + 1) + j; };
  for (int i = 0; i <= ni; ++i)
    for (int j = 0; j <= nc; ++j) {
      const double alpha = pi * j / nc;
      const double rw = rho_wall(alpha);
      double k1 = l_in, k2 = l_out;
      if (alpha < alpha_lip - 1e-12) {
        k1 = rl + (rw - rl) * (l_in - rl) / (wall_lip - rl);
        k2 = rl + (rw - rl) * (l_out - rl) / (wall_lip - rl);
      }
      Vec2 p;
      if (i <= n_cap) {
        p = c + (rl + (k1 - rl) * i / n_cap) * dir(alpha);
      } else if (i <= n_cap + n_lip) {
        p = c + (k1 + (k2 - k1) * (i - n_cap) / n_lip) * dir(alpha);
      } else if (i <= np) {
        p = c + (k2 + (rw - k2) * (i - n_cap - n_lip) / n_out) * dir(alpha);
      } else {
        const Vec2 wall = c + rw * dir(alpha);
        const double scale = 1.0 + (ro / ri - 1.0) * (i - np) / n_art;
        p = scale * (ri / wall.norm()) * wall;
      }
      if (j == 0 || j == nc) p.x() = 0.0;
      m.nodes.push_back(p);
    }
  for (int i = 0; i < ni; ++i)
    for (int j = 0; j < nc; ++j) {
      m.elements.push_back({id(i, j), id(i, j + 1), id(i + 1, j + 1), id(i + 1, j)});
      const Vec2 centroid = fem::element_centroid(m, m.num_elements() - 1);
      const Vec2 rel = centroid - c;
      const double alpha = std::atan2(rel.x(), rel.y());
      const double rho = rel.norm();
      int region = plaque;
      if (i >= np) {
        region = artery;
      } else if (alpha >= alpha_lip && rho >= l_in && rho <= l_out) {
        region = lipid;
      }
      m.region.push_back(region);
    }
  std::vector<int> lumen, outer, axis;
  for (int j = 0; j <= nc; ++j) {
    lumen.push_back(id(0, j));
    outer.push_back(id(ni, j));
  }
  for (int i = 0; i <= ni; ++i) {
    axis.push_back(id(i, 0));
    axis.push_back(id(i, nc));
  }
  m.node_sets = {{"lumen", lumen}, {"outer", outer}, {"symmetry", axis}};

  auto& regions = s.problem.model.regions;
  regions.resize(3);
  regions[artery] = detail::region_from(ps, "artery", {ps.number("material.artery.mu"), ps.number("material.artery.kappa")},
                                        {ps.number("material.artery.mu"), ps.number("material.artery.kappa")});
  regions[plaque] = detail::region_from(ps, "plaque", {ps.number("material.plaque.mu1"), ps.number("material.plaque.kappa1")},
                                        {ps.number("material.plaque.mu2"), ps.number("material.plaque.kappa2")});
  regions[lipid] = detail::region_from(ps, "lipid", {ps.number("material.lipid.mu"), ps.number("material.lipid.kappa")},
                                       {ps.number("material.lipid.mu"), ps.number("material.lipid.kappa")});
  if (ps.text("healing.lipid") == "inert") {
    HealingParams& h = regions[lipid].healing;
    h.mg1 = h.mg2 = h.mrm = h.md = 0.0;
  }
  s.region_names = {"artery", "plaque", "lipid"};

  detail::PrescribedSet bc;
  for (int n : axis) bc.set(n, 0, 0.0);
  for (int n : lumen) {
    const Vec2 e = (m.nodes[n] - c).normalized();
    bc.set(n, 0, (rf - rl) * e.x());
    bc.set(n, 1, (rf - rl) * e.y());
  }
  s.problem.prescribed = bc.list();
  const double capture_r = ps.number("capture.lumen_radius");
  s.problem.capture = {fem::CaptureRule::Kind::load_factor, (capture_r - rl) / (rf - rl)};
  s.lumen_nodes = lumen;
  s.outer_nodes = outer;
  s.lumen_center = c;
  s.lumen_radius = rl;
  s.outer_radius = ro;
  s.probe_node = id(0, 0);
  return s;
}

inline ScenarioSpec build_angioplasty(double inflation_radius) {
  ParameterSet ps = default_parameters(ScenarioKind::angioplasty);
  if (!(inflation_radius > 1.0 && inflation_radius < 1.6)) {
    throw std::domain_error("angioplasty: inflation radius must lie in (1.0, 1.6) mm");
  }
  ps.set_number("load.inflation_radius", inflation_radius);
  return build_angioplasty(ps);
}

inline ScenarioSpec build_scenario(const ParameterSet& ps) {
  switch (scenario_kind(ps.text("scenario"))) {
    case ScenarioKind::uniaxial:
      return build_uniaxial(ps);
    case ScenarioKind::open_hole:
      return build_open_hole(ps);
    case ScenarioKind::angioplasty:
      return build_angioplasty(ps);
  }
  throw ConfigError("unknown scenario");
}

// ---------------------------------------------------------------------------
// Outputs

struct PointValues {
  Vec2 position = Vec2::Zero();  // reference coordinates
  int region = 0;
  double h = 1.0;
  double qg1 = 0.0;
  double qg2 = 0.0;
};

inline Vec2 reference_position(const fem::Mesh& mesh, const fem::QuadraturePoint& q) {
  Vec2 x = Vec2::Zero();
  for (int a = 0; a < 4; ++a) x += q.n[a] * mesh.nodes[mesh.elements[q.element][a]];
  return x;
}

/// Current coordinates of a node.
inline Vec2 current_position(const fem::Simulation& sim, int node) {
  const auto& u = sim.fields();
  return sim.problem().model.mesh.nodes[node] + Vec2(u[fem::dof(node, 0)], u[fem::dof(node, 1)]);
}

/// Boundary-averaged Cauchy stress sigma_x over the stress edge: total x-reaction divided by
/// the current edge length and the mean out-of-plane stretch of the adjacent elements.
inline double boundary_stress_x(const ScenarioSpec& s, const fem::Simulation& sim) {
  const double force = sim.reaction(s.stress_edge, 0);
  double ymin = 1e300, ymax = -1e300;
  for (int n : s.stress_edge) {
    const double y = current_position(sim, n).y();
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  const auto& mesh = sim.problem().model.mesh;
  std::vector<char> on_edge(mesh.num_nodes(), 0);
  for (int n : s.stress_edge) on_edge[n] = 1;
  double f33 = 0.0;
  int count = 0;
  for (const auto& q : sim.points()) {
    bool adjacent = false;
    for (int n : mesh.elements[q.element]) adjacent = adjacent || on_edge[n];
    if (!adjacent) continue;
    f33 += sim.problem().model.plane == fem::PlaneMode::stress ? q.f33 : 1.0;
    ++count;
  }
  f33 = count > 0 ? f33 / count : 1.0;
  return force / ((ymax - ymin) * f33);
}

struct TimeSeries {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw std::out_of_range("no channel '" + name + "'");
  }
  std::vector<double> channel(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r[c]);
    return v;
  }
  double last(const std::string& name) const { return rows.back()[column(name)]; }
};

inline std::vector<std::string> channel_names(ScenarioKind kind) {
  std::vector<std::string> n = {"time", "load_factor"};
  switch (kind) {
    case ScenarioKind::uniaxial:
      n.insert(n.end(), {"u_x", "u_y", "sigma_x"});
      break;
    case ScenarioKind::open_hole:
      n.insert(n.end(), {"sigma_x", "uA_x", "uA_y"});
      break;
    case ScenarioKind::angioplasty:
      n.insert(n.end(), {"lumen_radius", "R_outer"});
      break;
  }
  n.insert(n.end(), {"min_H", "min_H_x", "min_H_y", "min_H_region", "mean_H", "mean_lambda", "max_lambda", "mean_Jg1",
                     "mean_Jg2", "max_d", "mean_d", "mean_phi", "mean_qg1", "mean_qg2", "mean_rg1", "mean_rg2",
                     "max_growth_gap", "dissipation"});
  return n;
}

/// One row of channels for the current state of a simulation.
inline std::vector<double> sample(const ScenarioSpec& s, const fem::Simulation& sim) {
  const auto& mesh = sim.problem().model.mesh;
  std::vector<double> row = {sim.time(), sim.load_factor()};
  switch (s.kind) {
    case ScenarioKind::uniaxial: {
      const auto& u = sim.fields();
      row.push_back(u[fem::dof(s.probe_node, 0)]);
      row.push_back(u[fem::dof(s.probe_node, 1)]);
      row.push_back(boundary_stress_x(s, sim));
      break;
    }
    case ScenarioKind::open_hole: {
      const auto& u = sim.fields();
      row.push_back(boundary_stress_x(s, sim));
      row.push_back(u[fem::dof(s.probe_node, 0)]);
      row.push_back(u[fem::dof(s.probe_node, 1)]);
      break;
    }
    case ScenarioKind::angioplasty: {
      double lumen = 0.0, outer = 0.0;
      for (int n : s.lumen_nodes) lumen += (current_position(sim, n) - s.lumen_center).norm();
      // Mean outer radius about the artery centre, by arc-length weighting of the nodal ring.
      double arc = 0.0;
      for (std::size_t k = 0; k + 1 < s.outer_nodes.size(); ++k) {
        const Vec2 a = current_position(sim, s.outer_nodes[k]);
        const Vec2 b = current_position(sim, s.outer_nodes[k + 1]);
        const double len = (b - a).norm();
        outer += 0.5 * (a.norm() + b.norm()) * len;
        arc += len;
      }
      row.push_back(lumen / s.lumen_nodes.size());
      row.push_back(outer / arc / s.outer_radius);
      break;
    }
  }

  double vol = 0.0, h_sum = 0.0, lam_sum = 0.0, jg1 = 0.0, jg2 = 0.0, d_sum = 0.0, phi_sum = 0.0;
  double q1 = 0.0, q2 = 0.0, r1 = 0.0, r2 = 0.0;
  double min_h = 2.0, max_lam = 0.0, max_d = 0.0, gap = -1e300;
  Vec2 min_pos = Vec2::Zero();
  int min_region = 0;
  const auto& qps = sim.points();
  for (std::size_t i = 0; i < qps.size(); ++i) {
    const auto& q = qps[i];
    const double w = q.weight;
    const double h = healing_parameter(q.state);
    const DrivingForces f = sim.forces_at(i);
    const double n1 = f.qg1.norm(), n2 = f.qg2.norm();
    vol += w;
    h_sum += w * h;
    lam_sum += w * q.state.lambda;
    jg1 += w * q.state.jg1;
    jg2 += w * q.state.jg2;
    d_sum += w * q.state.d;
    phi_sum += w * q.state.phi;
    q1 += w * n1;
    q2 += w * n2;
    const double rg1 = std::isfinite(q.rg1) ? q.rg1 : 0.0;
    const double rg2 = std::isfinite(q.rg2) ? q.rg2 : 0.0;
    r1 += w * rg1;
    r2 += w * rg2;
    if (sim.captured() && rg1 > 0.0) gap = std::max(gap, (n1 - rg1) / rg1);
    if (h < min_h) {
      min_h = h;
      min_pos = reference_position(mesh, q);
      min_region = mesh.region[q.element];
    }
    max_lam = std::max(max_lam, q.state.lambda);
    max_d = std::max(max_d, q.state.d);
  }
  if (!sim.captured()) gap = 0.0;
  row.insert(row.end(), {min_h, min_pos.x(), min_pos.y(), double(min_region), h_sum / vol, lam_sum / vol, max_lam,
                         jg1 / vol, jg2 / vol, max_d, d_sum / vol, phi_sum / vol, q1 / vol, q2 / vol, r1 / vol, r2 / vol,
                         gap, sim.invariants().total_dissipation});
  return row;
}

struct OutputPlan {
  std::vector<double> snapshot_times;
  std::function<void(const ScenarioSpec&, const fem::Simulation&)> on_snapshot;
  fem::Simulation::Logger logger;
};

struct ScenarioResult {
  TimeSeries series;
  fem::InvariantLog invariants;
  double capture_time = 0.0;
  int increments = 0;
};

/// Runs a scenario to completion. Solver failures propagate as fem::SolverFailure.
inline ScenarioResult run_scenario(const ScenarioSpec& spec, const fem::SolveControls& controls,
                                   const OutputPlan& plan = {}) {
  fem::Simulation sim(spec.problem, controls, plan.logger);
  ScenarioResult res;
  res.series.names = channel_names(spec.kind);
  std::vector<double> pending = plan.snapshot_times;
  std::sort(pending.begin(), pending.end());
  std::size_t next = 0;
  const double eps = 1e-9 * controls.dt;
  fem::time_march(sim, [&](const fem::Simulation& s) {
    res.series.rows.push_back(sample(spec, s));
    bool snap = false;
    while (next < pending.size() && pending[next] <= s.time() + eps) {
      snap = true;
      ++next;
    }
    if (snap && plan.on_snapshot) plan.on_snapshot(spec, s);
  });
  res.invariants = sim.invariants();
  res.capture_time = sim.capture_time();
  res.increments = sim.increment();
  return res;
}

inline ScenarioResult run_scenario(const ScenarioSpec& spec, const OutputPlan& plan = {}) {
  return run_scenario(spec, spec.controls, plan);
}

}  // namespace healsim
