#include "deform/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>

#include "deform/dynamics.hpp"
#include "deform/errors.hpp"
#include "deform/forms.hpp"
#include "deform/motions.hpp"
#include "deform/regions.hpp"
#include "deform/scenario.hpp"

namespace deform::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Options {
  std::string out = ".";
  std::uint64_t seed = 0;
  std::optional<double> tol;
  int json_indent = 2;
  std::optional<int> max_iters;
  bool conformal = false;
  std::vector<long> m_range = {-5, 5};
  int k_max = 4;
  int d_max = 7;
  std::string scenario;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(const fs::path& path) : os_(path) {
    if (!os_) throw Error("cannot write " + path.string());
  }
  Csv& header(const std::vector<std::string>& cols) {
    for (size_t i = 0; i < cols.size(); ++i) os_ << (i ? "," : "") << cols[i];
    os_ << "\n";
    return *this;
  }
  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << "\n";
  }

 private:
  std::ofstream os_;
};

void write_json(const fs::path& path, const json& j, int indent) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(indent) << "\n";
}

json tensor_json(const Tensor& t) {
  return {{"degree", t.degree()}, {"dim", t.dim()}, {"components", t.components()}};
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

json field_json(const EmbeddingField& f) {
  json nodes = json::array();
  for (std::size_t i = 0; i < f.grid().node_count(); ++i) {
    auto v = f.at(i);
    nodes.push_back(std::vector<double>(v.begin(), v.end()));
  }
  return nodes;
}

std::string kind_name(BoundaryKind k) {
  return k == BoundaryKind::Pinned ? "pinned" : k == BoundaryKind::Free ? "free" : "sliding";
}

json residual_json(const ELResidual& r) {
  json faces = json::array();
  for (const auto& f : r.faces)
    faces.push_back({{"face", f.face}, {"kind", kind_name(f.kind)}, {"norm", f.norm}, {"normal", f.normal}});
  return {{"interior_max", r.interior_max},
          {"interior_l2", r.interior_l2},
          {"dof_max", r.dof_max},
          {"end_slice_max", r.end_slice_max},
          {"faces", faces}};
}

void write_trace(const fs::path& dir, const std::vector<TraceEntry>& trace) {
  Csv csv(dir / "trace.csv");
  csv.header({"iteration", "action", "grad_norm", "step"});
  for (const auto& t : trace) csv.row({std::to_string(t.iteration), num(t.action), num(t.grad_norm), num(t.step)});
}

void write_fields(const fs::path& dir, const std::vector<EmbeddingField>& slices, const ELResidual& res) {
  const auto& grid = slices.front().grid();
  const int n = slices.front().ambient_dim();
  {
    Csv csv(dir / "residuals.csv");
    std::vector<std::string> h{"slice", "node"};
    for (int a = 0; a < n; ++a) h.push_back("r" + std::to_string(a));
    csv.header(h);
    for (size_t s = 0; s < res.residual.size(); ++s) {
      for (std::size_t i = 0; i < grid.node_count(); ++i) {
        std::vector<std::string> row{std::to_string(s), std::to_string(i)};
        for (int a = 0; a < n; ++a) row.push_back(num(res.residual[s][i * static_cast<size_t>(n) + static_cast<size_t>(a)]));
        csv.row(row);
      }
    }
  }
  Csv csv(dir / "plotdata.csv");
  std::vector<std::string> h{"slice", "node"};
  for (int a = 0; a < grid.dim(); ++a) h.push_back("X" + std::to_string(a));
  for (int a = 0; a < n; ++a) h.push_back("x" + std::to_string(a));
  csv.header(h);
  for (size_t s = 0; s < slices.size(); ++s) {
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      std::vector<std::string> row{std::to_string(s), std::to_string(i)};
      for (double c : grid.coords(i)) row.push_back(num(c));
      for (double x : slices[s].at(i)) row.push_back(num(x));
      csv.row(row);
    }
  }
}

void apply_solver_flags(Scenario& s, const Options& o) {
  if (o.tol) s.solver.tol = *o.tol;
  if (o.max_iters) s.solver.max_iters = *o.max_iters;
}

int cmd_admissible(const Options& o, std::ostream& out) {
  if (o.m_range.size() != 2 || o.m_range[0] > o.m_range[1]) throw ParseError("--m-range expects LOW HIGH");
  auto table = admissible_table(o.m_range[0], o.m_range[1], o.k_max, o.d_max);
  std::ostringstream text;
  text << "m,k,d,l,P\n";
  for (const auto& a : table) text << *a.m << "," << a.k << "," << a.d << "," << a.l << "," << a.P << "\n";
  std::ofstream(fs::path(o.out) / "admissible.csv") << text.str();
  out << text.str();
  return kOk;
}

int cmd_flatten(const Options& o, std::ostream& out) {
  ScenarioConfig cfg = load_scenario(o.scenario);
  AmbientMetric metric = build_ambient(cfg);
  if (!metric.is_constant()) throw ParseError("flatten needs a constant metric");
  const std::vector<double> origin(static_cast<size_t>(metric.n()), 0.0);
  const Tensor t = metric(origin);
  const int k = t.degree() / 2;
  FlatView fv = flatten(t);
  json j;
  j["tensor"] = tensor_json(t);
  j["flat"] = matrix_json(fv.matrix);
  j["trace"] = flat_trace(t);
  j["det"] = overline_det(t);
  Admissibility adm = admissibility(k, t.dim());
  j["admissibility"] = {{"k", adm.k}, {"d", adm.d}, {"admissible", adm.admissible()}, {"l", adm.l}, {"P", adm.P}};
  if (adm.admissible()) {
    j["admissibility"]["m"] = *adm.m;
    j["volume_density"] = volume_density(t, adm);
  }
  if (!is_singular(fv.matrix)) j["inverse"] = tensor_json(flat_inverse(t));
  write_json(fs::path(o.out) / "flatten.json", j, o.json_indent);
  out << "det = " << num(overline_det(t)) << "\n";
  return kOk;
}

int cmd_strain(const Options& o, std::ostream& out) {
  ScenarioConfig cfg = load_scenario(o.scenario);
  Scenario s = build_dynamics(cfg, Mode::Static, o.seed);
  DeformationMeasure dm = deformation_measure(s.initial, s.reference, s.ambient);
  auto inv = invariants(dm, 3);
  Csv csv(fs::path(o.out) / "strain.csv");
  std::vector<std::string> h{"node"};
  for (int a = 0; a < s.grid.dim(); ++a) h.push_back("X" + std::to_string(a));
  h.insert(h.end(), {"D1", "D2", "D3", "delta_max"});
  csv.header(h);
  double dmax = 0.0;
  std::vector<double> imax(3, 0.0);
  for (std::size_t i = 0; i < s.grid.node_count(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (double c : s.grid.coords(i)) row.push_back(num(c));
    for (int k = 0; k < 3; ++k) {
      row.push_back(num(inv[static_cast<size_t>(k)][i]));
      imax[static_cast<size_t>(k)] = std::max(imax[static_cast<size_t>(k)], std::abs(inv[static_cast<size_t>(k)][i]));
    }
    row.push_back(num(dm.delta[i].max_abs()));
    dmax = std::max(dmax, dm.delta[i].max_abs());
    csv.row(row);
  }
  json j{{"nodes", s.grid.node_count()}, {"delta_max", dmax}, {"invariant_max", imax}};
  write_json(fs::path(o.out) / "strain.json", j, o.json_indent);
  out << "max |Delta| = " << num(dmax) << "\n";
  return kOk;
}

int cmd_energy(const Options& o, std::ostream& out) {
  ScenarioConfig cfg = load_scenario(o.scenario);
  Scenario s = build_dynamics(cfg, Mode::Static, o.seed);
  DeformationMeasure dm = deformation_measure(s.initial, s.reference, s.ambient);
  const int count = std::max(invariant_count(s.model.elastic), 1);
  auto f0 = energy_density(s.model, invariants(dm, count));
  TensorField sigma = stress(s.model, dm);
  Csv csv(fs::path(o.out) / "energy.csv");
  csv.header({"node", "F0", "stress_max"});
  double smax = 0.0;
  for (std::size_t i = 0; i < s.grid.node_count(); ++i) {
    csv.row({std::to_string(i), num(f0[i]), num(sigma[i].max_abs())});
    smax = std::max(smax, sigma[i].max_abs());
  }
  const double a = action(s, s.initial);
  json j{{"action", a}, {"stress_max", smax}};
  write_json(fs::path(o.out) / "energy.json", j, o.json_indent);
  out << "action = " << num(a) << "\n";
  return kOk;
}

int cmd_solve(const Options& o, Mode mode, std::ostream& out, std::ostream& err) {
  ScenarioConfig cfg = load_scenario(o.scenario);
  Scenario s = build_dynamics(cfg, mode, o.seed);
  apply_solver_flags(s, o);
  const fs::path dir(o.out);
  try {
    json j;
    if (mode == Mode::Static) {
      StaticResult r = solve_static(s);
      write_trace(dir, r.trace);
      write_fields(dir, {r.embedding}, r.residual);
      j = {{"mode", "static"},
           {"converged", true},
           {"iterations", r.trace.empty() ? 0 : r.trace.back().iteration},
           {"action", r.action},
           {"residual", residual_json(r.residual)},
           {"embedding", field_json(r.embedding)}};
      out << "converged: action = " << num(r.action) << ", residual = " << num(r.residual.dof_max) << "\n";
    } else {
      EvolutionResult r = solve_evolution(s);
      write_trace(dir, r.trace);
      write_fields(dir, r.history, r.residual);
      json hist = json::array();
      for (const auto& f : r.history) hist.push_back(field_json(f));
      j = {{"mode", "evolution"},
           {"converged", true},
           {"iterations", r.trace.empty() ? 0 : r.trace.back().iteration},
           {"action", r.action},
           {"residual", residual_json(r.residual)},
           {"history", hist}};
      out << "converged: action = " << num(r.action) << ", residual = " << num(r.residual.dof_max) << "\n";
    }
    write_json(dir / "solution.json", j, o.json_indent);
  } catch (const ConvergenceError& e) {
    write_trace(dir, e.trace());
    err << "error: " << e.what() << "\n";
    return kConvergence;
  }
  return kOk;
}

int cmd_killing(const Options& o, std::ostream& out) {
  ScenarioConfig cfg = load_scenario(o.scenario);
  if (!cfg.killing) throw ParseError("missing section [killing]");
  const auto& k = *cfg.killing;
  AmbientMetric metric = build_ambient(cfg);
  VectorField v = build_killing_field(cfg);
  const bool conformal = o.conformal || k.conformal;
  const double tol = o.tol.value_or(k.tol);
  KillingReport rep = killing_residual(metric, v, killing_points(cfg), conformal, tol);
  json j{{"conformal", conformal},
         {"tol", tol},
         {"points", rep.point_norm.size()},
         {"max_norm", rep.max_norm},
         {"mean_norm", rep.mean_norm},
         {"verdict", rep.motion}};
  if (conformal) {
    j["phi"] = {{"min", rep.phi_min},
                {"max", rep.phi_max},
                {"mean", rep.phi_mean},
                {"flagged", std::count(rep.flagged.begin(), rep.flagged.end(), true)}};
  }
  if (k.flow_steps > 0) {
    auto hist = flow_history(build_reference(cfg), v, k.flow_dt, k.flow_steps);
    HistoryMotionReport hm = history_motion_check(hist, metric, k.flow_tol);
    j["flow"] = {{"dt", k.flow_dt},
                 {"steps", k.flow_steps},
                 {"tol", k.flow_tol},
                 {"max_norm", hm.max_norm},
                 {"motion", hm.motion}};
  }
  write_json(fs::path(o.out) / "killing_report.json", j, o.json_indent);
  out << (rep.motion ? "Killing" : "not Killing") << " (max residual " << num(rep.max_norm) << ")\n";
  return kOk;
}

json region_json(const Region& r) {
  json pieces = json::array();
  for (const auto& p : r.pieces()) {
    static const char* kinds[] = {"point", "segment", "polygon"};
    json pj{{"kind", kinds[p.dim()]}};
    if (p.kind() == ConvexPiece::Kind::Segment && !p.bounded()) {
      pj["anchor"] = std::vector<double>{p.anchor().x(), p.anchor().y()};
      pj["dir"] = std::vector<double>{p.dir().x(), p.dir().y()};
      pj["t0"] = std::isfinite(p.t0()) ? json(p.t0()) : json(p.t0() < 0 ? "-inf" : "inf");
      pj["t1"] = std::isfinite(p.t1()) ? json(p.t1()) : json(p.t1() < 0 ? "-inf" : "inf");
    } else {
      json pts = json::array();
      for (const auto& v : p.control_points()) pts.push_back(std::vector<double>{v.x(), v.y()});
      pj["points"] = pts;
    }
    pieces.push_back(pj);
  }
  return pieces;
}

json measure_json(double m) { return std::isfinite(m) ? json(m) : json("inf"); }

int cmd_classify(const Options& o, std::ostream& out) {
  ScenarioConfig cfg = load_scenario(o.scenario);
  AffineDeformation z = build_deformation(cfg);
  ContinuationGraph g = continuation_graph(z, cfg.classify->depth);
  json nodes = json::array();
  for (const auto& level : g.levels) {
    for (const auto& nd : level) {
      json labels = json::array();
      for (const auto& v : nd.variants) labels.push_back(class_name(v.cls.label));
      std::string label = class_name(nd.variants.front().cls.label);
      for (const auto& v : nd.variants)
        if (class_name(v.cls.label) != label) label = "mixed";
      nodes.push_back({{"n", nd.n},
                       {"s", nd.s},
                       {"label", label},
                       {"variants", labels},
                       {"measure", measure_json(nd.set.measure())},
                       {"dim", nd.set.dim()},
                       {"components", nd.components}});
    }
  }
  json type;
  type["order"] = g.order ? json(*g.order) : json(nullptr);
  json classes = json::array();
  for (auto c : g.classes) classes.push_back(class_name(c));
  type["classes"] = classes;
  type["fixed_set"] = g.fixed_set ? region_json(*g.fixed_set) : json(nullptr);
  type["text"] = g.type_string();
  json j{{"nodes", nodes},
         {"type", type},
         {"max_depth", g.max_depth},
         {"diamond_ok", g.diamond_ok},
         {"absorbing_ok", g.absorbing_ok},
         {"disconnected", g.disconnected}};
  write_json(fs::path(o.out) / "classification.json", j, o.json_indent);
  std::ofstream(fs::path(o.out) / "graph.dot") << to_dot(g);
  out << "type " << g.type_string() << "\n";
  return kOk;
}

int cmd_symplectic(const Options& o, std::ostream& out) {
  ScenarioConfig cfg = load_scenario(o.scenario);
  if (!cfg.symplectic) throw ParseError("missing section [symplectic]");
  const auto& sp = *cfg.symplectic;
  const int n = 2 * sp.m;
  const Tensor omega = canonical_symplectic(sp.m);
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> uni(-sp.box, sp.box);
  std::vector<std::vector<double>> pts(static_cast<size_t>(sp.points), std::vector<double>(static_cast<size_t>(n)));
  for (auto& p : pts)
    for (auto& x : p) x = uni(rng);
  json fields = json::array();
  double worst = 0.0;
  for (int f = 0; f < sp.fields; ++f) {
    VectorField a = random_polynomial_field(n, sp.degree, o.seed * 1000003ULL + static_cast<std::uint64_t>(f) + 1);
    SymplecticReport r = symplectic_demo(a, omega, pts, sp.h);
    worst = std::max(worst, r.max_discrepancy);
    fields.push_back({{"field", f},
                      {"max_discrepancy", r.max_discrepancy},
                      {"antisymmetry", r.antisymmetry},
                      {"closedness", r.closedness}});
  }
  const double tol = o.tol.value_or(1e-8);
  json j{{"dim", n}, {"degree", sp.degree}, {"points", sp.points}, {"h", sp.h},
         {"fields", fields}, {"max_discrepancy", worst}, {"tol", tol}, {"verdict", worst <= tol}};
  write_json(fs::path(o.out) / "symplectic.json", j, o.json_indent);
  out << "max |L_A w - d(i_A w)| = " << num(worst) << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Deformational structures toolkit", "deform"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--seed", o.seed, "Seed for perturbations and random fields")->capture_default_str();
  app.add_option("--tol", o.tol, "Tolerance override");
  app.add_option("--json-indent", o.json_indent, "JSON indentation")->capture_default_str();

  auto* adm = app.add_subcommand("admissible", "Admissible (k, d) table as CSV");
  adm->add_option("--m-range", o.m_range, "m range LOW HIGH")->expected(2);
  adm->add_option("--k-max", o.k_max)->capture_default_str();
  adm->add_option("--d-max", o.d_max)->capture_default_str();

  std::vector<std::pair<std::string, std::string>> scenario_cmds = {
      {"flatten", "Flatten the constant ambient form"},
      {"strain", "Deformation measure and strain invariants"},
      {"energy", "Energy density, stress and action of the initial state"},
      {"solve-static", "Static equilibrium"},
      {"solve-evolution", "Space-time extremal history"},
      {"killing-check", "Generalized Killing equations for a field"},
      {"classify", "Continuation graph and type of a deformation"},
      {"demo-symplectic", "Lie derivative of the symplectic form vs d of the interior product"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, desc] : scenario_cmds) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("scenario", o.scenario, "Scenario file")->required();
    subs[name] = sub;
  }
  for (const char* name : {"solve-static", "solve-evolution"})
    subs[name]->add_option("--max-iters", o.max_iters, "Iteration limit override");
  subs["killing-check"]->add_flag("--conformal", o.conformal, "Check the conformal equations");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    fs::create_directories(o.out);
    if (adm->parsed()) return cmd_admissible(o, out);
    if (subs["flatten"]->parsed()) return cmd_flatten(o, out);
    if (subs["strain"]->parsed()) return cmd_strain(o, out);
    if (subs["energy"]->parsed()) return cmd_energy(o, out);
    if (subs["solve-static"]->parsed()) return cmd_solve(o, Mode::Static, out, err);
    if (subs["solve-evolution"]->parsed()) return cmd_solve(o, Mode::Evolution, out, err);
    if (subs["killing-check"]->parsed()) return cmd_killing(o, out);
    if (subs["classify"]->parsed()) return cmd_classify(o, out);
    if (subs["demo-symplectic"]->parsed()) return cmd_symplectic(o, out);
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kConvergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kUsage;
}

}  // namespace deform::cli
