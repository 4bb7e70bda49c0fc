#include "deform/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "deform/errors.hpp"

namespace deform {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

struct RawSection {
  int line = 0;
  std::map<std::string, Entry> keys;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

const std::set<std::string> kSections = {"body",     "ambient", "embedding", "energy",    "boundary",
                                          "solver",   "classify", "killing", "symplectic"};

// Typed access to one section; every key read is marked, leftovers are
// rejected by finish().
class Reader {
 public:
  Reader(const std::string& name, const RawSection& raw) : name_(name), raw_(raw) {}

  [[noreturn]] void fail(const std::string& what, int line = 0) const {
    throw ParseError(what, line ? line : raw_.line, name_);
  }

  const Entry* find(const std::string& key) {
    auto it = raw_.keys.find(key);
    if (it == raw_.keys.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }
  const Entry& need(const std::string& key) {
    const Entry* e = find(key);
    if (!e) fail("missing key '" + key + "'");
    return *e;
  }

  double to_double(const std::string& w, int line) const {
    double v = 0.0;
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || p != w.data() + w.size()) fail("not a number: '" + w + "'", line);
    return v;
  }
  long to_long(const std::string& w, int line) const {
    long v = 0;
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || p != w.data() + w.size()) fail("not an integer: '" + w + "'", line);
    return v;
  }

  double number(const std::string& key, std::optional<double> def = std::nullopt) {
    const Entry* e = def ? find(key) : &need(key);
    if (!e) return *def;
    auto w = words(e->value);
    if (w.size() != 1) fail("'" + key + "' expects one number", e->line);
    return to_double(w[0], e->line);
  }
  int integer(const std::string& key, std::optional<int> def = std::nullopt) {
    const Entry* e = def ? find(key) : &need(key);
    if (!e) return *def;
    auto w = words(e->value);
    if (w.size() != 1) fail("'" + key + "' expects one integer", e->line);
    return static_cast<int>(to_long(w[0], e->line));
  }
  bool flag(const std::string& key, bool def) {
    const Entry* e = find(key);
    if (!e) return def;
    const std::string v = trim(e->value);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail("'" + key + "' expects true or false", e->line);
  }
  std::string choice(const std::string& key, const std::set<std::string>& allowed, std::optional<std::string> def) {
    const Entry* e = def ? find(key) : &need(key);
    if (!e) return *def;
    const std::string v = trim(e->value);
    if (!allowed.count(v)) fail("unknown value '" + v + "' for '" + key + "'", e->line);
    return v;
  }
  std::vector<double> list(const std::string& key, bool required = false) {
    const Entry* e = required ? &need(key) : find(key);
    if (!e) return {};
    std::vector<double> out;
    for (const auto& w : words(e->value)) out.push_back(to_double(w, e->line));
    return out;
  }
  std::vector<int> int_list(const std::string& key) {
    const Entry& e = need(key);
    std::vector<int> out;
    for (const auto& w : words(e.value)) out.push_back(static_cast<int>(to_long(w, e.line)));
    return out;
  }
  Rows rows(const std::string& key, bool required = false) {
    const Entry* e = required ? &need(key) : find(key);
    if (!e) return {};
    Rows out;
    for (const auto& r : split(e->value, ';')) {
      if (r.empty()) continue;
      std::vector<double> row;
      for (const auto& w : words(r)) row.push_back(to_double(w, e->line));
      if (!out.empty() && row.size() != out[0].size()) fail("'" + key + "' has rows of different lengths", e->line);
      out.push_back(std::move(row));
    }
    return out;
  }
  int line_of(const std::string& key) const {
    auto it = raw_.keys.find(key);
    return it == raw_.keys.end() ? raw_.line : it->second.line;
  }

  void finish() const {
    for (const auto& [k, e] : raw_.keys)
      if (!used_.count(k)) fail("unknown key '" + k + "'", e.line);
  }

  const RawSection& raw() const { return raw_; }

 private:
  std::string name_;
  const RawSection& raw_;
  std::set<std::string> used_;
};

LameTable read_lame(Reader& r, const std::string& prefix, int line) {
  LameTable t;
  t.order = r.integer(prefix + "order", 0);
  t.mu0 = r.number(prefix + "mu0", 0.0);
  t.mu1_1 = r.number(prefix + "mu1_1", 0.0);
  t.mu2_01 = r.number(prefix + "mu2_01", 0.0);
  t.mu2_20 = r.number(prefix + "mu2_20", 0.0);
  t.mu3_001 = r.number(prefix + "mu3_001", 0.0);
  t.mu3_110 = r.number(prefix + "mu3_110", 0.0);
  t.mu3_300 = r.number(prefix + "mu3_300", 0.0);
  try {
    t.validate();
  } catch (const Error& e) {
    r.fail(e.what(), line);
  }
  return t;
}

BoundaryKind boundary_kind(Reader& r, const std::string& v, int line) {
  if (v == "pinned") return BoundaryKind::Pinned;
  if (v == "free") return BoundaryKind::Free;
  if (v == "sliding") return BoundaryKind::Sliding;
  if (v == "given") r.fail("boundary kind 'given' (prescribed variations) is not supported", line);
  r.fail("unknown boundary kind '" + v + "'", line);
}

std::string kind_name(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::Pinned:
      return "pinned";
    case BoundaryKind::Free:
      return "free";
    case BoundaryKind::Sliding:
      return "sliding";
  }
  return "pinned";
}

std::string potential_name(Potential::Kind k) {
  switch (k) {
    case Potential::Kind::None:
      return "none";
    case Potential::Kind::Linear:
      return "linear";
    case Potential::Kind::Quadratic:
      return "quadratic";
  }
  return "none";
}

std::map<std::string, FaceCondition> read_boundary(Reader& r, const std::optional<BodySection>& body) {
  std::map<std::string, FaceCondition> faces;
  std::set<std::string> face_keys;
  for (const auto& [key, e] : r.raw().keys) {
    if (key.ends_with("_point") || key.ends_with("_tangent")) continue;
    face_keys.insert(key);
  }
  for (const auto& key : face_keys) {
    const Entry& e = r.need(key);
    const int line = e.line;
    if (body) {
      if (face_index(static_cast<int>(body->counts.size()), key) < 0) r.fail("unknown face '" + key + "'", line);
    }
    FaceCondition fc;
    fc.kind = boundary_kind(r, trim(e.value), line);
    fc.point = r.list(key + "_point");
    fc.tangents = r.rows(key + "_tangent");
    if (fc.kind == BoundaryKind::Sliding) {
      if (fc.point.empty() || fc.tangents.empty()) r.fail("sliding face '" + key + "' needs _point and _tangent", line);
      for (const auto& t : fc.tangents)
        if (t.size() != fc.point.size()) r.fail("tangent size differs from point size on '" + key + "'", line);
    } else if (!fc.point.empty() || !fc.tangents.empty()) {
      r.fail("_point/_tangent only apply to sliding faces ('" + key + "')", line);
    }
    faces[key] = std::move(fc);
  }
  return faces;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

std::string fmt_rows(const Rows& r) {
  std::string s;
  for (size_t i = 0; i < r.size(); ++i) s += (i ? "; " : "") + fmt_list(r[i]);
  return s;
}

void write_lame(std::ostringstream& os, const std::string& prefix, const LameTable& t) {
  os << prefix << "order = " << t.order << "\n";
  os << prefix << "mu0 = " << fmt(t.mu0) << "\n";
  os << prefix << "mu1_1 = " << fmt(t.mu1_1) << "\n";
  os << prefix << "mu2_01 = " << fmt(t.mu2_01) << "\n";
  os << prefix << "mu2_20 = " << fmt(t.mu2_20) << "\n";
  os << prefix << "mu3_001 = " << fmt(t.mu3_001) << "\n";
  os << prefix << "mu3_110 = " << fmt(t.mu3_110) << "\n";
  os << prefix << "mu3_300 = " << fmt(t.mu3_300) << "\n";
}

Eigen::MatrixXd to_matrix(const Rows& r, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (static_cast<Eigen::Index>(r.size()) != rows || (rows > 0 && static_cast<Eigen::Index>(r[0].size()) != cols))
    throw ParseError(what + " must be " + std::to_string(rows) + "x" + std::to_string(cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return m;
}

Eigen::VectorXd to_vector(const std::vector<double>& v, Eigen::Index n, const std::string& what) {
  if (v.empty()) return Eigen::VectorXd::Zero(n);
  if (static_cast<Eigen::Index>(v.size()) != n) throw ParseError(what + " must have " + std::to_string(n) + " entries");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
}

template <class T>
const T& require(const std::optional<T>& s, const std::string& name) {
  if (!s) throw ParseError("missing section [" + name + "]");
  return *s;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
  std::map<std::string, RawSection> raw;
  std::string current;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("malformed section header", lineno);
      current = trim(line.substr(1, line.size() - 2));
      if (!kSections.count(current)) throw ParseError("unknown section [" + current + "]", lineno);
      if (raw.count(current)) throw ParseError("duplicate section [" + current + "]", lineno);
      raw[current].line = lineno;
      continue;
    }
    if (current.empty()) throw ParseError("key outside of any section", lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno, current);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", lineno, current);
    auto& keys = raw[current].keys;
    if (keys.count(key)) throw ParseError("duplicate key '" + key + "'", lineno, current);
    keys[key] = {value, lineno};
  }

  ScenarioConfig cfg;
  if (raw.count("body")) {
    Reader r("body", raw["body"]);
    BodySection b;
    b.counts = r.int_list("counts");
    b.spacing = r.list("spacing", true);
    b.origin = r.list("origin");
    if (b.counts.empty()) r.fail("counts is empty", r.line_of("counts"));
    for (int c : b.counts)
      if (c < 2) r.fail("every axis needs at least two nodes", r.line_of("counts"));
    if (b.spacing.size() != b.counts.size()) r.fail("spacing must match counts", r.line_of("spacing"));
    for (double h : b.spacing)
      if (!(h > 0.0)) r.fail("spacing must be positive", r.line_of("spacing"));
    if (!b.origin.empty() && b.origin.size() != b.counts.size()) r.fail("origin must match counts", r.line_of("origin"));
    r.finish();
    cfg.body = b;
  }
  if (raw.count("ambient")) {
    Reader r("ambient", raw["ambient"]);
    AmbientSection a;
    a.dim = r.integer("dim");
    a.metric = r.choice("metric", {"euclidean", "constant"}, "euclidean");
    a.degree = r.integer("degree", 2);
    a.components = r.list("components");
    if (a.dim < 1) r.fail("dim must be positive", r.line_of("dim"));
    if (a.degree < 2 || a.degree % 2) r.fail("degree must be even and at least 2", r.line_of("degree"));
    if (a.metric == "constant") {
      if (static_cast<long>(a.components.size()) != ipow(a.dim, a.degree))
        r.fail("components must have dim^degree entries", r.line_of("components"));
    } else if (!a.components.empty()) {
      r.fail("components only apply to a constant metric", r.line_of("components"));
    }
    r.finish();
    cfg.ambient = a;
  }
  if (raw.count("embedding")) {
    Reader r("embedding", raw["embedding"]);
    EmbeddingSection e;
    e.reference_matrix = r.rows("reference_matrix");
    e.reference_offset = r.list("reference_offset");
    e.matrix = r.rows("matrix");
    e.offset = r.list("offset");
    e.end_matrix = r.rows("end_matrix");
    e.end_offset = r.list("end_offset");
    e.perturbation = r.number("perturbation", 0.0);
    e.slices = r.integer("slices", 1);
    e.duration = r.number("duration", 1.0);
    e.time_metric = r.number("time_metric", 1.0);
    if (e.slices < 1) r.fail("slices must be positive", r.line_of("slices"));
    if (!(e.duration > 0.0)) r.fail("duration must be positive", r.line_of("duration"));
    r.finish();
    cfg.embedding = e;
  }
  if (raw.count("energy")) {
    Reader r("energy", raw["energy"]);
    const int line = raw["energy"].line;
    EnergySection e;
    e.elastic = read_lame(r, "", line);
    e.kinetic = r.flag("kinetic", false);
    e.kin = read_lame(r, "kin_", line);
    const std::string pot = r.choice("potential", {"none", "linear", "quadratic"}, "none");
    e.potential = pot == "linear" ? Potential::Kind::Linear
                  : pot == "quadratic" ? Potential::Kind::Quadratic
                                       : Potential::Kind::None;
    e.potential_params = r.list("potential_params");
    e.measure = r.choice("measure", {"current", "reference"}, "current") == "reference" ? MeasureKind::Reference
                                                                                        : MeasureKind::Current;
    try {
      Potential::from_params(e.potential, e.potential_params);
    } catch (const Error& err) {
      r.fail(err.what(), r.line_of("potential_params"));
    }
    r.finish();
    cfg.energy = e;
  }
  if (raw.count("boundary")) {
    Reader r("boundary", raw["boundary"]);
    cfg.boundary = read_boundary(r, cfg.body);
    r.finish();
  }
  if (raw.count("solver")) {
    Reader r("solver", raw["solver"]);
    SolverSection s;
    s.tol = r.number("tol", 1e-8);
    s.max_iters = r.integer("max_iters", 20000);
    s.memory = r.integer("memory", 8);
    if (!(s.tol > 0.0)) r.fail("tol must be positive", r.line_of("tol"));
    if (s.max_iters < 1 || s.memory < 1) r.fail("max_iters and memory must be positive");
    r.finish();
    cfg.solver = s;
  }
  if (raw.count("classify")) {
    Reader r("classify", raw["classify"]);
    ClassifySection c;
    c.domain = r.choice("domain", {"polygon", "interval", "line"}, std::nullopt);
    c.vertices = r.rows("vertices", c.domain == "polygon");
    c.interval = r.list("interval", c.domain == "interval");
    if (auto m = r.rows("matrix"); !m.empty()) c.matrix = m;
    if (auto t = r.list("translation"); !t.empty()) c.translation = t;
    if (auto ce = r.list("center"); !ce.empty()) c.center = ce;
    c.breakpoints = r.list("breakpoints");
    c.angles = r.list("angles", c.domain == "line");
    c.depth = r.integer("depth", 12);
    for (const auto& v : c.vertices)
      if (v.size() != 2) r.fail("vertices must be 'x y' pairs", r.line_of("vertices"));
    if (c.domain == "interval" && c.interval.size() != 2) r.fail("interval needs two bounds", r.line_of("interval"));
    if (c.matrix.size() != 2 || c.matrix[0].size() != 2) r.fail("matrix must be 2x2", r.line_of("matrix"));
    if (c.translation.size() != 2) r.fail("translation needs two entries", r.line_of("translation"));
    if (c.center.size() != 2) r.fail("center needs two entries", r.line_of("center"));
    if (c.domain == "line" && c.angles.size() != c.breakpoints.size() + 1)
      r.fail("angles needs one entry per line piece", r.line_of("angles"));
    if (c.depth < 0) r.fail("depth must be non-negative", r.line_of("depth"));
    r.finish();
    cfg.classify = c;
  }
  if (raw.count("killing")) {
    Reader r("killing", raw["killing"]);
    KillingSection k;
    k.matrix = r.rows("matrix", true);
    k.offset = r.list("offset");
    k.conformal = r.flag("conformal", false);
    k.box_min = r.list("box_min", true);
    k.box_max = r.list("box_max", true);
    k.samples = r.integer("samples", 5);
    k.tol = r.number("tol", 1e-10);
    k.flow_dt = r.number("flow_dt", 1e-4);
    k.flow_steps = r.integer("flow_steps", 0);
    k.flow_tol = r.number("flow_tol", 1e-6);
    if (k.matrix.size() != k.matrix[0].size()) r.fail("matrix must be square", r.line_of("matrix"));
    if (k.box_min.size() != k.matrix.size() || k.box_max.size() != k.matrix.size())
      r.fail("box_min/box_max must match the field dimension", r.line_of("box_min"));
    if (!k.offset.empty() && k.offset.size() != k.matrix.size()) r.fail("offset size", r.line_of("offset"));
    if (k.samples < 1 || k.flow_steps < 0) r.fail("samples must be positive and flow_steps non-negative");
    r.finish();
    cfg.killing = k;
  }
  if (raw.count("symplectic")) {
    Reader r("symplectic", raw["symplectic"]);
    SymplecticSection s;
    s.m = r.integer("m", 1);
    s.degree = r.integer("degree", 3);
    s.fields = r.integer("fields", 1);
    s.points = r.integer("points", 10);
    s.box = r.number("box", 1.0);
    s.h = r.number("h", 1e-4);
    if (s.m < 1 || s.degree < 0 || s.fields < 1 || s.points < 1 || !(s.box > 0) || !(s.h > 0))
      r.fail("invalid symplectic parameters");
    r.finish();
    cfg.symplectic = s;
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
  std::ostringstream os;
  if (cfg.body) {
    const auto& b = *cfg.body;
    os << "[body]\ncounts =";
    for (int c : b.counts) os << " " << c;
    os << "\nspacing = " << fmt_list(b.spacing) << "\n";
    if (!b.origin.empty()) os << "origin = " << fmt_list(b.origin) << "\n";
    os << "\n";
  }
  if (cfg.ambient) {
    const auto& a = *cfg.ambient;
    os << "[ambient]\ndim = " << a.dim << "\nmetric = " << a.metric << "\ndegree = " << a.degree << "\n";
    if (!a.components.empty()) os << "components = " << fmt_list(a.components) << "\n";
    os << "\n";
  }
  if (cfg.embedding) {
    const auto& e = *cfg.embedding;
    os << "[embedding]\n";
    if (!e.reference_matrix.empty()) os << "reference_matrix = " << fmt_rows(e.reference_matrix) << "\n";
    if (!e.reference_offset.empty()) os << "reference_offset = " << fmt_list(e.reference_offset) << "\n";
    if (!e.matrix.empty()) os << "matrix = " << fmt_rows(e.matrix) << "\n";
    if (!e.offset.empty()) os << "offset = " << fmt_list(e.offset) << "\n";
    if (!e.end_matrix.empty()) os << "end_matrix = " << fmt_rows(e.end_matrix) << "\n";
    if (!e.end_offset.empty()) os << "end_offset = " << fmt_list(e.end_offset) << "\n";
    os << "perturbation = " << fmt(e.perturbation) << "\nslices = " << e.slices << "\nduration = " << fmt(e.duration)
       << "\ntime_metric = " << fmt(e.time_metric) << "\n\n";
  }
  if (cfg.energy) {
    const auto& e = *cfg.energy;
    os << "[energy]\n";
    write_lame(os, "", e.elastic);
    os << "kinetic = " << (e.kinetic ? "true" : "false") << "\n";
    write_lame(os, "kin_", e.kin);
    os << "potential = " << potential_name(e.potential) << "\n";
    if (!e.potential_params.empty()) os << "potential_params = " << fmt_list(e.potential_params) << "\n";
    os << "measure = " << (e.measure == MeasureKind::Reference ? "reference" : "current") << "\n\n";
  }
  if (cfg.boundary) {
    os << "[boundary]\n";
    for (const auto& [face, fc] : *cfg.boundary) {
      os << face << " = " << kind_name(fc.kind) << "\n";
      if (!fc.point.empty()) os << face << "_point = " << fmt_list(fc.point) << "\n";
      if (!fc.tangents.empty()) os << face << "_tangent = " << fmt_rows(fc.tangents) << "\n";
    }
    os << "\n";
  }
  if (cfg.solver) {
    const auto& s = *cfg.solver;
    os << "[solver]\ntol = " << fmt(s.tol) << "\nmax_iters = " << s.max_iters << "\nmemory = " << s.memory << "\n\n";
  }
  if (cfg.classify) {
    const auto& c = *cfg.classify;
    os << "[classify]\ndomain = " << c.domain << "\n";
    if (!c.vertices.empty()) os << "vertices = " << fmt_rows(c.vertices) << "\n";
    if (!c.interval.empty()) os << "interval = " << fmt_list(c.interval) << "\n";
    os << "matrix = " << fmt_rows(c.matrix) << "\ntranslation = " << fmt_list(c.translation)
       << "\ncenter = " << fmt_list(c.center) << "\n";
    if (!c.breakpoints.empty()) os << "breakpoints = " << fmt_list(c.breakpoints) << "\n";
    if (!c.angles.empty()) os << "angles = " << fmt_list(c.angles) << "\n";
    os << "depth = " << c.depth << "\n\n";
  }
  if (cfg.killing) {
    const auto& k = *cfg.killing;
    os << "[killing]\nmatrix = " << fmt_rows(k.matrix) << "\n";
    if (!k.offset.empty()) os << "offset = " << fmt_list(k.offset) << "\n";
    os << "conformal = " << (k.conformal ? "true" : "false") << "\nbox_min = " << fmt_list(k.box_min)
       << "\nbox_max = " << fmt_list(k.box_max) << "\nsamples = " << k.samples << "\ntol = " << fmt(k.tol)
       << "\nflow_dt = " << fmt(k.flow_dt) << "\nflow_steps = " << k.flow_steps << "\nflow_tol = " << fmt(k.flow_tol)
       << "\n\n";
  }
  if (cfg.symplectic) {
    const auto& s = *cfg.symplectic;
    os << "[symplectic]\nm = " << s.m << "\ndegree = " << s.degree << "\nfields = " << s.fields
       << "\npoints = " << s.points << "\nbox = " << fmt(s.box) << "\nh = " << fmt(s.h) << "\n\n";
  }
  return os.str();
}

AmbientMetric build_ambient(const ScenarioConfig& cfg) {
  const auto& a = require(cfg.ambient, "ambient");
  if (a.metric == "euclidean") {
    if (a.degree == 2) return AmbientMetric::euclidean(a.dim);
    return AmbientMetric::constant(Tensor::unit(a.degree / 2, a.dim));
  }
  return AmbientMetric::constant(Tensor(a.degree, a.dim, a.components));
}

EmbeddingField build_reference(const ScenarioConfig& cfg) {
  const auto& b = require(cfg.body, "body");
  const auto& a = require(cfg.ambient, "ambient");
  const auto& e = require(cfg.embedding, "embedding");
  BodyGrid grid(b.counts, b.spacing, b.origin);
  const Eigen::Index n = a.dim, d = grid.dim();
  Eigen::MatrixXd m;
  if (e.reference_matrix.empty()) {
    if (n < d) throw ParseError("ambient dim is smaller than the body dim; give reference_matrix");
    m = Eigen::MatrixXd::Identity(n, d);
  } else {
    m = to_matrix(e.reference_matrix, n, d, "reference_matrix");
  }
  return EmbeddingField::affine(grid, m, to_vector(e.reference_offset, n, "reference_offset"));
}

Scenario build_dynamics(const ScenarioConfig& cfg, Mode mode, std::uint64_t seed) {
  const auto& b = require(cfg.body, "body");
  const auto& a = require(cfg.ambient, "ambient");
  const auto& e = require(cfg.embedding, "embedding");
  const auto& en = require(cfg.energy, "energy");

  Scenario s;
  s.mode = mode;
  s.grid = BodyGrid(b.counts, b.spacing, b.origin);
  s.ambient = build_ambient(cfg);
  s.reference = build_reference(cfg);
  const Eigen::Index n = a.dim, d = s.grid.dim();

  auto ref_matrix = [&]() {
    return e.reference_matrix.empty() ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, d))
                                      : to_matrix(e.reference_matrix, n, d, "reference_matrix");
  };
  const Eigen::MatrixXd m0 = e.matrix.empty() ? ref_matrix() : to_matrix(e.matrix, n, d, "matrix");
  const Eigen::VectorXd b0 =
      e.matrix.empty() && e.offset.empty() ? to_vector(e.reference_offset, n, "reference_offset")
                                           : to_vector(e.offset, n, "offset");
  const Eigen::MatrixXd m1 = e.end_matrix.empty() ? m0 : to_matrix(e.end_matrix, n, d, "end_matrix");
  const Eigen::VectorXd b1 = e.end_offset.empty() ? b0 : to_vector(e.end_offset, n, "end_offset");

  s.model.elastic = en.elastic;
  s.model.kinetic = en.kinetic;
  s.model.kin = en.kin;
  s.model.potential = Potential::from_params(en.potential, en.potential_params);
  s.model.measure = en.measure;

  s.faces.assign(static_cast<size_t>(2 * d), FaceCondition{});
  if (cfg.boundary) {
    for (const auto& [name, fc] : *cfg.boundary) {
      const int f = face_index(static_cast<int>(d), name);
      if (f < 0) throw ParseError("unknown face '" + name + "'", 0, "boundary");
      if (fc.kind == BoundaryKind::Sliding && static_cast<Eigen::Index>(fc.point.size()) != n)
        throw ParseError("sliding point of '" + name + "' must have ambient dim entries", 0, "boundary");
      s.faces[static_cast<size_t>(f)] = fc;
    }
  }
  if (cfg.solver) {
    s.solver.tol = cfg.solver->tol;
    s.solver.max_iters = cfg.solver->max_iters;
    s.solver.memory = cfg.solver->memory;
  }
  s.duration = e.duration;
  s.time_metric = e.time_metric;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  auto perturb = [&](EmbeddingField& f) {
    if (e.perturbation == 0.0) return;
    for (std::size_t i = 0; i < s.grid.node_count(); ++i) {
      if (s.grid.on_boundary(i)) continue;
      for (auto& x : f.at(i)) x += e.perturbation * uni(rng);
    }
  };

  if (mode == Mode::Static) {
    s.initial = EmbeddingField::affine(s.grid, m0, b0);
    perturb(s.initial);
  } else {
    if (e.slices < 2) throw ParseError("evolution needs slices >= 2", 0, "embedding");
    for (int t = 0; t < e.slices; ++t) {
      const double tau = static_cast<double>(t) / (e.slices - 1);
      EmbeddingField f = EmbeddingField::affine(s.grid, (1 - tau) * m0 + tau * m1, (1 - tau) * b0 + tau * b1);
      if (t > 0 && t + 1 < e.slices) perturb(f);
      s.history.push_back(std::move(f));
    }
    s.initial = s.history.front();
  }
  return s;
}

AffineDeformation build_deformation(const ScenarioConfig& cfg) {
  const auto& c = require(cfg.classify, "classify");
  const Vec2 t(c.translation[0], c.translation[1]);
  if (c.domain == "line") return AffineDeformation::bent_line(c.breakpoints, c.angles, t);
  Affine2 map;
  map.a = to_matrix(c.matrix, 2, 2, "matrix");
  const Vec2 center(c.center[0], c.center[1]);
  map.b = center - map.a * center + t;
  Region domain;
  if (c.domain == "polygon") {
    std::vector<Vec2> v;
    for (const auto& p : c.vertices) v.emplace_back(p[0], p[1]);
    domain = Region::polygon(v);
  } else {
    domain = Region::interval(c.interval[0], c.interval[1]);
  }
  return AffineDeformation(domain, map);
}

VectorField build_killing_field(const ScenarioConfig& cfg) {
  const auto& k = require(cfg.killing, "killing");
  const Eigen::Index n = static_cast<Eigen::Index>(k.matrix.size());
  if (cfg.ambient && cfg.ambient->dim != n) throw ParseError("killing field dimension differs from ambient dim");
  return VectorField::linear(to_matrix(k.matrix, n, n, "matrix"), to_vector(k.offset, n, "offset"));
}

std::vector<std::vector<double>> killing_points(const ScenarioConfig& cfg) {
  const auto& k = require(cfg.killing, "killing");
  const size_t n = k.box_min.size();
  std::vector<std::vector<double>> pts;
  std::vector<int> idx(n, 0);
  while (true) {
    std::vector<double> p(n);
    for (size_t a = 0; a < n; ++a) {
      const double f = k.samples == 1 ? 0.5 : static_cast<double>(idx[a]) / (k.samples - 1);
      p[a] = k.box_min[a] + f * (k.box_max[a] - k.box_min[a]);
    }
    pts.push_back(std::move(p));
    size_t a = 0;
    while (a < n && ++idx[a] == k.samples) idx[a++] = 0;
    if (a == n) break;
  }
  return pts;
}

VectorField random_polynomial_field(int n, int degree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Monomial> terms;
  std::vector<int> powers(static_cast<size_t>(n), 0);
  // Enumerate all exponent vectors with total degree <= degree.
  std::vector<std::vector<int>> exps;
  std::function<void(int, int)> rec = [&](int var, int left) {
    if (var == n) {
      exps.push_back(powers);
      return;
    }
    for (int p = 0; p <= left; ++p) {
      powers[static_cast<size_t>(var)] = p;
      rec(var + 1, left - p);
    }
    powers[static_cast<size_t>(var)] = 0;
  };
  rec(0, degree);
  for (int c = 0; c < n; ++c)
    for (const auto& e : exps) terms.push_back({c, uni(rng), e});
  return polynomial_field(n, std::move(terms));
}

}  // namespace deform
