#pragma once
// Discrete action, its exact gradient (Euler-Lagrange residual), and the
// static and space-time solvers.

#include <string>
#include <vector>

#include "deform/energy.hpp"
#include "deform/errors.hpp"
#include "deform/geometry.hpp"
#include "deform/optimizer.hpp"

namespace deform {

enum class BoundaryKind { Pinned, Free, Sliding };

struct FaceCondition {
  BoundaryKind kind = BoundaryKind::Pinned;
  /// Sliding: the node moves on point + span(tangents).
  std::vector<double> point;
  std::vector<std::vector<double>> tangents;
  bool operator==(const FaceCondition&) const = default;
};

enum class Mode { Static, Evolution };

/// Face 2a is the low end of axis a, face 2a+1 the high end.
std::string face_name(int body_dim, int face);
int face_index(int body_dim, const std::string& name);

struct Scenario {
  Mode mode = Mode::Static;
  BodyGrid grid;
  AmbientMetric ambient;
  EmbeddingField reference;
  /// Static: initial guess, also supplying pinned boundary values.
  EmbeddingField initial;
  /// Evolution: initial history; first and last slices stay fixed.
  std::vector<EmbeddingField> history;
  EnergyModel model;
  std::vector<FaceCondition> faces;
  double duration = 1.0;
  double time_metric = 1.0;
  OptimizeOptions solver;
};

struct ActionGradient {
  double action = 0.0;
  /// Per slice, node-major d action / d x.
  std::vector<std::vector<double>> grad;
  /// Per slice and node: quadrature weight times volume density.
  std::vector<std::vector<double>> weight;
};

/// Static scenarios take one slice; evolution takes the whole history.
ActionGradient action_gradient(const Scenario& s, const std::vector<EmbeddingField>& slices);
double action(const Scenario& s, const EmbeddingField& candidate);
double action(const Scenario& s, const std::vector<EmbeddingField>& history);

struct FaceReport {
  std::string face;
  BoundaryKind kind = BoundaryKind::Pinned;
  /// Pinned: 0. Free: max |X1|. Sliding: max tangential pairing.
  double norm = 0.0;
  /// Sliding only: max normal component (generally nonzero).
  double normal = 0.0;
};

struct ELResidual {
  /// r = -grad / (weight * varpi), per slice, node-major.
  std::vector<std::vector<double>> residual;
  double interior_max = 0.0;
  double interior_l2 = 0.0;
  /// Max over the residual components the solver controls.
  double dof_max = 0.0;
  std::vector<FaceReport> faces;
  /// Evolution: max residual on the fixed end slices (reported only).
  double end_slice_max = 0.0;
};

ELResidual el_residual(const Scenario& s, const EmbeddingField& candidate);
ELResidual el_residual(const Scenario& s, const std::vector<EmbeddingField>& history);
std::vector<FaceReport> boundary_report(const Scenario& s, const EmbeddingField& candidate);

/// Static: residual of the variation with respect to the reference
/// embedding (the background varies, the candidate is held), node-major,
/// normalized like the ordinary residual.
std::vector<double> reference_residual(const Scenario& s, const EmbeddingField& candidate);

struct StaticResult {
  EmbeddingField embedding;
  ELResidual residual;
  std::vector<TraceEntry> trace;
  double action = 0.0;
};

struct EvolutionResult {
  std::vector<EmbeddingField> history;
  ELResidual residual;
  std::vector<TraceEntry> trace;
  double action = 0.0;
};

/// Throws ConvergenceError (with the trace) when tol is not reached.
StaticResult solve_static(const Scenario& s);
EvolutionResult solve_evolution(const Scenario& s);

/// Pinned/free/sliding role of each node, with per-node sliding frames.
class DofMap {
 public:
  DofMap(const BodyGrid& grid, int n, const std::vector<FaceCondition>& faces);
  BoundaryKind kind(std::size_t node) const { return kind_[node]; }
  /// Face index that decided the node's role, or -1 for interior nodes.
  int face(std::size_t node) const { return face_[node]; }
  std::size_t size() const { return size_; }
  /// Moves sliding nodes onto their constraint and extracts coordinates.
  std::vector<double> gather(std::vector<double>& x) const;
  void scatter(std::span<const double> q, std::vector<double>& x) const;
  /// Reduced gradient; `scale` (per node, may be empty) divides each entry.
  void project(std::span<const double> g, std::span<double> out, std::span<const double> scale = {}) const;
  const Eigen::MatrixXd& frame(std::size_t node) const { return frames_[static_cast<std::size_t>(face_[node])]; }
  const Eigen::VectorXd& point(std::size_t node) const { return points_[static_cast<std::size_t>(face_[node])]; }

 private:
  int n_;
  std::vector<BoundaryKind> kind_;
  std::vector<int> face_;
  std::vector<Eigen::MatrixXd> frames_;
  std::vector<Eigen::VectorXd> points_;
  std::size_t size_ = 0;
};

}  // namespace deform
