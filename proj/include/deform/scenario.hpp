#pragma once
// Scenario files: a strict INI-like format with typed sections, canonical
// serialization, and builders for the solver, Killing, classification and
// symplectic inputs.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deform/dynamics.hpp"
#include "deform/energy.hpp"
#include "deform/motions.hpp"
#include "deform/regions.hpp"

namespace deform {

/// Rows separated by ';' in the file.
using Rows = std::vector<std::vector<double>>;

struct BodySection {
  std::vector<int> counts;
  std::vector<double> spacing;
  std::vector<double> origin;
  bool operator==(const BodySection&) const = default;
};

struct AmbientSection {
  int dim = 0;
  /// "euclidean" or "constant".
  std::string metric = "euclidean";
  int degree = 2;
  std::vector<double> components;
  bool operator==(const AmbientSection&) const = default;
};

struct EmbeddingSection {
  Rows reference_matrix;
  std::vector<double> reference_offset;
  /// Initial guess / boundary data: x = matrix * X + offset.
  Rows matrix;
  std::vector<double> offset;
  /// Evolution: final slice (defaults to the initial map when empty).
  Rows end_matrix;
  std::vector<double> end_offset;
  /// Amplitude of the seeded interior perturbation of the initial guess.
  double perturbation = 0.0;
  int slices = 1;
  double duration = 1.0;
  double time_metric = 1.0;
  bool operator==(const EmbeddingSection&) const = default;
};

struct EnergySection {
  LameTable elastic;
  bool kinetic = false;
  LameTable kin;
  Potential::Kind potential = Potential::Kind::None;
  std::vector<double> potential_params;
  MeasureKind measure = MeasureKind::Current;
  bool operator==(const EnergySection&) const = default;
};

struct SolverSection {
  double tol = 1e-8;
  int max_iters = 20000;
  int memory = 8;
  bool operator==(const SolverSection&) const = default;
};

struct ClassifySection {
  /// "polygon", "interval" or "line".
  std::string domain = "polygon";
  Rows vertices;
  std::vector<double> interval;
  Rows matrix = {{1.0, 0.0}, {0.0, 1.0}};
  std::vector<double> translation = {0.0, 0.0};
  std::vector<double> center = {0.0, 0.0};
  std::vector<double> breakpoints;
  std::vector<double> angles;
  int depth = 12;
  bool operator==(const ClassifySection&) const = default;
};

struct KillingSection {
  /// v = matrix * x + offset.
  Rows matrix;
  std::vector<double> offset;
  bool conformal = false;
  std::vector<double> box_min;
  std::vector<double> box_max;
  int samples = 5;
  double tol = 1e-10;
  /// Euler flow of the reference body along v (0 steps: skipped).
  double flow_dt = 1e-4;
  int flow_steps = 0;
  double flow_tol = 1e-6;
  bool operator==(const KillingSection&) const = default;
};

struct SymplecticSection {
  int m = 1;
  int degree = 3;
  int fields = 1;
  int points = 10;
  double box = 1.0;
  double h = 1e-4;
  bool operator==(const SymplecticSection&) const = default;
};

struct ScenarioConfig {
  std::optional<BodySection> body;
  std::optional<AmbientSection> ambient;
  std::optional<EmbeddingSection> embedding;
  std::optional<EnergySection> energy;
  /// Face name to condition; faces not listed are pinned.
  std::optional<std::map<std::string, FaceCondition>> boundary;
  std::optional<SolverSection> solver;
  std::optional<ClassifySection> classify;
  std::optional<KillingSection> killing;
  std::optional<SymplecticSection> symplectic;
  bool operator==(const ScenarioConfig&) const = default;
};

/// Throws ParseError with line and section on any malformed input,
/// unknown section or unknown key.
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);
/// Canonical text; numbers use %.17g so parsing it back is lossless.
std::string serialize_scenario(const ScenarioConfig& cfg);

AmbientMetric build_ambient(const ScenarioConfig& cfg);
EmbeddingField build_reference(const ScenarioConfig& cfg);
/// Static and evolution solver input. The seed drives the perturbation.
Scenario build_dynamics(const ScenarioConfig& cfg, Mode mode, std::uint64_t seed);
AffineDeformation build_deformation(const ScenarioConfig& cfg);
VectorField build_killing_field(const ScenarioConfig& cfg);
std::vector<std::vector<double>> killing_points(const ScenarioConfig& cfg);
/// Random polynomial field on R^{2m} with coefficients in [-1, 1].
VectorField random_polynomial_field(int n, int degree, std::uint64_t seed);

}  // namespace deform
