#pragma once
// Energy densities polynomial in the strain invariants, stresses, momenta and
// force densities.

#include <array>
#include <span>
#include <vector>

#include "deform/forms.hpp"
#include "deform/geometry.hpp"

namespace deform {

/// Generalized Lame coefficients up to cubic order:
/// F = mu0 + mu1_1 D1 + mu2_01 D2 + mu2_20 D1^2 + mu3_001 D3 + mu3_110 D1 D2 + mu3_300 D1^3.
struct LameTable {
  int order = 0;
  double mu0 = 0.0;
  double mu1_1 = 0.0;
  double mu2_01 = 0.0, mu2_20 = 0.0;
  double mu3_001 = 0.0, mu3_110 = 0.0, mu3_300 = 0.0;

  /// Throws Error when order is outside 0..3 or a coefficient above the
  /// order is nonzero.
  void validate() const;
  /// Only coefficients up to `order` are read.
  double density(double d1, double d2, double d3) const;
  /// dF/dD1, dF/dD2, dF/dD3.
  std::array<double, 3> partials(double d1, double d2, double d3) const;
  bool operator==(const LameTable&) const = default;
};

class Potential {
 public:
  enum class Kind { None, Linear, Quadratic };

  Potential() = default;
  /// U = g . x
  static Potential linear(std::vector<double> g);
  /// U = c/2 |x - center|^2; params = {c, center...}
  static Potential quadratic(double c, std::vector<double> center);
  static Potential from_params(Kind kind, std::vector<double> params);

  Kind kind() const { return kind_; }
  const std::vector<double>& params() const { return params_; }
  bool closed() const { return kind_ == Kind::None; }
  double value(std::span<const double> x) const;
  void gradient(std::span<const double> x, std::span<double> out) const;
  bool operator==(const Potential&) const = default;

 private:
  Kind kind_ = Kind::None;
  std::vector<double> params_;
};

/// Which volume density weighs the energy: the current pulled-back metric or
/// the reference one.
enum class MeasureKind { Current, Reference };

struct EnergyModel {
  LameTable elastic;
  bool kinetic = false;
  LameTable kin;
  Potential potential;
  MeasureKind measure = MeasureKind::Current;
  /// Optional per-node elastic coefficients (inhomogeneous bodies).
  std::vector<LameTable> node_elastic;

  const LameTable& elastic_at(std::size_t node) const {
    return node_elastic.empty() ? elastic : node_elastic[node];
  }
  bool closed() const { return potential.closed(); }
};

/// Invariant count needed by a table (order, at least 1).
int invariant_count(const LameTable& t);

double energy_density(const LameTable& t, std::span<const double> invs);
/// Elastic F0 per node from precomputed invariants (invs[i][node]).
std::vector<double> energy_density(const EnergyModel& m, const std::vector<std::vector<double>>& invs);

/// dF/d(arg) for F evaluated on tr((arg G)^i), G = flat inverse of Theta0.
Tensor stress_at(const LameTable& t, const Tensor& arg, const Tensor& theta0_inverse);
TensorField stress(const EnergyModel& m, const DeformationMeasure& dm);
/// Kinetic table applied to delta_dot; zero when the kinetic flag is off or
/// no time derivative is present.
TensorField momentum(const EnergyModel& m, const DeformationMeasure& dm);

/// T w = pi <w, delta_dot> - (F0 + U) w
struct Affinnor {
  Tensor pi;
  Tensor delta_dot;
  double f_plus_u = 0.0;
  Tensor apply(const Tensor& w) const;
};

std::vector<Affinnor> affinnor(const EnergyModel& m, const DeformationMeasure& dm, std::span<const double> f0,
                               std::span<const double> u);

/// d ln varpi / d Theta_B = (1/l) chi^-1(M^-T), M = chi(Theta_B).
Tensor log_volume_gradient(const Tensor& theta_b);

/// Sigma = sigma - pi_dot - T (ln varpi)_{|Delta}. `u` holds U at each node.
/// With reference measure varpi does not depend on Delta and the last term
/// vanishes. pi_dot may be empty (static case).
TensorField generalized_stress(const EnergyModel& m, const DeformationMeasure& dm, std::span<const double> u,
                               const TensorField& pi_dot = {});

struct Forces {
  std::vector<double> f_theta;  // node-major n-vectors
  std::vector<double> f_ext;
};

/// f_Theta = -<Sigma, L Theta_{|x}>, f_ext = -U_{|x}.
Forces forces(const AmbientMetric& theta, const EmbeddingField& e, const TensorField& sigma,
              const EnergyModel& m);

}  // namespace deform
