#pragma once
// Lie derivatives of ambient forms, Killing checks, motion checks for
// histories, and the symplectic gauge demonstration.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

#include "deform/forms.hpp"
#include "deform/geometry.hpp"

namespace deform {

class VectorField {
 public:
  using Eval = std::function<void(std::span<const double>, std::span<double>)>;
  /// Returns J with J(A, B) = d v^A / d x^B.
  using Jacobian = std::function<Eigen::MatrixXd(std::span<const double>)>;

  VectorField() = default;
  VectorField(int n, Eval eval, Jacobian jac = {}, double scale = 1.0);
  /// v = M x + c
  static VectorField linear(const Eigen::MatrixXd& m, const Eigen::VectorXd& c);

  int n() const { return n_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(jac_); }
  Eigen::VectorXd operator()(std::span<const double> x) const;
  Eigen::MatrixXd jacobian(std::span<const double> x) const;
  /// Central differences, step 1e-5 * scale.
  Eigen::MatrixXd fd_jacobian(std::span<const double> x) const;
  VectorField without_jacobian() const { return VectorField(n_, eval_, {}, scale_); }

 private:
  int n_ = 0;
  Eval eval_;
  Jacobian jac_;
  double scale_ = 1.0;
};

struct Monomial {
  int component = 0;
  double coef = 0.0;
  std::vector<int> powers;
};

/// v^A = sum over terms with component A of coef * prod x_B^powers[B],
/// with the analytic Jacobian.
VectorField polynomial_field(int n, std::vector<Monomial> terms);

/// (L_v Theta)_{A1..Ap} = v^B d_B Theta_{A..} + sum_j d_{Aj} v^B Theta_{..B..}
Tensor lie_derivative_at(const AmbientMetric& theta, const VectorField& v, std::span<const double> x);
std::vector<Tensor> lie_derivative(const AmbientMetric& theta, const VectorField& v,
                                   const std::vector<std::vector<double>>& points);

struct KillingReport {
  std::vector<Tensor> residual;
  std::vector<double> point_norm;
  double max_norm = 0.0;
  double mean_norm = 0.0;
  bool conformal = false;
  /// Conformal mode: fitted factor per point (NaN where flagged).
  std::vector<double> phi;
  std::vector<bool> flagged;
  double phi_min = 0.0, phi_max = 0.0, phi_mean = 0.0;
  bool motion = false;
};

KillingReport killing_residual(const AmbientMetric& theta, const VectorField& v,
                               const std::vector<std::vector<double>>& points, bool conformal, double tol = 1e-10);

struct HistoryMotionReport {
  std::vector<double> slice_norm;  // ||Theta_B^t - Theta_B^0||_inf
  double max_norm = 0.0;
  bool motion = false;
};

HistoryMotionReport history_motion_check(const std::vector<EmbeddingField>& history, const AmbientMetric& theta,
                                         double tol = 1e-12);

/// Explicit Euler flow of every node along v.
std::vector<EmbeddingField> flow_history(const EmbeddingField& start, const VectorField& v, double dt, int steps);

/// Canonical omega = sum dq_i ^ dp_i on R^{2m}, coordinates (q_1..q_m, p_1..p_m).
Tensor canonical_symplectic(int m);
/// i_A omega: (i_A omega)_B = A^C omega_{CB}.
Eigen::VectorXd interior_product(const Tensor& omega, const Eigen::VectorXd& a);
/// Field X with i_X omega = dh.
VectorField hamiltonian_field(const Tensor& omega, const std::function<Eigen::VectorXd(std::span<const double>)>& dh,
                              const std::function<Eigen::MatrixXd(std::span<const double>)>& hess = {});

struct SymplecticReport {
  std::vector<Tensor> lie;       // L_A omega through the Jacobian of A
  std::vector<Tensor> d_interior;  // d(i_A omega) by central differences
  double max_discrepancy = 0.0;
  double antisymmetry = 0.0;
  double closedness = 0.0;       // max |dF| by central differences
};

SymplecticReport symplectic_demo(const VectorField& a, const Tensor& omega,
                                 const std::vector<std::vector<double>>& points, double h = 1e-5);

}  // namespace deform
