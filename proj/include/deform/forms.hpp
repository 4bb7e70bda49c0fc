#pragma once
// Flattened calculus for covariant tensors of even degree 2k.
//
// A degree-2k tensor over dimension d is viewed as a d^k x d^k matrix by
// encoding the first k indices as the row and the last k as the column. The
// encoding is d-adic with the first index least significant.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace deform {

/// Dense covariant tensor, components stored row-major (last index fastest).
class Tensor {
 public:
  Tensor() = default;
  Tensor(int degree, int dim);
  Tensor(int degree, int dim, std::vector<double> components);

  /// Unit of flat multiplication: E_{a1..ak b1..bk} = prod delta_{ai bi}.
  static Tensor unit(int k, int dim);
  /// Degree-2 tensor with the entries of a square matrix.
  static Tensor from_matrix(const Eigen::MatrixXd& m);
  /// Degree-2k tensor power j^{xk}: J_{a1..ak b1..bk} = prod j(ai, bi).
  static Tensor power(const Eigen::MatrixXd& j, int k);

  int degree() const { return degree_; }
  int dim() const { return dim_; }
  std::size_t size() const { return c_.size(); }

  double& operator[](std::size_t i) { return c_[i]; }
  double operator[](std::size_t i) const { return c_[i]; }
  double at(std::span<const int> index) const { return c_[offset(index)]; }
  double& at(std::span<const int> index) { return c_[offset(index)]; }
  std::size_t offset(std::span<const int> index) const;

  const std::vector<double>& components() const { return c_; }
  std::vector<double>& components() { return c_; }

  Tensor& operator+=(const Tensor& o);
  Tensor& operator-=(const Tensor& o);
  Tensor& operator*=(double s);
  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }
  friend Tensor operator*(double s, Tensor a) { return a *= s; }
  bool operator==(const Tensor& o) const = default;

  double max_abs() const;

 private:
  void check_same_shape(const Tensor& o) const;
  int degree_ = 0;
  int dim_ = 1;
  std::vector<double> c_{0.0};
};

/// Full pairing sum_I a_I b_I of equally shaped tensors.
double pairing(const Tensor& a, const Tensor& b);

long ipow(long base, int exp);

/// d-adic multi-index encoding, first index least significant.
struct FlatOrdering {
  int k = 1;
  int d = 1;
  std::size_t size() const { return static_cast<std::size_t>(ipow(d, k)); }
  std::size_t encode(std::span<const int> alpha) const;
  void decode(std::size_t a, std::span<int> alpha) const;
};

struct FlatView {
  FlatOrdering ordering;
  Eigen::MatrixXd matrix;
};

FlatView flatten(const Tensor& t);
Tensor unflatten(const FlatView& v);
Tensor unflatten(const Eigen::MatrixXd& m, int k, int dim);

Tensor flat_multiply(const Tensor& a, const Tensor& b);
Tensor flat_inverse(const Tensor& t);
/// Swaps the first and last argument groups (transpose of the flat matrix).
Tensor flat_transpose(const Tensor& t);
double flat_trace(const Tensor& t);
double overline_det(const Tensor& t);

/// Smallest singular value at most 1e-12 times the largest (or all zero).
bool is_singular(const Eigen::MatrixXd& m);
inline constexpr double kSingularRatio = 1e-12;

struct Admissibility {
  int k = 1;
  int d = 1;
  std::optional<long> m;
  long l = 0;
  long P = 0;
  bool admissible() const { return m.has_value(); }
};

Admissibility admissibility(int k, int d);
/// All admissible (k, d) with 1 <= k <= k_max, 1 <= d <= d_max and m in
/// [m_min, m_max], ordered by k then d.
std::vector<Admissibility> admissible_table(long m_min, long m_max, int k_max, int d_max);

double volume_density(const Tensor& t, const Admissibility& adm);

struct DensityTransformReport {
  double density_before = 0.0;
  double density_after = 0.0;
  double density_expected = 0.0;
  double density_rel_error = 0.0;
  double det_power = 0.0;           // det chi(j^{xk})
  double det_power_expected = 0.0;  // (det j)^{l/2}
  double det_power_rel_error = 0.0;
};

/// Transforms t by j (Theta' = chi(J^-1)^T chi(Theta) chi(J^-1), J = j^{xk})
/// and compares volume densities and the tensor-power determinant.
DensityTransformReport density_transform_check(const Tensor& t, const Eigen::MatrixXd& j);
Tensor transform(const Tensor& t, const Eigen::MatrixXd& j);

struct Nondegeneracy {
  bool nondegenerate = false;
  int rank = 0;
};

/// Restriction of a degree-2k ambient form to the image of dx (n x d).
Nondegeneracy induced_nondegeneracy(const Tensor& theta_ambient, const Eigen::MatrixXd& dx, int k);
/// chi((dx)^{xk}): n^k x d^k.
Eigen::MatrixXd flat_power(const Eigen::MatrixXd& dx, int k);

}  // namespace deform
