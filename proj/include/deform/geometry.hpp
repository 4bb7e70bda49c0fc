#pragma once
// Discretized bodies, embeddings, pullbacks and deformation measures.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "deform/forms.hpp"

namespace deform {

/// Uniform tensor-product grid. Axis 0 varies fastest in node numbering.
class BodyGrid {
 public:
  BodyGrid() = default;
  BodyGrid(std::vector<int> counts, std::vector<double> spacing, std::vector<double> origin = {});

  int dim() const { return static_cast<int>(counts_.size()); }
  const std::vector<int>& counts() const { return counts_; }
  const std::vector<double>& spacing() const { return spacing_; }
  const std::vector<double>& origin() const { return origin_; }
  std::size_t node_count() const { return nodes_; }
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

  void node_index(std::size_t node, std::span<int> idx) const;
  std::size_t node(std::span<const int> idx) const;
  int axis_index(std::size_t node, int axis) const;
  std::vector<double> coords(std::size_t node) const;
  bool on_boundary(std::size_t node) const;
  std::vector<bool> boundary_mask() const;
  /// Summation-by-parts weight of a node (product of per-axis weights).
  double weight(std::size_t node) const;
  /// Per-axis weights: h/2,h/2 (2 nodes), h/2,h,h/2 (3 nodes), otherwise
  /// h/4, 5h/4, h, ..., h, 5h/4, h/4. With these weights the weighted sum of
  /// the boundary-closed stencil is exact: sum w_i (Du)_i = u_last - u_first.
  static std::vector<double> axis_weights(int count, double h);

  bool operator==(const BodyGrid& o) const {
    return counts_ == o.counts_ && spacing_ == o.spacing_ && origin_ == o.origin_;
  }

 private:
  std::vector<int> counts_;
  std::vector<double> spacing_;
  std::vector<double> origin_;
  std::vector<std::size_t> strides_;
  std::vector<std::vector<double>> weights_;
  std::size_t nodes_ = 0;
};

/// Grid-sampled map into R^n; values are node-major n-vectors.
class EmbeddingField {
 public:
  EmbeddingField() = default;
  EmbeddingField(BodyGrid grid, int n);
  EmbeddingField(BodyGrid grid, int n, std::vector<double> values);
  /// x(node) = f(body coordinates).
  static EmbeddingField sample(const BodyGrid& grid, int n,
                               const std::function<void(std::span<const double>, std::span<double>)>& f);
  /// x = A xi + b (A is n x d).
  static EmbeddingField affine(const BodyGrid& grid, const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

  const BodyGrid& grid() const { return grid_; }
  int ambient_dim() const { return n_; }
  std::span<const double> at(std::size_t node) const {
    return {values_.data() + node * static_cast<std::size_t>(n_), static_cast<std::size_t>(n_)};
  }
  std::span<double> at(std::size_t node) {
    return {values_.data() + node * static_cast<std::size_t>(n_), static_cast<std::size_t>(n_)};
  }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

 private:
  BodyGrid grid_;
  int n_ = 0;
  std::vector<double> values_;
};

/// Per-node n x d differential. Stored per axis: data[(axis*N + node)*n + A].
class DifferentialField {
 public:
  DifferentialField() = default;
  DifferentialField(std::size_t nodes, int n, int d)
      : nodes_(nodes), n_(n), d_(d), data_(nodes * static_cast<std::size_t>(n * d), 0.0) {}
  std::size_t nodes() const { return nodes_; }
  int n() const { return n_; }
  int d() const { return d_; }
  double operator()(std::size_t node, int a, int alpha) const {
    return data_[(static_cast<std::size_t>(alpha) * nodes_ + node) * n_ + a];
  }
  double& operator()(std::size_t node, int a, int alpha) {
    return data_[(static_cast<std::size_t>(alpha) * nodes_ + node) * n_ + a];
  }
  Eigen::MatrixXd matrix(std::size_t node) const;
  void set(std::size_t node, const Eigen::MatrixXd& m);
  std::span<double> axis(int alpha) {
    return {data_.data() + static_cast<std::size_t>(alpha) * nodes_ * n_, nodes_ * n_};
  }
  std::span<const double> axis(int alpha) const {
    return {data_.data() + static_cast<std::size_t>(alpha) * nodes_ * n_, nodes_ * n_};
  }

 private:
  std::size_t nodes_ = 0;
  int n_ = 0, d_ = 0;
  std::vector<double> data_;
};

/// Finite-difference differential of node-major n-vector data on a grid.
/// Central interior, second-order one-sided at the boundary (first order when
/// an axis has only two nodes).
DifferentialField differential(const BodyGrid& grid, int n, std::span<const double> values);
DifferentialField differential(const EmbeddingField& e);
/// out += D^T flux: adjoint of `differential`, flux laid out like its output.
void differential_adjoint(const BodyGrid& grid, const DifferentialField& flux, std::span<double> out);

/// Differential along a single uniform axis of a sequence (time stencil):
/// coefficient of sample j in the derivative at sample i.
double stencil_coefficient(int count, double h, int i, int j);

/// Tensor whose slots may range over different dimensions.
struct MixedTensor {
  std::vector<int> dims;
  std::vector<double> c;
  static MixedTensor from(const Tensor& t);
  /// new[..b..] = sum_a old[..a..] m(a, b) on slot s.
  MixedTensor contract_slot(int s, const Eigen::MatrixXd& m) const;
};

class AmbientMetric {
 public:
  using Eval = std::function<Tensor(std::span<const double>)>;
  /// Returns the n tensors d_B Theta at x.
  using Gradient = std::function<std::vector<Tensor>(std::span<const double>)>;

  AmbientMetric() = default;
  AmbientMetric(int n, int degree, Eval eval, Gradient grad = {}, double scale = 1.0);
  static AmbientMetric constant(const Tensor& t);
  static AmbientMetric euclidean(int n);

  int n() const { return n_; }
  int degree() const { return degree_; }
  bool is_constant() const { return constant_; }
  bool has_analytic_gradient() const { return static_cast<bool>(grad_); }
  Tensor operator()(std::span<const double> x) const;
  /// Analytic gradient when supplied, otherwise central differences with
  /// step 1e-5 * coordinate scale.
  std::vector<Tensor> gradient(std::span<const double> x) const;
  std::vector<Tensor> fd_gradient(std::span<const double> x) const;

 private:
  int n_ = 0;
  int degree_ = 0;
  Eval eval_;
  Gradient grad_;
  double scale_ = 1.0;
  bool constant_ = false;
};

using TensorField = std::vector<Tensor>;

/// sum Theta_{A1..Ap} dx^{A1}_{a1} ... dx^{Ap}_{ap}; dx is n x d.
Tensor pullback_tensor(const Tensor& theta, const Eigen::MatrixXd& dx);
/// Throws EmbeddingError when dx lacks full column rank.
void check_embedding_rank(const Eigen::MatrixXd& dx, std::size_t node);

TensorField pullback(const EmbeddingField& e, const AmbientMetric& theta);

struct DeformationMeasure {
  TensorField theta_b;
  TensorField theta0_b;
  TensorField delta;
  std::optional<TensorField> delta_dot;
};

DeformationMeasure deformation_measure(const EmbeddingField& current, const EmbeddingField& reference,
                                       const AmbientMetric& theta);

/// Delta^(i) = tr((Delta Theta0^-1)^i) for i = 1..count; result[i-1][node].
std::vector<std::vector<double>> invariants(const DeformationMeasure& dm, int count);
/// Same, for a single node.
std::vector<double> invariants_at(const Tensor& delta, const Tensor& theta0_inverse, int count);

/// d/dt of the pulled-back metric for a uniformly sampled history.
std::vector<TensorField> time_derivative(const std::vector<EmbeddingField>& history, double dt,
                                         const AmbientMetric& theta);

}  // namespace deform
