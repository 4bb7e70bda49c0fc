#include "deform/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deform/errors.hpp"
#include "deform/simd.hpp"

namespace deform {

BodyGrid::BodyGrid(std::vector<int> counts, std::vector<double> spacing, std::vector<double> origin)
    : counts_(std::move(counts)), spacing_(std::move(spacing)), origin_(std::move(origin)) {
  if (counts_.empty()) throw ShapeError("grid needs at least one axis");
  if (spacing_.size() != counts_.size()) throw ShapeError("grid spacing/count length mismatch");
  if (origin_.empty()) origin_.assign(counts_.size(), 0.0);
  if (origin_.size() != counts_.size()) throw ShapeError("grid origin/count length mismatch");
  nodes_ = 1;
  for (std::size_t a = 0; a < counts_.size(); ++a) {
    if (counts_[a] < 2) throw ShapeError("grid needs at least 2 samples per axis");
    if (!(spacing_[a] > 0.0)) throw ShapeError("grid spacing must be positive");
    strides_.push_back(nodes_);
    nodes_ *= static_cast<std::size_t>(counts_[a]);
    weights_.push_back(axis_weights(counts_[a], spacing_[a]));
  }
}

std::vector<double> BodyGrid::axis_weights(int count, double h) {
  std::vector<double> w(static_cast<std::size_t>(count), h);
  if (count == 2) {
    w[0] = w[1] = 0.5 * h;
  } else if (count == 3) {
    w[0] = w[2] = 0.5 * h;
  } else {
    w[0] = w[static_cast<std::size_t>(count) - 1] = 0.25 * h;
    w[1] = w[static_cast<std::size_t>(count) - 2] = 1.25 * h;
  }
  return w;
}

void BodyGrid::node_index(std::size_t node, std::span<int> idx) const {
  for (std::size_t a = 0; a < counts_.size(); ++a) {
    idx[a] = static_cast<int>(node % static_cast<std::size_t>(counts_[a]));
    node /= static_cast<std::size_t>(counts_[a]);
  }
}

std::size_t BodyGrid::node(std::span<const int> idx) const {
  std::size_t n = 0;
  for (std::size_t a = 0; a < counts_.size(); ++a) n += strides_[a] * static_cast<std::size_t>(idx[a]);
  return n;
}

int BodyGrid::axis_index(std::size_t node, int axis) const {
  const auto a = static_cast<std::size_t>(axis);
  return static_cast<int>((node / strides_[a]) % static_cast<std::size_t>(counts_[a]));
}

std::vector<double> BodyGrid::coords(std::size_t node) const {
  std::vector<double> x(counts_.size());
  for (std::size_t a = 0; a < counts_.size(); ++a)
    x[a] = origin_[a] + spacing_[a] * axis_index(node, static_cast<int>(a));
  return x;
}

bool BodyGrid::on_boundary(std::size_t node) const {
  for (int a = 0; a < dim(); ++a) {
    const int i = axis_index(node, a);
    if (i == 0 || i == counts_[static_cast<std::size_t>(a)] - 1) return true;
  }
  return false;
}

std::vector<bool> BodyGrid::boundary_mask() const {
  std::vector<bool> m(nodes_);
  for (std::size_t i = 0; i < nodes_; ++i) m[i] = on_boundary(i);
  return m;
}

double BodyGrid::weight(std::size_t node) const {
  double w = 1.0;
  for (int a = 0; a < dim(); ++a)
    w *= weights_[static_cast<std::size_t>(a)][static_cast<std::size_t>(axis_index(node, a))];
  return w;
}

EmbeddingField::EmbeddingField(BodyGrid grid, int n) : grid_(std::move(grid)), n_(n) {
  if (n < grid_.dim()) throw ShapeError("ambient dimension must be at least the body dimension");
  values_.assign(grid_.node_count() * static_cast<std::size_t>(n), 0.0);
}

EmbeddingField::EmbeddingField(BodyGrid grid, int n, std::vector<double> values)
    : EmbeddingField(std::move(grid), n) {
  if (values.size() != values_.size()) throw ShapeError("embedding value count does not match grid");
  values_ = std::move(values);
}

EmbeddingField EmbeddingField::sample(const BodyGrid& grid, int n,
                                      const std::function<void(std::span<const double>, std::span<double>)>& f) {
  EmbeddingField e(grid, n);
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    const auto xi = grid.coords(i);
    f(xi, e.at(i));
  }
  return e;
}

EmbeddingField EmbeddingField::affine(const BodyGrid& grid, const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  if (a.cols() != grid.dim() || a.rows() != b.size()) throw ShapeError("affine embedding shape mismatch");
  return sample(grid, static_cast<int>(a.rows()), [&](std::span<const double> xi, std::span<double> x) {
    Eigen::Map<const Eigen::VectorXd> v(xi.data(), static_cast<Eigen::Index>(xi.size()));
    Eigen::VectorXd y = a * v + b;
    for (Eigen::Index i = 0; i < y.size(); ++i) x[static_cast<std::size_t>(i)] = y(i);
  });
}

Eigen::MatrixXd DifferentialField::matrix(std::size_t node) const {
  Eigen::MatrixXd m(n_, d_);
  for (int al = 0; al < d_; ++al)
    for (int a = 0; a < n_; ++a) m(a, al) = (*this)(node, a, al);
  return m;
}

void DifferentialField::set(std::size_t node, const Eigen::MatrixXd& m) {
  for (int al = 0; al < d_; ++al)
    for (int a = 0; a < n_; ++a) (*this)(node, a, al) = m(a, al);
}

double stencil_coefficient(int count, double h, int i, int j) {
  if (count == 2) return j == 0 ? -1.0 / h : (j == 1 ? 1.0 / h : 0.0);
  const double c = 0.5 / h;
  if (i == 0) return j == 0 ? -3.0 * c : j == 1 ? 4.0 * c : j == 2 ? -c : 0.0;
  if (i == count - 1) return j == i ? 3.0 * c : j == i - 1 ? -4.0 * c : j == i - 2 ? c : 0.0;
  return j == i + 1 ? c : j == i - 1 ? -c : 0.0;
}

namespace {

// Boundary rows of the stencil along one axis, for the node at position
// `pos` (0 or count-1) inside line base `base`.
template <class F>
void for_boundary_terms(int count, double h, int pos, F&& f) {
  const int lo = pos == 0 ? 0 : std::max(0, count - 3);
  const int hi = pos == 0 ? std::min(count, 3) : count;
  for (int j = lo; j < hi; ++j) {
    const double c = stencil_coefficient(count, h, pos, j);
    if (c != 0.0) f(j, c);
  }
}

}  // namespace

DifferentialField differential(const BodyGrid& grid, int n, std::span<const double> values) {
  const std::size_t N = grid.node_count();
  if (values.size() != N * static_cast<std::size_t>(n)) throw ShapeError("differential: value size mismatch");
  DifferentialField df(N, n, grid.dim());
  const auto nn = static_cast<std::size_t>(n);
  for (int a = 0; a < grid.dim(); ++a) {
    auto out = df.axis(a);
    const std::size_t s = grid.stride(a);
    const int c = grid.counts()[static_cast<std::size_t>(a)];
    const double h = grid.spacing()[static_cast<std::size_t>(a)];
    const std::size_t block = s * static_cast<std::size_t>(c);
    for (std::size_t b0 = 0; b0 < N; b0 += block) {
      if (c > 2)
        simd::central_difference(values, s * nn, 0.5 / h, (b0 + s) * nn,
                                 (b0 + (static_cast<std::size_t>(c) - 1) * s) * nn, out);
      for (int pos : {0, c - 1}) {
        for (std::size_t r = 0; r < s; ++r) {
          const std::size_t node = b0 + static_cast<std::size_t>(pos) * s + r;
          for (std::size_t A = 0; A < nn; ++A) {
            double acc = 0.0;
            for_boundary_terms(c, h, pos, [&](int j, double coef) {
              acc += coef * values[(b0 + static_cast<std::size_t>(j) * s + r) * nn + A];
            });
            out[node * nn + A] = acc;
          }
        }
      }
    }
  }
  return df;
}

DifferentialField differential(const EmbeddingField& e) {
  return differential(e.grid(), e.ambient_dim(), e.values());
}

void differential_adjoint(const BodyGrid& grid, const DifferentialField& flux, std::span<double> out) {
  const std::size_t N = grid.node_count();
  const auto nn = static_cast<std::size_t>(flux.n());
  if (out.size() != N * nn || flux.nodes() != N) throw ShapeError("differential_adjoint: size mismatch");
  for (int a = 0; a < grid.dim(); ++a) {
    const auto f = flux.axis(a);
    const std::size_t s = grid.stride(a);
    const int c = grid.counts()[static_cast<std::size_t>(a)];
    const double h = grid.spacing()[static_cast<std::size_t>(a)];
    const std::size_t block = s * static_cast<std::size_t>(c);
    for (std::size_t b0 = 0; b0 < N; b0 += block) {
      if (c > 2) {
        const std::size_t lo = (b0 + s) * nn;
        const std::size_t len = (static_cast<std::size_t>(c) - 2) * s * nn;
        const double k = 0.5 / h;
        simd::axpy(k, f.subspan(lo, len), out.subspan(lo + s * nn, len));
        simd::axpy(-k, f.subspan(lo, len), out.subspan(lo - s * nn, len));
      }
      for (int pos : {0, c - 1}) {
        for (std::size_t r = 0; r < s; ++r) {
          const std::size_t node = b0 + static_cast<std::size_t>(pos) * s + r;
          for_boundary_terms(c, h, pos, [&](int j, double coef) {
            const std::size_t target = b0 + static_cast<std::size_t>(j) * s + r;
            for (std::size_t A = 0; A < nn; ++A) out[target * nn + A] += coef * f[node * nn + A];
          });
        }
      }
    }
  }
}

MixedTensor MixedTensor::from(const Tensor& t) {
  return MixedTensor{std::vector<int>(static_cast<std::size_t>(t.degree()), t.dim()), t.components()};
}

MixedTensor MixedTensor::contract_slot(int s, const Eigen::MatrixXd& m) const {
  const auto su = static_cast<std::size_t>(s);
  if (m.rows() != dims[su]) throw ShapeError("contract_slot: matrix rows do not match slot");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < su; ++i) outer *= static_cast<std::size_t>(dims[i]);
  for (std::size_t i = su + 1; i < dims.size(); ++i) inner *= static_cast<std::size_t>(dims[i]);
  const auto din = static_cast<std::size_t>(dims[su]);
  const auto dout = static_cast<std::size_t>(m.cols());
  MixedTensor r{dims, std::vector<double>(outer * dout * inner, 0.0)};
  r.dims[su] = static_cast<int>(dout);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t b = 0; b < dout; ++b) {
      double* dst = r.c.data() + (o * dout + b) * inner;
      for (std::size_t a = 0; a < din; ++a) {
        const double coef = m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        if (coef == 0.0) continue;
        const double* src = c.data() + (o * din + a) * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += coef * src[i];
      }
    }
  return r;
}

AmbientMetric::AmbientMetric(int n, int degree, Eval eval, Gradient grad, double scale)
    : n_(n), degree_(degree), eval_(std::move(eval)), grad_(std::move(grad)), scale_(scale) {
  if (n < 1 || degree < 0) throw ShapeError("ambient metric needs n >= 1");
}

AmbientMetric AmbientMetric::constant(const Tensor& t) {
  const int n = t.dim(), p = t.degree();
  AmbientMetric m(
      n, p, [t](std::span<const double>) { return t; },
      [n, p](std::span<const double>) { return std::vector<Tensor>(static_cast<std::size_t>(n), Tensor(p, n)); });
  m.constant_ = true;
  return m;
}

AmbientMetric AmbientMetric::euclidean(int n) {
  return constant(Tensor::from_matrix(Eigen::MatrixXd::Identity(n, n)));
}

Tensor AmbientMetric::operator()(std::span<const double> x) const {
  Tensor t = eval_(x);
  if (t.degree() != degree_ || t.dim() != n_) throw ShapeError("ambient metric evaluator returned wrong shape");
  return t;
}

std::vector<Tensor> AmbientMetric::fd_gradient(std::span<const double> x) const {
  const double h = 1e-5 * scale_;
  std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
  std::vector<Tensor> g;
  g.reserve(static_cast<std::size_t>(n_));
  for (int b = 0; b < n_; ++b) {
    const auto bu = static_cast<std::size_t>(b);
    xp[bu] = x[bu] + h;
    xm[bu] = x[bu] - h;
    g.push_back(((*this)(xp) - (*this)(xm)) * (0.5 / h));
    xp[bu] = xm[bu] = x[bu];
  }
  return g;
}

std::vector<Tensor> AmbientMetric::gradient(std::span<const double> x) const {
  if (grad_) return grad_(x);
  return fd_gradient(x);
}

Tensor pullback_tensor(const Tensor& theta, const Eigen::MatrixXd& dx) {
  if (dx.rows() != theta.dim()) throw ShapeError("pullback: dx rows must equal ambient dimension");
  if (theta.degree() == 2) {
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> t(
        theta.components().data(), theta.dim(), theta.dim());
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = dx.transpose() * t * dx;
    return Tensor(2, static_cast<int>(dx.cols()), std::vector<double>(r.data(), r.data() + r.size()));
  }
  MixedTensor m = MixedTensor::from(theta);
  for (int s = 0; s < theta.degree(); ++s) m = m.contract_slot(s, dx);
  return Tensor(theta.degree(), static_cast<int>(dx.cols()), std::move(m.c));
}

void check_embedding_rank(const Eigen::MatrixXd& dx, std::size_t node) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dx);
  const auto& s = svd.singularValues();
  if (dx.cols() > dx.rows() || !(s(0) > 0.0) || s(s.size() - 1) <= kSingularRatio * s(0))
    throw EmbeddingError("differential is rank deficient at node " + std::to_string(node));
}

TensorField pullback(const EmbeddingField& e, const AmbientMetric& theta) {
  if (theta.n() != e.ambient_dim()) throw ShapeError("pullback: ambient dimension mismatch");
  const DifferentialField df = differential(e);
  TensorField out;
  out.reserve(e.grid().node_count());
  for (std::size_t i = 0; i < e.grid().node_count(); ++i) {
    const Eigen::MatrixXd dx = df.matrix(i);
    check_embedding_rank(dx, i);
    out.push_back(pullback_tensor(theta(e.at(i)), dx));
  }
  return out;
}

DeformationMeasure deformation_measure(const EmbeddingField& current, const EmbeddingField& reference,
                                       const AmbientMetric& theta) {
  if (!(current.grid() == reference.grid()) || current.ambient_dim() != reference.ambient_dim())
    throw ShapeError("deformation_measure: embeddings live on different grids");
  DeformationMeasure dm;
  dm.theta_b = pullback(current, theta);
  dm.theta0_b = pullback(reference, theta);
  dm.delta.reserve(dm.theta_b.size());
  for (std::size_t i = 0; i < dm.theta_b.size(); ++i) dm.delta.push_back(dm.theta_b[i] - dm.theta0_b[i]);
  return dm;
}

std::vector<double> invariants_at(const Tensor& delta, const Tensor& theta0_inverse, int count) {
  const Eigen::MatrixXd bar = flatten(delta).matrix * flatten(theta0_inverse).matrix;
  std::vector<double> out;
  Eigen::MatrixXd p = bar;
  for (int i = 1; i <= count; ++i) {
    out.push_back(p.trace());
    if (i < count) p = p * bar;
  }
  return out;
}

std::vector<std::vector<double>> invariants(const DeformationMeasure& dm, int count) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(count), std::vector<double>(dm.delta.size()));
  for (std::size_t node = 0; node < dm.delta.size(); ++node) {
    Tensor inv;
    try {
      inv = flat_inverse(dm.theta0_b[node]);
    } catch (const SingularError&) {
      throw SingularError("background metric is not flat-invertible", static_cast<long>(node));
    }
    const auto v = invariants_at(dm.delta[node], inv, count);
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)][node] = v[static_cast<std::size_t>(i)];
  }
  return out;
}

std::vector<TensorField> time_derivative(const std::vector<EmbeddingField>& history, double dt,
                                         const AmbientMetric& theta) {
  if (history.size() < 2) throw HistoryError("time derivative needs at least 2 samples");
  if (!(dt > 0.0)) throw HistoryError("time step must be positive");
  std::vector<TensorField> pulled;
  for (const auto& e : history) {
    if (!(e.grid() == history.front().grid())) throw ShapeError("history slices live on different grids");
    pulled.push_back(pullback(e, theta));
  }
  const int count = static_cast<int>(history.size());
  std::vector<TensorField> out(history.size());
  for (int t = 0; t < count; ++t) {
    TensorField& f = out[static_cast<std::size_t>(t)];
    f.assign(pulled[0].size(), Tensor(pulled[0][0].degree(), pulled[0][0].dim()));
    for (int j = 0; j < count; ++j) {
      const double c = stencil_coefficient(count, dt, t, j);
      if (c == 0.0) continue;
      for (std::size_t node = 0; node < f.size(); ++node) f[node] += pulled[static_cast<std::size_t>(j)][node] * c;
    }
  }
  return out;
}

}  // namespace deform
