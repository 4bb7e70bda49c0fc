#include "deform/forms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deform/errors.hpp"

namespace deform {

long ipow(long base, int exp) {
  long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

Tensor::Tensor(int degree, int dim) : degree_(degree), dim_(dim) {
  if (degree < 0 || dim < 1) throw ShapeError("tensor needs degree >= 0 and dim >= 1");
  c_.assign(static_cast<std::size_t>(ipow(dim, degree)), 0.0);
}

Tensor::Tensor(int degree, int dim, std::vector<double> components) : Tensor(degree, dim) {
  if (components.size() != c_.size())
    throw ShapeError("tensor of degree " + std::to_string(degree) + " over dim " +
                     std::to_string(dim) + " needs " + std::to_string(c_.size()) +
                     " components, got " + std::to_string(components.size()));
  c_ = std::move(components);
}

std::size_t Tensor::offset(std::span<const int> index) const {
  std::size_t off = 0;
  for (int i = 0; i < degree_; ++i) off = off * static_cast<std::size_t>(dim_) + index[i];
  return off;
}

void Tensor::check_same_shape(const Tensor& o) const {
  if (degree_ != o.degree_ || dim_ != o.dim_) throw ShapeError("tensor shape mismatch");
}

Tensor& Tensor::operator+=(const Tensor& o) {
  check_same_shape(o);
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
  check_same_shape(o);
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : c_) v *= s;
  return *this;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : c_) m = std::max(m, std::fabs(v));
  return m;
}

double pairing(const Tensor& a, const Tensor& b) {
  if (a.degree() != b.degree() || a.dim() != b.dim()) throw ShapeError("pairing shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::size_t FlatOrdering::encode(std::span<const int> alpha) const {
  std::size_t a = 0;
  for (int i = k - 1; i >= 0; --i) a = a * static_cast<std::size_t>(d) + alpha[i];
  return a;
}

void FlatOrdering::decode(std::size_t a, std::span<int> alpha) const {
  for (int i = 0; i < k; ++i) {
    alpha[i] = static_cast<int>(a % static_cast<std::size_t>(d));
    a /= static_cast<std::size_t>(d);
  }
}

namespace {

int half_degree(const Tensor& t) {
  if (t.degree() == 0 || t.degree() % 2 != 0)
    throw DegreeError("flat calculus needs even degree 2k with k >= 1, got degree " +
                      std::to_string(t.degree()));
  return t.degree() / 2;
}

// Row-major offset of the tensor component at (chi^-1(a), chi^-1(b)), for
// every a: offsets split as row_part[a] + col_part[b].
struct FlatOffsets {
  std::vector<std::size_t> row, col;
};

FlatOffsets flat_offsets(int k, int d) {
  FlatOrdering ord{k, d};
  const std::size_t n = ord.size();
  const std::size_t dk = n;
  FlatOffsets f;
  f.row.resize(n);
  f.col.resize(n);
  std::vector<int> alpha(static_cast<std::size_t>(k));
  for (std::size_t a = 0; a < n; ++a) {
    ord.decode(a, alpha);
    std::size_t off = 0;
    for (int i = 0; i < k; ++i) off = off * static_cast<std::size_t>(d) + alpha[i];
    f.row[a] = off * dk;
    f.col[a] = off;
  }
  return f;
}

}  // namespace

FlatView flatten(const Tensor& t) {
  const int k = half_degree(t);
  FlatView v{FlatOrdering{k, t.dim()}, {}};
  const auto f = flat_offsets(k, t.dim());
  const auto n = static_cast<Eigen::Index>(f.row.size());
  v.matrix.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) v.matrix(a, b) = t[f.row[a] + f.col[b]];
  return v;
}

Tensor unflatten(const Eigen::MatrixXd& m, int k, int dim) {
  const auto f = flat_offsets(k, dim);
  const auto n = static_cast<Eigen::Index>(f.row.size());
  if (m.rows() != n || m.cols() != n) throw ShapeError("flat matrix has wrong size");
  Tensor t(2 * k, dim);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) t[f.row[a] + f.col[b]] = m(a, b);
  return t;
}

Tensor unflatten(const FlatView& v) { return unflatten(v.matrix, v.ordering.k, v.ordering.d); }

Tensor Tensor::unit(int k, int dim) {
  const auto n = static_cast<Eigen::Index>(ipow(dim, k));
  return unflatten(Eigen::MatrixXd::Identity(n, n), k, dim);
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ShapeError("from_matrix needs a square matrix");
  return unflatten(m, 1, static_cast<int>(m.rows()));
}

Eigen::MatrixXd flat_power(const Eigen::MatrixXd& dx, int k) {
  const Eigen::Index n = dx.rows(), d = dx.cols();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Ones(1, 1);
  for (int i = 0; i < k; ++i) {
    // New index is the most significant digit: kron(dx, acc).
    Eigen::MatrixXd next(n * acc.rows(), d * acc.cols());
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < d; ++c)
        next.block(r * acc.rows(), c * acc.cols(), acc.rows(), acc.cols()) = dx(r, c) * acc;
    acc = std::move(next);
  }
  return acc;
}

Tensor Tensor::power(const Eigen::MatrixXd& j, int k) {
  if (j.rows() != j.cols()) throw ShapeError("tensor power needs a square matrix");
  if (k < 1) throw DegreeError("tensor power needs k >= 1");
  return unflatten(flat_power(j, k), k, static_cast<int>(j.rows()));
}

Tensor flat_multiply(const Tensor& a, const Tensor& b) {
  if (a.degree() != b.degree() || a.dim() != b.dim())
    throw ShapeError("flat_multiply needs equal degree and dimension");
  const int k = half_degree(a);
  return unflatten(flatten(a).matrix * flatten(b).matrix, k, a.dim());
}

Tensor flat_transpose(const Tensor& t) {
  const int k = half_degree(t);
  return unflatten(flatten(t).matrix.transpose(), k, t.dim());
}

double flat_trace(const Tensor& t) { return flatten(t).matrix.trace(); }

bool is_singular(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return true;
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  return !(smax > 0.0) || smin <= kSingularRatio * smax;
}

Tensor flat_inverse(const Tensor& t) {
  const int k = half_degree(t);
  const Eigen::MatrixXd m = flatten(t).matrix;
  if (is_singular(m)) throw SingularError("flattened matrix is singular");
  return unflatten(m.fullPivLu().inverse(), k, t.dim());
}

double overline_det(const Tensor& t) {
  half_degree(t);
  return flatten(t).matrix.determinant();
}

Admissibility admissibility(int k, int d) {
  if (k < 1 || d < 1) throw AdmissibilityError("admissibility needs k >= 1 and d >= 1");
  Admissibility a;
  a.k = k;
  a.d = d;
  a.l = 2L * k * ipow(d, k - 1);
  a.P = (ipow(3, k) - 1) / 2;
  const long lhs = ipow(3, k) - a.l;
  const long r = ((lhs - 1) % 4 + 4) % 4;
  if (r == 0) a.m = (lhs - 1) / 4;
  return a;
}

std::vector<Admissibility> admissible_table(long m_min, long m_max, int k_max, int d_max) {
  std::vector<Admissibility> out;
  for (int k = 1; k <= k_max; ++k)
    for (int d = 1; d <= d_max; ++d) {
      Admissibility a = admissibility(k, d);
      if (a.m && *a.m >= m_min && *a.m <= m_max) out.push_back(a);
    }
  return out;
}

double volume_density(const Tensor& t, const Admissibility& adm) {
  const int k = half_degree(t);
  if (k != adm.k || t.dim() != adm.d) throw ShapeError("tensor does not match admissibility data");
  if (!adm.m)
    throw AdmissibilityError("(k=" + std::to_string(adm.k) + ", d=" + std::to_string(adm.d) +
                             ") is not admissible");
  const Eigen::MatrixXd m = flatten(t).matrix;
  if (is_singular(m)) throw SingularError("volume density of a degenerate form");
  return std::pow(std::fabs(m.determinant()), 1.0 / static_cast<double>(adm.l));
}

Tensor transform(const Tensor& t, const Eigen::MatrixXd& j) {
  const int k = half_degree(t);
  if (j.rows() != t.dim() || j.cols() != t.dim()) throw ShapeError("transform matrix has wrong size");
  const Eigen::MatrixXd jinv = flat_power(j.inverse(), k);
  return unflatten(jinv.transpose() * flatten(t).matrix * jinv, k, t.dim());
}

DensityTransformReport density_transform_check(const Tensor& t, const Eigen::MatrixXd& j) {
  const int k = half_degree(t);
  if (is_singular(j)) throw SingularError("transform matrix is singular");
  const Admissibility adm = admissibility(k, t.dim());
  DensityTransformReport r;
  r.density_before = volume_density(t, adm);
  r.density_after = volume_density(transform(t, j), adm);
  const double detj = j.determinant();
  r.density_expected = r.density_before / std::fabs(detj);
  r.density_rel_error = std::fabs(r.density_after - r.density_expected) / std::fabs(r.density_expected);
  r.det_power = flat_power(j, k).determinant();
  r.det_power_expected = std::pow(detj, static_cast<double>(adm.l / 2));
  r.det_power_rel_error =
      std::fabs(r.det_power - r.det_power_expected) / std::max(std::fabs(r.det_power_expected), 1e-300);
  return r;
}

Nondegeneracy induced_nondegeneracy(const Tensor& theta_ambient, const Eigen::MatrixXd& dx, int k) {
  if (half_degree(theta_ambient) != k) throw DegreeError("ambient form degree is not 2k");
  if (dx.rows() != theta_ambient.dim()) throw ShapeError("dx rows must equal ambient dimension");
  if (dx.cols() > dx.rows()) throw EmbeddingError("dx has more columns than rows");
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dx);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || !(s(0) > 0.0) || s(s.size() - 1) <= kSingularRatio * s(0))
      throw EmbeddingError("differential is rank deficient; not an embedding");
  }
  const Eigen::MatrixXd a = flat_power(dx, k);
  const Eigen::MatrixXd ls = flatten(theta_ambient).matrix;
  const Eigen::MatrixXd lb = a.transpose() * ls * a;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_a(a), svd_s(ls), svd_b(lb);
  // Tolerance scaled by the factors, so cancellation to roundoff counts as zero.
  const double scale = svd_s.singularValues()(0) * svd_a.singularValues()(0) * svd_a.singularValues()(0);
  const double tol = 1e-12 * std::max(scale, svd_b.singularValues()(0));
  Nondegeneracy r;
  for (Eigen::Index i = 0; i < svd_b.singularValues().size(); ++i)
    if (svd_b.singularValues()(i) > tol) ++r.rank;
  r.nondegenerate = r.rank == lb.rows();
  return r;
}

}  // namespace deform
