#include "deform/motions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deform/errors.hpp"

namespace deform {

VectorField::VectorField(int n, Eval eval, Jacobian jac, double scale)
    : n_(n), eval_(std::move(eval)), jac_(std::move(jac)), scale_(scale) {}

VectorField VectorField::linear(const Eigen::MatrixXd& m, const Eigen::VectorXd& c) {
  const int n = static_cast<int>(m.rows());
  return VectorField(
      n,
      [m, c](std::span<const double> x, std::span<double> v) {
        const Eigen::VectorXd r = m * Eigen::Map<const Eigen::VectorXd>(x.data(), m.cols()) + c;
        for (Eigen::Index i = 0; i < r.size(); ++i) v[static_cast<std::size_t>(i)] = r(i);
      },
      [m](std::span<const double>) { return m; });
}

VectorField polynomial_field(int n, std::vector<Monomial> terms) {
  for (auto& t : terms) {
    if (t.component < 0 || t.component >= n) throw ShapeError("monomial component out of range");
    t.powers.resize(static_cast<std::size_t>(n), 0);
  }
  auto eval = [terms](std::span<const double> x, std::span<double> v) {
    std::fill(v.begin(), v.end(), 0.0);
    for (const auto& t : terms) {
      double m = t.coef;
      for (std::size_t b = 0; b < x.size(); ++b) m *= std::pow(x[b], t.powers[b]);
      v[static_cast<std::size_t>(t.component)] += m;
    }
  };
  auto jac = [terms, n](std::span<const double> x) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : terms) {
      for (int b = 0; b < n; ++b) {
        const int p = t.powers[static_cast<std::size_t>(b)];
        if (p == 0) continue;
        double m = t.coef * p;
        for (int c = 0; c < n; ++c) {
          const int e = t.powers[static_cast<std::size_t>(c)] - (c == b ? 1 : 0);
          m *= std::pow(x[static_cast<std::size_t>(c)], e);
        }
        j(t.component, b) += m;
      }
    }
    return j;
  };
  return VectorField(n, eval, jac);
}

Eigen::VectorXd VectorField::operator()(std::span<const double> x) const {
  Eigen::VectorXd v(n_);
  eval_(x, std::span<double>(v.data(), static_cast<std::size_t>(n_)));
  return v;
}

Eigen::MatrixXd VectorField::fd_jacobian(std::span<const double> x) const {
  const double h = 1e-5 * scale_;
  std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
  Eigen::MatrixXd j(n_, static_cast<Eigen::Index>(x.size()));
  for (std::size_t b = 0; b < x.size(); ++b) {
    xp[b] = x[b] + h;
    xm[b] = x[b] - h;
    j.col(static_cast<Eigen::Index>(b)) = ((*this)(xp) - (*this)(xm)) / (2.0 * h);
    xp[b] = xm[b] = x[b];
  }
  return j;
}

Eigen::MatrixXd VectorField::jacobian(std::span<const double> x) const {
  return jac_ ? jac_(x) : fd_jacobian(x);
}

Tensor lie_derivative_at(const AmbientMetric& theta, const VectorField& v, std::span<const double> x) {
  if (theta.n() != v.n()) throw ShapeError("vector field and form live in different dimensions");
  const Tensor t = theta(x);
  const Eigen::VectorXd vx = v(x);
  const Eigen::MatrixXd jac = v.jacobian(x);
  Tensor out(t.degree(), t.dim());
  if (!theta.is_constant()) {
    const auto grads = theta.gradient(x);
    for (int b = 0; b < t.dim(); ++b) out += grads[static_cast<std::size_t>(b)] * vx(b);
  }
  const MixedTensor base = MixedTensor::from(t);
  for (int s = 0; s < t.degree(); ++s) {
    const MixedTensor c = base.contract_slot(s, jac);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c.c[i];
  }
  return out;
}

std::vector<Tensor> lie_derivative(const AmbientMetric& theta, const VectorField& v,
                                   const std::vector<std::vector<double>>& points) {
  std::vector<Tensor> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(lie_derivative_at(theta, v, p));
  return out;
}

KillingReport killing_residual(const AmbientMetric& theta, const VectorField& v,
                               const std::vector<std::vector<double>>& points, bool conformal, double tol) {
  KillingReport r;
  r.conformal = conformal;
  double phi_sum = 0.0;
  int phi_count = 0;
  r.phi_min = std::numeric_limits<double>::infinity();
  r.phi_max = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    Tensor lie = lie_derivative_at(theta, v, p);
    bool flag = false;
    if (conformal) {
      const Tensor t = theta(p);
      const double tt = pairing(t, t);
      double phi = std::numeric_limits<double>::quiet_NaN();
      if (std::sqrt(tt) < 1e-12) {
        flag = true;
      } else {
        phi = pairing(lie, t) / tt;
        lie -= t * phi;
        phi_sum += phi;
        ++phi_count;
        r.phi_min = std::min(r.phi_min, phi);
        r.phi_max = std::max(r.phi_max, phi);
      }
      r.phi.push_back(phi);
      r.flagged.push_back(flag);
    }
    const double nrm = lie.max_abs();
    r.point_norm.push_back(nrm);
    if (!flag) r.max_norm = std::max(r.max_norm, nrm);
    r.mean_norm += nrm;
    r.residual.push_back(std::move(lie));
  }
  if (!points.empty()) r.mean_norm /= static_cast<double>(points.size());
  if (phi_count > 0) {
    r.phi_mean = phi_sum / phi_count;
  } else {
    r.phi_min = r.phi_max = 0.0;
  }
  r.motion = r.max_norm <= tol;
  return r;
}

HistoryMotionReport history_motion_check(const std::vector<EmbeddingField>& history, const AmbientMetric& theta,
                                         double tol) {
  if (history.size() < 2) throw HistoryError("motion check needs at least 2 slices");
  HistoryMotionReport r;
  const TensorField first = pullback(history.front(), theta);
  for (const auto& slice : history) {
    if (!(slice.grid() == history.front().grid())) throw ShapeError("history slices live on different grids");
    const TensorField cur = pullback(slice, theta);
    double m = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) m = std::max(m, (cur[i] - first[i]).max_abs());
    r.slice_norm.push_back(m);
    r.max_norm = std::max(r.max_norm, m);
  }
  r.motion = r.max_norm <= tol;
  return r;
}

std::vector<EmbeddingField> flow_history(const EmbeddingField& start, const VectorField& v, double dt, int steps) {
  std::vector<EmbeddingField> out{start};
  for (int s = 0; s < steps; ++s) {
    EmbeddingField next = out.back();
    for (std::size_t node = 0; node < next.grid().node_count(); ++node) {
      const Eigen::VectorXd vel = v(out.back().at(node));
      auto x = next.at(node);
      for (std::size_t a = 0; a < x.size(); ++a) x[a] += dt * vel(static_cast<Eigen::Index>(a));
    }
    out.push_back(std::move(next));
  }
  return out;
}

Tensor canonical_symplectic(int m) {
  Tensor w(2, 2 * m);
  for (int i = 0; i < m; ++i) {
    const int q = i, p = m + i;
    w.components()[static_cast<std::size_t>(q * 2 * m + p)] = 1.0;
    w.components()[static_cast<std::size_t>(p * 2 * m + q)] = -1.0;
  }
  return w;
}

Eigen::VectorXd interior_product(const Tensor& omega, const Eigen::VectorXd& a) {
  const Eigen::MatrixXd w = flatten(omega).matrix;
  return w.transpose() * a;
}

VectorField hamiltonian_field(const Tensor& omega, const std::function<Eigen::VectorXd(std::span<const double>)>& dh,
                              const std::function<Eigen::MatrixXd(std::span<const double>)>& hess) {
  const Eigen::MatrixXd w = flatten(omega).matrix;
  // i_X omega = w^T X = dh
  const Eigen::MatrixXd winv_t = w.transpose().inverse();
  VectorField::Jacobian jac;
  if (hess) jac = [winv_t, hess](std::span<const double> x) -> Eigen::MatrixXd { return winv_t * hess(x); };
  return VectorField(
      omega.dim(),
      [winv_t, dh](std::span<const double> x, std::span<double> v) {
        const Eigen::VectorXd r = winv_t * dh(x);
        for (Eigen::Index i = 0; i < r.size(); ++i) v[static_cast<std::size_t>(i)] = r(i);
      },
      jac);
}

namespace {

// Central-difference exterior derivative of a 1-form at x.
Eigen::MatrixXd d_one_form(const std::function<Eigen::VectorXd(std::span<const double>)>& alpha,
                           std::span<const double> x, double h) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd grad(n, n);  // grad(B, C) = d_B alpha_C
  std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto bu = static_cast<std::size_t>(b);
    xp[bu] = x[bu] + h;
    xm[bu] = x[bu] - h;
    grad.row(b) = ((alpha(xp) - alpha(xm)) / (2.0 * h)).transpose();
    xp[bu] = xm[bu] = x[bu];
  }
  return grad - grad.transpose();
}

}  // namespace

SymplecticReport symplectic_demo(const VectorField& a, const Tensor& omega,
                                 const std::vector<std::vector<double>>& points, double h) {
  if (omega.degree() != 2 || omega.dim() != a.n() || a.n() % 2 != 0)
    throw ShapeError("symplectic demo needs a 2-form on an even-dimensional space");
  const AmbientMetric w = AmbientMetric::constant(omega);
  SymplecticReport r;
  auto i_a = [&](std::span<const double> x) { return interior_product(omega, a(x)); };
  const int n = a.n();
  for (const auto& p : points) {
    Tensor lie = lie_derivative_at(w, a, p);
    const Eigen::MatrixXd di = d_one_form(i_a, p, h);
    Tensor dt = Tensor::from_matrix(di);
    r.max_discrepancy = std::max(r.max_discrepancy, (lie - dt).max_abs());
    r.antisymmetry = std::max(r.antisymmetry, (lie + flat_transpose(lie)).max_abs());
    if (n > 2) {
      // (dF)_{ABC} = d_A F_BC + d_B F_CA + d_C F_AB
      std::vector<Tensor> df;
      std::vector<double> xp(p), xm(p);
      for (int b = 0; b < n; ++b) {
        const auto bu = static_cast<std::size_t>(b);
        xp[bu] = p[bu] + h;
        xm[bu] = p[bu] - h;
        df.push_back((lie_derivative_at(w, a, xp) - lie_derivative_at(w, a, xm)) * (0.5 / h));
        xp[bu] = xm[bu] = p[bu];
      }
      auto F = [&](int at, int i, int j) { return df[static_cast<std::size_t>(at)][static_cast<std::size_t>(i * n + j)]; };
      for (int A = 0; A < n; ++A)
        for (int B = 0; B < n; ++B)
          for (int C = 0; C < n; ++C)
            r.closedness = std::max(r.closedness, std::fabs(F(A, B, C) + F(B, C, A) + F(C, A, B)));
    }
    r.lie.push_back(std::move(lie));
    r.d_interior.push_back(std::move(dt));
  }
  return r;
}

}  // namespace deform
