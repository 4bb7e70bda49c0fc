#pragma once
// Scenario builders and dense reference solutions shared by the dynamics
// tests and the acceptance binary.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "deform/dynamics.hpp"

namespace fixture {

using deform::BodyGrid;
using deform::BoundaryKind;
using deform::EmbeddingField;
using deform::FaceCondition;
using deform::Scenario;

/// Quadrature weights of the discrete action, written out per axis.
inline std::vector<double> weights_1d(int count, double h) {
  std::vector<double> w(static_cast<std::size_t>(count), h);
  if (count == 2) {
    w[0] = w[1] = h / 2;
  } else if (count == 3) {
    w[0] = w[2] = h / 2;
  } else {
    w[0] = w.back() = h / 4;
    w[1] = w[static_cast<std::size_t>(count) - 2] = 5 * h / 4;
  }
  return w;
}

/// Dense first-derivative matrix: central inside, one-sided second order at
/// the ends.
inline Eigen::MatrixXd stencil_1d(int count, double h) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(count, count);
  if (count == 2) {
    d(0, 0) = d(1, 0) = -1 / h;
    d(0, 1) = d(1, 1) = 1 / h;
    return d;
  }
  d(0, 0) = -1.5 / h;
  d(0, 1) = 2 / h;
  d(0, 2) = -0.5 / h;
  d(count - 1, count - 1) = 1.5 / h;
  d(count - 1, count - 2) = -2 / h;
  d(count - 1, count - 3) = 0.5 / h;
  for (int i = 1; i + 1 < count; ++i) {
    d(i, i - 1) = -0.5 / h;
    d(i, i + 1) = 0.5 / h;
  }
  return d;
}

/// Linearized hanging bar: F = c (Delta^1)^2 about the identity, load U = g x,
/// left end pinned, right end free. Returns nodal displacements.
inline Eigen::VectorXd hooke_bar_displacement(int count, double h, double c, double g) {
  const Eigen::MatrixXd d = stencil_1d(count, h);
  const auto w = weights_1d(count, h);
  Eigen::MatrixXd wm = Eigen::MatrixXd::Zero(count, count);
  for (int i = 0; i < count; ++i) wm(i, i) = w[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd k = 8 * c * d.transpose() * wm * d;
  const int m = count - 1;
  Eigen::VectorXd rhs(m);
  for (int i = 0; i < m; ++i) rhs(i) = -g * w[static_cast<std::size_t>(i + 1)];
  Eigen::VectorXd u = Eigen::VectorXd::Zero(count);
  u.tail(m) = k.bottomRightCorner(m, m).fullPivLu().solve(rhs);
  return u;
}

inline std::vector<FaceCondition> all_faces(int body_dim, BoundaryKind kind) {
  FaceCondition f;
  f.kind = kind;
  return std::vector<FaceCondition>(static_cast<std::size_t>(2 * body_dim), f);
}

/// Interior nodes of x moved by uniform noise of the given amplitude.
inline EmbeddingField perturbed(const EmbeddingField& x, double amplitude, unsigned seed, bool boundary_too = false) {
  EmbeddingField out = x;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  for (std::size_t node = 0; node < x.grid().node_count(); ++node) {
    if (!boundary_too && x.grid().on_boundary(node)) continue;
    for (double& v : out.at(node)) v += u(rng);
  }
  return out;
}

/// Flat Delta^1 membrane: identity reference into R^n (first d axes), pinned
/// faces, boundary and initial guess from x = a xi + b.
inline Scenario membrane(const std::vector<int>& counts, double h, const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                         double perturbation, unsigned seed) {
  Scenario s;
  const int d = static_cast<int>(counts.size());
  const int n = static_cast<int>(a.rows());
  s.grid = BodyGrid(counts, std::vector<double>(counts.size(), h));
  s.ambient = deform::AmbientMetric::euclidean(n);
  s.reference = EmbeddingField::affine(s.grid, Eigen::MatrixXd::Identity(n, d), Eigen::VectorXd::Zero(n));
  s.initial = perturbed(EmbeddingField::affine(s.grid, a, b), perturbation, seed);
  s.model.elastic.order = 1;
  s.model.elastic.mu1_1 = 0.5;
  s.model.measure = deform::MeasureKind::Reference;
  s.faces = all_faces(d, BoundaryKind::Pinned);
  s.solver.tol = 1e-10;
  return s;
}

/// Hanging bar with the dynamics of hooke_bar_displacement.
inline Scenario hanging_bar(int count, double h, double c, double g) {
  Scenario s;
  s.grid = BodyGrid({count}, {h});
  s.ambient = deform::AmbientMetric::euclidean(1);
  s.reference = EmbeddingField::affine(s.grid, Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1));
  s.initial = s.reference;
  s.model.elastic.order = 2;
  s.model.elastic.mu2_20 = c;
  s.model.measure = deform::MeasureKind::Reference;
  s.model.potential = deform::Potential::linear({g});
  s.faces = all_faces(1, BoundaryKind::Pinned);
  s.faces[1].kind = BoundaryKind::Free;
  s.solver.tol = 1e-12;
  s.solver.max_iters = 50000;
  return s;
}

/// Max over nodes of |x - (a xi + b)|.
inline double affine_error(const EmbeddingField& x, const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           bool interior_only = true) {
  double err = 0.0;
  const BodyGrid& g = x.grid();
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    if (interior_only && g.on_boundary(node)) continue;
    const auto xi = g.coords(node);
    const Eigen::VectorXd p = a * Eigen::Map<const Eigen::VectorXd>(xi.data(), static_cast<Eigen::Index>(xi.size())) + b;
    for (int i = 0; i < x.ambient_dim(); ++i)
      err = std::max(err, std::abs(x.at(node)[static_cast<std::size_t>(i)] - p(i)));
  }
  return err;
}

/// Richardson-extrapolated directional derivative of the action against
/// -<residual, dx> weighted back to a gradient. Returns the relative error.
inline double directional_mismatch(const Scenario& s, const std::vector<EmbeddingField>& slices,
                                   const std::vector<std::vector<double>>& dx, double h) {
  auto shifted = [&](double t) {
    std::vector<EmbeddingField> out = slices;
    for (std::size_t k = 0; k < out.size(); ++k)
      for (std::size_t i = 0; i < out[k].values().size(); ++i) out[k].values()[i] += t * dx[k][i];
    return deform::action_gradient(s, out).action;
  };
  auto central = [&](double step) { return (shifted(step) - shifted(-step)) / (2 * step); };
  const double fd = (4 * central(h / 2) - central(h)) / 3;
  const deform::ActionGradient ag = deform::action_gradient(s, slices);
  const std::size_t n = static_cast<std::size_t>(s.ambient.n());
  double analytic = 0.0;
  for (std::size_t k = 0; k < slices.size(); ++k) {
    // residual = -grad / weight, so <grad, dx> = -sum weight * residual * dx
    const auto r = s.mode == deform::Mode::Static ? deform::el_residual(s, slices[0]).residual[0]
                                                  : deform::el_residual(s, slices).residual[k];
    for (std::size_t i = 0; i < dx[k].size(); ++i) analytic -= ag.weight[k][i / n] * r[i] * dx[k][i];
  }
  return std::abs(fd - analytic) / std::max(std::abs(fd), 1e-300);
}

/// Random perturbation supported on interior nodes of interior slices.
inline std::vector<std::vector<double>> interior_direction(const Scenario& s, std::size_t slices, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t n = static_cast<std::size_t>(s.ambient.n());
  std::vector<std::vector<double>> dx(slices, std::vector<double>(s.grid.node_count() * n, 0.0));
  for (std::size_t k = 0; k < slices; ++k) {
    if (slices > 1 && (k == 0 || k + 1 == slices)) continue;
    for (std::size_t node = 0; node < s.grid.node_count(); ++node)
      if (!s.grid.on_boundary(node))
        for (std::size_t a = 0; a < n; ++a) dx[k][node * n + a] = u(rng);
  }
  return dx;
}

/// Non-affine static test problem: cubic model, current measure, quadratic
/// potential, position-dependent metric.
inline Scenario rich_static(unsigned seed) {
  Scenario s;
  s.grid = BodyGrid({6, 5}, {0.2, 0.25});
  const int n = 3;
  s.ambient = deform::AmbientMetric(
      n, 2,
      [](std::span<const double> x) {
        deform::Tensor t = deform::Tensor::unit(1, 3);
        t[0] += 0.2 * std::sin(x[1]);
        t[4] += 0.1 * x[0] * x[0];
        t[1] = t[3] = 0.05 * x[2];
        return t;
      });
  s.reference = EmbeddingField::affine(s.grid, Eigen::MatrixXd::Identity(n, 2), Eigen::VectorXd::Zero(n));
  EmbeddingField x = EmbeddingField::sample(s.grid, n, [](std::span<const double> xi, std::span<double> out) {
    out[0] = 1.1 * xi[0] + 0.1 * std::sin(3 * xi[1]);
    out[1] = 0.9 * xi[1] + 0.05 * xi[0] * xi[1];
    out[2] = 0.2 * std::cos(2 * xi[0]) + 0.1 * xi[1];
  });
  s.initial = perturbed(x, 0.02, seed, true);
  s.model.elastic.order = 3;
  s.model.elastic.mu0 = 0.1;
  s.model.elastic.mu1_1 = 0.5;
  s.model.elastic.mu2_01 = 0.7;
  s.model.elastic.mu2_20 = 0.3;
  s.model.elastic.mu3_001 = 0.2;
  s.model.elastic.mu3_110 = -0.1;
  s.model.elastic.mu3_300 = 0.05;
  s.model.potential = deform::Potential::quadratic(0.4, {0.1, -0.2, 0.3});
  s.faces = all_faces(2, BoundaryKind::Pinned);
  return s;
}

/// Evolution counterpart: kinetic quadratic term, 5 slices.
inline Scenario rich_evolution(unsigned seed) {
  Scenario s = rich_static(seed);
  s.mode = deform::Mode::Evolution;
  s.model.kinetic = true;
  s.model.kin.order = 2;
  s.model.kin.mu2_01 = 0.5;
  s.model.kin.mu2_20 = 0.2;
  s.duration = 0.8;
  s.time_metric = 1.3;
  for (unsigned t = 0; t < 5; ++t) s.history.push_back(perturbed(s.initial, 0.02, seed * 7 + t, true));
  return s;
}

}  // namespace fixture
