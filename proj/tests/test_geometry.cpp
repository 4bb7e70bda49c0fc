#include "doctest.h"

#include <cmath>
#include <random>

#include "deform/errors.hpp"
#include "deform/geometry.hpp"
#include "oracles.hpp"

using namespace deform;

namespace {

BodyGrid line(int count, double h) { return BodyGrid({count}, {h}); }

EmbeddingField stretch(const BodyGrid& g, double lambda) {
  return EmbeddingField::affine(g, Eigen::MatrixXd::Constant(1, 1, lambda), Eigen::VectorXd::Zero(1));
}

Eigen::MatrixXd rotation3(double a, double b) {
  Eigen::Matrix3d rz, rx;
  rz << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  rx << 1, 0, 0, 0, std::cos(b), -std::sin(b), 0, std::sin(b), std::cos(b);
  return rz * rx;
}

}  // namespace

TEST_CASE("grid numbering and weights") {
  BodyGrid g({3, 4}, {0.5, 0.25}, {1.0, -1.0});
  CHECK(g.node_count() == 12);
  std::vector<int> idx(2);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    g.node_index(n, idx);
    CHECK(g.node(idx) == n);
    CHECK(g.axis_index(n, 1) == idx[1]);
  }
  CHECK(g.coords(g.node(std::vector<int>{2, 3})) == std::vector<double>{2.0, -0.25});
  CHECK(BodyGrid::axis_weights(2, 1.0) == std::vector<double>{0.5, 0.5});
  CHECK(BodyGrid::axis_weights(3, 1.0) == std::vector<double>{0.5, 1.0, 0.5});
  CHECK(BodyGrid::axis_weights(6, 2.0) == std::vector<double>{0.5, 2.5, 2.0, 2.0, 2.5, 0.5});
  double total = 0.0;
  for (std::size_t n = 0; n < g.node_count(); ++n) total += g.weight(n);
  CHECK(total == doctest::Approx(1.0 * 0.75));
}

TEST_CASE("weighted stencil sums to the endpoint difference") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int count : {2, 3, 4, 5, 9, 17}) {
    const double h = 0.3;
    BodyGrid g = line(count, h);
    std::vector<double> x(static_cast<std::size_t>(count));
    for (auto& v : x) v = u(rng);
    DifferentialField dx = differential(g, 1, x);
    auto w = BodyGrid::axis_weights(count, h);
    double s = 0.0;
    for (int i = 0; i < count; ++i) s += w[static_cast<std::size_t>(i)] * dx(static_cast<std::size_t>(i), 0, 0);
    CHECK(s == doctest::Approx(x.back() - x.front()).epsilon(1e-13));
  }
}

TEST_CASE("differential examples") {
  BodyGrid g({4, 5}, {0.3, 0.2});
  DifferentialField id = differential(EmbeddingField::affine(g, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)));
  for (std::size_t n = 0; n < g.node_count(); ++n)
    CHECK((id.matrix(n) - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-13);

  BodyGrid l = line(7, 0.1);
  DifferentialField s = differential(stretch(l, 2.5));
  for (std::size_t n = 0; n < l.node_count(); ++n) CHECK(s(n, 0, 0) == doctest::Approx(2.5));

  BodyGrid q = line(101, 0.01);
  EmbeddingField quad =
      EmbeddingField::sample(q, 1, [](std::span<const double> xi, std::span<double> x) { x[0] = xi[0] * xi[0]; });
  DifferentialField dq = differential(quad);
  double err = 0.0;
  for (std::size_t n = 0; n < q.node_count(); ++n) err = std::max(err, std::abs(dq(n, 0, 0) - 2.0 * q.coords(n)[0]));
  CHECK(err <= 1e-10);
}

TEST_CASE("differential adjoint") {
  std::mt19937_64 rng(32);
  BodyGrid g({5, 3, 4}, {0.2, 0.5, 0.1});
  const int n = 2;
  Eigen::MatrixXd x = oracle::random_matrix(static_cast<int>(g.node_count()) * n, 1, rng);
  std::vector<double> xv(x.data(), x.data() + x.size());
  DifferentialField dx = differential(g, n, xv);
  DifferentialField flux(g.node_count(), n, g.dim());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double lhs = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    auto f = flux.axis(a);
    auto d = dx.axis(a);
    for (std::size_t i = 0; i < f.size(); ++i) {
      f[i] = u(rng);
      lhs += f[i] * d[i];
    }
  }
  std::vector<double> out(xv.size(), 0.0);
  differential_adjoint(g, flux, out);
  double rhs = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) rhs += out[i] * xv[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("time stencil") {
  for (int count : {2, 3, 6}) {
    const double h = 0.25;
    for (int i = 0; i < count; ++i) {
      double d = 0.0, d1 = 0.0;
      for (int j = 0; j < count; ++j) {
        d += stencil_coefficient(count, h, i, j);
        d1 += stencil_coefficient(count, h, i, j) * j * h;
      }
      CHECK(d == doctest::Approx(0.0).scale(1.0));
      CHECK(d1 == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("pullback examples") {
  BodyGrid g({3, 3}, {0.5, 0.5});
  TensorField id = pullback(EmbeddingField::affine(g, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)),
                            AmbientMetric::euclidean(2));
  for (const auto& t : id) CHECK((t - Tensor::unit(1, 2)).max_abs() < 1e-14);

  BodyGrid l = line(5, 0.25);
  for (const auto& t : pullback(stretch(l, 1.7), AmbientMetric::euclidean(1)))
    CHECK(t[0] == doctest::Approx(1.7 * 1.7));

  // Axis-aligned 2-plane in R^4: orthonormal frame, |Dy|^2 = d.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 2);
  a(1, 0) = 1.0;
  a(3, 1) = 1.0;
  for (const auto& t : pullback(EmbeddingField::affine(g, a, Eigen::VectorXd::Ones(4)), AmbientMetric::euclidean(4))) {
    CHECK((t - Tensor::unit(1, 2)).max_abs() < 1e-14);
    CHECK(flat_trace(t) == doctest::Approx(2.0));
  }
}

TEST_CASE("pullback of degree 4 against index sums") {
  std::mt19937_64 rng(33);
  Tensor theta = oracle::random_tensor(4, 3, rng);
  Eigen::MatrixXd dx = oracle::random_matrix(3, 2, rng);
  Tensor pb = pullback_tensor(theta, dx);
  double err = 0.0;
  for (int a1 = 0; a1 < 2; ++a1)
    for (int a2 = 0; a2 < 2; ++a2)
      for (int a3 = 0; a3 < 2; ++a3)
        for (int a4 = 0; a4 < 2; ++a4) {
          double s = 0.0;
          for (int b1 = 0; b1 < 3; ++b1)
            for (int b2 = 0; b2 < 3; ++b2)
              for (int b3 = 0; b3 < 3; ++b3)
                for (int b4 = 0; b4 < 3; ++b4)
                  s += theta.components()[oracle::offset({b1, b2, b3, b4}, 3)] * dx(b1, a1) * dx(b2, a2) *
                       dx(b3, a3) * dx(b4, a4);
          err = std::max(err, std::abs(s - pb.components()[oracle::offset({a1, a2, a3, a4}, 2)]));
        }
  CHECK(err < 1e-13);
}

TEST_CASE("pullback functoriality on affine pairs") {
  std::mt19937_64 rng(34);
  for (int p : {2, 4}) {
    Tensor theta = oracle::random_tensor(p, 4, rng);
    Eigen::MatrixXd x = oracle::random_matrix(4, 3, rng);
    Eigen::MatrixXd l = oracle::random_matrix(3, 2, rng);
    Tensor direct = pullback_tensor(theta, x * l);
    Tensor chained = pullback_tensor(pullback_tensor(theta, x), l);
    CHECK((direct - chained).max_abs() < 1e-12);
  }
}

TEST_CASE("rank deficient differential") {
  Eigen::MatrixXd dx(3, 2);
  dx << 1, 2, 0, 0, 0, 0;
  CHECK_THROWS_AS(check_embedding_rank(dx, 0), EmbeddingError);
  BodyGrid g({3, 3}, {1.0, 1.0});
  EmbeddingField flat = EmbeddingField::affine(g, dx, Eigen::VectorXd::Zero(3));
  CHECK_THROWS_AS(pullback(flat, AmbientMetric::euclidean(3)), EmbeddingError);
}

TEST_CASE("deformation measure examples") {
  BodyGrid l = line(9, 0.125);
  EmbeddingField ref = stretch(l, 1.0);
  DeformationMeasure same = deformation_measure(ref, ref, AmbientMetric::euclidean(1));
  for (const auto& t : same.delta) CHECK(t.max_abs() == 0.0);
  for (const auto& f : invariants(same, 3))
    for (double v : f) CHECK(v == 0.0);

  const double lambda = 1.3;
  DeformationMeasure dm = deformation_measure(stretch(l, lambda), ref, AmbientMetric::euclidean(1));
  auto inv = invariants(dm, 2);
  for (std::size_t n = 0; n < l.node_count(); ++n) {
    CHECK(dm.delta[n][0] == doctest::Approx(lambda * lambda - 1.0));
    CHECK(dm.delta[n][0] == doctest::Approx(dm.theta_b[n][0] - dm.theta0_b[n][0]));
    CHECK(inv[0][n] == doctest::Approx(0.69));
    CHECK(inv[1][n] == doctest::Approx(0.69 * 0.69));
  }

  CHECK_THROWS_AS(deformation_measure(stretch(line(5, 0.1), 1.0), ref, AmbientMetric::euclidean(1)), ShapeError);
}

TEST_CASE("Polyakov invariant is |Dy|^2 - d") {
  std::mt19937_64 rng(35);
  BodyGrid g({6, 5}, {0.2, 0.25});
  Eigen::MatrixXd a = oracle::random_matrix(3, 2, rng) + Eigen::MatrixXd::Identity(3, 2);
  EmbeddingField y = EmbeddingField::sample(g, 3, [&](std::span<const double> xi, std::span<double> x) {
    Eigen::Vector2d p(xi[0], xi[1]);
    Eigen::Vector3d v = a * p;
    x[0] = v(0) + 0.1 * std::sin(xi[1]);
    x[1] = v(1);
    x[2] = v(2) + 0.2 * xi[0] * xi[0];
  });
  EmbeddingField ref = EmbeddingField::affine(g, Eigen::MatrixXd::Identity(3, 2), Eigen::VectorXd::Zero(3));
  DeformationMeasure dm = deformation_measure(y, ref, AmbientMetric::euclidean(3));
  auto inv = invariants(dm, 1);
  DifferentialField dy = differential(y);
  for (std::size_t n = 0; n < g.node_count(); ++n)
    CHECK(inv[0][n] == doctest::Approx(dy.matrix(n).squaredNorm() - 2.0).epsilon(1e-12));
}

TEST_CASE("singular background reports its node") {
  BodyGrid l = line(4, 1.0);
  EmbeddingField cur = stretch(l, 1.0);
  DeformationMeasure dm = deformation_measure(cur, cur, AmbientMetric::euclidean(1));
  dm.theta0_b[2][0] = 0.0;
  try {
    invariants(dm, 1);
    FAIL("expected SingularError");
  } catch (const SingularError& e) {
    CHECK(e.node() == 2);
  }
}

TEST_CASE("rigid motions leave delta unchanged") {
  std::mt19937_64 rng(36);
  BodyGrid g({5, 4}, {0.25, 0.3});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> c(9);
  for (auto& v : c) v = u(rng);
  auto f = [&](std::span<const double> xi, std::span<double> x) {
    x[0] = xi[0] + 0.2 * std::sin(c[0] * xi[1] + c[1]);
    x[1] = xi[1] + 0.2 * c[2] * xi[0] * xi[1];
    x[2] = 0.3 * std::cos(c[3] * xi[0]) + c[4] * xi[1];
  };
  EmbeddingField ref = EmbeddingField::affine(g, Eigen::MatrixXd::Identity(3, 2), Eigen::VectorXd::Zero(3));
  EmbeddingField x = EmbeddingField::sample(g, 3, f);
  Eigen::MatrixXd r = rotation3(c[5] * 3, c[6] * 3);
  Eigen::Vector3d t(c[7], c[8], 0.5);
  EmbeddingField moved = EmbeddingField::sample(g, 3, [&](std::span<const double> xi, std::span<double> out) {
    Eigen::Vector3d p;
    f(xi, std::span<double>(p.data(), 3));
    Eigen::Vector3d q = r * p + t;
    for (int i = 0; i < 3; ++i) out[static_cast<std::size_t>(i)] = q(i);
  });
  DeformationMeasure a = deformation_measure(x, ref, AmbientMetric::euclidean(3));
  DeformationMeasure b = deformation_measure(moved, x, AmbientMetric::euclidean(3));
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    CHECK(b.delta[n].max_abs() <= 1e-12);
    CHECK((a.theta_b[n] - b.theta_b[n]).max_abs() <= 1e-12);
  }
}

TEST_CASE("at most d independent invariants") {
  std::mt19937_64 rng(37);
  for (int d = 1; d <= 3; ++d) {
    for (int rep = 0; rep < 5; ++rep) {
      Tensor theta0 = oracle::well_conditioned(1, d, rng);
      theta0 = 0.5 * (theta0 + flat_transpose(theta0));
      Tensor g0 = flat_inverse(theta0);
      Tensor delta = oracle::random_tensor(2, d, rng, -0.5, 0.5);
      const int count = d + 1;
      const int m = d * d;
      Eigen::MatrixXd jac(count, m);
      const double h = 1e-5;
      for (int c = 0; c < m; ++c) {
        Tensor p = delta, q = delta;
        p[static_cast<std::size_t>(c)] += h;
        q[static_cast<std::size_t>(c)] -= h;
        auto fp = invariants_at(p, g0, count), fq = invariants_at(q, g0, count);
        for (int i = 0; i < count; ++i) jac(i, c) = (fp[static_cast<std::size_t>(i)] - fq[static_cast<std::size_t>(i)]) / (2 * h);
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
      const auto s = svd.singularValues();
      int rank = 0;
      for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > 1e-6 * s(0)) ++rank;
      CHECK(rank <= d);
    }
  }
}

TEST_CASE("small strain limit") {
  std::mt19937_64 rng(38);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BodyGrid g({9, 9}, {0.125, 0.125});
  EmbeddingField ref = EmbeddingField::affine(g, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2));
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> c(6);
    for (auto& v : c) v = u(rng);
    const double eps = 1e-3 * (1 + rep);
    auto disp = [&](std::span<const double> xi, std::span<double> out) {
      out[0] = eps * (c[0] * std::sin(2 * xi[0] + c[1]) + c[2] * xi[1] * xi[1]);
      out[1] = eps * (c[3] * std::cos(xi[0] * xi[1]) + c[4] * xi[0] + c[5] * xi[1]);
    };
    EmbeddingField ue = EmbeddingField::sample(g, 2, disp);
    EmbeddingField x = EmbeddingField::sample(g, 2, [&](std::span<const double> xi, std::span<double> out) {
      disp(xi, out);
      out[0] += xi[0];
      out[1] += xi[1];
    });
    DeformationMeasure dm = deformation_measure(x, ref, AmbientMetric::euclidean(2));
    DifferentialField du = differential(ue);
    double err = 0.0, grad = 0.0;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      Eigen::MatrixXd m = du.matrix(n);
      Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
      grad = std::max(grad, m.cwiseAbs().maxCoeff());
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          err = std::max(err, std::abs(0.5 * dm.delta[n][static_cast<std::size_t>(2 * a + b)] - sym(a, b)));
    }
    CHECK(err <= 2.0 * grad * grad);
  }
}

TEST_CASE("time derivative") {
  BodyGrid l = line(6, 0.2);
  const double v = 0.4, dt = 0.1;
  std::vector<EmbeddingField> hist, still, shifted;
  for (int i = 0; i < 5; ++i) {
    hist.push_back(stretch(l, 1.0 + v * i * dt));
    still.push_back(stretch(l, 1.3));
    shifted.push_back(EmbeddingField::affine(l, Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Constant(1, 0.7 * i)));
  }
  auto dd = time_derivative(hist, dt, AmbientMetric::euclidean(1));
  REQUIRE(dd.size() == 5);
  for (int i = 0; i < 5; ++i)
    for (const auto& t : dd[static_cast<std::size_t>(i)])
      CHECK(t[0] == doctest::Approx(2.0 * v * (1.0 + v * i * dt)).epsilon(1e-10));
  for (const auto& f : time_derivative(still, dt, AmbientMetric::euclidean(1)))
    for (const auto& t : f) CHECK(t.max_abs() == doctest::Approx(0.0).scale(1.0));
  for (const auto& f : time_derivative(shifted, dt, AmbientMetric::euclidean(1)))
    for (const auto& t : f) CHECK(t.max_abs() < 1e-12);
  CHECK_THROWS_AS(time_derivative({still[0]}, dt, AmbientMetric::euclidean(1)), HistoryError);
}

TEST_CASE("ambient metric gradient") {
  AmbientMetric m(2, 2, [](std::span<const double> x) {
    return Tensor(2, 2, {1.0 + x[0] * x[0], x[1], x[1], 2.0 + std::sin(x[0])});
  });
  CHECK_FALSE(m.has_analytic_gradient());
  std::vector<double> x{0.3, -0.7};
  auto g = m.gradient(x);
  CHECK(g[0][0] == doctest::Approx(0.6).epsilon(1e-8));
  CHECK(g[0][3] == doctest::Approx(std::cos(0.3)).epsilon(1e-8));
  CHECK(g[1][1] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(g[1][0] == doctest::Approx(0.0).scale(1.0));
  CHECK(AmbientMetric::euclidean(3).is_constant());
}
