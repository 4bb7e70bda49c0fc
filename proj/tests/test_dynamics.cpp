#include "doctest.h"

#include <cmath>
#include <random>

#include "deform/dynamics.hpp"
#include "deform/errors.hpp"
#include "fixtures.hpp"

using namespace deform;

namespace {

Eigen::MatrixXd membrane_map() {
  Eigen::MatrixXd a(3, 2);
  a << 1.2, 0.1, 0.2, 0.9, 0.3, -0.4;
  return a;
}

Eigen::Vector3d membrane_offset() { return {0.1, 0.2, 0.3}; }

Eigen::Matrix3d rotation(double a) {
  Eigen::Matrix3d r;
  r = Eigen::AngleAxisd(a, Eigen::Vector3d(1, 2, 2).normalized());
  return r;
}

}  // namespace

TEST_CASE("face names") {
  CHECK(face_name(1, 0) == "left");
  CHECK(face_name(1, 1) == "right");
  CHECK(face_name(2, 3) == "ymax");
  CHECK(face_index(2, "xmin") == 0);
  CHECK(face_index(3, "zmax") == 5);
  CHECK(face_index(1, "xmax") == 1);
  CHECK(face_index(2, "left") == -1);
}

TEST_CASE("dof map roles") {
  BodyGrid g({4, 3}, {1.0, 1.0});
  auto faces = fixture::all_faces(2, BoundaryKind::Free);
  faces[0].kind = BoundaryKind::Pinned;
  faces[2].kind = BoundaryKind::Sliding;
  faces[2].point = {0.0, 0.0};
  faces[2].tangents = {{2.0, 0.0}};
  DofMap map(g, 2, faces);
  CHECK(map.kind(0) == BoundaryKind::Pinned);          // corner: pinned wins
  CHECK(map.kind(1) == BoundaryKind::Sliding);
  CHECK(map.kind(5) == BoundaryKind::Free);
  CHECK(map.face(5) == -1);
  // 3 pinned, 3 sliding (1 dof each), 6 free (2 dofs each).
  CHECK(map.size() == 3 + 12);

  std::vector<double> x(24, 0.5);
  auto q = map.gather(x);
  CHECK(x[2 * 1 + 1] == 0.0);  // projected onto y = 0
  std::vector<double> y(24, 0.0);
  map.scatter(q, y);
  for (std::size_t node = 1; node < 12; ++node)
    if (map.kind(node) != BoundaryKind::Pinned) {
      CHECK(y[2 * node] == doctest::Approx(x[2 * node]));
      CHECK(y[2 * node + 1] == doctest::Approx(x[2 * node + 1]));
    }
  faces[2].tangents = {{1.0, 0.0}, {2.0, 0.0}};
  CHECK_THROWS_AS(DofMap(g, 2, faces), ShapeError);
  CHECK_THROWS_AS(DofMap(g, 2, fixture::all_faces(1, BoundaryKind::Free)), ShapeError);
}

TEST_CASE("action examples") {
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 2);
  Scenario s = fixture::membrane({5, 4}, 0.25, id, Eigen::Vector3d::Zero(), 0.0, 1);
  CHECK(action(s, s.reference) == 0.0);

  // Polyakov: (T/2) sum w (|Dy|^2 - d) sqrt(det Theta0), written with the dense stencil.
  Scenario p = fixture::membrane({5, 4}, 0.25, membrane_map(), membrane_offset(), 0.05, 2);
  const EmbeddingField& y = p.initial;
  Eigen::MatrixXd d0 = fixture::stencil_1d(5, 0.25), d1 = fixture::stencil_1d(4, 0.25);
  auto w0 = fixture::weights_1d(5, 0.25), w1 = fixture::weights_1d(4, 0.25);
  double expected = 0.0;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 5; ++i) {
      double grad2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        double dx = 0.0, dy = 0.0;
        for (int m = 0; m < 5; ++m) dx += d0(i, m) * y.at(static_cast<std::size_t>(j * 5 + m))[static_cast<std::size_t>(a)];
        for (int m = 0; m < 4; ++m) dy += d1(j, m) * y.at(static_cast<std::size_t>(m * 5 + i))[static_cast<std::size_t>(a)];
        grad2 += dx * dx + dy * dy;
      }
      expected += w0[static_cast<std::size_t>(i)] * w1[static_cast<std::size_t>(j)] * 0.5 * (grad2 - 2.0);
    }
  CHECK(action(p, y) == doctest::Approx(expected).epsilon(1e-10));

  // 1D stretch with the Hooke table: volume (mu D2 + lambda/2 D1^2).
  Scenario h = fixture::hanging_bar(9, 0.125, 0.0, 0.0);
  h.model.potential = Potential{};
  h.model.elastic.mu2_01 = 0.7;
  h.model.elastic.mu2_20 = 0.4;
  const double lambda = 1.1, dd = lambda * lambda - 1.0;
  EmbeddingField st = EmbeddingField::affine(h.grid, Eigen::MatrixXd::Constant(1, 1, lambda), Eigen::VectorXd::Zero(1));
  CHECK(action(h, st) == doctest::Approx(1.0 * (0.7 * dd * dd + 0.4 * dd * dd)).epsilon(1e-12));

  CHECK_THROWS_AS(action(p, EmbeddingField::affine(BodyGrid({3, 3}, {0.5, 0.5}), membrane_map(), membrane_offset())),
                  ShapeError);
}

TEST_CASE("current measure needs a nondegenerate pullback") {
  Eigen::MatrixXd null(3, 2);
  null << 1, 0, 1, 0, 0, 1;  // first column is a null direction of diag(-1, 1, 1)
  Scenario s = fixture::membrane({4, 4}, 0.25, null, Eigen::Vector3d::Zero(), 0.0, 1);
  s.model.measure = MeasureKind::Current;
  s.ambient = AmbientMetric::constant(Tensor(2, 3, {-1, 0, 0, 0, 1, 0, 0, 0, 1}));
  s.reference = EmbeddingField::affine(s.grid, Eigen::MatrixXd::Identity(3, 2), Eigen::VectorXd::Zero(3));
  CHECK_THROWS_AS(action(s, s.initial), SingularError);
}

TEST_CASE("residual is the exact action gradient") {
  std::mt19937_64 rng(51);
  Scenario s = fixture::rich_static(3);
  for (int rep = 0; rep < 5; ++rep) {
    auto dx = fixture::interior_direction(s, 1, rng);
    CHECK(fixture::directional_mismatch(s, {s.initial}, dx, 1e-3) < 1e-7);
  }
  Scenario e = fixture::rich_evolution(4);
  for (int rep = 0; rep < 5; ++rep) {
    auto dx = fixture::interior_direction(e, e.history.size(), rng);
    CHECK(fixture::directional_mismatch(e, e.history, dx, 1e-3) < 1e-7);
  }
}

TEST_CASE("analytic and finite-difference metric gradients agree in the residual") {
  Scenario s = fixture::rich_static(5);
  Scenario t = s;
  const AmbientMetric m = s.ambient;
  t.ambient = AmbientMetric(3, 2, [m](std::span<const double> x) { return m(x); },
                            [m](std::span<const double> x) { return m.fd_gradient(x); });
  const auto a = el_residual(s, s.initial).residual[0];
  const auto b = el_residual(t, s.initial).residual[0];
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("affine maps are discrete harmonic") {
  Scenario s = fixture::membrane({7, 6}, 0.2, membrane_map(), membrane_offset(), 0.0, 1);
  ELResidual r = el_residual(s, s.initial);
  CHECK(r.interior_max <= 1e-8);
  CHECK(r.dof_max <= 1e-8);
  for (const auto& f : r.faces) CHECK(f.norm == 0.0);
}

TEST_CASE("static solve: pinned affine membrane") {
  Scenario s = fixture::membrane({9, 9}, 0.125, membrane_map(), membrane_offset(), 0.05, 7);
  StaticResult r = solve_static(s);
  CHECK(fixture::affine_error(r.embedding, membrane_map(), membrane_offset()) <= 1e-6);
  CHECK(r.residual.interior_max <= 1e-8);
  // Monotone up to the line search's roundoff allowance.
  const double slack = 1e-13 * std::abs(r.trace.front().action);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].action <= r.trace[i - 1].action + slack);

  // Independent of the initial guess.
  Scenario s2 = s;
  s2.initial = fixture::perturbed(EmbeddingField::affine(s.grid, membrane_map(), membrane_offset()), 0.08, 99);
  StaticResult r2 = solve_static(s2);
  double diff = 0.0;
  for (std::size_t i = 0; i < r.embedding.values().size(); ++i)
    diff = std::max(diff, std::abs(r.embedding.values()[i] - r2.embedding.values()[i]));
  CHECK(diff <= 1e-6);
}

TEST_CASE("rigid ambient motions preserve solutions") {
  Scenario s = fixture::membrane({6, 6}, 0.2, membrane_map(), membrane_offset(), 0.05, 8);
  s.model.measure = MeasureKind::Current;
  s.initial = fixture::perturbed(EmbeddingField::affine(s.grid, membrane_map() * 0.8, membrane_offset()), 0.05, 8);
  StaticResult r = solve_static(s);
  Eigen::Matrix3d q = rotation(0.7);
  Eigen::Vector3d t(0.3, -1.0, 2.0);
  Scenario moved = s;
  moved.initial = r.embedding;
  for (std::size_t node = 0; node < s.grid.node_count(); ++node) {
    Eigen::Map<Eigen::Vector3d> p(moved.initial.at(node).data());
    p = q * p + t;
  }
  CHECK(action(moved, moved.initial) == doctest::Approx(r.action).epsilon(1e-10));
  CHECK(el_residual(moved, moved.initial).dof_max <= 10 * s.solver.tol);
}

TEST_CASE("hanging bar matches the linear oracle") {
  const int count = 17;
  const double h = 1.0 / 16, c = 1.0, g = 1e-3;
  Scenario s = fixture::hanging_bar(count, h, c, g);
  s.initial = fixture::perturbed(s.reference, 1e-3, 3);
  StaticResult r = solve_static(s);
  Eigen::VectorXd u = fixture::hooke_bar_displacement(count, h, c, g);
  double err = 0.0;
  for (std::size_t node = 0; node < s.grid.node_count(); ++node)
    err = std::max(err, std::abs(r.embedding.at(node)[0] - s.grid.coords(node)[0] - u(static_cast<Eigen::Index>(node))));
  CHECK(err <= 1e-6);
  CHECK(u(count - 1) < 0.0);
  // Free end: X1 vanishes at the minimizer.
  REQUIRE(r.residual.faces.size() == 2);
  CHECK(r.residual.faces[0].norm == 0.0);
  CHECK(r.residual.faces[1].kind == BoundaryKind::Free);
  CHECK(r.residual.faces[1].norm <= 1e-6);
}

TEST_CASE("sliding faces") {
  // Unit square, left/right pinned at the identity, bottom/top slide along
  // the lines y = 0 and y = 1.
  Scenario s = fixture::membrane({6, 6}, 0.2, Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d::Zero(), 0.0, 1);
  s.faces[2].kind = s.faces[3].kind = BoundaryKind::Sliding;
  s.faces[2].point = {0.0, 0.0};
  s.faces[3].point = {0.0, 1.0};
  s.faces[2].tangents = s.faces[3].tangents = {{1.0, 0.0}};
  s.initial = fixture::perturbed(s.reference, 0.03, 4, true);
  for (std::size_t node = 0; node < s.grid.node_count(); ++node)
    if (s.grid.axis_index(node, 0) == 0 || s.grid.axis_index(node, 0) == 5)
      for (int a = 0; a < 2; ++a) s.initial.at(node)[static_cast<std::size_t>(a)] = s.grid.coords(node)[static_cast<std::size_t>(a)];
  StaticResult r = solve_static(s);
  for (std::size_t node = 0; node < s.grid.node_count(); ++node) {
    if (s.grid.axis_index(node, 1) == 0) CHECK(r.embedding.at(node)[1] == doctest::Approx(0.0).scale(1.0));
    if (s.grid.axis_index(node, 1) == 5) CHECK(r.embedding.at(node)[1] == doctest::Approx(1.0));
  }
  CHECK(fixture::affine_error(r.embedding, Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d::Zero(), false) <= 1e-6);
  const auto& faces = r.residual.faces;
  CHECK(faces[2].kind == BoundaryKind::Sliding);
  CHECK(faces[2].norm <= 1e-6);
  CHECK(faces[3].norm <= 1e-6);
  CHECK(faces[2].normal > 1e-3);
}

TEST_CASE("non-convergence carries the trace") {
  Scenario s = fixture::membrane({9, 9}, 0.125, membrane_map(), membrane_offset(), 0.05, 7);
  s.solver.max_iters = 3;
  try {
    solve_static(s);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK_FALSE(e.trace().empty());
    CHECK(e.trace().size() <= 4);
  }
  Scenario ev = s;
  CHECK_THROWS_AS(solve_evolution(ev), ShapeError);
}

TEST_CASE("evolution: constant and rigid histories") {
  Scenario s = fixture::membrane({5, 5}, 0.25, membrane_map(), membrane_offset(), 0.0, 1);
  s.mode = Mode::Evolution;
  s.history.assign(5, s.initial);
  s.history[2] = fixture::perturbed(s.initial, 0.03, 5);
  s.history[3] = fixture::perturbed(s.initial, 0.03, 6);
  EvolutionResult r = solve_evolution(s);
  for (std::size_t t = 1; t < 4; ++t)
    CHECK(fixture::affine_error(r.history[t], membrane_map(), membrane_offset()) <= 1e-6);
  CHECK(r.residual.interior_max <= 1e-6);

  // Rigid translation of the reference: every slice has Delta = 0.
  Scenario rigid = fixture::membrane({5, 5}, 0.25, Eigen::MatrixXd::Identity(3, 2), Eigen::Vector3d::Zero(), 0.0, 1);
  rigid.mode = Mode::Evolution;
  for (int t = 0; t < 5; ++t)
    rigid.history.push_back(EmbeddingField::affine(rigid.grid, Eigen::MatrixXd::Identity(3, 2), Eigen::Vector3d(0.1 * t, 0.0, -0.2 * t)));
  EvolutionResult rr = solve_evolution(rigid);
  CHECK(rr.action == doctest::Approx(0.0).scale(1.0));
  CHECK(rr.residual.interior_max <= 1e-12);

  Scenario one = rigid;
  one.history.resize(1);
  CHECK_THROWS_AS(solve_evolution(one), HistoryError);
}

TEST_CASE("kinetic mode rate matches the linearized eigenvalue") {
  // F = c (Delta^1)^2 + 1/2 (Ddot, Ddot) on a 64-node bar: the action is a
  // positive quadratic form in time, so a mode with fixed end slices follows
  // a(t) = A sinh(w t) / sinh(w T) with w^2 = lambda(K, M).
  const int count = 64, slices = 17;
  const double h = 1.0 / (count - 1), c = 1.0, amp = 1e-3, duration = 1.0;
  Scenario s = fixture::hanging_bar(count, h, c, 0.0);
  s.model.potential = Potential{};
  s.model.kinetic = true;
  s.model.kin.order = 2;
  s.model.kin.mu2_01 = 0.5;
  s.mode = Mode::Evolution;
  s.duration = duration;
  s.solver.tol = 1e-8;
  for (int t = 0; t < slices; ++t) {
    const double frac = static_cast<double>(t) / (slices - 1);
    s.history.push_back(EmbeddingField::affine(s.grid, Eigen::MatrixXd::Constant(1, 1, 1.0 + amp * frac),
                                               Eigen::VectorXd::Zero(1)));
  }
  EvolutionResult r = solve_evolution(s);
  const std::size_t end = static_cast<std::size_t>(count - 1);
  const double a_mid = r.history[slices / 2].at(end)[0] - 1.0;
  const double a_end = amp;
  const double w_est = 2.0 / duration * std::acosh(a_end / (2.0 * a_mid));

  // Oracle: Rayleigh quotient of the linearized stiffness and mass on the
  // mode shape (both are multiples of D^T W D on the free nodes).
  Eigen::MatrixXd d = fixture::stencil_1d(count, h);
  auto w = fixture::weights_1d(count, h);
  Eigen::MatrixXd dwd = d.transpose() * Eigen::VectorXd::Map(w.data(), count).asDiagonal() * d;
  Eigen::MatrixXd k = 8 * c * dwd, m = 4 * 0.5 * 2 * dwd;
  Eigen::VectorXd phi(count);
  for (int i = 0; i < count; ++i) phi(i) = i * h;
  const double w_oracle = std::sqrt(phi.dot(k * phi) / phi.dot(m * phi));
  CHECK(w_est == doctest::Approx(w_oracle).epsilon(0.02));
}

TEST_CASE("coupled system with a varying background") {
  // Affine current and affine reference: both the ordinary equation and the
  // one from varying the reference embedding vanish inside.
  Scenario s = fixture::membrane({7, 7}, 1.0 / 6, membrane_map(), membrane_offset(), 0.04, 9);
  Eigen::MatrixXd b(3, 2);
  b << 1.0, 0.2, 0.0, 1.1, 0.1, 0.0;
  s.reference = EmbeddingField::affine(s.grid, b, Eigen::Vector3d(0.0, 0.1, 0.0));
  for (MeasureKind kind : {MeasureKind::Reference, MeasureKind::Current}) {
    s.model.measure = kind;
    StaticResult r = solve_static(s);
    CHECK(r.residual.interior_max <= 1e-8);
    auto rr = reference_residual(s, r.embedding);
    double interior = 0.0;
    for (std::size_t node = 0; node < s.grid.node_count(); ++node)
      if (!s.grid.on_boundary(node))
        for (int a = 0; a < 3; ++a) interior = std::max(interior, std::abs(rr[node * 3 + static_cast<std::size_t>(a)]));
    CHECK(interior <= 1e-6);
  }
}

TEST_CASE("reference residual is the gradient in the reference embedding") {
  Scenario s = fixture::rich_static(11);
  s.ambient = AmbientMetric::euclidean(3);
  std::mt19937_64 rng(52);
  for (MeasureKind kind : {MeasureKind::Reference, MeasureKind::Current}) {
    s.model.measure = kind;
    s.reference = fixture::perturbed(s.reference, 0.05, 12);
    const auto r = reference_residual(s, s.initial);
    auto dx = fixture::interior_direction(s, 1, rng)[0];
    auto shifted = [&](double t) {
      Scenario c = s;
      for (std::size_t i = 0; i < dx.size(); ++i) c.reference.values()[i] += t * dx[i];
      return action(c, s.initial);
    };
    auto central = [&](double step) { return (shifted(step) - shifted(-step)) / (2 * step); };
    const double fd = (4 * central(5e-5) - central(1e-4)) / 3;
    // The residual is normalized by w * varpi like the ordinary one.
    double analytic = 0.0;
    for (std::size_t node = 0; node < s.grid.node_count(); ++node) {
      double varpi;
      if (kind == MeasureKind::Current)
        varpi = volume_density(pullback_tensor(Tensor::unit(1, 3), differential(s.initial).matrix(node)),
                               admissibility(1, 2));
      else
        varpi = volume_density(pullback_tensor(Tensor::unit(1, 3), differential(s.reference).matrix(node)),
                               admissibility(1, 2));
      for (std::size_t a = 0; a < 3; ++a) analytic -= s.grid.weight(node) * varpi * r[node * 3 + a] * dx[node * 3 + a];
    }
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-6));
  }
}
