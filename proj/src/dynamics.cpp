#include "deform/dynamics.hpp"

#include <cmath>

#include "deform/simd.hpp"

namespace deform {

std::string face_name(int body_dim, int face) {
  if (body_dim == 1) return face == 0 ? "left" : "right";
  static const char* axes[] = {"x", "y", "z"};
  const int axis = face / 2;
  std::string base = axis < 3 ? axes[axis] : "axis" + std::to_string(axis);
  return base + (face % 2 == 0 ? "min" : "max");
}

int face_index(int body_dim, const std::string& name) {
  for (int f = 0; f < 2 * body_dim; ++f) {
    if (face_name(body_dim, f) == name) return f;
    if (body_dim == 1 && name == (f == 0 ? "xmin" : "xmax")) return f;
  }
  return -1;
}

DofMap::DofMap(const BodyGrid& grid, int n, const std::vector<FaceCondition>& faces) : n_(n) {
  const int nf = 2 * grid.dim();
  if (static_cast<int>(faces.size()) != nf) throw ShapeError("boundary needs one condition per face");
  for (const auto& f : faces) {
    Eigen::MatrixXd frame(n, 0);
    Eigen::VectorXd point = Eigen::VectorXd::Zero(n);
    if (f.kind == BoundaryKind::Sliding) {
      if (static_cast<int>(f.point.size()) != n) throw ShapeError("sliding point has wrong dimension");
      if (f.tangents.empty()) throw ShapeError("sliding face needs at least one tangent");
      Eigen::MatrixXd t(n, static_cast<Eigen::Index>(f.tangents.size()));
      for (std::size_t j = 0; j < f.tangents.size(); ++j) {
        if (static_cast<int>(f.tangents[j].size()) != n) throw ShapeError("sliding tangent has wrong dimension");
        for (int a = 0; a < n; ++a) t(a, static_cast<Eigen::Index>(j)) = f.tangents[j][static_cast<std::size_t>(a)];
      }
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(t);
      if (is_singular(t.transpose() * t)) throw ShapeError("sliding tangents are linearly dependent");
      frame = qr.householderQ() * Eigen::MatrixXd::Identity(n, t.cols());
      for (int a = 0; a < n; ++a) point(a) = f.point[static_cast<std::size_t>(a)];
    }
    frames_.push_back(frame);
    points_.push_back(point);
  }
  const std::size_t N = grid.node_count();
  kind_.assign(N, BoundaryKind::Free);
  face_.assign(N, -1);
  for (std::size_t node = 0; node < N; ++node) {
    int pinned = -1, sliding = -1, free = -1;
    for (int a = 0; a < grid.dim(); ++a) {
      const int i = grid.axis_index(node, a);
      const int c = grid.counts()[static_cast<std::size_t>(a)];
      for (int f : {i == 0 ? 2 * a : -1, i == c - 1 ? 2 * a + 1 : -1}) {
        if (f < 0) continue;
        switch (faces[static_cast<std::size_t>(f)].kind) {
          case BoundaryKind::Pinned:
            if (pinned < 0) pinned = f;
            break;
          case BoundaryKind::Sliding:
            if (sliding < 0) sliding = f;
            break;
          case BoundaryKind::Free:
            if (free < 0) free = f;
            break;
        }
      }
    }
    if (pinned >= 0) {
      kind_[node] = BoundaryKind::Pinned;
      face_[node] = pinned;
    } else if (sliding >= 0) {
      kind_[node] = BoundaryKind::Sliding;
      face_[node] = sliding;
      size_ += static_cast<std::size_t>(frames_[static_cast<std::size_t>(sliding)].cols());
    } else {
      face_[node] = free;
      size_ += static_cast<std::size_t>(n);
    }
  }
}

std::vector<double> DofMap::gather(std::vector<double>& x) const {
  std::vector<double> q;
  q.reserve(size_);
  const auto n = static_cast<std::size_t>(n_);
  for (std::size_t node = 0; node < kind_.size(); ++node) {
    double* xv = x.data() + node * n;
    if (kind_[node] == BoundaryKind::Free) {
      q.insert(q.end(), xv, xv + n);
    } else if (kind_[node] == BoundaryKind::Sliding) {
      Eigen::Map<Eigen::VectorXd> v(xv, n_);
      const Eigen::VectorXd c = frame(node).transpose() * (v - point(node));
      v = point(node) + frame(node) * c;
      q.insert(q.end(), c.data(), c.data() + c.size());
    }
  }
  return q;
}

void DofMap::scatter(std::span<const double> q, std::vector<double>& x) const {
  const auto n = static_cast<std::size_t>(n_);
  std::size_t k = 0;
  for (std::size_t node = 0; node < kind_.size(); ++node) {
    double* xv = x.data() + node * n;
    if (kind_[node] == BoundaryKind::Free) {
      for (std::size_t a = 0; a < n; ++a) xv[a] = q[k++];
    } else if (kind_[node] == BoundaryKind::Sliding) {
      const Eigen::MatrixXd& t = frame(node);
      Eigen::Map<const Eigen::VectorXd> c(q.data() + k, t.cols());
      Eigen::Map<Eigen::VectorXd>(xv, n_) = point(node) + t * c;
      k += static_cast<std::size_t>(t.cols());
    }
  }
}

void DofMap::project(std::span<const double> g, std::span<double> out, std::span<const double> scale) const {
  const auto n = static_cast<std::size_t>(n_);
  std::size_t k = 0;
  for (std::size_t node = 0; node < kind_.size(); ++node) {
    const double sc = scale.empty() ? 1.0 : scale[node];
    const double* gv = g.data() + node * n;
    if (kind_[node] == BoundaryKind::Free) {
      for (std::size_t a = 0; a < n; ++a) out[k++] = gv[a] / sc;
    } else if (kind_[node] == BoundaryKind::Sliding) {
      const Eigen::VectorXd c = frame(node).transpose() * Eigen::Map<const Eigen::VectorXd>(gv, n_);
      for (Eigen::Index j = 0; j < c.size(); ++j) out[k++] = c(j) / sc;
    }
  }
}

namespace {

struct ReferenceData {
  TensorField theta0_b;
  TensorField theta0_inv;
  std::vector<double> varpi0;
  Admissibility adm;
  int inv_count = 1;
};

ReferenceData reference_data(const Scenario& s) {
  ReferenceData r;
  if (!(s.reference.grid() == s.grid)) throw ShapeError("reference embedding does not match the body grid");
  if (s.ambient.n() != s.reference.ambient_dim()) throw ShapeError("ambient dimension mismatch");
  r.theta0_b = pullback(s.reference, s.ambient);
  const int k = s.ambient.degree() / 2;
  r.adm = admissibility(k, s.grid.dim());
  for (std::size_t node = 0; node < r.theta0_b.size(); ++node) {
    try {
      r.theta0_inv.push_back(flat_inverse(r.theta0_b[node]));
    } catch (const SingularError&) {
      throw SingularError("background metric is not flat-invertible", static_cast<long>(node));
    }
    r.varpi0.push_back(s.model.measure == MeasureKind::Reference ? volume_density(r.theta0_b[node], r.adm) : 1.0);
  }
  r.inv_count = invariant_count(s.model.elastic);
  for (const auto& t : s.model.node_elastic) r.inv_count = std::max(r.inv_count, invariant_count(t));
  if (s.model.kinetic) r.inv_count = std::max(r.inv_count, invariant_count(s.model.kin));
  return r;
}

// flux^beta_A += sum_s sum_{other slots} g[..beta@s..] * (theta with all
// slots but s pulled back by dx)[..A@s..].
void add_flux(const Tensor& g, const Tensor& theta, const Eigen::MatrixXd& dx, Eigen::MatrixXd& flux) {
  const int p = theta.degree();
  const int n = theta.dim();
  const int d = static_cast<int>(dx.cols());
  if (p == 2) {
    using RM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RM> t(theta.components().data(), n, n);
    const Eigen::Map<const RM> gm(g.components().data(), d, d);
    flux.noalias() += t * dx * gm.transpose();
    flux.noalias() += t.transpose() * dx * gm;
    return;
  }
  std::vector<std::size_t> gstride(static_cast<std::size_t>(p));
  for (int j = p - 1; j >= 0; --j)
    gstride[static_cast<std::size_t>(j)] = j == p - 1 ? 1 : gstride[static_cast<std::size_t>(j) + 1] * static_cast<std::size_t>(d);
  std::vector<int> idx(static_cast<std::size_t>(p));
  for (int s = 0; s < p; ++s) {
    MixedTensor m = MixedTensor::from(theta);
    for (int j = 0; j < p; ++j)
      if (j != s) m = m.contract_slot(j, dx);
    for (std::size_t off = 0; off < m.c.size(); ++off) {
      std::size_t rem = off;
      for (int j = p - 1; j >= 0; --j) {
        const auto dj = static_cast<std::size_t>(m.dims[static_cast<std::size_t>(j)]);
        idx[static_cast<std::size_t>(j)] = static_cast<int>(rem % dj);
        rem /= dj;
      }
      std::size_t base = 0;
      for (int j = 0; j < p; ++j)
        if (j != s) base += gstride[static_cast<std::size_t>(j)] * static_cast<std::size_t>(idx[static_cast<std::size_t>(j)]);
      const int a = idx[static_cast<std::size_t>(s)];
      for (int beta = 0; beta < d; ++beta)
        flux(a, beta) += g[base + gstride[static_cast<std::size_t>(s)] * static_cast<std::size_t>(beta)] * m.c[off];
    }
  }
}

// Chain rule from per-node d action / d Theta_B (g) to d action / d x.
std::vector<double> chain_to_positions(const BodyGrid& grid, const EmbeddingField& x, const AmbientMetric& ambient,
                                       const DifferentialField& df, const TensorField& thetas, const TensorField& g) {
  const std::size_t N = grid.node_count();
  const int n = x.ambient_dim();
  const int d = grid.dim();
  DifferentialField flux(N, n, d);
  std::vector<double> grad(N * static_cast<std::size_t>(n), 0.0);
  Eigen::MatrixXd f(n, d);
  for (std::size_t node = 0; node < N; ++node) {
    const Eigen::MatrixXd dx = df.matrix(node);
    f.setZero();
    add_flux(g[node], thetas[node], dx, f);
    flux.set(node, f);
    if (!ambient.is_constant()) {
      const auto grads = ambient.gradient(x.at(node));
      for (int b = 0; b < n; ++b)
        grad[node * static_cast<std::size_t>(n) + static_cast<std::size_t>(b)] +=
            pairing(g[node], pullback_tensor(grads[static_cast<std::size_t>(b)], dx));
    }
  }
  differential_adjoint(grid, flux, grad);
  return grad;
}

ActionGradient evaluate(const Scenario& s, const ReferenceData& ref, const std::vector<EmbeddingField>& slices) {
  const bool evolution = s.mode == Mode::Evolution;
  const std::size_t S = slices.size();
  if (S == 0 || (!evolution && S != 1)) throw ShapeError("static evaluation takes exactly one slice");
  if (evolution && S < 2) throw HistoryError("evolution needs at least 2 time slices");
  const std::size_t N = s.grid.node_count();
  const int n = s.ambient.n();
  const auto nn = static_cast<std::size_t>(n);
  const double dt = evolution ? s.duration / static_cast<double>(S - 1) : 0.0;
  const std::vector<double> wt = evolution ? BodyGrid::axis_weights(static_cast<int>(S), dt) : std::vector<double>{1.0};
  const bool kinetic = evolution && s.model.kinetic;
  const bool current = s.model.measure == MeasureKind::Current;
  const int T = static_cast<int>(S);

  std::vector<DifferentialField> df(S);
  std::vector<TensorField> thetas(S), theta_b(S), g(S);
  for (std::size_t t = 0; t < S; ++t) {
    const EmbeddingField& x = slices[t];
    if (!(x.grid() == s.grid) || x.ambient_dim() != n) throw ShapeError("candidate does not match scenario grid");
    df[t] = differential(x);
    thetas[t].reserve(N);
    theta_b[t].reserve(N);
    for (std::size_t node = 0; node < N; ++node) {
      const Eigen::MatrixXd dx = df[t].matrix(node);
      check_embedding_rank(dx, node);
      thetas[t].push_back(s.ambient(x.at(node)));
      theta_b[t].push_back(pullback_tensor(thetas[t].back(), dx));
    }
    g[t].assign(N, Tensor(theta_b[t][0].degree(), theta_b[t][0].dim()));
  }

  ActionGradient out;
  out.weight.assign(S, std::vector<double>(N, 0.0));
  for (std::size_t t = 0; t < S; ++t) {
    for (std::size_t node = 0; node < N; ++node) {
      const Tensor& inv = ref.theta0_inv[node];
      const Tensor delta = theta_b[t][node] - ref.theta0_b[node];
      const LameTable& el = s.model.elastic_at(node);
      double f = energy_density(el, invariants_at(delta, inv, invariant_count(el)));
      Tensor sigma = stress_at(el, delta, inv);
      Tensor pi;
      if (kinetic) {
        Tensor dd(delta.degree(), delta.dim());
        for (int j = 0; j < T; ++j) {
          const double c = stencil_coefficient(T, dt, static_cast<int>(t), j);
          if (c != 0.0) dd += theta_b[static_cast<std::size_t>(j)][node] * c;
        }
        f += energy_density(s.model.kin, invariants_at(dd, inv, invariant_count(s.model.kin)));
        pi = stress_at(s.model.kin, dd, inv);
      }
      const double u = s.model.potential.value(slices[t].at(node));
      double varpi;
      if (current) {
        try {
          varpi = volume_density(theta_b[t][node], ref.adm);
        } catch (const SingularError&) {
          throw SingularError("pulled-back metric is degenerate", static_cast<long>(node));
        }
      } else {
        varpi = ref.varpi0[node];
      }
      const double w = s.grid.weight(node) * wt[t] * (evolution ? s.time_metric : 1.0);
      const double wv = w * varpi;
      out.action += wv * (f + u);
      out.weight[t][node] = wv;
      Tensor& gt = g[t][node];
      gt += sigma * wv;
      if (current) gt += log_volume_gradient(theta_b[t][node]) * (wv * (f + u));
      if (kinetic)
        for (int j = 0; j < T; ++j) {
          const double c = stencil_coefficient(T, dt, static_cast<int>(t), j);
          if (c != 0.0) g[static_cast<std::size_t>(j)][node] += pi * (c * wv);
        }
    }
  }

  out.grad.resize(S);
  std::vector<double> ug(nn);
  for (std::size_t t = 0; t < S; ++t) {
    out.grad[t] = chain_to_positions(s.grid, slices[t], s.ambient, df[t], thetas[t], g[t]);
    if (!s.model.potential.closed())
      for (std::size_t node = 0; node < N; ++node) {
        s.model.potential.gradient(slices[t].at(node), ug);
        for (std::size_t b = 0; b < nn; ++b) out.grad[t][node * nn + b] += out.weight[t][node] * ug[b];
      }
  }
  return out;
}

std::vector<double> residual_of(const std::vector<double>& grad, const std::vector<double>& weight, std::size_t n) {
  std::vector<double> r(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) r[i] = -grad[i] / weight[i / n];
  return r;
}

std::vector<FaceReport> face_reports(const Scenario& s, const DofMap& map, const std::vector<double>& r) {
  const int nf = 2 * s.grid.dim();
  const auto n = static_cast<std::size_t>(s.ambient.n());
  std::vector<FaceReport> out(static_cast<std::size_t>(nf));
  for (int f = 0; f < nf; ++f) {
    out[static_cast<std::size_t>(f)].face = face_name(s.grid.dim(), f);
    out[static_cast<std::size_t>(f)].kind = s.faces[static_cast<std::size_t>(f)].kind;
  }
  for (std::size_t node = 0; node < s.grid.node_count(); ++node) {
    const int f = map.face(node);
    if (f < 0) continue;
    FaceReport& rep = out[static_cast<std::size_t>(f)];
    Eigen::Map<const Eigen::VectorXd> rv(r.data() + node * n, static_cast<Eigen::Index>(n));
    if (map.kind(node) == BoundaryKind::Free) {
      rep.norm = std::max(rep.norm, rv.cwiseAbs().maxCoeff());
    } else if (map.kind(node) == BoundaryKind::Sliding) {
      const Eigen::VectorXd tang = map.frame(node).transpose() * rv;
      const Eigen::VectorXd normal = rv - map.frame(node) * tang;
      rep.norm = std::max(rep.norm, tang.cwiseAbs().maxCoeff());
      rep.normal = std::max(rep.normal, normal.cwiseAbs().maxCoeff());
    }
  }
  return out;
}

double reduced_max(const DofMap& map, const std::vector<double>& grad, const std::vector<double>& weight) {
  std::vector<double> q(map.size());
  map.project(grad, q, weight);
  return simd::max_abs(q);
}

void fill_interior(const Scenario& s, ELResidual& res, std::size_t first, std::size_t last) {
  const auto n = static_cast<std::size_t>(s.ambient.n());
  double sum = 0.0, wsum = 0.0;
  for (std::size_t t = first; t < last; ++t)
    for (std::size_t node = 0; node < s.grid.node_count(); ++node) {
      if (s.grid.on_boundary(node)) continue;
      const double w = s.grid.weight(node);
      for (std::size_t a = 0; a < n; ++a) {
        const double v = res.residual[t][node * n + a];
        res.interior_max = std::max(res.interior_max, std::fabs(v));
        sum += w * v * v;
      }
      wsum += w;
    }
  res.interior_l2 = wsum > 0.0 ? std::sqrt(sum / wsum) : 0.0;
}

}  // namespace

ActionGradient action_gradient(const Scenario& s, const std::vector<EmbeddingField>& slices) {
  return evaluate(s, reference_data(s), slices);
}

double action(const Scenario& s, const EmbeddingField& candidate) {
  return action_gradient(s, {candidate}).action;
}

double action(const Scenario& s, const std::vector<EmbeddingField>& history) {
  return action_gradient(s, history).action;
}

ELResidual el_residual(const Scenario& s, const EmbeddingField& candidate) {
  const ActionGradient ag = action_gradient(s, {candidate});
  const auto n = static_cast<std::size_t>(s.ambient.n());
  ELResidual res;
  res.residual.push_back(residual_of(ag.grad[0], ag.weight[0], n));
  fill_interior(s, res, 0, 1);
  const DofMap map(s.grid, s.ambient.n(), s.faces);
  res.dof_max = reduced_max(map, ag.grad[0], ag.weight[0]);
  res.faces = face_reports(s, map, res.residual[0]);
  return res;
}

ELResidual el_residual(const Scenario& s, const std::vector<EmbeddingField>& history) {
  const ActionGradient ag = action_gradient(s, history);
  const auto n = static_cast<std::size_t>(s.ambient.n());
  const std::size_t S = history.size();
  ELResidual res;
  for (std::size_t t = 0; t < S; ++t) res.residual.push_back(residual_of(ag.grad[t], ag.weight[t], n));
  fill_interior(s, res, 1, S - 1);
  const DofMap map(s.grid, s.ambient.n(), s.faces);
  res.faces.clear();
  for (std::size_t t = 1; t + 1 < S; ++t) {
    res.dof_max = std::max(res.dof_max, reduced_max(map, ag.grad[t], ag.weight[t]));
    const auto faces = face_reports(s, map, res.residual[t]);
    if (res.faces.empty()) res.faces = faces;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      res.faces[f].norm = std::max(res.faces[f].norm, faces[f].norm);
      res.faces[f].normal = std::max(res.faces[f].normal, faces[f].normal);
    }
  }
  for (std::size_t t : {std::size_t{0}, S - 1}) res.end_slice_max = std::max(res.end_slice_max, simd::max_abs(res.residual[t]));
  return res;
}

std::vector<FaceReport> boundary_report(const Scenario& s, const EmbeddingField& candidate) {
  return el_residual(s, candidate).faces;
}

std::vector<double> reference_residual(const Scenario& s, const EmbeddingField& candidate) {
  if (s.mode != Mode::Static) throw ShapeError("reference_residual needs a static scenario");
  const ReferenceData ref = reference_data(s);
  const std::size_t N = s.grid.node_count();
  const auto n = static_cast<std::size_t>(s.ambient.n());
  const DifferentialField df = differential(candidate);
  const DifferentialField df0 = differential(s.reference);
  TensorField thetas0, g;
  std::vector<double> wv(N);
  for (std::size_t node = 0; node < N; ++node) {
    const Eigen::MatrixXd dx = df.matrix(node);
    check_embedding_rank(dx, node);
    const Tensor theta_b = pullback_tensor(s.ambient(candidate.at(node)), dx);
    thetas0.push_back(s.ambient(s.reference.at(node)));
    const Tensor& inv = ref.theta0_inv[node];
    const Tensor delta = theta_b - ref.theta0_b[node];
    const LameTable& el = s.model.elastic_at(node);
    const int k = delta.degree() / 2;
    const Eigen::MatrixXd gm = flatten(inv).matrix;
    const Eigen::MatrixXd bar = flatten(delta).matrix * gm;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(bar.rows(), bar.cols());
    const Eigen::MatrixXd bar2 = bar * bar;
    const auto p = el.partials(bar.trace(), bar2.trace(), (bar2 * bar).trace());
    // d tr(bar^i) / d Theta0 = -i (G bar^{i-1} (I + bar))^T
    Eigen::MatrixXd dm = -p[0] * gm * (id + bar);
    if (p[1] != 0.0) dm -= 2.0 * p[1] * gm * bar * (id + bar);
    if (p[2] != 0.0) dm -= 3.0 * p[2] * gm * bar2 * (id + bar);
    Tensor gt = unflatten(dm.transpose(), k, delta.dim());
    const double varpi = s.model.measure == MeasureKind::Reference ? ref.varpi0[node]
                                                                    : volume_density(theta_b, ref.adm);
    const double w = s.grid.weight(node) * varpi;
    gt *= w;
    if (s.model.measure == MeasureKind::Reference) {
      const double f = el.density(bar.trace(), bar2.trace(), (bar2 * bar).trace()) +
                       s.model.potential.value(candidate.at(node));
      gt += log_volume_gradient(ref.theta0_b[node]) * (w * f);
    }
    g.push_back(std::move(gt));
    wv[node] = w;
  }
  const std::vector<double> grad = chain_to_positions(s.grid, s.reference, s.ambient, df0, thetas0, g);
  return residual_of(grad, wv, n);
}

StaticResult solve_static(const Scenario& s) {
  if (s.mode != Mode::Static) throw ShapeError("solve_static needs a static scenario");
  const ReferenceData ref = reference_data(s);
  const DofMap map(s.grid, s.ambient.n(), s.faces);
  std::vector<double> base = s.initial.values();
  std::vector<double> q0 = map.gather(base);
  std::vector<EmbeddingField> work{EmbeddingField(s.grid, s.ambient.n(), base)};
  auto objective = [&](std::span<const double> q, std::span<double> gq) {
    map.scatter(q, work[0].values());
    const ActionGradient ag = evaluate(s, ref, work);
    map.project(ag.grad[0], gq);
    return ObjectiveValue{ag.action, reduced_max(map, ag.grad[0], ag.weight[0])};
  };
  OptimizeResult opt = minimize(objective, std::move(q0), s.solver);
  if (!opt.converged)
    throw ConvergenceError("static solver stopped after " + std::to_string(opt.iterations) +
                               " iterations with residual " + std::to_string(opt.norm),
                           std::move(opt.trace));
  StaticResult r;
  map.scatter(opt.x, work[0].values());
  r.embedding = work[0];
  r.residual = el_residual(s, r.embedding);
  r.trace = std::move(opt.trace);
  r.action = opt.f;
  return r;
}

EvolutionResult solve_evolution(const Scenario& s) {
  if (s.mode != Mode::Evolution) throw ShapeError("solve_evolution needs an evolution scenario");
  if (s.history.size() < 2) throw HistoryError("evolution needs at least 2 time slices");
  const ReferenceData ref = reference_data(s);
  const DofMap map(s.grid, s.ambient.n(), s.faces);
  const std::size_t S = s.history.size();
  std::vector<EmbeddingField> work = s.history;
  std::vector<double> q0;
  for (std::size_t t = 1; t + 1 < S; ++t) {
    const auto q = map.gather(work[t].values());
    q0.insert(q0.end(), q.begin(), q.end());
  }
  const std::size_t m = map.size();
  auto objective = [&](std::span<const double> q, std::span<double> gq) {
    for (std::size_t t = 1; t + 1 < S; ++t) map.scatter(q.subspan((t - 1) * m, m), work[t].values());
    const ActionGradient ag = evaluate(s, ref, work);
    double norm = 0.0;
    for (std::size_t t = 1; t + 1 < S; ++t) {
      map.project(ag.grad[t], gq.subspan((t - 1) * m, m));
      norm = std::max(norm, reduced_max(map, ag.grad[t], ag.weight[t]));
    }
    return ObjectiveValue{ag.action, norm};
  };
  OptimizeResult opt = minimize(objective, std::move(q0), s.solver);
  if (!opt.converged)
    throw ConvergenceError("evolution solver stopped after " + std::to_string(opt.iterations) +
                               " iterations with residual " + std::to_string(opt.norm),
                           std::move(opt.trace));
  for (std::size_t t = 1; t + 1 < S; ++t)
    map.scatter(std::span<const double>(opt.x).subspan((t - 1) * m, m), work[t].values());
  EvolutionResult r;
  r.history = std::move(work);
  r.residual = el_residual(s, r.history);
  r.trace = std::move(opt.trace);
  r.action = opt.f;
  return r;
}

}  // namespace deform
