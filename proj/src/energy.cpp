#include "deform/energy.hpp"

#include <cmath>
#include <string>

#include "deform/errors.hpp"

namespace deform {

void LameTable::validate() const {
  if (order < 0 || order > 3) throw Error("energy order must be 0..3, got " + std::to_string(order));
  auto require_zero = [](double v, const char* name) {
    if (v != 0.0) throw Error(std::string("coefficient ") + name + " is above the declared order");
  };
  if (order < 1) require_zero(mu1_1, "mu1_1");
  if (order < 2) {
    require_zero(mu2_01, "mu2_01");
    require_zero(mu2_20, "mu2_20");
  }
  if (order < 3) {
    require_zero(mu3_001, "mu3_001");
    require_zero(mu3_110, "mu3_110");
    require_zero(mu3_300, "mu3_300");
  }
}

double LameTable::density(double d1, double d2, double d3) const {
  double f = mu0;
  if (order >= 1) f += mu1_1 * d1;
  if (order >= 2) f += mu2_01 * d2 + mu2_20 * d1 * d1;
  if (order >= 3) f += mu3_001 * d3 + mu3_110 * d1 * d2 + mu3_300 * d1 * d1 * d1;
  return f;
}

std::array<double, 3> LameTable::partials(double d1, double d2, double /*d3*/) const {
  std::array<double, 3> p{0.0, 0.0, 0.0};
  if (order >= 1) p[0] = mu1_1;
  if (order >= 2) {
    p[0] += 2.0 * mu2_20 * d1;
    p[1] = mu2_01;
  }
  if (order >= 3) {
    p[0] += mu3_110 * d2 + 3.0 * mu3_300 * d1 * d1;
    p[1] += mu3_110 * d1;
    p[2] = mu3_001;
  }
  return p;
}

Potential Potential::linear(std::vector<double> g) {
  Potential p;
  p.kind_ = Kind::Linear;
  p.params_ = std::move(g);
  return p;
}

Potential Potential::quadratic(double c, std::vector<double> center) {
  Potential p;
  p.kind_ = Kind::Quadratic;
  p.params_.push_back(c);
  p.params_.insert(p.params_.end(), center.begin(), center.end());
  return p;
}

Potential Potential::from_params(Kind kind, std::vector<double> params) {
  Potential p;
  p.kind_ = kind;
  p.params_ = std::move(params);
  if (kind == Kind::None && !p.params_.empty()) throw Error("potential 'none' takes no parameters");
  if (kind == Kind::Quadratic && p.params_.empty()) throw Error("quadratic potential needs a coefficient");
  return p;
}

double Potential::value(std::span<const double> x) const {
  switch (kind_) {
    case Kind::None:
      return 0.0;
    case Kind::Linear: {
      if (params_.size() != x.size()) throw ShapeError("linear potential dimension mismatch");
      double u = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) u += params_[i] * x[i];
      return u;
    }
    case Kind::Quadratic: {
      if (params_.size() != x.size() + 1) throw ShapeError("quadratic potential dimension mismatch");
      double r2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - params_[i + 1]) * (x[i] - params_[i + 1]);
      return 0.5 * params_[0] * r2;
    }
  }
  return 0.0;
}

void Potential::gradient(std::span<const double> x, std::span<double> out) const {
  switch (kind_) {
    case Kind::None:
      for (double& v : out) v = 0.0;
      return;
    case Kind::Linear:
      if (params_.size() != x.size()) throw ShapeError("linear potential dimension mismatch");
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = params_[i];
      return;
    case Kind::Quadratic:
      if (params_.size() != x.size() + 1) throw ShapeError("quadratic potential dimension mismatch");
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = params_[0] * (x[i] - params_[i + 1]);
      return;
  }
}

int invariant_count(const LameTable& t) { return t.order < 1 ? 1 : t.order; }

double energy_density(const LameTable& t, std::span<const double> invs) {
  auto get = [&](std::size_t i) { return i < invs.size() ? invs[i] : 0.0; };
  return t.density(get(0), get(1), get(2));
}

std::vector<double> energy_density(const EnergyModel& m, const std::vector<std::vector<double>>& invs) {
  const std::size_t nodes = invs.empty() ? 0 : invs[0].size();
  std::vector<double> f(nodes);
  std::vector<double> at(invs.size());
  for (std::size_t node = 0; node < nodes; ++node) {
    for (std::size_t i = 0; i < invs.size(); ++i) at[i] = invs[i][node];
    f[node] = energy_density(m.elastic_at(node), at);
  }
  return f;
}

Tensor stress_at(const LameTable& t, const Tensor& arg, const Tensor& theta0_inverse) {
  const int k = arg.degree() / 2;
  const Eigen::MatrixXd g = flatten(theta0_inverse).matrix;
  const Eigen::MatrixXd dg = flatten(arg).matrix * g;
  const Eigen::MatrixXd dg2 = dg * dg;
  const auto p = t.partials(dg.trace(), dg2.trace(), (dg2 * dg).trace());
  Eigen::MatrixXd s = p[0] * g;
  if (p[1] != 0.0) s += 2.0 * p[1] * (g * dg);
  if (p[2] != 0.0) s += 3.0 * p[2] * (g * dg2);
  return unflatten(s.transpose(), k, arg.dim());
}

TensorField stress(const EnergyModel& m, const DeformationMeasure& dm) {
  TensorField out;
  out.reserve(dm.delta.size());
  for (std::size_t node = 0; node < dm.delta.size(); ++node) {
    Tensor inv;
    try {
      inv = flat_inverse(dm.theta0_b[node]);
    } catch (const SingularError&) {
      throw SingularError("background metric is not flat-invertible", static_cast<long>(node));
    }
    out.push_back(stress_at(m.elastic_at(node), dm.delta[node], inv));
  }
  return out;
}

TensorField momentum(const EnergyModel& m, const DeformationMeasure& dm) {
  TensorField out;
  out.reserve(dm.delta.size());
  for (std::size_t node = 0; node < dm.delta.size(); ++node) {
    const Tensor& d = dm.delta[node];
    if (!m.kinetic) {
      out.emplace_back(d.degree(), d.dim());
      continue;
    }
    const Tensor dd = dm.delta_dot ? (*dm.delta_dot)[node] : Tensor(d.degree(), d.dim());
    out.push_back(stress_at(m.kin, dd, flat_inverse(dm.theta0_b[node])));
  }
  return out;
}

Tensor Affinnor::apply(const Tensor& w) const { return pi * pairing(w, delta_dot) - w * f_plus_u; }

namespace {

double kinetic_density(const EnergyModel& m, const Tensor& delta_dot, const Tensor& theta0_inverse) {
  if (!m.kinetic) return 0.0;
  return energy_density(m.kin, invariants_at(delta_dot, theta0_inverse, invariant_count(m.kin)));
}

}  // namespace

std::vector<Affinnor> affinnor(const EnergyModel& m, const DeformationMeasure& dm, std::span<const double> f0,
                               std::span<const double> u) {
  const TensorField pi = momentum(m, dm);
  std::vector<Affinnor> out;
  out.reserve(dm.delta.size());
  for (std::size_t node = 0; node < dm.delta.size(); ++node) {
    const Tensor& d = dm.delta[node];
    Tensor dd = dm.delta_dot ? (*dm.delta_dot)[node] : Tensor(d.degree(), d.dim());
    out.push_back(Affinnor{pi[node], std::move(dd), f0[node] + u[node]});
  }
  return out;
}

Tensor log_volume_gradient(const Tensor& theta_b) {
  const FlatView v = flatten(theta_b);
  if (is_singular(v.matrix)) throw SingularError("pulled-back metric is degenerate");
  const long l = admissibility(v.ordering.k, v.ordering.d).l;
  const Eigen::MatrixXd inv_t = v.matrix.inverse().transpose();
  return unflatten(inv_t / static_cast<double>(l), v.ordering.k, v.ordering.d);
}

TensorField generalized_stress(const EnergyModel& m, const DeformationMeasure& dm, std::span<const double> u,
                               const TensorField& pi_dot) {
  TensorField out;
  out.reserve(dm.delta.size());
  const TensorField pi = momentum(m, dm);
  for (std::size_t node = 0; node < dm.delta.size(); ++node) {
    Tensor inv;
    try {
      inv = flat_inverse(dm.theta0_b[node]);
    } catch (const SingularError&) {
      throw SingularError("background metric is not flat-invertible", static_cast<long>(node));
    }
    const LameTable& el = m.elastic_at(node);
    Tensor sigma = stress_at(el, dm.delta[node], inv);
    if (!pi_dot.empty()) sigma -= pi_dot[node];
    if (m.measure == MeasureKind::Current) {
      const Tensor& d = dm.delta[node];
      const Tensor dd = dm.delta_dot ? (*dm.delta_dot)[node] : Tensor(d.degree(), d.dim());
      const double f = energy_density(el, invariants_at(d, inv, invariant_count(el))) +
                       kinetic_density(m, dd, inv);
      const Affinnor t{pi[node], dd, f + u[node]};
      sigma -= t.apply(log_volume_gradient(dm.theta_b[node]));
    }
    out.push_back(std::move(sigma));
  }
  return out;
}

Forces forces(const AmbientMetric& theta, const EmbeddingField& e, const TensorField& sigma, const EnergyModel& m) {
  const std::size_t N = e.grid().node_count();
  const auto n = static_cast<std::size_t>(e.ambient_dim());
  Forces f{std::vector<double>(N * n, 0.0), std::vector<double>(N * n, 0.0)};
  const bool constant = theta.is_constant();
  const DifferentialField df = constant ? DifferentialField() : differential(e);
  for (std::size_t node = 0; node < N; ++node) {
    if (!constant) {
      const Eigen::MatrixXd dx = df.matrix(node);
      const auto grads = theta.gradient(e.at(node));
      for (std::size_t b = 0; b < n; ++b) f.f_theta[node * n + b] = -pairing(sigma[node], pullback_tensor(grads[b], dx));
    }
    m.potential.gradient(e.at(node), std::span<double>(f.f_ext.data() + node * n, n));
    for (std::size_t b = 0; b < n; ++b) f.f_ext[node * n + b] = -f.f_ext[node * n + b];
  }
  return f;
}

}  // namespace deform
