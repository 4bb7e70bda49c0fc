#include "deform/optimizer.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "deform/simd.hpp"

namespace deform {

namespace {

constexpr double kRoundoff = 1e-13;
constexpr double kCurvature = 0.9;

struct Pair {
  std::vector<double> s, y;
  double rho;
};

// Two-loop recursion: returns -H g.
void lbfgs_direction(const std::deque<Pair>& mem, std::span<const double> g, std::span<double> p) {
  std::copy(g.begin(), g.end(), p.begin());
  std::vector<double> alpha(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    alpha[i] = mem[i].rho * simd::dot(mem[i].s, p);
    simd::axpy(-alpha[i], mem[i].y, p);
  }
  if (!mem.empty()) {
    const Pair& last = mem.back();
    const double gamma = simd::dot(last.s, last.y) / simd::dot(last.y, last.y);
    simd::scale(gamma, p, p);
  }
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * simd::dot(mem[i].y, p);
    simd::axpy(alpha[i] - beta, mem[i].s, p);
  }
  simd::scale(-1.0, p, p);
}

}  // namespace

OptimizeResult minimize(const Objective& objective, std::vector<double> x0, const OptimizeOptions& opt) {
  const std::size_t n = x0.size();
  OptimizeResult res;
  res.x = std::move(x0);
  std::vector<double> g(n), p(n), xt(n), gt(n);
  ObjectiveValue cur = objective(res.x, g);
  const double f_scale = std::fabs(cur.f);
  res.trace.push_back({0, cur.f, cur.norm, 0.0});
  std::deque<Pair> mem;
  int it = 0;
  while (true) {
    res.f = cur.f;
    res.norm = cur.norm;
    res.iterations = it;
    if (cur.norm <= opt.tol || n == 0) {
      res.converged = true;
      return res;
    }
    if (it >= opt.max_iters) return res;
    ++it;

    bool steepest = mem.empty();
    double step = 0.0;
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double gp = 0.0;
      if (!steepest) {
        lbfgs_direction(mem, g, p);
        gp = simd::dot(g, p);
        if (!(gp < 0.0)) steepest = true;
      }
      if (steepest) {
        for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
        gp = simd::dot(g, p);
        step = 1.0 / std::max(1.0, std::sqrt(-gp));
      } else {
        step = 1.0;
      }
      for (int bt = 0; bt < opt.max_backtracks; ++bt) {
        std::copy(res.x.begin(), res.x.end(), xt.begin());
        simd::axpy(step, p, xt);
        ObjectiveValue trial;
        try {
          trial = objective(xt, gt);
        } catch (const SingularError&) {
          step *= opt.shrink;
          continue;
        } catch (const EmbeddingError&) {
          step *= opt.shrink;
          continue;
        }
        const bool armijo = trial.f <= cur.f + opt.armijo * step * gp;
        bool approx = false;
        // Below the resolution of f, judge the step by its slope (approximate
        // Wolfe); the curvature bound keeps vanishing steps out.
        if (!armijo && trial.f <= cur.f + kRoundoff * std::max(std::fabs(cur.f), f_scale)) {
          const double slope = simd::dot(gt, p);
          approx = slope <= (2.0 * opt.armijo - 1.0) * gp && slope >= kCurvature * gp;
        }
        if (std::isfinite(trial.f) && (armijo || approx)) {
          // s = x_t - x, y = g_t - g
          Pair pr{std::vector<double>(n), std::vector<double>(n), 0.0};
          for (std::size_t i = 0; i < n; ++i) {
            pr.s[i] = xt[i] - res.x[i];
            pr.y[i] = gt[i] - g[i];
          }
          const double sy = simd::dot(pr.s, pr.y);
          if (sy > 1e-300) {
            pr.rho = 1.0 / sy;
            mem.push_back(std::move(pr));
            if (static_cast<int>(mem.size()) > opt.memory) mem.pop_front();
          }
          res.x.swap(xt);
          g.swap(gt);
          cur = trial;
          accepted = true;
          break;
        }
        step *= opt.shrink;
      }
      if (!accepted) {
        if (steepest) break;
        mem.clear();
        steepest = true;
      }
    }
    if (!accepted) {
      res.f = cur.f;
      res.norm = cur.norm;
      res.iterations = it;
      return res;
    }
    res.trace.push_back({it, cur.f, cur.norm, step});
  }
}

}  // namespace deform
