// optim.hpp
// Limited-memory BFGS minimizer with an Armijo backtracking line search,
// plus a plain gradient-descent fallback. Both are fully deterministic and
// only ever accept steps that decrease the objective, so the accepted
// objective sequence is monotone.

#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <vector>

#include "tdm/errors.hpp"

namespace tdm {

struct OptimOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;  // relative objective change at convergence
  int history = 10;         // L-BFGS memory
  double armijo_c = 1e-4;
  int max_line_search = 60;
};

struct OptimResult {
  std::vector<double> x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after each accepted step (incl. x0)
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

struct LbfgsPair {
  std::vector<double> s;
  std::vector<double> y;
  double rho = 0.0;
};

// Two-loop recursion: returns the quasi-Newton descent direction -H*g.
inline std::vector<double> lbfgs_direction(const std::vector<double>& g,
                                           const std::deque<LbfgsPair>& hist) {
  std::vector<double> q = g;
  std::vector<double> alpha(hist.size());
  for (std::size_t k = hist.size(); k-- > 0;) {
    alpha[k] = hist[k].rho * dot(hist[k].s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * hist[k].y[i];
  }
  if (!hist.empty()) {
    const auto& last = hist.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t k = 0; k < hist.size(); ++k) {
    const double beta = hist[k].rho * dot(hist[k].y, q);
    for (std::size_t i = 0; i < q.size(); ++i)
      q[i] += (alpha[k] - beta) * hist[k].s[i];
  }
  for (double& v : q) v = -v;
  return q;
}

// Shared driver: `direction` produces the search direction from the current
// gradient and the curvature history (empty for plain gradient descent).
template <typename Objective, typename DirectionFn>
OptimResult line_search_minimize(Objective&& objective, std::vector<double> x,
                                 const OptimOptions& opt, DirectionFn direction,
                                 bool keep_history) {
  const std::size_t n = x.size();
  OptimResult result;
  std::vector<double> g(n, 0.0);
  double fx = objective(x, g);
  if (!std::isfinite(fx)) throw NumericalError("objective not finite at start");
  result.trace.push_back(fx);

  std::deque<LbfgsPair> hist;
  std::vector<double> xt(n), gt(n);
  int iter = 0;
  bool converged = false;

  while (iter < opt.max_iterations) {
    if (norm_inf(g) < 1e-12) {
      converged = true;
      break;
    }
    std::vector<double> d = direction(g, hist);
    double dg = dot(d, g);
    if (dg > -1e-18) {  // not a descent direction; fall back to steepest
      d = g;
      for (double& v : d) v = -v;
      dg = -dot(g, g);
      hist.clear();
      if (dg > -1e-18) {
        converged = true;
        break;
      }
    }

    // First step without curvature information gets a conservative scale.
    double alpha = hist.empty() ? 1.0 / std::max(1.0, norm2(g)) : 1.0;
    double ft = fx;
    bool accepted = false;
    for (int ls = 0; ls < opt.max_line_search; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + alpha * d[i];
      ft = objective(xt, gt);
      if (std::isfinite(ft) && ft <= fx + opt.armijo_c * alpha * dg) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // direction exhausted; x is the best point found

    ++iter;
    if (keep_history) {
      LbfgsPair pair;
      pair.s.resize(n);
      pair.y.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        pair.s[i] = xt[i] - x[i];
        pair.y[i] = gt[i] - g[i];
      }
      const double sy = dot(pair.s, pair.y);
      if (sy > 1e-12 * norm2(pair.s) * norm2(pair.y)) {
        pair.rho = 1.0 / sy;
        hist.push_back(std::move(pair));
        if (static_cast<int>(hist.size()) > opt.history) hist.pop_front();
      }
    }
    const double prev = fx;
    x.swap(xt);
    g.swap(gt);
    fx = ft;
    result.trace.push_back(fx);

    if (std::abs(prev - fx) / std::max(1.0, std::abs(fx)) < opt.tolerance) {
      converged = true;
      break;
    }
  }

  result.x = std::move(x);
  result.value = fx;
  result.gradient_norm = norm2(g);
  result.iterations = iter;
  result.converged = converged;
  return result;
}

}  // namespace detail

// objective(x, grad) must fill grad and return f(x).
template <typename Objective>
OptimResult minimize_lbfgs(Objective&& objective, std::vector<double> x0,
                           const OptimOptions& opt = {}) {
  return detail::line_search_minimize(
      objective, std::move(x0), opt,
      [](const std::vector<double>& g, const std::deque<detail::LbfgsPair>& h) {
        return detail::lbfgs_direction(g, h);
      },
      /*keep_history=*/true);
}

// First-order fallback; on convex objectives it reaches the same optimum as
// minimize_lbfgs, just more slowly.
template <typename Objective>
OptimResult minimize_gradient_descent(Objective&& objective,
                                      std::vector<double> x0,
                                      const OptimOptions& opt = {}) {
  return detail::line_search_minimize(
      objective, std::move(x0), opt,
      [](const std::vector<double>& g, const std::deque<detail::LbfgsPair>&) {
        std::vector<double> d = g;
        for (double& v : d) v = -v;
        return d;
      },
      /*keep_history=*/false);
}

}  // namespace tdm
