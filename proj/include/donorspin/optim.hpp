#pragma once

// Small numerical toolbox: bisection, tridiagonal solves, derivative-free
// simplex descent (Nelder-Mead with restarts) and a damped least-squares
// (Levenberg-Marquardt) minimizer with finite-difference Jacobians.
// Problem sizes here are tiny (2-12 parameters), so the implementations favor
// robustness and determinism.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "donorspin/errors.hpp"

namespace donorspin {

// Root of f on [lo, hi] by bisection; requires a sign change on the bracket.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, double xtol) {
  if (!(lo < hi)) throw std::invalid_argument("bisect: need lo < hi");
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw std::invalid_argument("bisect: no sign change on bracket");
  for (int it = 0; it < 400 && (hi - lo) > xtol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) { lo = mid; flo = fm; }
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Thomas algorithm for a tridiagonal system (lower a, diagonal b, upper c).
// Overwrites nothing; returns the solution. Assumes a well-conditioned system
// (diagonally dominant in all uses here).
inline std::vector<double> tridiagonal_solve(const std::vector<double>& a, const std::vector<double>& b,
                                             const std::vector<double>& c, std::vector<double> d) {
  const std::size_t n = b.size();
  if (a.size() != n || c.size() != n || d.size() != n)
    throw std::invalid_argument("tridiagonal_solve: band size mismatch");
  std::vector<double> cp(n);
  cp[0] = c[0] / b[0];
  d[0] = d[0] / b[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double m = b[i] - a[i] * cp[i - 1];
    cp[i] = c[i] / m;
    d[i] = (d[i] - a[i] * d[i - 1]) / m;
  }
  for (std::size_t i = n - 1; i-- > 0;) d[i] -= cp[i] * d[i + 1];
  return d;
}

struct SimplexOptions {
  int max_iter = 2000;
  double ftol = 1e-14;         // absolute spread of simplex values at convergence
  double ftol_rel = 1e-12;     // spread relative to the best value (guards large objectives)
  int restarts = 1;            // re-run with a shrunken simplex around the best point
  Eigen::VectorXd lower, upper;  // optional box (empty = unconstrained)
};

struct SimplexResult {
  Eigen::VectorXd x;
  double fval = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::VectorXd project_box(Eigen::VectorXd x, const SimplexOptions& opt) {
  if (opt.lower.size()) x = x.cwiseMax(opt.lower);
  if (opt.upper.size()) x = x.cwiseMin(opt.upper);
  return x;
}

inline SimplexResult nelder_mead_once(const std::function<double(const Eigen::VectorXd&)>& f,
                                      const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                                      const SimplexOptions& opt) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> pts(n + 1);
  std::vector<double> vals(n + 1);
  pts[0] = project_box(x0, opt);
  vals[0] = f(pts[0]);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd p = pts[0];
    p[i] += (step[i] != 0.0 ? step[i] : 1e-3);
    pts[i + 1] = project_box(p, opt);
    vals[i + 1] = f(pts[i + 1]);
  }
  SimplexResult res;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    // Order the simplex (stable for determinism).
    std::vector<int> ord(n + 1);
    for (int i = 0; i <= n; ++i) ord[i] = i;
    std::stable_sort(ord.begin(), ord.end(), [&vals](int a, int b) { return vals[a] < vals[b]; });
    std::vector<Eigen::VectorXd> P(n + 1);
    std::vector<double> V(n + 1);
    for (int i = 0; i <= n; ++i) { P[i] = pts[ord[i]]; V[i] = vals[ord[i]]; }
    pts = P; vals = V;
    if (vals[n] - vals[0] <= opt.ftol + opt.ftol_rel * std::abs(vals[0])) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += pts[i];
    centroid /= n;

    auto eval = [&](const Eigen::VectorXd& p) { return f(project_box(p, opt)); };
    const Eigen::VectorXd xr = project_box(centroid + (centroid - pts[n]), opt);
    const double fr = f(xr);
    if (fr < vals[0]) {
      const Eigen::VectorXd xe = project_box(centroid + 2.0 * (centroid - pts[n]), opt);
      const double fe = f(xe);
      if (fe < fr) { pts[n] = xe; vals[n] = fe; }
      else { pts[n] = xr; vals[n] = fr; }
    } else if (fr < vals[n - 1]) {
      pts[n] = xr; vals[n] = fr;
    } else {
      const Eigen::VectorXd xc = project_box(centroid + 0.5 * (pts[n] - centroid), opt);
      const double fc = f(xc);
      if (fc < vals[n]) { pts[n] = xc; vals[n] = fc; }
      else {
        for (int i = 1; i <= n; ++i) {
          pts[i] = project_box(pts[0] + 0.5 * (pts[i] - pts[0]), opt);
          vals[i] = eval(pts[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (vals[i] < vals[best]) best = i;
  res.x = pts[best];
  res.fval = vals[best];
  res.iterations = it;
  return res;
}

}  // namespace detail

// Derivative-free simplex minimization with optional box constraints and
// shrink-restart around the best point found.
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                                 const SimplexOptions& opt = {}) {
  if (x0.size() == 0 || step.size() != x0.size())
    throw std::invalid_argument("nelder_mead: bad initial point or step");
  SimplexResult best = detail::nelder_mead_once(f, x0, step, opt);
  for (int r = 0; r < opt.restarts; ++r) {
    SimplexResult next = detail::nelder_mead_once(f, best.x, 0.1 * step, opt);
    next.iterations += best.iterations;
    next.converged = next.converged && best.converged;
    if (next.fval <= best.fval) best = next;
  }
  return best;
}

struct LeastSquaresOptions {
  int max_iter = 500;
  double rel_ftol = 1e-10;       // relative objective change at convergence
  double cost_floor_rel = 1e-24; // converged once cost falls this far below its initial value
  Eigen::VectorXd lower, upper;  // optional box
  double fd_step_rel = 1e-6;     // relative finite-difference step for the Jacobian
};

struct LeastSquaresResult {
  Eigen::VectorXd x;
  double cost = std::numeric_limits<double>::quiet_NaN();  // sum of squared residuals
  Eigen::MatrixXd JTJ;                                     // Gauss-Newton normal matrix at x
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;  // cost after each accepted step
};

// Damped least squares (Levenberg-Marquardt) with central finite-difference
// Jacobian and box projection. residual_fn maps parameters to the residual vector.
inline LeastSquaresResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual_fn,
    Eigen::VectorXd x, const LeastSquaresOptions& opt = {}) {
  const int p = static_cast<int>(x.size());
  if (p == 0) throw std::invalid_argument("levenberg_marquardt: empty parameter vector");
  auto project = [&opt](Eigen::VectorXd v) {
    if (opt.lower.size()) v = v.cwiseMax(opt.lower);
    if (opt.upper.size()) v = v.cwiseMin(opt.upper);
    return v;
  };
  x = project(x);
  Eigen::VectorXd r = residual_fn(x);
  double cost = r.squaredNorm();
  LeastSquaresResult res;
  res.residual_history.push_back(cost);
  // Exactly representable data drives the cost toward machine zero without the
  // relative-change test ever firing; treat that as convergence too.
  const double cost_floor = opt.cost_floor_rel * cost;
  double lambda = 1e-3;
  auto jacobian = [&](const Eigen::VectorXd& at) {
    Eigen::MatrixXd J(r.size(), p);
    for (int j = 0; j < p; ++j) {
      const double h = std::max(opt.fd_step_rel * std::abs(at[j]), 1e-9);
      Eigen::VectorXd xp = at, xm = at;
      xp[j] += h; xm[j] -= h;
      J.col(j) = (residual_fn(xp) - residual_fn(xm)) / (2.0 * h);
    }
    return J;
  };
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const Eigen::MatrixXd J = jacobian(x);
    const Eigen::MatrixXd JTJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    bool stepped = false;
    for (int tries = 0; tries < 25; ++tries) {
      Eigen::MatrixXd M = JTJ;
      for (int d = 0; d < p; ++d) M(d, d) += lambda * std::max(JTJ(d, d), 1e-12);
      const Eigen::VectorXd delta = M.ldlt().solve(-g);
      const Eigen::VectorXd x_new = project(x + delta);
      const Eigen::VectorXd r_new = residual_fn(x_new);
      const double cost_new = r_new.squaredNorm();
      if (cost_new < cost) {
        const double rel_drop = (cost - cost_new) / std::max(cost, 1e-300);
        x = x_new; r = r_new; cost = cost_new;
        res.residual_history.push_back(cost);
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (rel_drop < opt.rel_ftol || cost <= cost_floor) { res.converged = true; }
        break;
      }
      lambda *= 4.0;
    }
    if (!stepped) { res.converged = true; break; }  // no downhill step exists at any damping
    if (res.converged) break;
  }
  res.x = x;
  res.cost = cost;
  res.iterations = it;
  // Final normal matrix for covariance estimates.
  const Eigen::MatrixXd J = jacobian(x);
  res.JTJ = J.transpose() * J;
  return res;
}

// Central finite-difference Hessian of a scalar function.
inline Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& x, double rel_h = 1e-4) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd H(n, n);
  std::vector<double> h(n);
  for (int i = 0; i < n; ++i) h[i] = std::max(rel_h * std::abs(x[i]), 1e-7);
  const double f0 = f(x);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h[i]; xm[i] -= h[i];
    H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h[i] * h[i]);
    for (int j = i + 1; j < n; ++j) {
      Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[i] += h[i]; xpp[j] += h[j];
      xpm[i] += h[i]; xpm[j] -= h[j];
      xmp[i] -= h[i]; xmp[j] += h[j];
      xmm[i] -= h[i]; xmm[j] -= h[j];
      H(i, j) = H(j, i) = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h[i] * h[j]);
    }
  }
  return H;
}

}  // namespace donorspin
