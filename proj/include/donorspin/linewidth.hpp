#pragma once

// Peak-to-peak linewidth model and its weighted nonlinear fit. The predicted
// EDMR linewidth combines three broadening terms,
//
//   dB_pp ~ dB0  +  |dB0/df| |df/dA| dA  +  |dB0/df| df_mod ,
//
// either linearly or in quadrature (root-sum-square). Near a magnetic clock
// transition |df/dB0| -> 0 and the width diverges: the reciprocal 1/dB_pp,
// which the measurement resolves, dips to zero.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "donorspin/optim.hpp"
#include "donorspin/transitions.hpp"

namespace donorspin {

enum class CombineMode { Linear, Quadrature };

struct LinewidthModel {
  double delta_B0 = 0.0;     // static magnetic inhomogeneity, mT
  double delta_A = 0.0;      // hyperfine inhomogeneity, MHz
  double delta_f_mod = 0.0;  // FM modulation amplitude, MHz (fixed at the measurement value)
  CombineMode combine = CombineMode::Linear;

  void validate() const {
    if (!(delta_B0 >= 0.0) || !(delta_A >= 0.0) || !(delta_f_mod >= 0.0))
      throw std::invalid_argument("linewidth model: broadening parameters must be >= 0");
  }
};

// Model evaluation from precomputed derivative magnitudes. Returns +infinity
// at a turning point (|df/dB0| = 0) when any field-converted term is active -
// the divergence marker; report 1/dB_pp as 0 there.
inline double predict_linewidth_terms(const LinewidthModel& model, double abs_dfdB, double abs_dfdA) {
  model.validate();
  if (abs_dfdB == 0.0) {
    if (model.delta_A > 0.0 || model.delta_f_mod > 0.0) return std::numeric_limits<double>::infinity();
    return model.delta_B0;
  }
  const double t1 = model.delta_B0;
  const double t2 = abs_dfdA * model.delta_A / abs_dfdB;
  const double t3 = model.delta_f_mod / abs_dfdB;
  if (model.combine == CombineMode::Linear) return t1 + t2 + t3;
  return std::sqrt(t1 * t1 + t2 * t2 + t3 * t3);
}

inline double predict_linewidth(const LinewidthModel& model, const SpinSystem& sys, int i, int j, double B0) {
  const OperatorSet ops = operator_set(sys);
  const EigenSolution sol = solve_at_field(sys, ops, B0);
  return predict_linewidth_terms(model, std::abs(df_dB0(sys, ops, sol, i, j)),
                                 std::abs(df_dA(sys, ops, sol, i, j)));
}

// The clock-transition pair appears as one merged resonance; it is treated as
// a single transition following the lower branch below the split field and the
// upper branch above it.
struct CtPairPolicy {
  int i_below = 2, j_below = 5;
  int i_above = 3, j_above = 6;
  double B_split = 0.0;  // mT

  std::pair<int, int> branch(double B0) const {
    return B0 < B_split ? std::make_pair(i_below, j_below) : std::make_pair(i_above, j_above);
  }
};

// Build the policy from the located clock transitions: branch pairs from the
// two turning points, split field at their midpoint.
inline CtPairPolicy make_ct_pair_policy(const SpinSystem& sys, double B_min = 0.5, double B_max = 10.0) {
  const auto cts = find_clock_transitions(sys, B_min, B_max);
  if (cts.size() != 2)
    throw std::invalid_argument("ct pair policy: expected exactly two clock transitions, found " +
                                std::to_string(cts.size()));
  CtPairPolicy p;
  p.i_below = cts[0].i;
  p.j_below = cts[0].j;
  p.i_above = cts[1].i;
  p.j_above = cts[1].j;
  p.B_split = 0.5 * (cts[0].B_star + cts[1].B_star);
  return p;
}

inline double predict_linewidth_ct(const LinewidthModel& model, const SpinSystem& sys,
                                   const CtPairPolicy& policy, double B0) {
  const auto [i, j] = policy.branch(B0);
  return predict_linewidth(model, sys, i, j, B0);
}

struct LinewidthData {
  std::vector<double> B0;     // mT
  std::vector<double> dBpp;   // mT
  std::vector<double> sigma;  // mT, 1-sigma weights
};

struct LinewidthFit {
  double delta_B0 = 0.0, delta_A = 0.0;
  double err_delta_B0 = 0.0, err_delta_A = 0.0;  // 1-sigma standard uncertainties
  double residual_norm = 0.0;                    // sqrt(chi^2) at the optimum
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  bool converged = false;
};

namespace detail {

struct LinewidthDesign {
  std::vector<double> abs_dfdB, abs_dfdA;
};

template <typename BranchFn>
inline LinewidthDesign linewidth_design(const LinewidthData& data, const SpinSystem& sys, BranchFn branch) {
  const OperatorSet ops = operator_set(sys);
  LinewidthDesign d;
  for (double B : data.B0) {
    const auto [i, j] = branch(B);
    const EigenSolution sol = solve_at_field(sys, ops, B);
    d.abs_dfdB.push_back(std::abs(df_dB0(sys, ops, sol, i, j)));
    d.abs_dfdA.push_back(std::abs(df_dA(sys, ops, sol, i, j)));
  }
  return d;
}

inline LinewidthFit fit_linewidth_design(const LinewidthData& data, const LinewidthDesign& design,
                                         CombineMode combine, double delta_f_mod) {
  const std::size_t n = data.B0.size();
  if (data.dBpp.size() != n || data.sigma.size() != n)
    throw std::invalid_argument("linewidth fit: column length mismatch");
  std::set<double> distinct(data.B0.begin(), data.B0.end());
  if (distinct.size() < 3)
    throw std::invalid_argument("linewidth fit: insufficient data, need >= 3 distinct field points");
  for (double s : data.sigma)
    if (!(s > 0.0)) throw std::invalid_argument("linewidth fit: sigma values must be > 0");

  auto chi2 = [&](const Eigen::VectorXd& p) {
    LinewidthModel m{p[0], p[1], delta_f_mod, combine};
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double pred = predict_linewidth_terms(m, design.abs_dfdB[k], design.abs_dfdA[k]);
      const double r = (pred - data.dBpp[k]) / data.sigma[k];
      acc += r * r;
    }
    return acc;
  };

  // Initialization: dB0 from the median width of the least clock-transition-
  // affected half of the data (largest |df/dB0|), dA at 0.1 MHz.
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&design](std::size_t a, std::size_t b) { return design.abs_dfdB[a] > design.abs_dfdB[b]; });
  std::vector<double> far;
  for (std::size_t k = 0; k < (n + 1) / 2; ++k) far.push_back(data.dBpp[order[k]]);
  std::sort(far.begin(), far.end());
  const double init_B0 = far[far.size() / 2];

  SimplexOptions opt;
  opt.lower = Eigen::Vector2d(0.0, 0.0);
  opt.upper = Eigen::Vector2d(100.0, 100.0);
  opt.restarts = 1;
  Eigen::Vector2d x0(std::clamp(init_B0, 0.0, 100.0), 0.1);
  Eigen::Vector2d step(std::max(0.1 * x0[0], 0.01), 0.05);
  const SimplexResult best = nelder_mead(chi2, x0, step, opt);

  LinewidthFit fit;
  fit.delta_B0 = best.x[0];
  fit.delta_A = best.x[1];
  fit.residual_norm = std::sqrt(best.fval);
  fit.converged = best.converged;
  // Covariance from the local quadratic expansion: cov = 2 H^{-1} with H the
  // Hessian of chi^2 at the optimum.
  const Eigen::MatrixXd H = fd_hessian(chi2, best.x);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
  if (lu.isInvertible()) {
    fit.covariance = 2.0 * lu.inverse();
    fit.err_delta_B0 = std::sqrt(std::max(fit.covariance(0, 0), 0.0));
    fit.err_delta_A = std::sqrt(std::max(fit.covariance(1, 1), 0.0));
  }
  return fit;
}

}  // namespace detail

// Weighted nonlinear least squares over (delta_B0, delta_A) for one fixed
// transition pair, non-negativity enforced by a box.
inline LinewidthFit fit_linewidth_model(const LinewidthData& data, const SpinSystem& sys, int i, int j,
                                        CombineMode combine, double delta_f_mod) {
  const auto design = detail::linewidth_design(data, sys, [&](double) { return std::make_pair(i, j); });
  return detail::fit_linewidth_design(data, design, combine, delta_f_mod);
}

// Same fit following the merged clock-transition pair across the split field.
inline LinewidthFit fit_linewidth_model(const LinewidthData& data, const SpinSystem& sys,
                                        const CtPairPolicy& policy, CombineMode combine, double delta_f_mod) {
  const auto design = detail::linewidth_design(data, sys, [&](double B) { return policy.branch(B); });
  return detail::fit_linewidth_design(data, design, combine, delta_f_mod);
}

// Hyperfine broadening to strain: dA/A ~ kappa eps  =>  eps = (dA/A)/kappa.
inline double strain_from_deltaA(double delta_A, double A, double kappa) {
  if (!(A > 0.0)) throw std::invalid_argument("strain_from_deltaA: A must be > 0");
  if (!(kappa > 0.0)) throw std::invalid_argument("strain_from_deltaA: kappa must be > 0");
  return (delta_A / A) / kappa;
}

struct LinearFitResult {
  double m = 0.0, c = 0.0;
  double err_m = 0.0, err_c = 0.0;
};

// Weighted straight-line fit y = m x + c (closed form), provided for the
// reciprocal-linewidth comparison fits away from the clock transition.
inline LinearFitResult fit_linear(const std::vector<double>& x, const std::vector<double>& y,
                                  const std::vector<double>& sigma) {
  const std::size_t n = x.size();
  if (y.size() != n || sigma.size() != n) throw std::invalid_argument("fit_linear: column length mismatch");
  if (n < 2) throw std::invalid_argument("fit_linear: need >= 2 points");
  double S = 0.0, Sx = 0.0, Sy = 0.0, Sxx = 0.0, Sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(sigma[k] > 0.0)) throw std::invalid_argument("fit_linear: sigma values must be > 0");
    const double w = 1.0 / (sigma[k] * sigma[k]);
    S += w; Sx += w * x[k]; Sy += w * y[k];
    Sxx += w * x[k] * x[k]; Sxy += w * x[k] * y[k];
  }
  const double det = S * Sxx - Sx * Sx;
  if (det == 0.0) throw std::invalid_argument("fit_linear: degenerate design (all x identical)");
  LinearFitResult r;
  r.m = (S * Sxy - Sx * Sy) / det;
  r.c = (Sxx * Sy - Sx * Sxy) / det;
  r.err_m = std::sqrt(S / det);
  r.err_c = std::sqrt(Sxx / det);
  return r;
}

}  // namespace donorspin
