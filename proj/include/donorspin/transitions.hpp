#pragma once

// Transition frequencies, ESR transition strengths |<i|Sx|j>|^2, analytic
// field/hyperfine derivatives, adiabatic state tracking across a field sweep,
// and the magnetic clock-transition finder (turning points of f(B0)).

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "donorspin/eigensolver.hpp"
#include "donorspin/optim.hpp"

namespace donorspin {

// Default cut separating magnetically allowed from forbidden transitions
// (strengths top out at 0.25 for an S=1/2 electron line).
inline constexpr double default_strength_threshold = 1e-3;

// Energy window inside which eigenstates are treated as one degenerate cluster.
inline constexpr double degeneracy_tol_MHz = 1e-9;

// One transition between ascending-energy eigenstates |i> and |j>, 1-based, i < j.
struct Transition {
  int i = 0, j = 0;
  double f = 0.0;         // transition frequency E_j - E_i, MHz
  double strength = 0.0;  // |<i|Sx|j>|^2 (block-averaged inside degenerate clusters)
  double dfdB = 0.0;      // MHz/mT
  double dfdA = 0.0;      // dimensionless
  bool allowed = false;
  bool degenerate = false;  // derivative/strength involved a degenerate subspace
};

namespace detail {

// Partition ascending energies into clusters of near-coincident values.
inline std::vector<std::vector<int>> degeneracy_clusters(const Eigen::VectorXd& E, double tol) {
  std::vector<std::vector<int>> clusters;
  for (int k = 0; k < E.size(); ++k) {
    if (!clusters.empty() && E[k] - E[clusters.back().back()] < tol)
      clusters.back().push_back(k);
    else
      clusters.push_back({k});
  }
  return clusters;
}

// Index of the cluster containing state k.
inline int cluster_of(const std::vector<std::vector<int>>& clusters, int k) {
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (int m : clusters[c])
      if (m == k) return static_cast<int>(c);
  return -1;
}

// First-order perturbation value of operator D for state k (0-based). Inside a
// degenerate cluster the basis is rotated to diagonalize D restricted to the
// subspace; the value is matched by rank, which is ambiguous up to ordering -
// callers receive a flag.
inline double perturbation_value(const Matrix& D, const EigenSolution& sol,
                                 const std::vector<std::vector<int>>& clusters, int k, bool* flagged) {
  const int c = cluster_of(clusters, k);
  const auto& cl = clusters[c];
  if (cl.size() == 1) return (sol.states.col(k).adjoint() * D * sol.states.col(k))(0, 0).real();
  if (flagged) *flagged = true;
  const int m = static_cast<int>(cl.size());
  Matrix P(sol.states.rows(), m);
  for (int t = 0; t < m; ++t) P.col(t) = sol.states.col(cl[t]);
  const Matrix Dm = P.adjoint() * D * P;
  Eigen::VectorXd vals = eigensolve(Dm).energies;  // ascending
  const int rank = static_cast<int>(std::find(cl.begin(), cl.end(), k) - cl.begin());
  return vals[rank];
}

}  // namespace detail

// Hellmann-Feynman field derivative of the transition frequency (i, j), MHz/mT:
// d f_ij / d B0 = <j|dH/dB0|j> - <i|dH/dB0|i>. 1-based ascending labels.
inline double df_dB0(const SpinSystem& sys, const OperatorSet& ops, const EigenSolution& sol,
                     int i, int j, bool* degenerate = nullptr) {
  if (i == j || i < 1 || j < 1 || i > ops.dim || j > ops.dim)
    throw std::invalid_argument("df_dB0: need distinct 1-based state labels within dimension");
  const Matrix D = dH_dB0(sys, ops);
  const auto clusters = detail::degeneracy_clusters(sol.energies, degeneracy_tol_MHz);
  bool flag = false;
  const double vj = detail::perturbation_value(D, sol, clusters, j - 1, &flag);
  const double vi = detail::perturbation_value(D, sol, clusters, i - 1, &flag);
  if (degenerate) *degenerate = flag;
  return vj - vi;
}

// Hyperfine derivative of the transition frequency, dimensionless:
// d f_ij / d A = <j|S.I|j> - <i|S.I|i>.
inline double df_dA(const SpinSystem& sys, const OperatorSet& ops, const EigenSolution& sol,
                    int i, int j, bool* degenerate = nullptr) {
  (void)sys;
  if (i == j || i < 1 || j < 1 || i > ops.dim || j > ops.dim)
    throw std::invalid_argument("df_dA: need distinct 1-based state labels within dimension");
  const Matrix D = spin_dot(ops);
  const auto clusters = detail::degeneracy_clusters(sol.energies, degeneracy_tol_MHz);
  bool flag = false;
  const double vj = detail::perturbation_value(D, sol, clusters, j - 1, &flag);
  const double vi = detail::perturbation_value(D, sol, clusters, i - 1, &flag);
  if (degenerate) *degenerate = flag;
  return vj - vi;
}

// All dim (dim-1)/2 pairs at one field point. Inside degenerate clusters the
// gauge-invariant block-summed strength is distributed uniformly over the
// cluster pairs, so per-pair values stay basis-independent and the completeness
// sum rule (sum of all squared Sx elements = Trace Sx^2) is preserved.
inline std::vector<Transition> transition_table(const SpinSystem& sys, const OperatorSet& ops,
                                                const EigenSolution& sol,
                                                double threshold = default_strength_threshold) {
  if (threshold < 0.0) throw std::invalid_argument("transition_table: threshold must be >= 0");
  const int n = ops.dim;
  const Matrix M = sol.states.adjoint() * ops.Sx * sol.states;
  Eigen::MatrixXd S2(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) S2(a, b) = std::norm(M(a, b));

  const auto clusters = detail::degeneracy_clusters(sol.energies, degeneracy_tol_MHz);
  std::vector<int> cluster_index(n), cluster_size(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    cluster_size[c] = static_cast<int>(clusters[c].size());
    for (int k : clusters[c]) cluster_index[k] = static_cast<int>(c);
  }
  // Block-average strengths across degenerate clusters (including intra-cluster pairs).
  Eigen::MatrixXd S_avg = S2;
  for (std::size_t ca = 0; ca < clusters.size(); ++ca) {
    for (std::size_t cb = ca; cb < clusters.size(); ++cb) {
      if (cluster_size[ca] == 1 && cluster_size[cb] == 1) continue;
      double block = 0.0;
      int npairs = 0;
      for (int a : clusters[ca])
        for (int b : clusters[cb])
          if (ca != cb || a < b) { block += S2(a, b); ++npairs; }
      const double avg = npairs ? block / npairs : 0.0;
      for (int a : clusters[ca])
        for (int b : clusters[cb])
          if (ca != cb || a != b) S_avg(a, b) = S_avg(b, a) = avg;
    }
  }

  std::vector<Transition> out;
  out.reserve(n * (n - 1) / 2);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      Transition t;
      t.i = a + 1;
      t.j = b + 1;
      t.f = sol.energies[b] - sol.energies[a];
      t.strength = S_avg(a, b);
      bool flag = false;
      t.dfdB = df_dB0(sys, ops, sol, t.i, t.j, &flag);
      bool flag2 = false;
      t.dfdA = df_dA(sys, ops, sol, t.i, t.j, &flag2);
      t.degenerate = flag || flag2 || cluster_size[cluster_index[a]] > 1 || cluster_size[cluster_index[b]] > 1;
      t.allowed = t.strength > threshold;
      out.push_back(t);
    }
  }
  return out;
}

inline std::vector<Transition> transition_table(const SpinSystem& sys, double B0,
                                                double threshold = default_strength_threshold) {
  const OperatorSet ops = operator_set(sys);
  return transition_table(sys, ops, solve_at_field(sys, ops, B0), threshold);
}

// Greedy maximum-overlap assignment between the eigenbases of two adjacent
// field points: perm[a] = index at `b` of the state continuing ascending-state
// a of `a`. Throws TrackingError when the best available overlap drops
// below 0.5 (grid too coarse).
inline std::vector<int> tracking_permutation(const EigenSolution& a, const EigenSolution& b) {
  const int n = static_cast<int>(a.energies.size());
  Eigen::MatrixXd O(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) O(r, c) = std::abs((a.states.col(r).adjoint() * b.states.col(c))(0, 0));
  std::vector<int> perm(n, -1);
  std::vector<bool> used_row(n, false), used_col(n, false);
  for (int pick = 0; pick < n; ++pick) {
    int br = -1, bc = -1;
    double best = -1.0;
    for (int r = 0; r < n; ++r) {
      if (used_row[r]) continue;
      for (int c = 0; c < n; ++c) {
        if (used_col[c]) continue;
        if (O(r, c) > best) { best = O(r, c); br = r; bc = c; }
      }
    }
    if (best < 0.5)
      throw TrackingError("state tracking ambiguous (best overlap " + std::to_string(best) +
                              " < 0.5); refine the sweep grid",
                          a.B0, b.B0);
    perm[br] = bc;
    used_row[br] = true;
    used_col[bc] = true;
  }
  return perm;
}

// Eigensolutions on a uniform field grid plus adiabatic tracking permutations.
// track[m][k] is the ascending label (0-based) at grid point m of the state
// that started as ascending k at the first point.
struct SweepTable {
  std::vector<double> B_grid;
  std::vector<EigenSolution> solutions;
  std::vector<std::vector<int>> track;

  double tracked_energy(std::size_t point, int k) const { return solutions[point].energies[track[point][k]]; }
};

inline SweepTable sweep(const SpinSystem& sys, double B_min, double B_max, double step) {
  if (!(B_min < B_max) || !(step > 0.0))
    throw std::invalid_argument("sweep: need B_min < B_max and step > 0");
  const OperatorSet ops = operator_set(sys);
  SweepTable table;
  const int count = static_cast<int>(std::floor((B_max - B_min) / step + 1e-9)) + 1;
  table.B_grid.reserve(count);
  for (int m = 0; m < count; ++m) table.B_grid.push_back(B_min + m * step);
  table.solutions.reserve(count);
  for (double B : table.B_grid) table.solutions.push_back(solve_at_field(sys, ops, B));
  const int n = ops.dim;
  std::vector<int> identity(n);
  for (int k = 0; k < n; ++k) identity[k] = k;
  table.track.push_back(identity);
  for (int m = 0; m + 1 < count; ++m) {
    const auto local = tracking_permutation(table.solutions[m], table.solutions[m + 1]);
    std::vector<int> next(n);
    for (int k = 0; k < n; ++k) next[k] = local[table.track[m][k]];
    table.track.push_back(next);
  }
  return table;
}

// A magnetic clock transition: turning point of f_ij(B0).
struct ClockTransition {
  int i = 0, j = 0;           // 1-based ascending labels
  double B_star = 0.0;        // mT
  double f_star = 0.0;        // MHz
  double curvature = 0.0;     // d^2 f / d B0^2, MHz/mT^2
};

struct ClockSearchOptions {
  double grid_step = 0.01;    // mT, bracketing scan resolution
  double threshold = default_strength_threshold;
  double refine_tol = 1e-7;   // mT, bisection bracket width
  double curvature_step = 1e-3;  // mT, second-difference step
};

// Scan df/dB0 of every magnetically allowed pair for sign changes, then refine
// each bracket by bisection. Forbidden pairs (strength below threshold at the
// bracket) are skipped: they can have turning points too, but are invisible.
inline std::vector<ClockTransition> find_clock_transitions(const SpinSystem& sys, double B_min, double B_max,
                                                           const ClockSearchOptions& opt = {}) {
  if (!(B_min >= 0.0) || !(B_min < B_max))
    throw std::invalid_argument("find_clock_transitions: need 0 <= B_min < B_max");
  const OperatorSet ops = operator_set(sys);
  const Matrix D = dH_dB0(sys, ops);
  const int n = ops.dim;

  const int count = static_cast<int>(std::floor((B_max - B_min) / opt.grid_step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (int m = 0; m < count; ++m) grid[m] = B_min + m * opt.grid_step;

  // Per grid point: state expectation values of dH/dB0 and the strength matrix.
  std::vector<Eigen::VectorXd> expect(count);
  std::vector<Eigen::MatrixXd> strength(count);
  for (int m = 0; m < count; ++m) {
    const EigenSolution sol = solve_at_field(sys, ops, grid[m]);
    Eigen::VectorXd d(n);
    for (int k = 0; k < n; ++k) d[k] = (sol.states.col(k).adjoint() * D * sol.states.col(k))(0, 0).real();
    expect[m] = d;
    const Matrix M = sol.states.adjoint() * ops.Sx * sol.states;
    Eigen::MatrixXd S2(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) S2(a, b) = std::norm(M(a, b));
    strength[m] = S2;
  }

  std::vector<ClockTransition> found;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (int m = 0; m + 1 < count; ++m) {
        const double s0 = expect[m][b] - expect[m][a];
        const double s1 = expect[m + 1][b] - expect[m + 1][a];
        if (s0 == 0.0 || (s0 > 0.0) == (s1 > 0.0)) continue;
        if (strength[m](a, b) <= opt.threshold || strength[m + 1](a, b) <= opt.threshold) continue;
        auto slope = [&](double B) { return df_dB0(sys, ops, solve_at_field(sys, ops, B), a + 1, b + 1); };
        ClockTransition ct;
        ct.i = a + 1;
        ct.j = b + 1;
        ct.B_star = bisect(slope, grid[m], grid[m + 1], opt.refine_tol);
        const EigenSolution at_star = solve_at_field(sys, ops, ct.B_star);
        ct.f_star = at_star.energies[b] - at_star.energies[a];
        const double h = opt.curvature_step;
        auto freq = [&](double B) {
          const EigenSolution s = solve_at_field(sys, ops, B);
          return s.energies[b] - s.energies[a];
        };
        ct.curvature = (freq(ct.B_star + h) - 2.0 * ct.f_star + freq(ct.B_star - h)) / (h * h);
        found.push_back(ct);
      }
    }
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const ClockTransition& x, const ClockTransition& y) { return x.B_star < y.B_star; });
  return found;
}

// All fields in [B_min, B_max] where f_ij(B0) = rf, by grid bracketing plus
// bisection. Ascending labels; empty when the line is never crossed.
inline std::vector<double> resonance_fields(const SpinSystem& sys, int i, int j, double rf,
                                            double B_min, double B_max, double grid_step = 0.005) {
  if (!(B_min < B_max) || !(grid_step > 0.0))
    throw std::invalid_argument("resonance_fields: need B_min < B_max and grid_step > 0");
  const OperatorSet ops = operator_set(sys);
  auto detune = [&](double B) {
    const EigenSolution s = solve_at_field(sys, ops, B);
    return (s.energies[j - 1] - s.energies[i - 1]) - rf;
  };
  std::vector<double> roots;
  double prev_B = B_min, prev_d = detune(B_min);
  const int count = static_cast<int>(std::floor((B_max - B_min) / grid_step + 1e-9)) + 1;
  for (int m = 1; m < count; ++m) {
    const double B = B_min + m * grid_step;
    const double d = detune(B);
    if (prev_d == 0.0)
      roots.push_back(prev_B);
    else if ((prev_d > 0.0) != (d > 0.0))
      roots.push_back(bisect(detune, prev_B, B, 1e-9));
    prev_B = B;
    prev_d = d;
  }
  if (prev_d == 0.0) roots.push_back(prev_B);
  return roots;
}

// Field of closest approach of f_ij(B0) to rf on [B_min, B_max] (grid scan plus
// golden-section refinement of |f - rf|). Always defined, even when the line is
// never crossed - the fallback needed near clock transitions.
inline double closest_approach_field(const SpinSystem& sys, int i, int j, double rf,
                                     double B_min, double B_max, double grid_step = 0.005) {
  const OperatorSet ops = operator_set(sys);
  auto miss = [&](double B) {
    const EigenSolution s = solve_at_field(sys, ops, B);
    return std::abs((s.energies[j - 1] - s.energies[i - 1]) - rf);
  };
  const int count = static_cast<int>(std::floor((B_max - B_min) / grid_step + 1e-9)) + 1;
  double best_B = B_min, best = miss(B_min);
  for (int m = 1; m < count; ++m) {
    const double B = B_min + m * grid_step;
    const double v = miss(B);
    if (v < best) { best = v; best_B = B; }
  }
  double lo = std::max(B_min, best_B - grid_step), hi = std::min(B_max, best_B + grid_step);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = miss(x1), f2 = miss(x2);
  while (hi - lo > 1e-9) {
    if (f1 < f2) { hi = x2; x2 = x1; f2 = f1; x1 = hi - gr * (hi - lo); f1 = miss(x1); }
    else { lo = x1; x1 = x2; f1 = f2; x2 = lo + gr * (hi - lo); f2 = miss(x2); }
  }
  return 0.5 * (lo + hi);
}

}  // namespace donorspin
