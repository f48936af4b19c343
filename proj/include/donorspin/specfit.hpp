#pragma once

// Spectrum reduction: spline background subtraction and multi-peak fitting of
// first-derivative skewed Lorentzians (the lock-in lineshape), extracting
// resonance centers and peak-to-peak linewidths, plus matching of fitted
// centers to the transitions of a spin system at a fixed carrier frequency.
//
// Skew model: base absorption a(x) = (1 + q x) / (1 + x^2), x = (B - c)/gamma;
// the fitted curve is phase_sign * amplitude * da/dB.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "donorspin/optim.hpp"
#include "donorspin/transitions.hpp"

namespace donorspin {

struct Trace {
  std::vector<double> B;       // mT, strictly increasing
  std::vector<double> signal;  // arbitrary units
};

namespace detail {

// Natural cubic spline through strictly increasing anchors, linear
// extrapolation beyond the ends.
class CubicSpline {
 public:
  CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    for (std::size_t k = 0; k + 1 < n; ++k)
      if (!(x_[k] < x_[k + 1])) throw std::invalid_argument("spline: anchor fields must be strictly increasing");
    m_.assign(n, 0.0);
    if (n < 3) return;  // natural spline of two points is the straight line
    std::vector<double> a(n - 2), b(n - 2), c(n - 2), d(n - 2);
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double h0 = x_[k] - x_[k - 1], h1 = x_[k + 1] - x_[k];
      a[k - 1] = h0 / 6.0;
      b[k - 1] = (h0 + h1) / 3.0;
      c[k - 1] = h1 / 6.0;
      d[k - 1] = (y_[k + 1] - y_[k]) / h1 - (y_[k] - y_[k - 1]) / h0;
    }
    a[0] = 0.0;
    c[n - 3] = 0.0;
    const auto sol = tridiagonal_solve(a, b, c, d);
    for (std::size_t k = 1; k + 1 < n; ++k) m_[k] = sol[k - 1];
  }

  double operator()(double x) const {
    if (x <= x_.front()) return y_.front() + end_slope_front() * (x - x_.front());
    if (x >= x_.back()) return y_.back() + end_slope_back() * (x - x_.back());
    std::size_t k = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin() - 1;
    const double h = x_[k + 1] - x_[k];
    const double t = (x_[k + 1] - x), u = (x - x_[k]);
    return (m_[k] * t * t * t + m_[k + 1] * u * u * u) / (6.0 * h) +
           (y_[k] / h - m_[k] * h / 6.0) * t + (y_[k + 1] / h - m_[k + 1] * h / 6.0) * u;
  }

 private:
  double end_slope_front() const {
    const double h = x_[1] - x_[0];
    return (y_[1] - y_[0]) / h - h * (2.0 * m_[0] + m_[1]) / 6.0;
  }
  double end_slope_back() const {
    const std::size_t n = x_.size();
    const double h = x_[n - 1] - x_[n - 2];
    return (y_[n - 1] - y_[n - 2]) / h + h * (m_[n - 2] + 2.0 * m_[n - 1]) / 6.0;
  }
  std::vector<double> x_, y_, m_;
};

inline void validate_trace(const Trace& trace) {
  if (trace.B.size() != trace.signal.size()) throw std::invalid_argument("trace: column length mismatch");
  if (trace.B.size() < 2) throw std::invalid_argument("trace: need >= 2 points");
  for (std::size_t k = 0; k + 1 < trace.B.size(); ++k)
    if (!(trace.B[k] < trace.B[k + 1])) throw std::invalid_argument("trace: fields must be strictly increasing");
}

}  // namespace detail

// Fit a smooth background through the points lying outside every exclusion
// window and subtract it from the whole trace. Windows are (lo, hi) field
// intervals covering the resonance features.
inline Trace subtract_background(const Trace& trace, const std::vector<std::pair<double, double>>& exclude_windows) {
  detail::validate_trace(trace);
  std::vector<double> ax, ay;
  for (std::size_t k = 0; k < trace.B.size(); ++k) {
    bool excluded = false;
    for (const auto& w : exclude_windows)
      if (trace.B[k] >= w.first && trace.B[k] <= w.second) { excluded = true; break; }
    if (!excluded) { ax.push_back(trace.B[k]); ay.push_back(trace.signal[k]); }
  }
  if (ax.size() < 4)
    throw std::invalid_argument("background fit: need >= 4 anchor points outside the exclusion windows");
  const detail::CubicSpline spline(std::move(ax), std::move(ay));
  Trace out;
  out.B = trace.B;
  out.signal.resize(trace.signal.size());
  for (std::size_t k = 0; k < trace.B.size(); ++k) out.signal[k] = trace.signal[k] - spline(trace.B[k]);
  return out;
}

struct PeakModel {
  double center = 0.0;     // mT
  double gamma = 1.0;      // mT, half-width
  double amplitude = 0.0;  // >= 0, arbitrary units
  double skew = 0.0;       // asymmetry q
  int phase_sign = +1;     // +-1

  void validate() const {
    if (!(gamma > 0.0)) throw std::invalid_argument("peak model: gamma must be > 0");
    if (!std::isfinite(skew)) throw std::invalid_argument("peak model: skew must be finite");
  }
};

// Lock-in lineshape value: phase_sign * amplitude * da/dB with
// da/dB = (q - 2x - q x^2) / (gamma (1 + x^2)^2).
inline double peak_curve(const PeakModel& m, double B) {
  const double x = (B - m.center) / m.gamma;
  const double denom = (1.0 + x * x);
  return m.phase_sign * m.amplitude * (m.skew - 2.0 * x - m.skew * x * x) / (m.gamma * denom * denom);
}

namespace detail {

// Real roots of the cubic q x^3 + 3 x^2 - 3 q x - 1 = 0, the stationary points
// of da/dB. Bracketing scan plus bisection keeps it free of closed-form edge
// cases; all roots lie within |x| <= max(3/|q|, 2) + 1.
inline std::vector<double> dadB_stationary_points(double q) {
  auto p = [q](double x) { return ((q * x + 3.0) * x - 3.0 * q) * x - 1.0; };
  const double reach = std::max(std::abs(q) > 1e-12 ? 3.0 / std::abs(q) : 0.0, 2.0) + 1.0;
  const int N = 20000;
  std::vector<double> roots;
  double x_prev = -reach, p_prev = p(x_prev);
  for (int k = 1; k <= N; ++k) {
    const double x = -reach + 2.0 * reach * k / N;
    const double pk = p(x);
    if (p_prev == 0.0)
      roots.push_back(x_prev);
    else if ((p_prev > 0.0) != (pk > 0.0))
      roots.push_back(bisect(p, x_prev, x, 1e-15));
    x_prev = x;
    p_prev = pk;
  }
  if (p_prev == 0.0) roots.push_back(x_prev);
  return roots;
}

}  // namespace detail

// Peak-to-peak width: field distance between the extrema of the lineshape.
// For a symmetric peak (q = 0) this is exactly 2 gamma / sqrt(3).
inline double peak_dBpp(const PeakModel& m) {
  m.validate();
  const auto roots = detail::dadB_stationary_points(m.skew);
  if (roots.size() < 2) throw NumericError("peak_dBpp: stationary-point search failed");
  auto g = [&m](double x) {
    const double denom = 1.0 + x * x;
    return (m.skew - 2.0 * x - m.skew * x * x) / (denom * denom);
  };
  double x_max = roots[0], x_min = roots[0];
  for (double x : roots) {
    if (g(x) > g(x_max)) x_max = x;
    if (g(x) < g(x_min)) x_min = x;
  }
  return m.gamma * std::abs(x_max - x_min);
}

struct PeakFitResult {
  std::vector<PeakModel> peaks;
  std::vector<std::array<double, 4>> uncertainties;  // per peak: center, gamma, amplitude, skew
  std::vector<double> dBpp;                          // per peak, mT
  double residual_norm = 0.0;
  bool converged = false;
  bool degenerate = false;  // vanishing amplitude (nothing to fit)
  std::vector<std::string> warnings;
  std::vector<double> residual_history;
};

namespace detail {

// Seed peaks by pairing adjacent opposite-lobe local extrema of the trace.
inline std::vector<PeakModel> auto_seed(const Trace& trace, int n_peaks) {
  const std::size_t n = trace.B.size();
  double scale = 0.0;
  for (double s : trace.signal) scale = std::max(scale, std::abs(s));
  struct Extremum { double B; double v; };
  std::vector<Extremum> ext;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double s = trace.signal[k];
    if (std::abs(s) < 0.05 * scale) continue;
    if ((s > trace.signal[k - 1] && s >= trace.signal[k + 1]) ||
        (s < trace.signal[k - 1] && s <= trace.signal[k + 1]))
      ext.push_back({trace.B[k], s});
  }
  struct Candidate { double swing; PeakModel m; };
  std::vector<Candidate> cands;
  for (std::size_t k = 0; k + 1 < ext.size(); ++k) {
    const auto &e0 = ext[k], &e1 = ext[k + 1];
    if ((e0.v > 0.0) == (e1.v > 0.0)) continue;
    PeakModel m;
    m.center = 0.5 * (e0.B + e1.B);
    m.gamma = std::max(0.5 * std::sqrt(3.0) * (e1.B - e0.B), 1e-6);
    const double swing = std::abs(e0.v - e1.v);
    // |da/dB| peaks at (3 sqrt(3)/8)/gamma for q = 0.
    m.amplitude = 0.5 * swing * m.gamma / (3.0 * std::sqrt(3.0) / 8.0);
    m.phase_sign = e0.v > 0.0 ? +1 : -1;  // positive lobe first => positive orientation
    cands.push_back({swing, m});
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.swing > b.swing; });
  std::vector<PeakModel> seeds;
  for (int k = 0; k < n_peaks && k < static_cast<int>(cands.size()); ++k) seeds.push_back(cands[k].m);
  // Pad with evenly spaced coarse seeds when the trace lacks clear extrema.
  const double span = trace.B.back() - trace.B.front();
  while (static_cast<int>(seeds.size()) < n_peaks) {
    PeakModel m;
    const int k = static_cast<int>(seeds.size());
    m.center = trace.B.front() + (k + 1) * span / (n_peaks + 1);
    m.gamma = span / 10.0;
    m.amplitude = scale * m.gamma;
    seeds.push_back(m);
  }
  // Deterministic output order: ascending center.
  std::stable_sort(seeds.begin(), seeds.end(),
                   [](const PeakModel& a, const PeakModel& b) { return a.center < b.center; });
  return seeds;
}

}  // namespace detail

// Least-squares fit of a sum of first-derivative skewed Lorentzians. Guesses
// may be empty (auto-seeding) or one per peak. Internally the amplitude is
// signed so the optimizer can flip phase; results are normalized back to
// amplitude >= 0 with the sign carried by phase_sign.
inline PeakFitResult fit_peaks(const Trace& trace, int n_peaks, std::vector<PeakModel> guesses = {}) {
  detail::validate_trace(trace);
  if (n_peaks < 1) throw std::invalid_argument("fit_peaks: n_peaks must be >= 1");
  if (!guesses.empty() && static_cast<int>(guesses.size()) != n_peaks)
    throw std::invalid_argument("fit_peaks: guess count must match n_peaks");
  const double B_lo = trace.B.front(), B_hi = trace.B.back();
  for (const auto& g : guesses) {
    g.validate();
    if (g.center < B_lo || g.center > B_hi)
      throw std::invalid_argument("fit_peaks: initial center outside the trace range");
  }
  double scale = 0.0;
  for (double s : trace.signal) scale = std::max(scale, std::abs(s));

  PeakFitResult out;
  if (scale == 0.0) {
    // Nothing to fit: report zero-amplitude peaks and flag the degeneracy.
    out.peaks = guesses.empty() ? detail::auto_seed(trace, n_peaks) : guesses;
    for (auto& p : out.peaks) p.amplitude = 0.0;
    for (auto& p : out.peaks) out.dBpp.push_back(peak_dBpp(p));
    out.uncertainties.assign(out.peaks.size(), {0.0, 0.0, 0.0, 0.0});
    out.converged = true;
    out.degenerate = true;
    return out;
  }
  if (guesses.empty()) guesses = detail::auto_seed(trace, n_peaks);

  const double span = B_hi - B_lo;
  double min_dx = span;
  for (std::size_t k = 0; k + 1 < trace.B.size(); ++k) min_dx = std::min(min_dx, trace.B[k + 1] - trace.B[k]);
  const int P = 4 * n_peaks;
  Eigen::VectorXd x0(P), lower(P), upper(P);
  for (int k = 0; k < n_peaks; ++k) {
    const auto& g = guesses[k];
    x0[4 * k + 0] = g.center;
    x0[4 * k + 1] = g.gamma;
    x0[4 * k + 2] = g.phase_sign * g.amplitude;
    x0[4 * k + 3] = g.skew;
    lower[4 * k + 0] = B_lo - span;
    upper[4 * k + 0] = B_hi + span;
    lower[4 * k + 1] = 0.25 * min_dx;
    upper[4 * k + 1] = 2.0 * span;
    lower[4 * k + 2] = -1e9 * scale * span;
    upper[4 * k + 2] = 1e9 * scale * span;
    lower[4 * k + 3] = -10.0;
    upper[4 * k + 3] = 10.0;
  }
  auto unpack = [n_peaks](const Eigen::VectorXd& p) {
    std::vector<PeakModel> peaks(n_peaks);
    for (int k = 0; k < n_peaks; ++k) {
      peaks[k].center = p[4 * k + 0];
      peaks[k].gamma = p[4 * k + 1];
      peaks[k].amplitude = std::abs(p[4 * k + 2]);
      peaks[k].phase_sign = p[4 * k + 2] >= 0.0 ? +1 : -1;
      peaks[k].skew = p[4 * k + 3];
    }
    return peaks;
  };
  auto residuals = [&](const Eigen::VectorXd& p) {
    const auto peaks = unpack(p);
    Eigen::VectorXd r(trace.B.size());
    for (std::size_t m = 0; m < trace.B.size(); ++m) {
      double model = 0.0;
      for (const auto& pk : peaks) model += peak_curve(pk, trace.B[m]);
      r[m] = trace.signal[m] - model;
    }
    return r;
  };

  LeastSquaresOptions opt;
  opt.lower = lower;
  opt.upper = upper;
  const LeastSquaresResult lm = levenberg_marquardt(residuals, x0, opt);

  out.peaks = unpack(lm.x);
  out.residual_norm = std::sqrt(lm.cost);
  out.converged = lm.converged;
  out.residual_history = lm.residual_history;
  for (const auto& p : out.peaks) out.dBpp.push_back(peak_dBpp(p));

  // Covariance-based parameter uncertainties: cov = s^2 (J^T J)^{-1}.
  const int N = static_cast<int>(trace.B.size());
  out.uncertainties.assign(n_peaks, {0.0, 0.0, 0.0, 0.0});
  if (N > P) {
    const double s2 = lm.cost / (N - P);
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(lm.JTJ);
    if (lu.isInvertible()) {
      const Eigen::MatrixXd cov = s2 * lu.inverse();
      for (int k = 0; k < n_peaks; ++k)
        for (int c = 0; c < 4; ++c) out.uncertainties[k][c] = std::sqrt(std::max(cov(4 * k + c, 4 * k + c), 0.0));
    }
  }

  double max_amp = 0.0;
  for (const auto& p : out.peaks) max_amp = std::max(max_amp, p.amplitude / p.gamma);
  if (max_amp < 1e-12 * scale) out.degenerate = true;
  for (int a = 0; a < n_peaks; ++a)
    for (int b = a + 1; b < n_peaks; ++b) {
      const double sep = std::abs(out.peaks[a].center - out.peaks[b].center);
      const double g = std::min(out.peaks[a].gamma, out.peaks[b].gamma);
      if (sep < g / 10.0)
        out.warnings.push_back("peaks " + std::to_string(a) + " and " + std::to_string(b) +
                               " overlap within gamma/10; parameters are ill-conditioned");
    }
  return out;
}

struct Assignment {
  int peak_index = -1;
  int i = 0, j = 0;           // 1-based transition labels; 0 when unassigned
  double predicted_B = 0.0;   // mT, resonance field of the matched transition
  double mismatch = 0.0;      // |fitted center - predicted_B|, mT
  bool assigned = false;
};

struct AssignOptions {
  double window = 0.3;        // mT, maximum accepted mismatch
  double B_min = 0.01, B_max = 10.0;  // candidate search range
  double grid_step = 0.005;   // mT
  double strength_threshold = default_strength_threshold;
  std::optional<std::pair<std::pair<int, int>, std::pair<int, int>>> ct_pair;  // ((i,j) below, (i,j) above)
  double ct_split = 0.0;      // mT, branch split field when ct_pair is set
};

// Match each fitted center to the nearest allowed transition resonance at the
// given carrier. Candidates are the crossings f_ij(B) = rf; a transition with
// no crossing contributes its closest-approach field instead (the turning-point
// geometry near a clock transition).
inline std::vector<Assignment> assign_transitions(const PeakFitResult& fit, const SpinSystem& sys,
                                                  double rf, const AssignOptions& opt = {}) {
  if (!(rf > 0.0)) throw std::invalid_argument("assign_transitions: rf must be > 0");
  if (!(opt.B_min < opt.B_max)) throw std::invalid_argument("assign_transitions: need B_min < B_max");
  const OperatorSet ops = operator_set(sys);
  const int dim = ops.dim;
  const int count = static_cast<int>(std::floor((opt.B_max - opt.B_min) / opt.grid_step + 1e-9)) + 1;
  std::vector<double> grid(count);
  std::vector<Eigen::VectorXd> energies(count);
  std::vector<Eigen::MatrixXd> strengths(count);
  for (int m = 0; m < count; ++m) {
    grid[m] = opt.B_min + m * opt.grid_step;
    const EigenSolution sol = solve_at_field(sys, ops, grid[m]);
    energies[m] = sol.energies;
    const Matrix M = sol.states.adjoint() * ops.Sx * sol.states;
    Eigen::MatrixXd S2(dim, dim);
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) S2(a, b) = std::norm(M(a, b));
    strengths[m] = S2;
  }

  struct Candidate { int i, j; double B; };
  std::vector<Candidate> candidates;
  for (int a = 0; a < dim; ++a) {
    for (int b = a + 1; b < dim; ++b) {
      auto detune = [&](double B) {
        const EigenSolution s = solve_at_field(sys, ops, B);
        return (s.energies[b] - s.energies[a]) - rf;
      };
      bool crossed = false;
      double best_miss = std::numeric_limits<double>::infinity();
      int best_m = 0;
      for (int m = 0; m < count; ++m) {
        const double d = (energies[m][b] - energies[m][a]) - rf;
        if (std::abs(d) < best_miss) { best_miss = std::abs(d); best_m = m; }
        if (m == 0) continue;
        const double dp = (energies[m - 1][b] - energies[m - 1][a]) - rf;
        if (dp == 0.0 || (dp > 0.0) == (d > 0.0)) continue;
        if (strengths[m - 1](a, b) <= opt.strength_threshold || strengths[m](a, b) <= opt.strength_threshold)
          continue;
        candidates.push_back({a + 1, b + 1, bisect(detune, grid[m - 1], grid[m], 1e-9)});
        crossed = true;
      }
      if (!crossed && strengths[best_m](a, b) > opt.strength_threshold)
        candidates.push_back({a + 1, b + 1,
                              closest_approach_field(sys, a + 1, b + 1, rf,
                                                     std::max(opt.B_min, grid[best_m] - opt.grid_step),
                                                     std::min(opt.B_max, grid[best_m] + opt.grid_step))});
    }
  }
  // Clock-transition pair policy: the merged resonance follows one branch per
  // side of the split field, so drop the other branch's candidates there.
  if (opt.ct_pair) {
    const auto [below, above] = *opt.ct_pair;
    std::vector<Candidate> kept;
    for (const auto& c : candidates) {
      if (c.i == below.first && c.j == below.second && c.B >= opt.ct_split) continue;
      if (c.i == above.first && c.j == above.second && c.B < opt.ct_split) continue;
      kept.push_back(c);
    }
    candidates = kept;
  }

  std::vector<Assignment> out;
  for (std::size_t p = 0; p < fit.peaks.size(); ++p) {
    Assignment a;
    a.peak_index = static_cast<int>(p);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) {
      const double d = std::abs(fit.peaks[p].center - c.B);
      if (d < best) {
        best = d;
        a.i = c.i;
        a.j = c.j;
        a.predicted_B = c.B;
        a.mismatch = d;
      }
    }
    a.assigned = std::isfinite(best) && best <= opt.window;
    if (!a.assigned) { a.i = a.j = 0; }
    out.push_back(a);
  }
  return out;
}

}  // namespace donorspin
