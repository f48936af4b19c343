#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "donorspin/donorspin.hpp"

using namespace donorspin;
using Catch::Approx;

namespace {

Trace make_trace(double lo, double hi, int n, const std::function<double(double)>& f) {
  Trace t;
  for (int k = 0; k < n; ++k) {
    const double B = lo + k * (hi - lo) / (n - 1);
    t.B.push_back(B);
    t.signal.push_back(f(B));
  }
  return t;
}

}  // namespace

TEST_CASE("background subtraction removes a smooth baseline exactly where it can", "[specfit]") {
  // Signal = cubic baseline + a narrow feature inside the excluded window.
  auto baseline = [](double B) { return 0.2 + 0.05 * B - 0.01 * B * B + 0.002 * B * B * B; };
  PeakModel peak;
  peak.center = 5.0;
  peak.gamma = 0.1;
  peak.amplitude = 0.4;
  const Trace t = make_trace(0.0, 10.0, 401, [&](double B) { return baseline(B) + peak_curve(peak, B); });
  const Trace flat = subtract_background(t, {{4.0, 6.0}});
  for (std::size_t k = 0; k < flat.B.size(); ++k) {
    if (flat.B[k] >= 4.0 && flat.B[k] <= 6.0) continue;  // feature region untouched by anchors
    CHECK(flat.signal[k] == Approx(0.0).margin(2e-3));
  }
  // The feature itself survives (peak amplitude scale preserved within 10%).
  double peak_max = 0.0, orig_max = 0.0;
  for (std::size_t k = 0; k < flat.B.size(); ++k)
    if (flat.B[k] > 4.0 && flat.B[k] < 6.0) {
      peak_max = std::max(peak_max, std::abs(flat.signal[k]));
      orig_max = std::max(orig_max, std::abs(peak_curve(peak, flat.B[k])));
    }
  CHECK(peak_max == Approx(orig_max).epsilon(0.1));
}

TEST_CASE("background subtraction needs enough anchors", "[specfit]") {
  const Trace t = make_trace(0.0, 1.0, 10, [](double) { return 1.0; });
  CHECK_THROWS_AS(subtract_background(t, {{-1.0, 2.0}}), std::invalid_argument);  // everything excluded
  Trace unsorted = t;
  std::swap(unsorted.B[2], unsorted.B[3]);
  CHECK_THROWS_AS(subtract_background(unsorted, {}), std::invalid_argument);
}

TEST_CASE("symmetric derivative peak has the analytic extrema spacing", "[specfit]") {
  PeakModel m;
  m.center = 3.8;
  m.gamma = 0.05;
  m.amplitude = 1.0;
  CHECK(peak_dBpp(m) == Approx(2.0 * m.gamma / std::sqrt(3.0)).epsilon(1e-9));

  // Lineshape value and extrema locations for q = 0: stationary points of
  // -2x/(1+x^2)^2 sit at x = +-1/sqrt(3).
  const double xm = 1.0 / std::sqrt(3.0);
  const double left = peak_curve(m, m.center - xm * m.gamma);
  const double right = peak_curve(m, m.center + xm * m.gamma);
  CHECK(left == Approx(-right).epsilon(1e-12));
  CHECK(left > 0.0);  // positive lobe below center for positive amplitude
  CHECK(peak_curve(m, m.center) == Approx(0.0).margin(1e-15));
}

TEST_CASE("skewed peak widths match a brute-force scan", "[specfit]") {
  for (double q : {-1.5, -0.3, 0.2, 0.8, 3.0}) {
    PeakModel m;
    m.center = 0.0;
    m.gamma = 1.0;
    m.amplitude = 1.0;
    m.skew = q;
    // Brute force the lineshape extrema on a fine grid.
    double best_max = -1e300, best_min = 1e300, x_at_max = 0, x_at_min = 0;
    for (int k = -400000; k <= 400000; ++k) {
      const double x = k * 1e-4;
      const double v = peak_curve(m, x);
      if (v > best_max) { best_max = v; x_at_max = x; }
      if (v < best_min) { best_min = v; x_at_min = x; }
    }
    CHECK(peak_dBpp(m) == Approx(std::abs(x_at_max - x_at_min)).margin(5e-4));
  }
}

TEST_CASE("peak model validation", "[specfit]") {
  PeakModel m;
  m.gamma = 0.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m.gamma = 1.0;
  m.skew = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("single-peak fit recovers the generating parameters", "[specfit]") {
  PeakModel truth;
  truth.center = 3.80;
  truth.gamma = 0.12;
  truth.amplitude = 0.7;
  truth.skew = 0.4;
  truth.phase_sign = -1;
  const Trace t = make_trace(3.0, 4.6, 321, [&](double B) { return peak_curve(truth, B); });

  const PeakFitResult fit = fit_peaks(t, 1);
  REQUIRE(fit.peaks.size() == 1);
  CHECK(fit.converged);
  CHECK(fit.peaks[0].center == Approx(truth.center).margin(1e-6));
  CHECK(fit.peaks[0].gamma == Approx(truth.gamma).epsilon(1e-4));
  CHECK(fit.peaks[0].amplitude == Approx(truth.amplitude).epsilon(1e-3));
  CHECK(fit.peaks[0].skew == Approx(truth.skew).margin(1e-4));
  CHECK(fit.peaks[0].phase_sign == -1);
  CHECK(fit.residual_norm < 1e-8);
}

TEST_CASE("two overlapping peaks are separable with explicit guesses", "[specfit]") {
  PeakModel a, b;
  a.center = 3.30;
  a.gamma = 0.10;
  a.amplitude = 0.5;
  b.center = 3.55;
  b.gamma = 0.14;
  b.amplitude = 0.3;
  b.phase_sign = -1;
  const Trace t = make_trace(2.8, 4.2, 561, [&](double B) { return peak_curve(a, B) + peak_curve(b, B); });

  std::vector<PeakModel> guesses(2);
  guesses[0].center = 3.25;
  guesses[0].gamma = 0.08;
  guesses[0].amplitude = 0.3;
  guesses[1].center = 3.60;
  guesses[1].gamma = 0.10;
  guesses[1].amplitude = 0.2;
  guesses[1].phase_sign = -1;
  const PeakFitResult fit = fit_peaks(t, 2, guesses);
  REQUIRE(fit.peaks.size() == 2);
  CHECK(fit.converged);
  // Sort by center for comparison.
  auto peaks = fit.peaks;
  std::sort(peaks.begin(), peaks.end(), [](const PeakModel& x, const PeakModel& y) { return x.center < y.center; });
  CHECK(peaks[0].center == Approx(a.center).margin(1e-5));
  CHECK(peaks[1].center == Approx(b.center).margin(1e-5));
  CHECK(peaks[0].amplitude == Approx(a.amplitude).epsilon(1e-3));
  CHECK(peaks[1].amplitude == Approx(b.amplitude).epsilon(1e-3));
}

TEST_CASE("auto-seeding fits a noisy two-peak trace", "[specfit]") {
  PeakModel a, b;
  a.center = 2.0;
  a.gamma = 0.15;
  a.amplitude = 1.0;
  b.center = 4.5;
  b.gamma = 0.2;
  b.amplitude = 0.8;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 0.02);
  const Trace t = make_trace(1.0, 6.0, 501, [&](double B) { return peak_curve(a, B) + peak_curve(b, B) + g(rng); });

  const PeakFitResult fit = fit_peaks(t, 2);
  REQUIRE(fit.peaks.size() == 2);
  auto peaks = fit.peaks;
  std::sort(peaks.begin(), peaks.end(), [](const PeakModel& x, const PeakModel& y) { return x.center < y.center; });
  CHECK(peaks[0].center == Approx(a.center).margin(0.01));
  CHECK(peaks[1].center == Approx(b.center).margin(0.01));
  // Uncertainties are positive and of the noise-implied scale.
  CHECK(fit.uncertainties[0][0] > 0.0);
  CHECK(fit.uncertainties[0][0] < 0.05);
}

TEST_CASE("degenerate traces are flagged instead of fitted", "[specfit]") {
  const Trace zero = make_trace(0.0, 1.0, 50, [](double) { return 0.0; });
  const PeakFitResult fit = fit_peaks(zero, 1);
  CHECK(fit.degenerate);
  CHECK(fit.converged);
  CHECK(fit.peaks[0].amplitude == 0.0);
}

TEST_CASE("nearly coincident peaks raise an overlap warning", "[specfit]") {
  PeakModel a;
  a.center = 3.0;
  a.gamma = 0.2;
  a.amplitude = 0.5;
  const Trace t = make_trace(2.0, 4.0, 401, [&](double B) { return peak_curve(a, B); });
  std::vector<PeakModel> guesses(2, a);
  guesses[0].amplitude = 0.25;
  guesses[1].amplitude = 0.25;
  guesses[1].center = 3.001;
  const PeakFitResult fit = fit_peaks(t, 2, guesses);
  CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("fit input validation", "[specfit]") {
  const Trace t = make_trace(0.0, 1.0, 50, [](double B) { return B; });
  CHECK_THROWS_AS(fit_peaks(t, 0), std::invalid_argument);
  std::vector<PeakModel> guesses(2);
  CHECK_THROWS_AS(fit_peaks(t, 1, guesses), std::invalid_argument);
  std::vector<PeakModel> outside(1);
  outside[0].center = 5.0;  // not inside [0, 1]
  outside[0].gamma = 0.1;
  CHECK_THROWS_AS(fit_peaks(t, 1, outside), std::invalid_argument);
}

TEST_CASE("assignment matches fitted centers to predicted resonances", "[specfit]") {
  const SpinSystem sys = as75();
  // Fabricate a fit result holding the known 383 MHz resonance of (3,4) plus
  // one center far from any transition.
  PeakFitResult fit;
  PeakModel near, far;
  near.center = 0.668;  // true resonance at 0.6659 mT
  near.gamma = 0.02;
  near.amplitude = 1.0;
  far.center = 9.7;
  far.gamma = 0.02;
  far.amplitude = 1.0;
  fit.peaks = {near, far};

  AssignOptions opt;
  opt.B_min = 0.3;
  opt.B_max = 10.0;
  opt.window = 0.05;
  const auto assignments = assign_transitions(fit, sys, 383.0, opt);
  REQUIRE(assignments.size() == 2);
  CHECK(assignments[0].assigned);
  CHECK(assignments[0].i == 3);
  CHECK(assignments[0].j == 4);
  CHECK(assignments[0].predicted_B == Approx(0.665916).margin(1e-3));
  CHECK(assignments[0].mismatch == Approx(0.668 - 0.665916).margin(1e-3));
  CHECK_FALSE(assignments[1].assigned);
}

TEST_CASE("assignment respects the clock-transition branch policy", "[specfit]") {
  const SpinSystem sys = as75();
  PeakFitResult fit;
  PeakModel lowside, highside;
  lowside.center = 3.60;
  lowside.gamma = 0.1;
  lowside.amplitude = 1.0;
  highside.center = 4.31;
  highside.gamma = 0.1;
  highside.amplitude = 1.0;
  fit.peaks = {lowside, highside};

  AssignOptions opt;
  opt.B_min = 3.0;
  opt.B_max = 5.0;
  opt.window = 0.3;
  opt.ct_pair = {{2, 5}, {3, 6}};
  opt.ct_split = 3.8003;
  const auto assignments = assign_transitions(fit, sys, 383.35, opt);
  REQUIRE(assignments.size() == 2);
  CHECK(assignments[0].assigned);
  CHECK(assignments[0].i == 2);
  CHECK(assignments[0].j == 5);
  CHECK(assignments[1].assigned);
  // Above the split only the (3,6) branch candidates survive the policy, so
  // the 4.31 mT peak maps to (3,6) even though a (2,5) crossing at 4.00 mT
  // would otherwise compete.
  CHECK(assignments[1].i == 3);
  CHECK(assignments[1].j == 6);
}
