#pragma once

// One-dimensional Fickian diffusion of a dopant concentration profile under a
// thermal budget, integrated with the unconditionally stable Crank-Nicolson
// scheme on a uniform grid. Supports a fixed-source (Dirichlet) boundary and a
// reflecting (zero-flux) boundary, Arrhenius diffusivity, dose accounting, and
// location of the depth where the profile crosses a threshold concentration.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "donorspin/constants.hpp"
#include "donorspin/errors.hpp"
#include "donorspin/optim.hpp"

namespace donorspin {

struct ThermalStep {
  double T_K = 0.0;        // absolute temperature
  double duration_s = 0.0;
  std::string label;

  void validate() const {
    if (!(T_K > 0.0)) throw std::invalid_argument("thermal step: temperature must be > 0 K");
    if (!(duration_s >= 0.0)) throw std::invalid_argument("thermal step: duration must be >= 0");
  }
};

inline ThermalStep thermal_step_celsius(double T_C, double duration_s, std::string label = {}) {
  return ThermalStep{T_C + 273.15, duration_s, std::move(label)};
}

// Arrhenius diffusivity D(T) = D0 exp(-Ea / (kB T)), with D0 in cm^2/s and the
// result converted to nm^2/s for grid work (1 cm^2 = 1e14 nm^2).
struct DiffusivityModel {
  double D0_cm2_s = 0.0;
  double Ea_eV = 0.0;

  void validate() const {
    if (!(D0_cm2_s > 0.0)) throw std::invalid_argument("diffusivity: D0 must be > 0");
    if (!(Ea_eV > 0.0)) throw std::invalid_argument("diffusivity: Ea must be > 0");
  }

  double D_nm2_s(double T_K) const {
    if (!(T_K > 0.0)) throw std::invalid_argument("diffusivity: temperature must be > 0 K");
    return D0_cm2_s * 1e14 * std::exp(-Ea_eV / (constants::k_B_eV_per_K * T_K));
  }
};

enum class BoundaryKind { FixedSource, ZeroFlux };

struct ConcentrationProfile {
  double dx_nm = 0.5;
  std::vector<double> c;  // cm^-3, c[k] at depth k * dx_nm
  BoundaryKind left = BoundaryKind::FixedSource;
  BoundaryKind right = BoundaryKind::ZeroFlux;

  void validate() const {
    if (!(dx_nm > 0.0)) throw std::invalid_argument("profile: grid spacing must be > 0");
    if (c.size() < 3) throw std::invalid_argument("profile: need >= 3 grid points");
    for (double v : c)
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("profile: concentrations must be finite and >= 0");
  }

  double depth_nm(std::size_t k) const { return k * dx_nm; }
};

// Constant-source step profile: surface value c_surface down to `depth_nm`,
// zero beyond, on a domain of total length `length_nm`.
inline ConcentrationProfile make_step_profile(double length_nm, double dx_nm, double c_surface,
                                              double depth_nm = 0.0) {
  if (!(dx_nm > 0.0) || !(length_nm > dx_nm)) throw std::invalid_argument("profile: bad domain");
  if (!(c_surface >= 0.0)) throw std::invalid_argument("profile: surface concentration must be >= 0");
  ConcentrationProfile p;
  p.dx_nm = dx_nm;
  const std::size_t n = static_cast<std::size_t>(std::round(length_nm / dx_nm)) + 1;
  p.c.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    if (p.depth_nm(k) <= depth_nm + 1e-12) p.c[k] = c_surface;
  if (p.c[0] == 0.0) p.c[0] = c_surface;
  return p;
}

namespace detail {

// One Crank-Nicolson substep with mesh ratio r = D dt / dx^2. Fixed-source
// rows pin the boundary value; zero-flux rows use the mirror condition
// c[-1] = c[1] (ghost node), preserving dose at a reflecting wall.
inline void crank_nicolson_substep(std::vector<double>& c, double r, BoundaryKind left, BoundaryKind right) {
  const std::size_t n = c.size();
  std::vector<double> a(n, -0.5 * r), b(n, 1.0 + r), up(n, -0.5 * r), d(n, 0.0);
  for (std::size_t k = 1; k + 1 < n; ++k)
    d[k] = 0.5 * r * c[k - 1] + (1.0 - r) * c[k] + 0.5 * r * c[k + 1];
  if (left == BoundaryKind::FixedSource) {
    a[0] = 0.0; b[0] = 1.0; up[0] = 0.0; d[0] = c[0];
  } else {
    a[0] = 0.0; b[0] = 1.0 + r; up[0] = -r;
    d[0] = (1.0 - r) * c[0] + r * c[1];
  }
  if (right == BoundaryKind::FixedSource) {
    a[n - 1] = 0.0; b[n - 1] = 1.0; up[n - 1] = 0.0; d[n - 1] = c[n - 1];
  } else {
    a[n - 1] = -r; b[n - 1] = 1.0 + r; up[n - 1] = 0.0;
    d[n - 1] = r * c[n - 2] + (1.0 - r) * c[n - 1];
  }
  c = tridiagonal_solve(a, b, up, d);
  for (double& v : c) v = std::max(v, 0.0);
}

}  // namespace detail

struct DiffusionOptions {
  double max_mesh_ratio = 1.0;  // cap on D dt / dx^2 per substep
};

// Advance the profile through the thermal budget. Each step is split into
// substeps so the mesh ratio stays at or below the cap, which keeps the
// Crank-Nicolson update free of the oscillatory transients that large ratios
// excite near sharp fronts.
inline ConcentrationProfile diffuse(const ConcentrationProfile& initial, const std::vector<ThermalStep>& steps,
                                    const DiffusivityModel& model, const DiffusionOptions& opt = {}) {
  initial.validate();
  model.validate();
  if (!(opt.max_mesh_ratio > 0.0)) throw std::invalid_argument("diffuse: mesh-ratio cap must be > 0");
  ConcentrationProfile p = initial;
  const double dx2 = p.dx_nm * p.dx_nm;
  for (const auto& step : steps) {
    step.validate();
    if (step.duration_s == 0.0) continue;
    const double D = model.D_nm2_s(step.T_K);
    const double r_total = D * step.duration_s / dx2;
    const double nsub_needed = std::ceil(r_total / opt.max_mesh_ratio);
    if (nsub_needed > 1e7)
      throw NumericError("diffuse: thermal budget needs > 1e7 substeps at this grid spacing; coarsen dx or shorten the step");
    const int nsub = std::max(1, static_cast<int>(nsub_needed));
    const double r = r_total / nsub;
    for (int s = 0; s < nsub; ++s) detail::crank_nicolson_substep(p.c, r, p.left, p.right);
  }
  return p;
}

// Areal dose in cm^-2: trapezoidal integral of c(x) dx with dx in nm
// (1 nm = 1e-7 cm).
inline double dose_cm2(const ConcentrationProfile& p) {
  p.validate();
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < p.c.size(); ++k) sum += 0.5 * (p.c[k] + p.c[k + 1]);
  return sum * p.dx_nm * 1e-7;
}

// Depth (nm) where the profile first falls through `threshold` moving away
// from the surface, linearly interpolated between grid points. Returns 0 when
// the whole profile is below threshold, and nullopt when it never drops below
// (the threshold is crossed nowhere inside the domain).
inline std::optional<double> mit_crossing_depth(const ConcentrationProfile& p, double threshold) {
  p.validate();
  if (!(threshold > 0.0)) throw std::invalid_argument("crossing depth: threshold must be > 0");
  if (p.c[0] < threshold) return 0.0;
  for (std::size_t k = 0; k + 1 < p.c.size(); ++k) {
    if (p.c[k] >= threshold && p.c[k + 1] < threshold) {
      const double f = (p.c[k] - threshold) / (p.c[k] - p.c[k + 1]);
      return p.depth_nm(k) + f * p.dx_nm;
    }
  }
  return std::nullopt;
}

struct ReferenceMarker {
  double depth_nm = 0.0;
  double concentration_cm3 = 0.0;
  std::string label;

  void validate() const {
    if (!(depth_nm >= 0.0)) throw std::invalid_argument("marker: depth must be >= 0");
    if (!(concentration_cm3 >= 0.0)) throw std::invalid_argument("marker: concentration must be >= 0");
  }
};

}  // namespace donorspin
