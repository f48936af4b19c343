#pragma once

// Physical constants (CODATA 2018).
//
// Internal unit system: energies are stored as E/h in MHz and magnetic fields
// in mT, so the Zeeman coefficients below carry MHz/mT.

namespace donorspin {
namespace constants {

// mu_B / h = 9.2740100783e-24 J/T / 6.62607015e-34 J s  ->  MHz per mT
inline constexpr double mu_B_over_h = 13.996244936072705;

// mu_N / h = 5.0507837461e-27 J/T / 6.62607015e-34 J s  ->  MHz per mT
inline constexpr double mu_N_over_h = 7.6225932291103205e-3;

// Boltzmann constant in eV/K (exact in SI redefinition), used by the
// Arrhenius diffusivity model.
inline constexpr double k_B_eV_per_K = 8.617333262e-5;

}  // namespace constants

// Library version, echoed into output provenance headers.
inline constexpr const char* library_version = "1.0.0";

}  // namespace donorspin
