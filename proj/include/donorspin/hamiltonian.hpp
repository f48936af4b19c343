#pragma once

// Spin Hamiltonian of a donor electron-nuclear system,
//
//   H = g_e (mu_B/h) B0 Sz  -  g_n (mu_N/h) B0 Iz  +  A S.I
//
// with all entries in MHz (E/h) and B0 in mT.

#include "donorspin/constants.hpp"
#include "donorspin/operators.hpp"
#include "donorspin/spin_system.hpp"

namespace donorspin {

// Field derivative dH/dB0 = g_e (mu_B/h) Sz - g_n (mu_N/h) Iz, in MHz/mT.
inline Matrix dH_dB0(const SpinSystem& sys, const OperatorSet& ops) {
  return sys.g_e * constants::mu_B_over_h * ops.Sz - sys.g_n * constants::mu_N_over_h * ops.Iz;
}

inline Matrix build_hamiltonian(const SpinSystem& sys, const OperatorSet& ops, double B0) {
  return B0 * dH_dB0(sys, ops) + sys.effective_A() * spin_dot(ops);
}

inline Matrix build_hamiltonian(const SpinSystem& sys, double B0) {
  return build_hamiltonian(sys, operator_set(sys), B0);
}

}  // namespace donorspin
