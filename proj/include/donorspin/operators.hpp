#pragma once

// Angular-momentum operator algebra: single-spin matrices from the standard
// ladder construction and the tensor-product operator set for a coupled
// electron-nuclear system.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <unsupported/Eigen/KroneckerProduct>

#include "donorspin/spin_system.hpp"

namespace donorspin {

using Matrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

// Single-spin operators (Jx, Jy, Jz) of dimension 2s+1. Jz is diagonal with
// entries s, s-1, ..., -s; Jx, Jy follow from the ladder operators with
// <m+1|J+|m> = sqrt(s(s+1) - m(m+1)).
inline std::array<Matrix, 3> spin_operators(double s) {
  if (!SpinSystem::valid_spin(s)) throw std::invalid_argument("spin_operators: 2s must be a non-negative integer");
  const int n = static_cast<int>(std::lround(2.0 * s + 1.0));
  Matrix Jp = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double m = s - k;  // J+ raises |m> to |m+1>, stored one row up
    Jp(k - 1, k) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  const Matrix Jm = Jp.adjoint();
  Matrix Jz = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) Jz(k, k) = s - k;
  return {0.5 * (Jp + Jm), Complex(0.0, -0.5) * (Jp - Jm), Jz};
}

// Electron and nuclear operators embedded in the product space:
// S-operators act as (single-spin op) x Identity, I-operators as Identity x (single-spin op).
struct OperatorSet {
  Matrix Sx, Sy, Sz, Ix, Iy, Iz;
  int dim = 0;
};

inline OperatorSet operator_set(const SpinSystem& sys) {
  sys.validate();
  const auto S_ops = spin_operators(sys.S);
  const auto I_ops = spin_operators(sys.I);
  const int nS = static_cast<int>(std::lround(2.0 * sys.S + 1.0));
  const int nI = static_cast<int>(std::lround(2.0 * sys.I + 1.0));
  const Matrix idS = Matrix::Identity(nS, nS);
  const Matrix idI = Matrix::Identity(nI, nI);
  OperatorSet ops;
  ops.Sx = Eigen::kroneckerProduct(S_ops[0], idI);
  ops.Sy = Eigen::kroneckerProduct(S_ops[1], idI);
  ops.Sz = Eigen::kroneckerProduct(S_ops[2], idI);
  ops.Ix = Eigen::kroneckerProduct(idS, I_ops[0]);
  ops.Iy = Eigen::kroneckerProduct(idS, I_ops[1]);
  ops.Iz = Eigen::kroneckerProduct(idS, I_ops[2]);
  ops.dim = nS * nI;
  return ops;
}

// S.I coupling operator (also the hyperfine derivative dH/dA).
inline Matrix spin_dot(const OperatorSet& ops) {
  return ops.Sx * ops.Ix + ops.Sy * ops.Iy + ops.Sz * ops.Iz;
}

}  // namespace donorspin
