#pragma once

// Self-contained Hermitian eigensolver: cyclic complex Jacobi rotations.
// Dimensions in this library are tiny (<= 10), so robustness and determinism
// beat asymptotic speed.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "donorspin/errors.hpp"
#include "donorspin/hamiltonian.hpp"

namespace donorspin {

// Energies ascending; states has the matching eigenvectors as columns
// |1>...|dim> (0-based column k holds paper label |k+1>).
struct EigenSolution {
  double B0 = std::numeric_limits<double>::quiet_NaN();  // mT; NaN if field-free context
  Eigen::VectorXd energies;                              // MHz
  Matrix states;                                         // unitary, columns are eigenstates
};

namespace detail {

// One two-sided Jacobi rotation zeroing A(p,q); A Hermitian, V accumulates the unitary.
inline void jacobi_rotate(Matrix& A, Matrix& V, int p, int q) {
  const Complex apq = A(p, q);
  const double r = std::abs(apq);
  if (r < 1e-300) return;
  const Complex u = apq / r;  // e^{i phi}
  const double app = A(p, p).real();
  const double aqq = A(q, q).real();
  const double tau = (aqq - app) / (2.0 * r);
  const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = t * c;
  const Complex su = s * u;
  const int n = static_cast<int>(A.rows());
  // Column update (A <- A J), J(p,p)=c, J(p,q)=s u, J(q,p)=-s conj(u), J(q,q)=c.
  for (int k = 0; k < n; ++k) {
    const Complex akp = A(k, p), akq = A(k, q);
    A(k, p) = c * akp - std::conj(su) * akq;
    A(k, q) = su * akp + c * akq;
  }
  // Row update (A <- J^H A).
  for (int k = 0; k < n; ++k) {
    const Complex apk = A(p, k), aqk = A(q, k);
    A(p, k) = c * apk - su * aqk;
    A(q, k) = std::conj(su) * apk + c * aqk;
  }
  // Clean the rotated pivot pair exactly.
  A(p, q) = 0.0;
  A(q, p) = 0.0;
  A(p, p) = Complex(A(p, p).real(), 0.0);
  A(q, q) = Complex(A(q, q).real(), 0.0);
  for (int k = 0; k < n; ++k) {
    const Complex vkp = V(k, p), vkq = V(k, q);
    V(k, p) = c * vkp - std::conj(su) * vkq;
    V(k, q) = su * vkp + c * vkq;
  }
}

inline double off_diagonal_norm(const Matrix& A) {
  double sum = 0.0;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      if (i != j) sum += std::norm(A(i, j));
  return std::sqrt(sum);
}

inline double diagonal_norm(const Matrix& A) {
  double sum = 0.0;
  for (int i = 0; i < A.rows(); ++i) sum += A(i, i).real() * A(i, i).real();
  return std::sqrt(sum);
}

}  // namespace detail

// Full spectral decomposition of a Hermitian matrix. The input is symmetrized
// defensively; a correction beyond 1e-10 max-norm is rejected as a shape error.
// Output is deterministic: ascending energies and a fixed eigenvector gauge
// (largest-magnitude component of each column made real positive).
inline EigenSolution eigensolve(Matrix H) {
  if (H.rows() != H.cols() || H.rows() == 0)
    throw std::invalid_argument("eigensolve: matrix must be square and non-empty");
  const double asym = (H - H.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-10)
    throw std::invalid_argument("eigensolve: matrix not Hermitian (max asymmetry " + std::to_string(asym) + ")");
  H = 0.5 * (H + H.adjoint()).eval();

  const int n = static_cast<int>(H.rows());
  Matrix V = Matrix::Identity(n, n);
  const double frob0 = H.norm();
  constexpr int max_sweeps = 100;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const double off = detail::off_diagonal_norm(H);
    if (off <= 1e-12 * detail::diagonal_norm(H) || off <= 1e-14 * frob0 || off == 0.0) {
      converged = true;
      break;
    }
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) detail::jacobi_rotate(H, V, p, q);
  }
  if (!converged) throw NumericError("eigensolve: Jacobi iteration did not converge in 100 sweeps");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&H](int a, int b) { return H(a, a).real() < H(b, b).real(); });

  EigenSolution sol;
  sol.energies.resize(n);
  sol.states.resize(n, n);
  for (int k = 0; k < n; ++k) {
    sol.energies[k] = H(order[k], order[k]).real();
    sol.states.col(k) = V.col(order[k]);
    // Deterministic gauge: rotate the dominant component onto the positive real axis.
    int imax = 0;
    double amax = 0.0;
    for (int r = 0; r < n; ++r) {
      const double a = std::abs(sol.states(r, k));
      if (a > amax) { amax = a; imax = r; }
    }
    if (amax > 0.0) sol.states.col(k) *= std::conj(sol.states(imax, k)) / amax;
  }
  return sol;
}

// Eigensolution of the spin Hamiltonian at one field point.
inline EigenSolution solve_at_field(const SpinSystem& sys, const OperatorSet& ops, double B0) {
  EigenSolution sol = eigensolve(build_hamiltonian(sys, ops, B0));
  sol.B0 = B0;
  return sol;
}

inline EigenSolution solve_at_field(const SpinSystem& sys, double B0) {
  return solve_at_field(sys, operator_set(sys), B0);
}

}  // namespace donorspin
