#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "donorspin/donorspin.hpp"

using namespace donorspin;
using Catch::Approx;

namespace {

Matrix commutator(const Matrix& A, const Matrix& B) { return A * B - B * A; }

Matrix random_hermitian(int n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix A(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) A(r, c) = Complex(g(rng), g(rng));
  return Matrix(0.5 * (A + A.adjoint()));
}

}  // namespace

TEST_CASE("physical constants match CODATA values", "[spin]") {
  CHECK(constants::mu_B_over_h == 13.996244936072705);           // MHz/mT
  CHECK(constants::mu_N_over_h == 7.6225932291103205e-3);        // MHz/mT
  CHECK(constants::mu_B_over_h / constants::mu_N_over_h == Approx(1836.152673426).epsilon(1e-10));
  CHECK(constants::k_B_eV_per_K == 8.617333262e-5);
}

TEST_CASE("spin operators obey angular momentum algebra", "[spin]") {
  for (double s : {0.5, 1.0, 1.5, 2.5}) {
    const auto ops = spin_operators(s);
    const auto& [Sx, Sy, Sz] = ops;
    const int d = static_cast<int>(std::lround(2 * s + 1));
    REQUIRE(Sx.rows() == d);

    // Hermiticity
    CHECK((Sx - Sx.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((Sy - Sy.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((Sz - Sz.adjoint()).cwiseAbs().maxCoeff() < 1e-14);

    // [Sx, Sy] = i Sz and cyclic permutations
    const Complex I(0.0, 1.0);
    CHECK((commutator(Sx, Sy) - I * Sz).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((commutator(Sy, Sz) - I * Sx).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((commutator(Sz, Sx) - I * Sy).cwiseAbs().maxCoeff() < 1e-13);

    // Casimir: S^2 = s(s+1) I
    const Matrix S2 = Sx * Sx + Sy * Sy + Sz * Sz;
    const Matrix expect = s * (s + 1) * Matrix::Identity(d, d);
    CHECK((S2 - expect).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("spin operator construction rejects bad spin values", "[spin]") {
  CHECK_THROWS_AS(spin_operators(0.3), std::invalid_argument);
  CHECK_THROWS_AS(spin_operators(-0.5), std::invalid_argument);
}

TEST_CASE("composite operator set has the right structure", "[spin]") {
  const SpinSystem sys = as75();
  const OperatorSet ops = operator_set(sys);
  REQUIRE(ops.dim == 8);
  // Electron and nuclear operators act on different factors, so they commute.
  CHECK(commutator(ops.Sx, ops.Ix).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(commutator(ops.Sz, ops.Iy).cwiseAbs().maxCoeff() < 1e-14);
  // Electron algebra survives the tensor lift.
  const Complex I(0.0, 1.0);
  CHECK((commutator(ops.Sx, ops.Sy) - I * ops.Sz).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((commutator(ops.Ix, ops.Iy) - I * ops.Iz).cwiseAbs().maxCoeff() < 1e-13);

  const OperatorSet pops = operator_set(pb0());
  REQUIRE(pops.dim == 2);
  CHECK(pops.Ix.cwiseAbs().maxCoeff() == 0.0);  // I = 0: nuclear operators vanish
}

TEST_CASE("spin-dot coupling term is Hermitian and traceless", "[spin]") {
  const OperatorSet ops = operator_set(as75());
  const Matrix SI = spin_dot(ops);
  CHECK((SI - SI.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(std::abs(SI.trace()) < 1e-12);
}

TEST_CASE("Hamiltonian is Hermitian at any field", "[spin]") {
  const SpinSystem sys = as75();
  const OperatorSet ops = operator_set(sys);
  for (double B : {0.0, 0.1, 3.8, 120.0}) {
    const Matrix H = build_hamiltonian(sys, ops, B);
    CHECK((H - H.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("zero-field hyperfine multiplets carry the analytic energies", "[spin]") {
  // A S.I with S=1/2, I=3/2 splits into F=1 (3 states, -5A/4) and
  // F=2 (5 states, +3A/4).
  const SpinSystem sys = as75();
  const EigenSolution sol = solve_at_field(sys, 0.0);
  const double lower = -1.25 * sys.A;  // -248.0 MHz
  const double upper = +0.75 * sys.A;  // +148.8 MHz
  for (int k = 0; k < 3; ++k) CHECK(sol.energies[k] == Approx(lower).margin(1e-9));
  for (int k = 3; k < 8; ++k) CHECK(sol.energies[k] == Approx(upper).margin(1e-9));
  CHECK(sol.energies[7] - sol.energies[0] == Approx(2.0 * sys.A).margin(1e-9));
}

TEST_CASE("electron-only system reproduces the linear Zeeman line", "[spin]") {
  const SpinSystem sys = pb0();
  for (double B : {0.5, 3.571, 10.0}) {
    const EigenSolution sol = solve_at_field(sys, B);
    const double expected = sys.g_e * constants::mu_B_over_h * B;
    CHECK(sol.energies[1] - sol.energies[0] == Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("eigensolver reconstructs random Hermitian matrices", "[spin]") {
  for (int n : {2, 5, 8}) {
    const Matrix H = random_hermitian(n, 1000u + n);
    const EigenSolution sol = eigensolve(H);

    // Residual H V = V diag(E)
    const Matrix V = sol.states;
    const Matrix R = H * V - V * sol.energies.cast<Complex>().asDiagonal().toDenseMatrix();
    CHECK(R.cwiseAbs().maxCoeff() < 1e-10);

    // Orthonormal eigenbasis
    CHECK((V.adjoint() * V - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);

    // Ascending energies
    for (int k = 0; k + 1 < n; ++k) CHECK(sol.energies[k] <= sol.energies[k + 1]);
  }
}

TEST_CASE("eigensolver agrees with the analytic 2x2 solution", "[spin]") {
  Matrix H(2, 2);
  H << Complex(1.0, 0.0), Complex(0.3, -0.4), Complex(0.3, 0.4), Complex(-2.0, 0.0);
  const EigenSolution sol = eigensolve(H);
  const double tr = -1.0, det = 1.0 * -2.0 - std::norm(Complex(0.3, -0.4));
  const double disc = std::sqrt(tr * tr - 4 * det);
  CHECK(sol.energies[0] == Approx(0.5 * (tr - disc)).epsilon(1e-12));
  CHECK(sol.energies[1] == Approx(0.5 * (tr + disc)).epsilon(1e-12));
}

TEST_CASE("eigensolver output is deterministic and gauge-fixed", "[spin]") {
  const Matrix H = random_hermitian(8, 77u);
  const EigenSolution a = eigensolve(H);
  const EigenSolution b = eigensolve(H);
  CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);  // bitwise identical
  // Gauge: the largest-magnitude component of every column is real positive.
  for (int c = 0; c < 8; ++c) {
    int arg = 0;
    double best = 0.0;
    for (int r = 0; r < 8; ++r)
      if (std::abs(a.states(r, c)) > best) { best = std::abs(a.states(r, c)); arg = r; }
    CHECK(std::abs(std::arg(a.states(arg, c))) < 1e-12);
  }
}

TEST_CASE("eigensolver handles edge-case inputs", "[spin]") {
  // Zero matrix: valid, all eigenvalues zero.
  const EigenSolution z = eigensolve(Matrix::Zero(4, 4));
  CHECK(z.energies.cwiseAbs().maxCoeff() == 0.0);
  // Already-diagonal matrix.
  Matrix D = Matrix::Zero(3, 3);
  D(0, 0) = 3.0; D(1, 1) = -1.0; D(2, 2) = 0.5;
  const EigenSolution d = eigensolve(D);
  CHECK(d.energies[0] == Approx(-1.0));
  CHECK(d.energies[2] == Approx(3.0));
  // Markedly non-Hermitian input is rejected.
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS(eigensolve(bad), std::invalid_argument);
}

TEST_CASE("spin system validation and file parsing", "[spin]") {
  CHECK_NOTHROW(as75().validate());
  CHECK_NOTHROW(pb0().validate());

  SpinSystem bad = as75();
  bad.S = 0.3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  const std::map<std::string, std::string> kv{{"name", "As75"}, {"S", "0.5"},    {"I", "1.5"},
                                              {"A_MHz", "198.4"}, {"g_e", "1.99837"}, {"g_n", "0.959"}};
  const SpinSystem sys = spin_system_from_kv(kv);
  CHECK(sys.A == 198.4);
  CHECK(sys.dimension() == 8);

  auto missing = kv;
  missing.erase("g_e");
  CHECK_THROWS_AS(spin_system_from_kv(missing), std::invalid_argument);
  auto garbled = kv;
  garbled["S"] = "half";
  CHECK_THROWS_AS(spin_system_from_kv(garbled), std::invalid_argument);
}

TEST_CASE("field-derivative operator matches a finite difference of H", "[spin]") {
  const SpinSystem sys = as75();
  const OperatorSet ops = operator_set(sys);
  const double h = 1e-4;
  const Matrix fd = (build_hamiltonian(sys, ops, 1.0 + h) - build_hamiltonian(sys, ops, 1.0 - h)) / (2 * h);
  CHECK((fd - dH_dB0(sys, ops)).cwiseAbs().maxCoeff() < 1e-9);
}
