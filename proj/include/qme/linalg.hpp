#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>

#include "qme/errors.hpp"

namespace qme::linalg {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

// Dense cap: 12 qubits, 4096x4096 complex.
inline constexpr int n_max = 12;
inline constexpr int dim_max = 1 << n_max;

// Structure tags attached by the builders. They are hints, not proofs; where
// a contract depends on the structure the strict mode re-verifies it.
enum Tag : unsigned {
  tag_none = 0,
  tag_hermitian = 1u << 0,
  tag_unitary = 1u << 1,
  tag_density = 1u << 2,
};

// Runtime verification toggle, on by default. The sweep drivers switch it
// off inside hot loops where every operand was produced by the library.
bool strict_checks();
void set_strict_checks(bool on);

// RAII helper used by the sweep drivers.
struct ScopedChecks {
  explicit ScopedChecks(bool on) : previous(strict_checks()) { set_strict_checks(on); }
  ~ScopedChecks() { set_strict_checks(previous); }
  bool previous;
};

struct OperatorMatrix {
  Matrix m;
  unsigned tags = tag_none;

  OperatorMatrix() = default;
  explicit OperatorMatrix(Matrix mat, unsigned t = tag_none) : m(std::move(mat)), tags(t) {}

  int dim() const { return static_cast<int>(m.rows()); }
  bool has(Tag t) const { return (tags & t) != 0; }

  static OperatorMatrix identity(int dim);
};

bool is_power_of_two(int v);
bool is_hermitian(const Matrix& m, double tol = 1e-12);
bool is_unitary(const Matrix& m, double tol = 1e-12);
bool is_density(const Matrix& m, double tol = 1e-10);
double max_abs_diff(const Matrix& a, const Matrix& b);

// Single-qubit blocks. pauli accepts 'x', 'y' or 'z'; rotation_y(theta) is
// the closed-form cos(theta/2) I - i sin(theta/2) sigma_y, a real rotation.
OperatorMatrix pauli(char axis);
OperatorMatrix rotation_y(double theta);

OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b);

// Places a 2x2 operator on a 1-based site of an n-qubit register. Site 1 is
// the leftmost tensor factor (most significant bit of the basis index).
OperatorMatrix embed_site(const OperatorMatrix& op, int site, int n);

struct EigenDecomposition {
  Eigen::VectorXd eigenvalues;  // ascending
  Matrix eigenvectors;          // columns, unitary
};

EigenDecomposition hermitian_eig(const OperatorMatrix& a);

// V f(Lambda) V^dagger for Hermitian input. Signals DomainError when f is
// not finite at an eigenvalue.
OperatorMatrix matrix_function(const OperatorMatrix& a, const std::function<double(double)>& f);

}  // namespace qme::linalg
