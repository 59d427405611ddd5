#include "qme/linalg.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <atomic>
#include <cmath>
#include <string>

namespace qme::linalg {

namespace {

std::atomic<bool> g_strict{true};

void require_square(const Matrix& m, const char* where) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw ValidationError(std::string(where) + ": matrix must be square and non-empty");
}

}  // namespace

bool strict_checks() { return g_strict.load(std::memory_order_relaxed); }
void set_strict_checks(bool on) { g_strict.store(on, std::memory_order_relaxed); }

OperatorMatrix OperatorMatrix::identity(int dim) {
  if (dim < 1 || dim > dim_max) throw SizeLimit("identity: dimension outside 1.." + std::to_string(dim_max));
  return OperatorMatrix(Matrix::Identity(dim, dim), tag_hermitian | tag_unitary);
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

bool is_hermitian(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return max_abs_diff(m, m.adjoint()) <= tol;
}

bool is_unitary(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return max_abs_diff(m.adjoint() * m, Matrix::Identity(m.rows(), m.cols())) <= tol;
}

bool is_density(const Matrix& m, double tol) {
  if (!is_hermitian(m, tol)) return false;
  if (std::abs(m.trace().real() - 1.0) > tol || std::abs(m.trace().imag()) > tol) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.info() == Eigen::Success && solver.eigenvalues().minCoeff() >= -tol;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError("max_abs_diff: shape mismatch");
  return (a - b).cwiseAbs().maxCoeff();
}

OperatorMatrix pauli(char axis) {
  Matrix m(2, 2);
  const cplx i(0.0, 1.0);
  switch (axis) {
    case 'x': m << 0, 1, 1, 0; break;
    case 'y': m << 0, -i, i, 0; break;
    case 'z': m << 1, 0, 0, -1; break;
    default: throw ValidationError(std::string("pauli: unknown axis '") + axis + "'");
  }
  return OperatorMatrix(std::move(m), tag_hermitian | tag_unitary);
}

OperatorMatrix rotation_y(double theta) {
  const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
  Matrix m(2, 2);
  m << c, -s, s, c;
  return OperatorMatrix(std::move(m), tag_unitary);
}

OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b) {
  require_square(a.m, "kron");
  require_square(b.m, "kron");
  const long dim = static_cast<long>(a.dim()) * b.dim();
  if (dim > dim_max)
    throw SizeLimit("kron: result dimension " + std::to_string(dim) + " exceeds " + std::to_string(dim_max));
  Matrix out = Eigen::kroneckerProduct(a.m, b.m);
  unsigned tags = a.tags & b.tags & (tag_hermitian | tag_unitary | tag_density);
  return OperatorMatrix(std::move(out), tags);
}

OperatorMatrix embed_site(const OperatorMatrix& op, int site, int n) {
  if (n < 1 || n > n_max) throw SizeLimit("embed_site: register size outside 1.." + std::to_string(n_max));
  if (site < 1 || site > n)
    throw BadSite("embed_site: site " + std::to_string(site) + " outside 1.." + std::to_string(n));
  if (op.dim() != 2) throw UnsupportedSize("embed_site: operator must be 2x2");
  OperatorMatrix out = op;
  if (site > 1) out = kron(OperatorMatrix::identity(1 << (site - 1)), out);
  if (site < n) out = kron(out, OperatorMatrix::identity(1 << (n - site)));
  return out;
}

EigenDecomposition hermitian_eig(const OperatorMatrix& a) {
  require_square(a.m, "hermitian_eig");
  const double scale = std::max(1.0, a.m.cwiseAbs().maxCoeff());
  if (!a.has(tag_hermitian) || strict_checks()) {
    if (!is_hermitian(a.m, 1e-12 * scale)) throw NotHermitian("hermitian_eig: input is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.m);
  if (solver.info() != Eigen::Success) throw Error("hermitian_eig: eigensolver did not converge");
  return EigenDecomposition{solver.eigenvalues(), solver.eigenvectors()};
}

OperatorMatrix matrix_function(const OperatorMatrix& a, const std::function<double(double)>& f) {
  EigenDecomposition eig = hermitian_eig(a);
  Eigen::VectorXd mapped(eig.eigenvalues.size());
  for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
    const double v = f(eig.eigenvalues[i]);
    if (!std::isfinite(v))
      throw DomainError("matrix_function: f not finite at eigenvalue " + std::to_string(eig.eigenvalues[i]));
    mapped[i] = v;
  }
  Matrix out = eig.eigenvectors * mapped.asDiagonal() * eig.eigenvectors.adjoint();
  return OperatorMatrix(std::move(out), tag_hermitian);
}

}  // namespace qme::linalg
