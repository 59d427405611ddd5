#include "qme/identities.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "qme/linalg.hpp"

namespace qme::identities {

namespace {

using linalg::Matrix;

struct Sampler {
  std::mt19937 gen;
  std::uniform_real_distribution<double> angle{-std::numbers::pi, std::numbers::pi};
  std::uniform_real_distribution<double> unit{-1.0, 1.0};
  explicit Sampler(std::uint32_t seed) : gen(seed) {}
};

Matrix conj_by(const Matrix& u, const Matrix& op) { return u.adjoint() * op * u; }

Matrix kron2(const Matrix& a, const Matrix& b) {
  return linalg::kron(linalg::OperatorMatrix(a), linalg::OperatorMatrix(b)).m;
}

// One-body axis maps: rotating about y sends sigma_x along (cos, sin) in the
// (x, z) plane and sigma_z along (-sin, cos).
double check_sigma_x(Sampler& s, int samples) {
  const Matrix sx = linalg::pauli('x').m;
  const Matrix sz = linalg::pauli('z').m;
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double th = s.angle(s.gen);
    const Matrix u = linalg::rotation_y(th).m;
    const Matrix expected = std::cos(th) * sx + std::sin(th) * sz;
    worst = std::max(worst, linalg::max_abs_diff(conj_by(u, sx), expected));
  }
  return worst;
}

double check_sigma_z(Sampler& s, int samples) {
  const Matrix sx = linalg::pauli('x').m;
  const Matrix sz = linalg::pauli('z').m;
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double th = s.angle(s.gen);
    const Matrix u = linalg::rotation_y(th).m;
    const Matrix expected = -std::sin(th) * sx + std::cos(th) * sz;
    worst = std::max(worst, linalg::max_abs_diff(conj_by(u, sz), expected));
  }
  return worst;
}

// States in the y = 0 Bloch plane stay there; the (x, z) components rotate by
// the feedback angle. Compares traced expectations against that 2x2 rotation.
double check_bloch_rotation(Sampler& s, int samples) {
  const Matrix id = Matrix::Identity(2, 2);
  const Matrix sx = linalg::pauli('x').m;
  const Matrix sz = linalg::pauli('z').m;
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    double a = s.unit(s.gen), b = s.unit(s.gen);
    const double r = std::hypot(a, b);
    if (r > 1.0) { a /= r; b /= r; }
    const double th = s.angle(s.gen);
    const Matrix rho = 0.5 * (id + a * sx + b * sz);
    const Matrix u = linalg::rotation_y(th).m;
    const Matrix rho_after = u * rho * u.adjoint();
    const double ax = (rho_after * sx).trace().real();
    const double az = (rho_after * sz).trace().real();
    const double ay = std::abs((rho_after * linalg::pauli('y').m).trace());
    worst = std::max(worst, std::abs(ax - (a * std::cos(th) + b * std::sin(th))));
    worst = std::max(worst, std::abs(az - (-a * std::sin(th) + b * std::cos(th))));
    worst = std::max(worst, ay);
  }
  return worst;
}

// Two independent per-site rotations act on a product of z/x operators factor
// by factor. axis1/axis2 select which factor sits on each site.
double check_product(Sampler& s, int samples, char axis1, char axis2) {
  const Matrix sx = linalg::pauli('x').m;
  const Matrix sz = linalg::pauli('z').m;
  auto rotated = [&](char axis, double th) -> Matrix {
    if (axis == 'x') return std::cos(th) * sx + std::sin(th) * sz;
    return -std::sin(th) * sx + std::cos(th) * sz;
  };
  const Matrix op1 = axis1 == 'x' ? sx : sz;
  const Matrix op2 = axis2 == 'x' ? sx : sz;
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t1 = s.angle(s.gen), t2 = s.angle(s.gen);
    const Matrix u = linalg::kron(linalg::rotation_y(t1), linalg::rotation_y(t2)).m;
    const Matrix lhs = conj_by(u, kron2(op1, op2));
    const Matrix rhs = kron2(rotated(axis1, t1), rotated(axis2, t2));
    worst = std::max(worst, linalg::max_abs_diff(lhs, rhs));
  }
  return worst;
}

// The entangling rotation exp(-i theta sigma_y sigma_y): single-site sigma_z
// picks up a cross term at twice the angle, the zz product is left alone.
double check_global(Sampler& s, int samples, int which) {
  const Matrix id = Matrix::Identity(2, 2);
  const Matrix sx = linalg::pauli('x').m;
  const Matrix sy = linalg::pauli('y').m;
  const Matrix sz = linalg::pauli('z').m;
  const Matrix yy = kron2(sy, sy);
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double th = s.angle(s.gen);
    const Matrix u = std::cos(th) * Matrix::Identity(4, 4) - linalg::cplx(0, 1) * std::sin(th) * yy;
    Matrix lhs, rhs;
    if (which == 1) {
      lhs = conj_by(u, kron2(sz, id));
      rhs = std::cos(2 * th) * kron2(sz, id) - std::sin(2 * th) * kron2(sx, sy);
    } else if (which == 2) {
      lhs = conj_by(u, kron2(id, sz));
      rhs = std::cos(2 * th) * kron2(id, sz) - std::sin(2 * th) * kron2(sy, sx);
    } else {
      lhs = conj_by(u, kron2(sz, sz));
      rhs = kron2(sz, sz);
    }
    worst = std::max(worst, linalg::max_abs_diff(lhs, rhs));
  }
  return worst;
}

}  // namespace

std::vector<IdentityCheck> run_identity_battery(std::uint32_t seed, int samples, double tolerance) {
  Sampler s(seed);
  std::vector<IdentityCheck> checks;
  auto add = [&](std::string name, double err) {
    checks.push_back({std::move(name), err, tolerance, err <= tolerance});
  };
  add("sigma_x_conjugation", check_sigma_x(s, samples));
  add("sigma_z_conjugation", check_sigma_z(s, samples));
  add("bloch_plane_rotation", check_bloch_rotation(s, samples));
  add("product_zz_conjugation", check_product(s, samples, 'z', 'z'));
  add("product_zx_conjugation", check_product(s, samples, 'z', 'x'));
  add("product_xz_conjugation", check_product(s, samples, 'x', 'z'));
  add("product_xx_conjugation", check_product(s, samples, 'x', 'x'));
  add("entangling_z1_conjugation", check_global(s, samples, 1));
  add("entangling_z2_conjugation", check_global(s, samples, 2));
  add("entangling_zz_invariance", check_global(s, samples, 3));
  return checks;
}

bool all_passed(const std::vector<IdentityCheck>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const IdentityCheck& c) { return c.passed; });
}

}  // namespace qme::identities
