#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "qme/engine.hpp"
#include "test_util.hpp"

using namespace qme;
using engine::Coupling;
using engine::DetectorSpec;
using engine::MeasurementBranch;
using engine::SystemSpec;
using linalg::cplx;
using linalg::Matrix;
using linalg::OperatorMatrix;

namespace {

SystemSpec single_qubit(double epsilon, double beta = 1.0) {
  SystemSpec spec;
  spec.n_sites = 1;
  spec.epsilon = {epsilon};
  spec.beta = beta;
  return spec;
}

SystemSpec two_qubit(double e1, double e2, double delta, double beta = 1.0) {
  SystemSpec spec;
  spec.n_sites = 2;
  spec.epsilon = {e1, e2};
  if (delta != 0.0) spec.coupling = {{1, 2, delta}};
  spec.beta = beta;
  return spec;
}

double pauli1(const OperatorMatrix& rho, int site, char axis) {
  const std::vector<std::pair<int, char>> s = {{site, axis}};
  return engine::pauli_string_expectation(rho, s);
}

}  // namespace

TEST_CASE("two-qubit hamiltonian diagonal matches the shifted Ising form") {
  const OperatorMatrix h = engine::build_hamiltonian(two_qubit(0.5, 0.5, 0.3));
  const std::vector<double> expected = {1.3, 0.2, 0.2, 0.3};
  for (int i = 0; i < 4; ++i) {
    CHECK(h.m(i, i).real() == doctest::Approx(expected[i]).epsilon(1e-15));
  }
  CHECK(h.m.cwiseAbs().sum() == doctest::Approx(h.m.diagonal().cwiseAbs().sum()));
}

TEST_CASE("single-qubit hamiltonian levels") {
  const OperatorMatrix h = engine::build_hamiltonian(single_qubit(0.5));
  CHECK(h.m(0, 0).real() == doctest::Approx(0.75));
  CHECK(h.m(1, 1).real() == doctest::Approx(0.25));
}

TEST_CASE("system validation rejects malformed specs") {
  SystemSpec spec = single_qubit(0.5);
  spec.epsilon.push_back(0.1);
  CHECK_THROWS_AS(spec.validate(), ValidationError);

  SystemSpec wrong_order = two_qubit(0.5, 0.5, 0.0);
  wrong_order.coupling = {{2, 1, 0.1}};
  CHECK_THROWS_AS(wrong_order.validate(), ValidationError);

  SystemSpec duplicate = two_qubit(0.5, 0.5, 0.1);
  duplicate.coupling.push_back({1, 2, 0.2});
  CHECK_THROWS_AS(duplicate.validate(), ValidationError);

  SystemSpec cold = single_qubit(0.5);
  cold.beta = 0.0;
  CHECK_THROWS_AS(cold.validate(), ValidationError);

  SystemSpec huge;
  huge.n_sites = linalg::n_max + 1;
  huge.epsilon.assign(linalg::n_max + 1, 0.1);
  CHECK_THROWS_AS(huge.validate(), SizeLimit);
}

TEST_CASE("thermal state reproduces the Gibbs populations") {
  const double eps = 0.5, beta = 1.3;
  const OperatorMatrix rho = engine::thermal_state(single_qubit(eps, beta));
  CHECK(rho.has(linalg::tag_density));
  const double z = std::exp(-beta * 0.75) + std::exp(-beta * 0.25);
  CHECK(rho.m(0, 0).real() == doctest::Approx(std::exp(-beta * 0.75) / z).epsilon(1e-14));
  CHECK(rho.m(1, 1).real() == doctest::Approx(std::exp(-beta * 0.25) / z).epsilon(1e-14));

  // <sigma_z> of the Gibbs state is -tanh(beta eps / 2).
  CHECK(pauli1(rho, 1, 'z') == doctest::Approx(-std::tanh(beta * eps / 2)).epsilon(1e-14));
}

TEST_CASE("thermal state survives very low temperature via the ground shift") {
  const OperatorMatrix rho = engine::thermal_state(single_qubit(0.5, 1e6));
  CHECK(rho.m.allFinite());
  CHECK(rho.m(1, 1).real() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kraus pair: completeness, trivial point, and strength flip") {
  for (double kappa : {0.0, 0.2, 0.5, 0.9, 1.0}) {
    const auto [mp, mm] = engine::kraus_pair({1, kappa}, 1);
    const Matrix sum = mp.m.adjoint() * mp.m + mm.m.adjoint() * mm.m;
    CHECK(linalg::max_abs_diff(sum, Matrix::Identity(2, 2)) < 1e-14);
  }

  const auto [mp_half, mm_half] = engine::kraus_pair({1, 0.5}, 1);
  CHECK(linalg::max_abs_diff(mp_half.m, Matrix::Identity(2, 2) / std::sqrt(2.0)) < 1e-15);
  CHECK(linalg::max_abs_diff(mp_half.m, mm_half.m) < 1e-15);

  // kappa -> 1-kappa swaps the pair.
  const auto [mp_a, mm_a] = engine::kraus_pair({1, 0.3}, 1);
  const auto [mp_b, mm_b] = engine::kraus_pair({1, 0.7}, 1);
  CHECK(linalg::max_abs_diff(mp_a.m, mm_b.m) < 1e-15);
  CHECK(linalg::max_abs_diff(mm_a.m, mp_b.m) < 1e-15);

  CHECK_THROWS_AS(engine::kraus_pair({1, -0.01}, 1), BadStrength);
  CHECK_THROWS_AS(engine::kraus_pair({1, 1.01}, 1), BadStrength);
  CHECK_THROWS_AS(engine::kraus_pair({2, 0.5}, 1), BadSite);
}

TEST_CASE("single-qubit measurement branches match the Bloch-vector oracle") {
  const double eps = 0.5, beta = 1.0, kappa = 0.2;
  const SystemSpec spec = single_qubit(eps, beta);
  const OperatorMatrix rho_th = engine::thermal_state(spec);
  const std::vector<DetectorSpec> dets = {{1, kappa}};
  const auto branches = engine::measure(rho_th, dets);
  REQUIRE(branches.size() == 2);
  CHECK(branches[0].label == "+");
  CHECK(branches[1].label == "-");

  const double a_th = -std::tanh(beta * eps / 2);
  const double a_m = 2 * std::sqrt(kappa * (1 - kappa)) * a_th;
  const double b_m = 2 * kappa - 1;
  for (const MeasurementBranch& br : branches) {
    REQUIRE(br.state.has_value());
    CHECK(br.probability == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(pauli1(*br.state, 1, 'z') == doctest::Approx(a_m).epsilon(1e-13));
    CHECK(pauli1(*br.state, 1, 'x') ==
          doctest::Approx(br.label == "+" ? b_m : -b_m).epsilon(1e-13));
  }
}

TEST_CASE("two detectors produce four labeled branches with unit total probability") {
  const SystemSpec spec = two_qubit(-0.05, -0.10, -0.2);
  const OperatorMatrix rho_th = engine::thermal_state(spec);
  const std::vector<DetectorSpec> dets = {{1, 0.3}, {2, 0.3}};
  const auto branches = engine::measure(rho_th, dets);
  REQUIRE(branches.size() == 4);
  CHECK(branches[0].label == "++");
  CHECK(branches[1].label == "+-");
  CHECK(branches[2].label == "-+");
  CHECK(branches[3].label == "--");
  double total = 0.0;
  for (const auto& br : branches) {
    total += br.probability;
    REQUIRE(br.state.has_value());
    CHECK(linalg::is_density(br.state->m));
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));

  // Non-selective evolution keeps the trace.
  const OperatorMatrix uncond = engine::unconditional_state(rho_th, dets);
  CHECK(uncond.m.trace().real() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("feedback unitaries compose per site and reduce to rotation_y") {
  const std::vector<double> theta = {0.4, -1.1};
  const OperatorMatrix u = engine::local_feedback_unitary(theta);
  const OperatorMatrix expected =
      linalg::kron(linalg::rotation_y(0.4), linalg::rotation_y(-1.1));
  CHECK(linalg::max_abs_diff(u.m, expected.m) < 1e-15);

  const OperatorMatrix g = engine::global_feedback_unitary(0.0);
  CHECK(linalg::max_abs_diff(g.m, Matrix::Identity(4, 4)) == 0.0);
  CHECK(linalg::is_unitary(engine::global_feedback_unitary(0.73).m));
  CHECK_THROWS_AS(engine::local_feedback_unitary(std::vector<double>{}), ValidationError);
}

TEST_CASE("relative entropy: zero on identical states, classical oracle on diagonals") {
  const OperatorMatrix rho = engine::thermal_state(single_qubit(0.5, 2.0));
  CHECK(engine::relative_entropy(rho, rho) == doctest::Approx(0.0).epsilon(1e-14));

  Matrix pm = Matrix::Zero(2, 2);
  pm(0, 0) = 0.8;
  pm(1, 1) = 0.2;
  const OperatorMatrix p(pm, linalg::tag_hermitian | linalg::tag_density);
  const double q0 = rho.m(0, 0).real(), q1 = rho.m(1, 1).real();
  const double expected = 0.8 * std::log(0.8 / q0) + 0.2 * std::log(0.2 / q1);
  CHECK(engine::relative_entropy(p, rho) == doctest::Approx(expected).epsilon(1e-13));

  // Support outside sigma's range is signaled, not silently infinite.
  Matrix pure = Matrix::Zero(2, 2);
  pure(0, 0) = 1.0;
  CHECK_THROWS_AS(
      engine::relative_entropy(rho, OperatorMatrix(pure, linalg::tag_hermitian | linalg::tag_density)),
      SupportViolation);
}

TEST_CASE("pauli string expectations match explicit operator construction") {
  std::mt19937 gen(7001);
  for (int n : {1, 2, 3}) {
    const OperatorMatrix rho = test_util::random_density(gen, 1 << n);
    const std::vector<std::vector<std::pair<int, char>>> strings = {
        {{1, 'z'}}, {{1, 'x'}}, {{1, 'y'}}, {{n, 'x'}}, {{1, 'z'}, {n, 'x'}}};
    for (const auto& s : strings) {
      if (s.size() == 2 && n == 1) continue;
      OperatorMatrix op = OperatorMatrix::identity(1 << n);
      for (const auto& [site, axis] : s)
        op = OperatorMatrix(op.m * linalg::embed_site(linalg::pauli(axis), site, n).m);
      const double direct = (rho.m * op.m).trace().real();
      CHECK(engine::pauli_string_expectation(rho, s) == doctest::Approx(direct).epsilon(1e-12));
    }
  }
  const OperatorMatrix rho = test_util::random_density(gen, 4);
  const std::vector<std::pair<int, char>> repeated = {{1, 'z'}, {1, 'x'}};
  CHECK_THROWS_AS(engine::pauli_string_expectation(rho, repeated), ValidationError);
}

TEST_CASE("cycle metrics reproduce the single-qubit closed forms") {
  const double eps = 0.5, beta = 1.0, kappa = 0.2;
  const SystemSpec spec = single_qubit(eps, beta);
  const OperatorMatrix rho_th = engine::thermal_state(spec);
  const auto branches = engine::measure(rho_th, std::vector<DetectorSpec>{{1, kappa}});
  const MeasurementBranch& plus = branches[0];

  const double a_th = -std::tanh(beta * eps / 2);
  const double a_m = 2 * std::sqrt(kappa * (1 - kappa)) * a_th;
  const double b_m = 2 * kappa - 1;
  const double r = std::hypot(a_m, b_m);

  // Optimal angle minimizes E_F; the closed-form optimum and work follow
  // from rotating the Bloch vector onto -z.
  const double theta_star = std::atan2(b_m, -a_m);
  const engine::CycleMetrics m =
      engine::cycle_metrics(spec, plus, std::vector<double>{theta_star}, engine::FeedbackMode::local);

  CHECK(m.e_initial == doctest::Approx(0.5 + (eps / 2) * a_th).epsilon(1e-13));
  CHECK(m.e_measured == doctest::Approx(0.5 + (eps / 2) * a_m).epsilon(1e-13));
  CHECK(m.e_feedback == doctest::Approx(0.5 - (eps / 2) * r).epsilon(1e-13));
  CHECK(m.work_extracted == doctest::Approx((eps / 2) * (a_m + r)).epsilon(1e-12));
  CHECK(m.work_erasure >= 0.0);
  REQUIRE(m.efficiency.has_value());
  CHECK(*m.efficiency < 1.0);

  // Identity feedback extracts nothing.
  const engine::CycleMetrics idle =
      engine::cycle_metrics(spec, plus, std::vector<double>{0.0}, engine::FeedbackMode::local);
  CHECK(idle.work_extracted == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("zero-temperature limit of the optimal single-qubit work") {
  const double eps = 0.5, kappa = 0.2;
  const SystemSpec spec = single_qubit(eps, 50.0);
  const auto branches = engine::measure(engine::thermal_state(spec), std::vector<DetectorSpec>{{1, kappa}});
  const double a_m = -2 * std::sqrt(kappa * (1 - kappa));
  const double b_m = 2 * kappa - 1;
  const double theta_star = std::atan2(b_m, -a_m);
  const engine::CycleMetrics m = engine::cycle_metrics(spec, branches[0], std::vector<double>{theta_star},
                                                       engine::FeedbackMode::local);
  // W -> (eps/2)(1 - 2 sqrt(kappa(1-kappa))) = 0.05 as beta -> infinity.
  CHECK(m.work_extracted == doctest::Approx(0.05).epsilon(1e-8));
}

TEST_CASE("efficiency is undefined when the measured energy vanishes") {
  SystemSpec spec = single_qubit(-1.0, 2.0);  // levels 0 and 1, ground is index 0
  const OperatorMatrix h = engine::build_hamiltonian(spec);
  CHECK(h.m(0, 0).real() == doctest::Approx(0.0));
  Matrix ground = Matrix::Zero(2, 2);
  ground(0, 0) = 1.0;
  MeasurementBranch branch;
  branch.label = "+";
  branch.probability = 1.0;
  branch.state = OperatorMatrix(ground, linalg::tag_hermitian | linalg::tag_density);
  const engine::CycleMetrics m = engine::cycle_metrics(spec, branch, std::vector<double>{0.3},
                                                       engine::FeedbackMode::local);
  CHECK(m.e_measured == doctest::Approx(0.0).epsilon(1e-14));
  CHECK_FALSE(m.efficiency.has_value());
}

TEST_CASE("global feedback needs two qubits and one angle") {
  const SystemSpec spec = two_qubit(0.05, 0.10, -0.2);
  const OperatorMatrix rho_th = engine::thermal_state(spec);
  const auto branches = engine::measure(rho_th, std::vector<DetectorSpec>{{1, 0.2}});
  const engine::CycleMetrics m = engine::cycle_metrics(spec, branches[0], std::vector<double>{0.4},
                                                       engine::FeedbackMode::global);
  CHECK(m.work_extracted == doctest::Approx(m.e_measured - m.e_feedback).epsilon(1e-14));
  CHECK_THROWS_AS(engine::cycle_metrics(spec, branches[0], std::vector<double>{0.4, 0.1},
                                        engine::FeedbackMode::global),
                  ValidationError);
  const SystemSpec one = single_qubit(0.5);
  const auto single = engine::measure(engine::thermal_state(one), std::vector<DetectorSpec>{{1, 0.2}});
  CHECK_THROWS_AS(engine::cycle_metrics(one, single[0], std::vector<double>{0.4},
                                        engine::FeedbackMode::global),
                  UnsupportedSize);
}

TEST_CASE("spectrum_and_gap orders levels and measures the gap") {
  const auto [levels, gap] = engine::spectrum_and_gap(two_qubit(0.5, 0.5, -0.3));
  REQUIRE(levels.size() == 4);
  CHECK(std::is_sorted(levels.begin(), levels.end()));
  CHECK(gap == doctest::Approx(1.0).epsilon(1e-13));  // plateau region

  const auto [levels2, gap2] = engine::spectrum_and_gap(two_qubit(0.5, 0.5, 0.4));
  CHECK(gap2 == doctest::Approx(0.3).epsilon(1e-13));  // 2 delta - 1/2
}
