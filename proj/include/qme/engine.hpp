#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qme/linalg.hpp"

namespace qme::engine {

using linalg::OperatorMatrix;

// zz coupling between 1-based sites j < k.
struct Coupling {
  int j = 0;
  int k = 0;
  double delta = 0.0;
};

struct SystemSpec {
  int n_sites = 1;
  std::vector<double> epsilon;     // level splitting per site
  std::vector<Coupling> coupling;  // upper triangle only
  double beta = 1.0;               // inverse temperature, > 0

  void validate() const;
  double coupling_between(int j, int k) const;  // 0 when the pair is absent
};

struct DetectorSpec {
  int site = 1;
  double kappa = 0.5;  // measurement strength in [0,1]; 0.5 is the trivial point
};

// One outcome of the composite measurement. The label carries one '+'/'-'
// per detector in application order. Branches with probability below
// null_probability have no normalized state and are skipped by optimizers.
inline constexpr double null_probability = 1e-14;

struct MeasurementBranch {
  std::string label;
  double probability = 0.0;
  std::optional<OperatorMatrix> state;
};

// H = 1/2 I + sum_j eps_j/2 sigma_z^j + sum_{j<k} Delta_jk sigma_z^j sigma_z^k.
// Diagonal in the computational basis; site 1 is the most significant bit.
OperatorMatrix build_hamiltonian(const SystemSpec& spec);

OperatorMatrix thermal_state(const SystemSpec& spec);
OperatorMatrix thermal_state(const OperatorMatrix& h, double beta);

// Kraus pair of the generalized sigma_x measurement,
// M_pm = 1/2 (sqrt(kappa) + sqrt(1-kappa)) I +- 1/2 (sqrt(kappa) - sqrt(1-kappa)) sigma_x^site.
std::pair<OperatorMatrix, OperatorMatrix> kraus_pair(const DetectorSpec& det, int n_sites);

// Sequential composition in list order: 2^m branches for m detectors.
std::vector<MeasurementBranch> measure(const OperatorMatrix& rho, std::span<const DetectorSpec> detectors);

// Sum over branches of M rho M^dagger (the non-selective post-measurement state).
OperatorMatrix unconditional_state(const OperatorMatrix& rho, std::span<const DetectorSpec> detectors);

// Product of per-site sigma_y rotations, one angle per site.
OperatorMatrix local_feedback_unitary(std::span<const double> theta);

// Two-qubit collective rotation cos(theta) I - i sin(theta) sigma_y^1 sigma_y^2.
OperatorMatrix global_feedback_unitary(double theta);

OperatorMatrix apply_feedback(const OperatorMatrix& rho, const OperatorMatrix& u);

double energy(const OperatorMatrix& rho, const OperatorMatrix& h);

// Tr[rho (ln rho - ln sigma)], natural log. Eigenvalues of rho below 1e-14
// contribute zero; sigma eigenvalues below 1e-14 signal SupportViolation.
double relative_entropy(const OperatorMatrix& rho, const OperatorMatrix& sigma);

// <P> for a product of single-site Paulis on distinct sites, evaluated by
// bit algebra in O(dim) without building the operator.
double pauli_string_expectation(const OperatorMatrix& rho, std::span<const std::pair<int, char>> ops);

enum class FeedbackMode { local, global };

struct CycleMetrics {
  double e_initial = 0.0;
  double e_measured = 0.0;
  double e_feedback = 0.0;
  double work_extracted = 0.0;              // e_measured - e_feedback
  double work_erasure = 0.0;                // (1/beta) D(rho_F || rho_th)
  std::optional<double> efficiency;         // empty when e_measured is zero within 1e-14
};

CycleMetrics cycle_metrics(const SystemSpec& spec, const MeasurementBranch& branch,
                           std::span<const double> theta, FeedbackMode mode);

// Internal-reuse variant: caller supplies the Hamiltonian and thermal state.
CycleMetrics cycle_metrics_with(const OperatorMatrix& h, const OperatorMatrix& rho_th, double beta,
                                const MeasurementBranch& branch, std::span<const double> theta,
                                FeedbackMode mode);

// Eigenvalues ascending plus the gap between ground and first excited level.
std::pair<std::vector<double>, double> spectrum_and_gap(const SystemSpec& spec);

}  // namespace qme::engine
