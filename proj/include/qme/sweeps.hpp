#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qme/engine.hpp"
#include "qme/optimizer.hpp"
#include "qme/parallel.hpp"

namespace qme::sweeps {

using engine::CycleMetrics;
using engine::DetectorSpec;
using engine::MeasurementBranch;
using engine::SystemSpec;
using opt::SearchConfig;

// Detector layouts the sweep drivers compare: a standalone qubit, the
// two-qubit chain probed on site 1, and the chain probed on both sites.
enum class Configuration { n1, n2_D1, n2_D1D2 };

// Label as printed in records ("n=1", "n=2:D1", "n=2:D1D2") and a
// filesystem-safe token for per-configuration output files.
const char* configuration_label(Configuration c);
const char* configuration_token(Configuration c);
Configuration configuration_from_label(const std::string& label);

// all: one row per branch, each carrying the probability-weighted expected
// work column. plus_only: just the all-'+' branch row, the curve the sweep
// plots usually show. expected: a single aggregate row labeled "E".
enum class BranchPolicy { all, plus_only, expected };

const char* branch_policy_name(BranchPolicy policy);
BranchPolicy branch_policy_from_name(const std::string& name);

struct SweepRecord {
  std::string variable;  // "kappa", "xi" or "beta"
  double value = 0.0;
  std::string config_label;
  std::string branch;
  double probability = 0.0;
  std::vector<double> theta_opt;  // empty on aggregate rows
  CycleMetrics metrics;
  std::optional<double> w_expected;
};

std::vector<SweepRecord> kappa_sweep(const SystemSpec& spec, Configuration config,
                                     std::span<const double> kappas, BranchPolicy policy,
                                     const SearchConfig& cfg, Exec exec = Exec::Parallel);

struct SpectrumRecord {
  double delta_z = 0.0;
  std::vector<double> levels;  // ascending
  double gap = 0.0;
  std::optional<double> gap_piecewise;  // closed form, present for epsilon = (0.5, 0.5)
};

std::vector<SpectrumRecord> coupling_sweep(std::pair<double, double> epsilon,
                                           std::span<const double> deltas);

// Sets epsilon_2 = epsilon_1 + xi on the two-qubit system and records the
// optimized cycle per configuration at fixed measurement strength.
std::vector<SweepRecord> detuning_sweep(const SystemSpec& base, std::span<const double> xis,
                                        double kappa, std::span<const Configuration> configs,
                                        BranchPolicy policy, const SearchConfig& cfg,
                                        Exec exec = Exec::Parallel);

struct PairRecord {
  double kappa = 0.0;
  std::string branch;
  double probability = 0.0;
  double w_local = 0.0;
  double w_global = 0.0;
  double ef_local = 0.0;
  double ef_global = 0.0;
  std::vector<double> theta_local;
  double theta_global = 0.0;
};

// Per kappa and branch: best product-rotation work against best collective-
// rotation work on the same post-measurement state.
std::vector<PairRecord> local_vs_global(const SystemSpec& spec, std::span<const int> detector_sites,
                                        std::span<const double> kappas, const SearchConfig& cfg,
                                        Exec exec = Exec::Parallel);

struct RobustnessRecord {
  double delta_deg = 0.0;
  double ratio = 0.0;  // worst-case W(theta* + delta) / W(theta*)
  double w_perturbed = 0.0;
  std::vector<double> worst_direction;
};

// Per-angle additive errors: worst case over the 2^N sign-pattern corners
// plus 32 seeded random directions of the l-inf ball of each magnitude.
std::vector<RobustnessRecord> robustness_sweep(const SystemSpec& spec, const MeasurementBranch& branch,
                                               std::span<const double> theta_opt,
                                               std::span<const double> error_deg,
                                               Exec exec = Exec::Parallel);

struct BetaTarget {
  double w = 0.0;
  double eta = 0.0;
};

struct BetaBestFit {
  double beta = 0.0;
  std::string branch;
  double residual = 0.0;  // relative Euclidean mismatch against the target
  double w = 0.0;
  double eta = 0.0;
};

struct BetaScanResult {
  std::vector<SweepRecord> records;
  std::optional<BetaBestFit> best;
};

BetaScanResult beta_scan(const SystemSpec& spec_template, std::span<const DetectorSpec> detectors,
                         std::span<const double> betas, std::optional<BetaTarget> target,
                         const SearchConfig& cfg, Exec exec = Exec::Parallel);

// Default sweep grids.
std::vector<double> default_kappa_grid();  // 0.01 .. 0.99 step 0.01
std::vector<double> default_delta_grid();  // -0.6 .. 0.6 step 0.01
std::vector<double> default_xi_grid();     // 0 .. 0.5 step 0.02
std::vector<double> default_error_grid();  // 0 .. 10 degrees step 1
std::vector<double> default_beta_grid();   // 0.25, 0.5, 1, 2, 4, 8

// Two-qubit gap at epsilon = (0.5, 0.5) as a function of the zz coupling.
double piecewise_gap(double delta);

}  // namespace qme::sweeps
