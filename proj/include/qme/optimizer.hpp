#pragma once

#include <span>
#include <utility>
#include <vector>

#include "qme/engine.hpp"
#include "qme/parallel.hpp"

namespace qme::opt {

using engine::SystemSpec;
using linalg::OperatorMatrix;

struct SearchConfig {
  double grid_spacing = 0.1;        // radians between hybrid seeds
  double theta_min = -3.14159265358979323846;
  double theta_max = 3.14159265358979323846;  // seeds cover [min, max)
  int k_max = 200;                  // refinement sweep cap
  double convergence_tol = 1e-10;   // l-inf angle change per sweep
  double cluster_tol = 1e-3;        // l-inf (mod 2pi) single-linkage radius
  double gradient_tol = 1e-8;       // stationarity acceptance

  void validate() const;
};

enum class Classification { minimum, maximum, saddle, degenerate };

const char* classification_name(Classification c);

struct StationaryPoint {
  std::vector<double> theta;  // wrapped to [-pi, pi)
  double feedback_energy = 0.0;
  double gradient_norm = 0.0;
  Classification classification = Classification::degenerate;
};

// Correlator cache for one (rho_M, spec) pair. The feedback energy of the
// local rotation family depends on rho_M only through <sigma_z^j>, <sigma_x^j>
// and the four zz/zx/xz/xx correlators of each coupled pair, so every
// evaluation after construction is O(sites + couplings).
class FeedbackLandscape {
 public:
  FeedbackLandscape(const OperatorMatrix& rho_m, const SystemSpec& spec);

  int sites() const { return n_; }

  double energy(std::span<const double> theta) const;

  // Stationarity coefficients of 1-based site j at the given other-angles:
  // E_F(theta_j) = const + A_j cos(theta_j) - B_j sin(theta_j).
  std::pair<double, double> coeffs(int j, std::span<const double> theta) const;

  // Component j is -(A_j sin theta_j + B_j cos theta_j).
  std::vector<double> gradient(std::span<const double> theta) const;

  // Central second differences with step 1e-4.
  Eigen::MatrixXd hessian(std::span<const double> theta) const;

  // True when every coefficient amplitude vanishes (nothing to optimize).
  bool flat(double tol = 1e-14) const;

 private:
  struct PairTerms {
    int j, k;  // 0-based, j < k
    double delta;
    double czz, czx, cxz, cxx;  // first index = operator on j, second on k
  };

  void check_theta(std::span<const double> theta) const;

  int n_;
  std::vector<double> eps_;
  std::vector<double> a_, b_;  // <sigma_z^j>, <sigma_x^j>
  std::vector<PairTerms> pairs_;
};

// Operator-path evaluation Tr(rho_M U^dag(theta) H U(theta)); the reference
// the closed-form landscape is tested against.
double feedback_energy(const OperatorMatrix& rho_m, const SystemSpec& spec, std::span<const double> theta);

std::pair<double, double> stationarity_coeffs_analytic(const OperatorMatrix& rho_m, const SystemSpec& spec,
                                                       int j, std::span<const double> theta_others);

// Independent four-point extraction from operator-path energies:
// A = (E(0) - E(pi))/2, B = (E(3pi/2) - E(pi/2))/2.
std::pair<double, double> stationarity_coeffs_numeric(const OperatorMatrix& rho_m, const SystemSpec& spec,
                                                      int j, std::span<const double> theta_others);

std::vector<double> gradient(const OperatorMatrix& rho_m, const SystemSpec& spec,
                             std::span<const double> theta);

Eigen::MatrixXd hessian(const OperatorMatrix& rho_m, const SystemSpec& spec,
                        std::span<const double> theta);

// Branch rule for the cyclic tangent update, which is only defined mod pi.
// minimize: keep the per-coordinate energy-minimizing representative
// (exact coordinate descent; the default). nearest: keep the representative
// closest to the current angle, under which every stationary point of any
// min/max branch combination is a fixed point.
enum class BranchRule { minimize, nearest };

struct RefineResult {
  std::vector<double> theta;
  bool converged = false;
  int iterations = 0;
};

RefineResult fixed_point_refine(const FeedbackLandscape& land, std::span<const double> seed,
                                const SearchConfig& cfg, BranchRule rule = BranchRule::minimize);
RefineResult fixed_point_refine(const OperatorMatrix& rho_m, const SystemSpec& spec,
                                std::span<const double> seed, const SearchConfig& cfg);

// Seed-and-refine search: coarse Cartesian seed grid, cyclic tangent
// refinement, mod-2pi single-linkage clustering, Hessian classification.
// Returns stationary points sorted by energy then lexicographic angles.
std::vector<StationaryPoint> hybrid_search(const OperatorMatrix& rho_m, const SystemSpec& spec,
                                           const SearchConfig& cfg, Exec exec = Exec::Parallel);

// Dense lattice baseline (inclusive endpoints, grid_size points per axis,
// at most three sites): gradient-norm filter, lattice clustering, Newton
// polish capped at five steps with steps clipped to the lattice spacing.
std::vector<StationaryPoint> grid_search(const OperatorMatrix& rho_m, const SystemSpec& spec,
                                         const SearchConfig& cfg, int grid_size,
                                         Exec exec = Exec::Parallel);

enum class Method { hybrid, grid, both };

// Best classified minimum (falls back to the lowest point when only
// degenerate points exist). Method both cross-checks hybrid against the
// grid baseline and fails loudly past 1e-4 disagreement.
StationaryPoint optimal_feedback(const OperatorMatrix& rho_m, const SystemSpec& spec, Method method,
                                 const SearchConfig& cfg, int grid_size = 361, Exec exec = Exec::Parallel);

// One-parameter collective rotation for two qubits; closed-form optimum of
// a pure sinusoid in 2*theta.
StationaryPoint optimal_global_feedback(const OperatorMatrix& rho_m, const SystemSpec& spec);

double wrap_angle(double x);  // to [-pi, pi)
double angle_dist(double x, double y);  // shortest mod-2pi distance

}  // namespace qme::opt
