#include "qme/sweeps.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace qme::sweeps {

using engine::OperatorMatrix;
using opt::StationaryPoint;

namespace {

constexpr double pi = std::numbers::pi;

struct WorkingSetup {
  SystemSpec spec;
  std::vector<int> sites;
};

// Resolves a named configuration against the configured system: n1 runs a
// standalone qubit carrying epsilon_1, the n2 variants require two sites.
WorkingSetup resolve(const SystemSpec& spec, Configuration config) {
  spec.validate();
  WorkingSetup w;
  switch (config) {
    case Configuration::n1:
      if (spec.n_sites == 1) {
        w.spec = spec;
      } else {
        w.spec.n_sites = 1;
        w.spec.epsilon = {spec.epsilon[0]};
        w.spec.beta = spec.beta;
      }
      w.sites = {1};
      return w;
    case Configuration::n2_D1:
    case Configuration::n2_D1D2:
      if (spec.n_sites != 2)
        throw ValidationError(std::string(configuration_label(config)) + " needs a two-qubit system");
      w.spec = spec;
      w.sites = config == Configuration::n2_D1 ? std::vector<int>{1} : std::vector<int>{1, 2};
      return w;
  }
  throw ValidationError("unknown configuration");
}

std::vector<DetectorSpec> detectors_at(const std::vector<int>& sites, double kappa) {
  std::vector<DetectorSpec> dets;
  dets.reserve(sites.size());
  for (int s : sites) dets.push_back({s, kappa});
  return dets;
}

bool all_plus(const std::string& label) {
  return std::all_of(label.begin(), label.end(), [](char c) { return c == '+'; });
}

std::string detector_layout_label(int n_sites, std::span<const DetectorSpec> dets) {
  if (n_sites == 1) return "n=1";
  std::string s = "n=" + std::to_string(n_sites) + ":";
  for (const DetectorSpec& d : dets) s += "D" + std::to_string(d.site);
  return s;
}

struct OptimizedBranch {
  MeasurementBranch branch;
  StationaryPoint point;
  CycleMetrics metrics;
};

// Optimizes every non-null branch of one measurement and evaluates its cycle.
std::vector<OptimizedBranch> optimize_branches(const OperatorMatrix& h, const OperatorMatrix& rho_th,
                                               const SystemSpec& spec,
                                               std::span<const DetectorSpec> dets,
                                               const SearchConfig& cfg) {
  std::vector<OptimizedBranch> out;
  for (MeasurementBranch& br : engine::measure(rho_th, dets)) {
    if (!br.state) continue;
    StationaryPoint point = opt::optimal_feedback(*br.state, spec, opt::Method::hybrid, cfg, 361, Exec::Serial);
    CycleMetrics metrics = engine::cycle_metrics_with(h, rho_th, spec.beta, br, point.theta,
                                                      engine::FeedbackMode::local);
    out.push_back({std::move(br), std::move(point), std::move(metrics)});
  }
  return out;
}

std::vector<SweepRecord> emit_records(const std::string& variable, double value,
                                      const std::string& config_label,
                                      const std::vector<OptimizedBranch>& branches,
                                      BranchPolicy policy) {
  double w_expected = 0.0;
  for (const OptimizedBranch& ob : branches) w_expected += ob.branch.probability * ob.metrics.work_extracted;

  std::vector<SweepRecord> rows;
  if (policy == BranchPolicy::expected) {
    SweepRecord r;
    r.variable = variable;
    r.value = value;
    r.config_label = config_label;
    r.branch = "E";
    CycleMetrics m;
    double p_sum = 0.0;
    for (const OptimizedBranch& ob : branches) {
      const double p = ob.branch.probability;
      p_sum += p;
      m.e_initial = ob.metrics.e_initial;  // branch independent
      m.e_measured += p * ob.metrics.e_measured;
      m.e_feedback += p * ob.metrics.e_feedback;
      m.work_extracted += p * ob.metrics.work_extracted;
      m.work_erasure += p * ob.metrics.work_erasure;
    }
    if (std::abs(m.e_measured) >= 1e-14)
      m.efficiency = (m.work_extracted - m.work_erasure) / m.e_measured;
    r.probability = p_sum;
    r.metrics = m;
    r.w_expected = w_expected;
    rows.push_back(std::move(r));
    return rows;
  }

  for (const OptimizedBranch& ob : branches) {
    if (policy == BranchPolicy::plus_only && !all_plus(ob.branch.label)) continue;
    SweepRecord r;
    r.variable = variable;
    r.value = value;
    r.config_label = config_label;
    r.branch = ob.branch.label;
    r.probability = ob.branch.probability;
    r.theta_opt = ob.point.theta;
    r.metrics = ob.metrics;
    r.w_expected = w_expected;
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

const char* configuration_label(Configuration c) {
  switch (c) {
    case Configuration::n1: return "n=1";
    case Configuration::n2_D1: return "n=2:D1";
    case Configuration::n2_D1D2: return "n=2:D1D2";
  }
  return "unknown";
}

const char* configuration_token(Configuration c) {
  switch (c) {
    case Configuration::n1: return "n1";
    case Configuration::n2_D1: return "n2_D1";
    case Configuration::n2_D1D2: return "n2_D1D2";
  }
  return "unknown";
}

Configuration configuration_from_label(const std::string& label) {
  if (label == "n=1" || label == "n1") return Configuration::n1;
  if (label == "n=2:D1" || label == "n2_D1") return Configuration::n2_D1;
  if (label == "n=2:D1D2" || label == "n2_D1D2") return Configuration::n2_D1D2;
  throw ValidationError("unknown configuration '" + label + "'");
}

const char* branch_policy_name(BranchPolicy policy) {
  switch (policy) {
    case BranchPolicy::all: return "all";
    case BranchPolicy::plus_only: return "plus_only";
    case BranchPolicy::expected: return "expected";
  }
  return "unknown";
}

BranchPolicy branch_policy_from_name(const std::string& name) {
  if (name == "all") return BranchPolicy::all;
  if (name == "plus_only" || name == "plus") return BranchPolicy::plus_only;
  if (name == "expected") return BranchPolicy::expected;
  throw ValidationError("unknown branch policy '" + name + "'");
}

std::vector<SweepRecord> kappa_sweep(const SystemSpec& spec, Configuration config,
                                     std::span<const double> kappas, BranchPolicy policy,
                                     const SearchConfig& cfg, Exec exec) {
  if (kappas.empty()) throw ValidationError("kappa_sweep: empty grid");
  const WorkingSetup w = resolve(spec, config);
  const OperatorMatrix h = engine::build_hamiltonian(w.spec);
  const OperatorMatrix rho_th = engine::thermal_state(h, w.spec.beta);
  const std::string label = configuration_label(config);

  linalg::ScopedChecks relaxed(false);
  std::vector<std::vector<SweepRecord>> slots(kappas.size());
  parallel_for(static_cast<long>(kappas.size()), exec, [&](long i) {
    const std::vector<DetectorSpec> dets = detectors_at(w.sites, kappas[i]);
    const std::vector<OptimizedBranch> branches = optimize_branches(h, rho_th, w.spec, dets, cfg);
    slots[i] = emit_records("kappa", kappas[i], label, branches, policy);
  });

  std::vector<SweepRecord> out;
  for (std::vector<SweepRecord>& rows : slots)
    for (SweepRecord& r : rows) out.push_back(std::move(r));
  return out;
}

std::vector<SpectrumRecord> coupling_sweep(std::pair<double, double> epsilon,
                                           std::span<const double> deltas) {
  if (deltas.empty()) throw ValidationError("coupling_sweep: empty grid");
  const bool closed_form = std::abs(epsilon.first - 0.5) < 1e-12 && std::abs(epsilon.second - 0.5) < 1e-12;
  std::vector<SpectrumRecord> out;
  out.reserve(deltas.size());
  for (double d : deltas) {
    SystemSpec spec;
    spec.n_sites = 2;
    spec.epsilon = {epsilon.first, epsilon.second};
    spec.coupling = {{1, 2, d}};
    auto [levels, gap] = engine::spectrum_and_gap(spec);
    SpectrumRecord r;
    r.delta_z = d;
    r.levels = std::move(levels);
    r.gap = gap;
    if (closed_form) r.gap_piecewise = piecewise_gap(d);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SweepRecord> detuning_sweep(const SystemSpec& base, std::span<const double> xis,
                                        double kappa, std::span<const Configuration> configs,
                                        BranchPolicy policy, const SearchConfig& cfg, Exec exec) {
  base.validate();
  if (base.n_sites != 2) throw ValidationError("detuning_sweep: base system must have two sites");
  if (xis.empty()) throw ValidationError("detuning_sweep: empty grid");
  if (configs.empty()) throw ValidationError("detuning_sweep: no configurations");
  for (Configuration c : configs)
    if (c == Configuration::n1) throw ValidationError("detuning_sweep: n1 has no detuning axis");

  linalg::ScopedChecks relaxed(false);
  std::vector<std::vector<SweepRecord>> slots(xis.size());
  parallel_for(static_cast<long>(xis.size()), exec, [&](long i) {
    SystemSpec spec = base;
    spec.epsilon[1] = base.epsilon[0] + xis[i];
    const OperatorMatrix h = engine::build_hamiltonian(spec);
    const OperatorMatrix rho_th = engine::thermal_state(h, spec.beta);
    for (Configuration config : configs) {
      const WorkingSetup w = resolve(spec, config);
      const std::vector<DetectorSpec> dets = detectors_at(w.sites, kappa);
      const std::vector<OptimizedBranch> branches = optimize_branches(h, rho_th, spec, dets, cfg);
      for (SweepRecord& r : emit_records("xi", xis[i], configuration_label(config), branches, policy))
        slots[i].push_back(std::move(r));
    }
  });

  std::vector<SweepRecord> out;
  for (std::vector<SweepRecord>& rows : slots)
    for (SweepRecord& r : rows) out.push_back(std::move(r));
  return out;
}

std::vector<PairRecord> local_vs_global(const SystemSpec& spec, std::span<const int> detector_sites,
                                        std::span<const double> kappas, const SearchConfig& cfg,
                                        Exec exec) {
  spec.validate();
  if (spec.n_sites != 2) throw ValidationError("local_vs_global: two-qubit system required");
  if (detector_sites.empty()) throw ValidationError("local_vs_global: no detector sites");
  if (kappas.empty()) throw ValidationError("local_vs_global: empty grid");
  const OperatorMatrix h = engine::build_hamiltonian(spec);
  const OperatorMatrix rho_th = engine::thermal_state(h, spec.beta);

  linalg::ScopedChecks relaxed(false);
  std::vector<std::vector<PairRecord>> slots(kappas.size());
  parallel_for(static_cast<long>(kappas.size()), exec, [&](long i) {
    std::vector<DetectorSpec> dets;
    for (int s : detector_sites) dets.push_back({s, kappas[i]});
    for (const MeasurementBranch& br : engine::measure(rho_th, dets)) {
      if (!br.state) continue;
      const double e_m = engine::energy(*br.state, h);
      const StationaryPoint local =
          opt::optimal_feedback(*br.state, spec, opt::Method::hybrid, cfg, 361, Exec::Serial);
      const StationaryPoint global = opt::optimal_global_feedback(*br.state, spec);
      PairRecord r;
      r.kappa = kappas[i];
      r.branch = br.label;
      r.probability = br.probability;
      r.ef_local = local.feedback_energy;
      r.ef_global = global.feedback_energy;
      r.w_local = e_m - local.feedback_energy;
      r.w_global = e_m - global.feedback_energy;
      r.theta_local = local.theta;
      r.theta_global = global.theta[0];
      slots[i].push_back(std::move(r));
    }
  });

  std::vector<PairRecord> out;
  for (std::vector<PairRecord>& rows : slots)
    for (PairRecord& r : rows) out.push_back(std::move(r));
  return out;
}

std::vector<RobustnessRecord> robustness_sweep(const SystemSpec& spec, const MeasurementBranch& branch,
                                               std::span<const double> theta_opt,
                                               std::span<const double> error_deg, Exec exec) {
  spec.validate();
  if (!branch.state) throw ValidationError("robustness_sweep: branch has no state");
  if (error_deg.empty()) throw ValidationError("robustness_sweep: empty error grid");
  const OperatorMatrix h = engine::build_hamiltonian(spec);
  const opt::FeedbackLandscape land(*branch.state, spec);
  const int n = land.sites();
  if (static_cast<int>(theta_opt.size()) != n)
    throw ValidationError("robustness_sweep: theta_opt must carry one angle per site");
  const double e_m = engine::energy(*branch.state, h);
  const double w_opt = e_m - land.energy(theta_opt);
  if (w_opt <= 1e-12) throw ValidationError("robustness_sweep: zero-work operating point");

  // Corner sign patterns first, then seeded random l-inf unit directions.
  std::vector<std::vector<double>> directions;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::vector<double> d(n);
    for (int j = 0; j < n; ++j) d[j] = ((mask >> j) & 1u) ? -1.0 : 1.0;
    directions.push_back(std::move(d));
  }
  std::mt19937 gen(12345);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int t = 0; t < 32; ++t) {
    std::vector<double> d(n);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (int j = 0; j < n; ++j) {
        d[j] = uni(gen);
        norm = std::max(norm, std::abs(d[j]));
      }
    } while (norm < 1e-3);
    for (double& x : d) x /= norm;
    directions.push_back(std::move(d));
  }

  std::vector<RobustnessRecord> out(error_deg.size());
  parallel_for(static_cast<long>(error_deg.size()), exec, [&](long i) {
    const double delta = error_deg[i] * pi / 180.0;
    RobustnessRecord r;
    r.delta_deg = error_deg[i];
    r.ratio = std::numeric_limits<double>::infinity();
    std::vector<double> perturbed(n);
    for (const std::vector<double>& dir : directions) {
      for (int j = 0; j < n; ++j) perturbed[j] = opt::wrap_angle(theta_opt[j] + delta * dir[j]);
      const double w = e_m - land.energy(perturbed);
      const double ratio = w / w_opt;
      if (ratio < r.ratio) {
        r.ratio = ratio;
        r.w_perturbed = w;
        r.worst_direction = dir;
      }
    }
    out[i] = std::move(r);
  });
  return out;
}

BetaScanResult beta_scan(const SystemSpec& spec_template, std::span<const DetectorSpec> detectors,
                         std::span<const double> betas, std::optional<BetaTarget> target,
                         const SearchConfig& cfg, Exec exec) {
  spec_template.validate();
  if (betas.empty()) throw ValidationError("beta_scan: empty grid");
  if (detectors.empty()) throw ValidationError("beta_scan: no detectors");
  const std::vector<DetectorSpec> dets(detectors.begin(), detectors.end());

  linalg::ScopedChecks relaxed(false);
  const std::string label = detector_layout_label(spec_template.n_sites, detectors);
  std::vector<std::vector<SweepRecord>> slots(betas.size());
  parallel_for(static_cast<long>(betas.size()), exec, [&](long i) {
    SystemSpec spec = spec_template;
    spec.beta = betas[i];
    const OperatorMatrix h = engine::build_hamiltonian(spec);
    const OperatorMatrix rho_th = engine::thermal_state(h, spec.beta);
    const std::vector<OptimizedBranch> branches = optimize_branches(h, rho_th, spec, dets, cfg);
    slots[i] = emit_records("beta", betas[i], label, branches, BranchPolicy::all);
  });

  BetaScanResult result;
  for (std::vector<SweepRecord>& rows : slots)
    for (SweepRecord& r : rows) result.records.push_back(std::move(r));

  if (target) {
    if (std::abs(target->w) < 1e-300 || std::abs(target->eta) < 1e-300)
      throw ValidationError("beta_scan: target values must be nonzero");
    for (const SweepRecord& r : result.records) {
      if (!r.metrics.efficiency) continue;
      const double rw = (r.metrics.work_extracted - target->w) / target->w;
      const double re = (*r.metrics.efficiency - target->eta) / target->eta;
      const double residual = std::hypot(rw, re);
      if (!result.best || residual < result.best->residual) {
        result.best = BetaBestFit{r.value, r.branch, residual, r.metrics.work_extracted,
                                  *r.metrics.efficiency};
      }
    }
  }
  return result;
}

std::vector<double> default_kappa_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 99; ++i) g.push_back(i / 100.0);
  return g;
}

std::vector<double> default_delta_grid() {
  std::vector<double> g;
  for (int i = -60; i <= 60; ++i) g.push_back(i / 100.0);
  return g;
}

std::vector<double> default_xi_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 25; ++i) g.push_back(i / 50.0);
  return g;
}

std::vector<double> default_error_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(static_cast<double>(i));
  return g;
}

std::vector<double> default_beta_grid() { return {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}; }

double piecewise_gap(double delta) {
  if (delta <= -0.25) return 1.0;
  if (delta <= 0.25) return 0.5 - 2.0 * delta;
  return 2.0 * delta - 0.5;
}

}  // namespace qme::sweeps
