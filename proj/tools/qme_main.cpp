#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qme/config.hpp"
#include "qme/identities.hpp"
#include "qme/io.hpp"

namespace {

using qme::config::OutputFormat;
using qme::config::RunConfig;
using qme::config::SweepKind;
using qme::config::SweepSpec;
using qme::engine::FeedbackMode;
using qme::engine::MeasurementBranch;
using qme::engine::OperatorMatrix;
using qme::sweeps::BranchPolicy;
using qme::sweeps::SweepRecord;
using nlohmann::json;

std::string fmt6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

// Output destination resolution: --output beats the config; no path at all
// means the table goes to standard output.
struct Sink {
  std::optional<std::string> path;
  OutputFormat format = OutputFormat::csv;
};

Sink resolve_sink(const RunConfig& cfg, const std::string& output_flag) {
  Sink sink;
  if (cfg.output) {
    sink.path = cfg.output->path;
    sink.format = cfg.output->format;
  }
  if (!output_flag.empty()) sink.path = output_flag;
  return sink;
}

void deliver(const Sink& sink, const std::string& content, const std::string& what) {
  if (sink.path) {
    qme::io::write_file(*sink.path, content);
    std::cout << what << " written to " << *sink.path << "\n";
  } else {
    std::cout << content;
  }
}

// Appends _<token> before the extension for per-configuration files.
std::string suffixed_path(const std::string& path, const std::string& token) {
  const std::size_t slash = path.find_last_of('/');
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + "_" + token;
  return path.substr(0, dot) + "_" + token + path.substr(dot);
}

bool all_plus_label(const std::string& label) {
  return !label.empty() &&
         std::all_of(label.begin(), label.end(), [](char c) { return c == '+'; });
}

std::vector<MeasurementBranch> measured_branches(const RunConfig& cfg) {
  if (cfg.detectors.empty())
    throw qme::ValidationError("detectors: this subcommand needs at least one detector");
  const OperatorMatrix rho_th = qme::engine::thermal_state(cfg.system);
  return qme::engine::measure(rho_th, cfg.detectors);
}

bool branch_selected(const std::string& label, BranchPolicy policy) {
  return policy != BranchPolicy::plus_only || all_plus_label(label);
}

json metrics_to_json(const qme::engine::CycleMetrics& m) {
  json o;
  o["e_initial"] = m.e_initial;
  o["e_measured"] = m.e_measured;
  o["e_feedback"] = m.e_feedback;
  o["w_ext"] = m.work_extracted;
  o["w_er"] = m.work_erasure;
  if (m.efficiency) o["eta"] = *m.efficiency; else o["eta"] = nullptr;
  return o;
}

int run_cycle(const RunConfig& cfg, const std::string& output_flag) {
  if (!cfg.theta) throw qme::ValidationError("theta: cycle needs fixed feedback angles");
  json result;
  result["mode"] = cfg.feedback_mode == FeedbackMode::local ? "local" : "global";
  result["theta"] = *cfg.theta;
  result["branches"] = json::array();
  double w_expected = 0.0;
  for (const MeasurementBranch& br : measured_branches(cfg)) {
    if (!br.state) continue;
    const qme::engine::CycleMetrics m =
        qme::engine::cycle_metrics(cfg.system, br, *cfg.theta, cfg.feedback_mode);
    w_expected += br.probability * m.work_extracted;
    if (!branch_selected(br.label, cfg.branch_policy)) continue;
    json o = metrics_to_json(m);
    o["branch"] = br.label;
    o["probability"] = br.probability;
    result["branches"].push_back(std::move(o));
    std::cout << "branch " << br.label << ": p = " << fmt6(br.probability)
              << ", W_ext = " << fmt6(m.work_extracted)
              << ", eta = " << (m.efficiency ? fmt6(*m.efficiency) : "n/a") << "\n";
  }
  result["w_expected"] = w_expected;
  std::cout << "expected work = " << fmt6(w_expected) << "\n";
  const Sink sink = resolve_sink(cfg, output_flag);
  if (sink.path) qme::io::write_file(*sink.path, result.dump(2) + "\n");
  return 0;
}

int run_optimize(const RunConfig& cfg, const std::string& method, const std::string& output_flag) {
  json result;
  result["method"] = method;
  result["mode"] = cfg.feedback_mode == FeedbackMode::local ? "local" : "global";
  result["branches"] = json::array();
  double w_expected = 0.0;
  for (const MeasurementBranch& br : measured_branches(cfg)) {
    if (!br.state) continue;
    qme::opt::StationaryPoint point;
    json extra;
    if (cfg.feedback_mode == FeedbackMode::global) {
      point = qme::opt::optimal_global_feedback(*br.state, cfg.system);
    } else if (method == "both") {
      point = qme::opt::optimal_feedback(*br.state, cfg.system, qme::opt::Method::hybrid, cfg.search);
      const qme::opt::StationaryPoint grid =
          qme::opt::optimal_feedback(*br.state, cfg.system, qme::opt::Method::grid, cfg.search);
      const double diff = std::abs(point.feedback_energy - grid.feedback_energy);
      if (diff > 1e-4)
        throw qme::CrossCheckFailed("hybrid and grid minima disagree by " + fmt6(diff) +
                                    " on branch " + br.label);
      extra["grid_energy"] = grid.feedback_energy;
      extra["agreement"] = diff;
      std::cout << "branch " << br.label << ": hybrid/grid agreement |dE| = " << fmt6(diff) << "\n";
    } else {
      const qme::opt::Method m = method == "grid" ? qme::opt::Method::grid : qme::opt::Method::hybrid;
      point = qme::opt::optimal_feedback(*br.state, cfg.system, m, cfg.search);
    }
    const qme::engine::CycleMetrics m =
        qme::engine::cycle_metrics(cfg.system, br, point.theta, cfg.feedback_mode);
    w_expected += br.probability * m.work_extracted;
    if (!branch_selected(br.label, cfg.branch_policy)) continue;
    json o = metrics_to_json(m);
    o["branch"] = br.label;
    o["probability"] = br.probability;
    o["theta_opt"] = point.theta;
    o["feedback_energy"] = point.feedback_energy;
    o["gradient_norm"] = point.gradient_norm;
    o["classification"] = qme::opt::classification_name(point.classification);
    for (auto& [k, v] : extra.items()) o[k] = v;
    result["branches"].push_back(std::move(o));
    std::cout << "branch " << br.label << ": theta* = [";
    for (std::size_t j = 0; j < point.theta.size(); ++j)
      std::cout << (j ? ", " : "") << fmt6(point.theta[j]);
    std::cout << "], W_ext = " << fmt6(m.work_extracted)
              << ", eta = " << (m.efficiency ? fmt6(*m.efficiency) : "n/a") << "\n";
  }
  result["w_expected"] = w_expected;
  std::cout << "expected work = " << fmt6(w_expected) << "\n";
  const Sink sink = resolve_sink(cfg, output_flag);
  if (sink.path) qme::io::write_file(*sink.path, result.dump(2) + "\n");
  return 0;
}

int run_spectrum(const RunConfig& cfg, const std::string& output_flag) {
  if (cfg.system.n_sites != 2)
    throw qme::ValidationError("system.n_sites: spectrum needs a two-qubit system");
  std::vector<double> grid = cfg.sweep && cfg.sweep->kind == SweepKind::spectrum
                                 ? cfg.sweep->grid
                                 : qme::sweeps::default_delta_grid();
  const auto records =
      qme::sweeps::coupling_sweep({cfg.system.epsilon[0], cfg.system.epsilon[1]}, grid);
  const Sink sink = resolve_sink(cfg, output_flag);
  deliver(sink,
          sink.format == OutputFormat::json ? qme::io::spectrum_json(records)
                                            : qme::io::spectrum_csv(records),
          "spectrum (" + std::to_string(records.size()) + " points)");
  return 0;
}

void print_sweep_peaks(const std::vector<SweepRecord>& records) {
  // One line per configuration and branch: the grid point of peak work.
  std::vector<std::pair<std::string, const SweepRecord*>> best;
  for (const SweepRecord& r : records) {
    const std::string key = r.config_label + " branch " + r.branch;
    auto it = std::find_if(best.begin(), best.end(),
                           [&](const auto& e) { return e.first == key; });
    if (it == best.end()) best.emplace_back(key, &r);
    else if (r.metrics.work_extracted > it->second->metrics.work_extracted) it->second = &r;
  }
  for (const auto& [key, r] : best) {
    std::cout << key << ": peak W_ext = " << fmt6(r->metrics.work_extracted) << " at "
              << r->variable << " = " << fmt6(r->value) << ", eta = "
              << (r->metrics.efficiency ? fmt6(*r->metrics.efficiency) : "n/a") << "\n";
  }
}

int run_sweep(const RunConfig& cfg, const std::string& output_flag) {
  if (!cfg.sweep) throw qme::ValidationError("sweep: missing section (or pass --kind)");
  const SweepSpec& sw = *cfg.sweep;
  const Sink sink = resolve_sink(cfg, output_flag);
  const bool as_json = sink.format == OutputFormat::json;

  switch (sw.kind) {
    case SweepKind::spectrum:
      return run_spectrum(cfg, output_flag);

    case SweepKind::kappa:
    case SweepKind::detuning: {
      std::vector<std::pair<std::string, std::vector<SweepRecord>>> sets;
      for (qme::sweeps::Configuration conf : sw.configurations) {
        std::vector<SweepRecord> records =
            sw.kind == SweepKind::kappa
                ? qme::sweeps::kappa_sweep(cfg.system, conf, sw.grid, cfg.branch_policy, cfg.search)
                : qme::sweeps::detuning_sweep(cfg.system, sw.grid, sw.kappa,
                                              std::span<const qme::sweeps::Configuration>(&conf, 1),
                                              cfg.branch_policy, cfg.search);
        print_sweep_peaks(records);
        sets.emplace_back(qme::sweeps::configuration_token(conf), std::move(records));
      }
      const std::string variable = sw.kind == SweepKind::kappa ? "kappa" : "xi";
      for (const auto& [token, records] : sets) {
        const std::string content = as_json ? qme::io::sweep_records_json(records)
                                            : qme::io::sweep_records_csv(records, variable);
        if (sink.path) {
          const std::string path =
              sets.size() > 1 ? suffixed_path(*sink.path, token) : *sink.path;
          qme::io::write_file(path, content);
          std::cout << "sweep records written to " << path << "\n";
        } else {
          if (sets.size() > 1) std::cout << "# configuration " << token << "\n";
          std::cout << content;
        }
      }
      return 0;
    }

    case SweepKind::local_global: {
      const auto records = qme::sweeps::local_vs_global(cfg.system, sw.detector_sites, sw.grid,
                                                        cfg.search);
      std::size_t dominated = 0;
      for (const auto& r : records)
        if (r.w_local >= r.w_global - 1e-10) ++dominated;
      std::cout << "local >= global on " << dominated << "/" << records.size()
                << " (kappa, branch) points\n";
      deliver(sink,
              as_json ? qme::io::pair_records_json(records) : qme::io::pair_records_csv(records),
              "local/global comparison");
      return 0;
    }

    case SweepKind::robustness: {
      std::vector<MeasurementBranch> branches = measured_branches(cfg);
      const MeasurementBranch* chosen = nullptr;
      for (const MeasurementBranch& br : branches) {
        const bool match = sw.branch.empty() ? all_plus_label(br.label) : br.label == sw.branch;
        if (match && br.state) { chosen = &br; break; }
      }
      if (!chosen)
        throw qme::ValidationError("sweep.branch: no branch labeled '" +
                                   (sw.branch.empty() ? std::string("+...+") : sw.branch) + "'");
      const qme::opt::StationaryPoint point =
          qme::opt::optimal_feedback(*chosen->state, cfg.system, qme::opt::Method::hybrid, cfg.search);
      const auto records =
          qme::sweeps::robustness_sweep(cfg.system, *chosen, point.theta, sw.grid);
      double worst = 1.0;
      for (const auto& r : records) worst = std::min(worst, r.ratio);
      std::cout << "branch " << chosen->label << " at theta* : worst W ratio over the grid = "
                << fmt6(worst) << "\n";
      deliver(sink,
              as_json ? qme::io::robustness_json(records) : qme::io::robustness_csv(records),
              "robustness records");
      return 0;
    }

    case SweepKind::beta: {
      if (cfg.detectors.empty())
        throw qme::ValidationError("detectors: beta sweep needs at least one detector");
      const qme::sweeps::BetaScanResult result =
          qme::sweeps::beta_scan(cfg.system, cfg.detectors, sw.grid, sw.target, cfg.search);
      if (result.best) {
        std::cout << "best fit: beta = " << fmt6(result.best->beta) << ", branch "
                  << result.best->branch << ", W_ext = " << fmt6(result.best->w)
                  << ", eta = " << fmt6(result.best->eta)
                  << ", residual = " << fmt6(result.best->residual) << "\n";
      }
      print_sweep_peaks(result.records);
      deliver(sink,
              as_json ? qme::io::sweep_records_json(result.records)
                      : qme::io::sweep_records_csv(result.records, "beta"),
              "beta scan records");
      return 0;
    }
  }
  throw qme::ValidationError("sweep.kind: unhandled kind");
}

int run_identities() {
  const auto checks = qme::identities::run_identity_battery();
  for (const auto& c : checks) {
    std::printf("%-28s max error %.3e  tol %.0e  %s\n", c.name.c_str(), c.max_error, c.tolerance,
                c.passed ? "pass" : "FAIL");
  }
  if (!qme::identities::all_passed(checks)) {
    std::cout << "identity battery FAILED\n";
    return 2;
  }
  std::cout << "identity battery passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"measurement-driven qubit engine: spectra, cycles, feedback optimization, sweeps"};
  app.require_subcommand(1);

  std::string config_path, output_flag, method = "hybrid", kind_flag, branch_flag;

  CLI::App* spectrum = app.add_subcommand("spectrum", "two-qubit levels and gap vs coupling");
  spectrum->add_option("--config", config_path, "JSON configuration")->required();
  spectrum->add_option("--output", output_flag, "output file (default: config output.path or stdout)");

  CLI::App* cycle = app.add_subcommand("cycle", "evaluate one engine cycle at fixed angles");
  cycle->add_option("--config", config_path, "JSON configuration")->required();
  cycle->add_option("--output", output_flag, "output file for the JSON result");
  cycle->add_option("--branch", branch_flag, "branch policy: all | plus | expected");

  CLI::App* optimize = app.add_subcommand("optimize", "optimal feedback angles per branch");
  optimize->add_option("--config", config_path, "JSON configuration")->required();
  optimize->add_option("--method", method, "hybrid | grid | both")
      ->check(CLI::IsMember({"hybrid", "grid", "both"}));
  optimize->add_option("--output", output_flag, "output file for the JSON result");
  optimize->add_option("--branch", branch_flag, "branch policy: all | plus | expected");

  CLI::App* sweep = app.add_subcommand("sweep", "parameter sweeps (plot-ready records)");
  sweep->add_option("--config", config_path, "JSON configuration")->required();
  sweep->add_option("--kind", kind_flag,
                    "kappa | spectrum | detuning | local_global | robustness | beta");
  sweep->add_option("--output", output_flag, "output file (per-configuration suffixes added)");
  sweep->add_option("--branch", branch_flag, "branch policy: all | plus | expected");

  CLI::App* identities = app.add_subcommand("identities", "rotation-algebra self test");

  CLI11_PARSE(app, argc, argv);

  try {
    if (identities->parsed()) return run_identities();

    RunConfig cfg = qme::config::load_config(config_path);
    if (!branch_flag.empty()) cfg.branch_policy = qme::sweeps::branch_policy_from_name(branch_flag);
    if (!kind_flag.empty()) {
      const SweepKind kind = qme::config::sweep_kind_from_name(kind_flag);
      if (cfg.sweep && cfg.sweep->kind != kind)
        throw qme::ValidationError("--kind conflicts with the config's sweep.kind");
      if (!cfg.sweep) {
        // Materialize the kind's defaults by round-tripping a minimal section.
        RunConfig probe = cfg;
        json patch = json::parse(qme::config::serialize_config(probe));
        patch["sweep"] = {{"kind", kind_flag}};
        cfg = qme::config::parse_config(patch.dump());
      }
    }

    if (spectrum->parsed()) return run_spectrum(cfg, output_flag);
    if (cycle->parsed()) return run_cycle(cfg, output_flag);
    if (optimize->parsed()) return run_optimize(cfg, method, output_flag);
    if (sweep->parsed()) return run_sweep(cfg, output_flag);
    throw qme::Error("no subcommand dispatched");
  } catch (const qme::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const qme::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const qme::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
