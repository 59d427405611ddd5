#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qme/engine.hpp"
#include "qme/optimizer.hpp"
#include "qme/sweeps.hpp"

namespace qme::config {

enum class SweepKind { kappa, spectrum, detuning, local_global, robustness, beta };

const char* sweep_kind_name(SweepKind k);
SweepKind sweep_kind_from_name(const std::string& name);

enum class OutputFormat { csv, json };

struct OutputSpec {
  std::string path;
  OutputFormat format = OutputFormat::csv;
};

struct SweepSpec {
  SweepKind kind = SweepKind::kappa;
  // Main-variable values (kappa, delta_z, xi, error degrees or beta),
  // defaulted per kind when the config omits them.
  std::vector<double> grid;
  std::vector<sweeps::Configuration> configurations;  // kappa and detuning kinds
  double kappa = 0.1;                                 // fixed strength for detuning
  std::vector<int> detector_sites;                    // local_global kind
  std::optional<sweeps::BetaTarget> target;           // beta kind
  std::string branch;  // robustness branch label; empty selects the all-'+' branch
};

struct RunConfig {
  engine::SystemSpec system;
  std::vector<engine::DetectorSpec> detectors;
  opt::SearchConfig search;
  sweeps::BranchPolicy branch_policy = sweeps::BranchPolicy::all;
  engine::FeedbackMode feedback_mode = engine::FeedbackMode::local;
  std::optional<std::vector<double>> theta;  // fixed angles for the cycle subcommand
  std::optional<SweepSpec> sweep;
  std::optional<OutputSpec> output;
};

// Strict JSON parser: unknown keys are rejected and every violation names the
// offending field path, e.g. "detectors[0].kappa". Absent optional fields get
// the documented defaults (beta 1.0, SearchConfig defaults, branch_policy
// all). Robustness error grids require an explicit "unit" key; values are
// stored in degrees. Malformed JSON raises ParseError with line and column.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Emits the fully resolved configuration, grids materialized; feeding the
// result back through parse_config reproduces the same structure.
std::string serialize_config(const RunConfig& cfg);

}  // namespace qme::config
