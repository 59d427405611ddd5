#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

#include "qme/config.hpp"
#include "qme/io.hpp"

using namespace qme;
using engine::SystemSpec;
using config::OutputFormat;
using config::RunConfig;
using config::SweepKind;

namespace {

std::string minimal_config() {
  return R"({
    "system": {"n_sites": 1, "epsilon": [0.5], "beta": 1.0},
    "detectors": [{"site": 1, "kappa": 0.4}]
  })";
}

bool message_contains(const std::exception& e, const std::string& needle) {
  return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("minimal config parses with documented defaults") {
  const RunConfig cfg = config::parse_config(minimal_config());
  CHECK(cfg.system.n_sites == 1);
  CHECK(cfg.system.epsilon == std::vector<double>{0.5});
  CHECK(cfg.system.beta == 1.0);
  REQUIRE(cfg.detectors.size() == 1);
  CHECK(cfg.detectors[0].site == 1);
  CHECK(cfg.detectors[0].kappa == 0.4);
  CHECK(cfg.search.grid_spacing == 0.1);
  CHECK(cfg.search.k_max == 200);
  CHECK(cfg.search.convergence_tol == 1e-10);
  CHECK(cfg.branch_policy == sweeps::BranchPolicy::all);
  CHECK(cfg.feedback_mode == engine::FeedbackMode::local);
  CHECK_FALSE(cfg.theta.has_value());
  CHECK_FALSE(cfg.sweep.has_value());
  CHECK_FALSE(cfg.output.has_value());
}

TEST_CASE("violations name the offending field path") {
  try {
    config::parse_config(R"({"system": {"n_sites": 1, "epsilon": [0.5]},
                             "detectors": [{"site": 1, "kappa": 1.5}]})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(message_contains(e, "detectors[0].kappa"));
  }

  try {
    config::parse_config(R"({"system": {"n_sites": 2, "epsilon": [0.5, 0.5],
                             "coupling": [{"j": 2, "k": 1, "delta": 0.1}]}})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(message_contains(e, "j < k"));
  }

  try {
    config::parse_config(R"({"system": {"n_sites": 1, "epsilon": [0.5]}, "typo": 1})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(message_contains(e, "typo"));
    CHECK(message_contains(e, "unknown key"));
  }
}

TEST_CASE("malformed json reports line and column") {
  try {
    config::parse_config("{\n  \"system\": {,}\n}");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(message_contains(e, "line 2"));
  }
}

TEST_CASE("range grids materialize inclusively") {
  const RunConfig cfg = config::parse_config(R"({
    "system": {"n_sites": 2, "epsilon": [0.5, 0.5]},
    "sweep": {"kind": "spectrum", "grid": {"min": -0.6, "max": 0.6, "step": 0.01}}
  })");
  REQUIRE(cfg.sweep.has_value());
  CHECK(cfg.sweep->grid.size() == 121);
  CHECK(cfg.sweep->grid.front() == doctest::Approx(-0.6));
  CHECK(cfg.sweep->grid.back() == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("sweep sections reject keys from other kinds") {
  CHECK_THROWS_AS(config::parse_config(R"({
    "system": {"n_sites": 2, "epsilon": [0.5, 0.5]},
    "sweep": {"kind": "kappa", "target": {"w": 1.0, "eta": 0.5}}
  })"),
                  ValidationError);
  CHECK_THROWS_AS(config::parse_config(R"({
    "system": {"n_sites": 2, "epsilon": [0.5, 0.5]},
    "sweep": {"kind": "beta", "detector_sites": [1]}
  })"),
                  ValidationError);
}

TEST_CASE("robustness grids demand an explicit unit") {
  const std::string base = R"({
    "system": {"n_sites": 1, "epsilon": [0.5]},
    "detectors": [{"site": 1, "kappa": 0.2}],
    "sweep": {"kind": "robustness", "grid": GRID}
  })";
  auto with_grid = [&](const std::string& grid) {
    std::string text = base;
    text.replace(text.find("GRID"), 4, grid);
    return text;
  };

  CHECK_THROWS_AS(config::parse_config(with_grid("[0, 1, 2]")), ValidationError);

  const RunConfig deg =
      config::parse_config(with_grid(R"({"unit": "deg", "values": [0, 5, 10]})"));
  CHECK(deg.sweep->grid == std::vector<double>{0.0, 5.0, 10.0});

  const RunConfig rad =
      config::parse_config(with_grid(R"({"unit": "rad", "values": [3.14159265358979323846]})"));
  CHECK(rad.sweep->grid[0] == doctest::Approx(180.0).epsilon(1e-12));
}

TEST_CASE("defaults fill per-kind grids and configurations") {
  const RunConfig cfg = config::parse_config(R"({
    "system": {"n_sites": 2, "epsilon": [-0.05, -0.10],
               "coupling": [{"j": 1, "k": 2, "delta": -0.2}]},
    "sweep": {"kind": "kappa"}
  })");
  REQUIRE(cfg.sweep.has_value());
  CHECK(cfg.sweep->grid.size() == 99);
  CHECK(cfg.sweep->configurations.size() == 3);

  const RunConfig det = config::parse_config(R"({
    "system": {"n_sites": 2, "epsilon": [-0.05, -0.10]},
    "sweep": {"kind": "detuning"}
  })");
  CHECK(det.sweep->grid.size() == 26);
  CHECK(det.sweep->kappa == 0.1);
  CHECK(det.sweep->configurations.size() == 2);

  const RunConfig lg = config::parse_config(R"({
    "system": {"n_sites": 2, "epsilon": [-0.05, -0.10]},
    "sweep": {"kind": "local_global"}
  })");
  CHECK(lg.sweep->detector_sites == std::vector<int>{1, 2});
}

TEST_CASE("theta length is checked against the feedback mode") {
  CHECK_THROWS_AS(config::parse_config(R"({
    "system": {"n_sites": 2, "epsilon": [0.5, 0.5]},
    "theta": [0.1]
  })"),
                  ValidationError);
  const RunConfig global = config::parse_config(R"({
    "system": {"n_sites": 2, "epsilon": [0.5, 0.5]},
    "feedback_mode": "global",
    "theta": [0.1]
  })");
  CHECK(global.feedback_mode == engine::FeedbackMode::global);
  CHECK_THROWS_AS(config::parse_config(R"({
    "system": {"n_sites": 1, "epsilon": [0.5]},
    "feedback_mode": "global"
  })"),
                  ValidationError);
}

TEST_CASE("serialization round-trips through the parser") {
  const std::string text = R"({
    "system": {"n_sites": 2, "epsilon": [0.05, 0.10],
               "coupling": [{"j": 1, "k": 2, "delta": -0.2}], "beta": 2.0},
    "detectors": [{"site": 1, "kappa": 0.2}],
    "search": {"grid_spacing": 0.05, "gradient_tol": 1e-9},
    "branch_policy": "plus_only",
    "sweep": {"kind": "beta", "grid": [0.5, 1.0, 2.0], "target": {"w": 0.0207, "eta": 0.69}},
    "output": {"path": "out.csv", "format": "csv"}
  })";
  const RunConfig cfg = config::parse_config(text);
  const std::string serialized = config::serialize_config(cfg);
  const RunConfig again = config::parse_config(serialized);
  CHECK(config::serialize_config(again) == serialized);
  CHECK(again.system.beta == cfg.system.beta);
  CHECK(again.search.grid_spacing == cfg.search.grid_spacing);
  CHECK(again.branch_policy == cfg.branch_policy);
  REQUIRE(again.sweep.has_value());
  CHECK(again.sweep->kind == SweepKind::beta);
  CHECK(again.sweep->grid == cfg.sweep->grid);
  REQUIRE(again.sweep->target.has_value());
  CHECK(again.sweep->target->w == cfg.sweep->target->w);
  REQUIRE(again.output.has_value());
  CHECK(again.output->format == OutputFormat::csv);
}

TEST_CASE("sweep kind names round-trip") {
  for (SweepKind k : {SweepKind::kappa, SweepKind::spectrum, SweepKind::detuning,
                      SweepKind::local_global, SweepKind::robustness, SweepKind::beta}) {
    CHECK(config::sweep_kind_from_name(config::sweep_kind_name(k)) == k);
  }
  CHECK_THROWS_AS(config::sweep_kind_from_name("surface"), ValidationError);
}

TEST_CASE("load_config reports unreadable files") {
  CHECK_THROWS_AS(config::load_config("/nonexistent/qme-config.json"), ParseError);
}

TEST_CASE("format_g17 round-trips doubles exactly") {
  const std::vector<double> samples = {0.0, 1.0, -1.0, 0.1, -0.6, 1e-300, 2.07e-2,
                                       3.141592653589793, 1.0 / 3.0, 6.02e23};
  for (double x : samples) {
    const std::string s = io::format_g17(x);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
  }
}

TEST_CASE("csv emitters and parser agree on shape") {
  sweeps::SweepRecord r;
  r.variable = "kappa";
  r.value = 0.25;
  r.config_label = "n=2:D1D2";
  r.branch = "++";
  r.probability = 0.3;
  r.theta_opt = {0.5, -0.25};
  r.metrics.e_initial = 0.4;
  r.metrics.e_measured = 0.45;
  r.metrics.e_feedback = 0.41;
  r.metrics.work_extracted = 0.04;
  r.metrics.work_erasure = 0.01;
  r.metrics.efficiency = 0.5;
  r.w_expected = 0.02;

  sweeps::SweepRecord aggregate = r;
  aggregate.branch = "E";
  aggregate.theta_opt.clear();
  aggregate.metrics.efficiency.reset();

  const std::vector<sweeps::SweepRecord> records = {r, aggregate};
  const std::string csv = io::sweep_records_csv(records, "kappa");
  const io::CsvTable table = io::parse_csv(csv);
  REQUIRE(table.header.size() == 13);
  CHECK(table.header.front() == "kappa");
  CHECK(table.header.back() == "theta_2");
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].size() == 13);
  CHECK(table.rows[1].size() == 13);
  CHECK(table.rows[1][table.column("eta")].empty());
  CHECK(table.rows[1][table.column("theta_1")].empty());
  CHECK(std::strtod(table.rows[0][table.column("w_ext")].c_str(), nullptr) == 0.04);

  // The json emitter covers the same records.
  const std::string json_text = io::sweep_records_json(records);
  CHECK(json_text.find("\"w_ext\": 0.04") != std::string::npos);
}

TEST_CASE("reloaded spectrum csv matches what was written") {
  const std::vector<double> deltas = {-0.3, 0.0, 0.3};
  const auto records = sweeps::coupling_sweep({0.5, 0.5}, deltas);
  const io::CsvTable table = io::parse_csv(io::spectrum_csv(records));
  REQUIRE(table.header ==
          std::vector<std::string>{"delta_z", "e0", "e1", "e2", "e3", "gap"});
  REQUIRE(table.rows.size() == 3);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(std::strtod(table.rows[i][0].c_str(), nullptr) == records[i].delta_z);
    CHECK(std::strtod(table.rows[i][5].c_str(), nullptr) == records[i].gap);
  }
}

TEST_CASE("sweep csv re-evaluates to the stored energies") {
  // Full-precision serialization must let a reader reproduce the stored
  // feedback energy by re-running the landscape at the stored angles.
  SystemSpec spec;
  spec.n_sites = 2;
  spec.epsilon = {-0.05, -0.10};
  spec.coupling = {{1, 2, -0.2}};
  const std::vector<double> kappas = {0.2, 0.4};
  const auto records = sweeps::kappa_sweep(spec, sweeps::Configuration::n2_D1D2, kappas,
                                           sweeps::BranchPolicy::all, opt::SearchConfig{});
  const io::CsvTable table = io::parse_csv(io::sweep_records_csv(records, "kappa"));
  const int c_kappa = table.column("kappa");
  const int c_branch = table.column("branch");
  const int c_ef = table.column("e_feedback");
  const int c_t1 = table.column("theta_1");
  const int c_t2 = table.column("theta_2");
  REQUIRE(c_t2 > 0);
  for (const auto& row : table.rows) {
    const double kappa = std::strtod(row[c_kappa].c_str(), nullptr);
    const std::vector<engine::DetectorSpec> dets = {{1, kappa}, {2, kappa}};
    const auto branches = engine::measure(engine::thermal_state(spec), dets);
    const auto it = std::find_if(branches.begin(), branches.end(),
                                 [&](const auto& b) { return b.label == row[c_branch]; });
    REQUIRE(it != branches.end());
    const std::vector<double> theta = {std::strtod(row[c_t1].c_str(), nullptr),
                                       std::strtod(row[c_t2].c_str(), nullptr)};
    const double stored = std::strtod(row[c_ef].c_str(), nullptr);
    CHECK(opt::feedback_energy(*it->state, spec, theta) ==
          doctest::Approx(stored).epsilon(1e-12));
  }
}
