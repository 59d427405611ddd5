// Timing comparison between the serial reference path and the OpenMP path
// of the three data-parallel kernels. Both paths fill preallocated slots,
// so besides the speedup the run asserts bit-identical results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "qme/engine.hpp"
#include "qme/optimizer.hpp"
#include "qme/parallel.hpp"
#include "qme/sweeps.hpp"

using namespace qme;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Row {
  std::string name;
  double serial_ms = 0.0;
  double parallel_ms = 0.0;
  bool identical = false;
};

template <typename Fn>
Row time_both(const std::string& name, Fn&& run) {
  Row row;
  row.name = name;
  auto t0 = Clock::now();
  const auto serial = run(Exec::Serial);
  row.serial_ms = ms_since(t0);
  t0 = Clock::now();
  const auto parallel = run(Exec::Parallel);
  row.parallel_ms = ms_since(t0);
  row.identical = serial == parallel;
  return row;
}

std::vector<double> flatten(const std::vector<opt::StationaryPoint>& points) {
  std::vector<double> out;
  for (const auto& p : points) {
    out.insert(out.end(), p.theta.begin(), p.theta.end());
    out.push_back(p.feedback_energy);
    out.push_back(p.gradient_norm);
  }
  return out;
}

std::vector<double> flatten(const std::vector<sweeps::SweepRecord>& records) {
  std::vector<double> out;
  for (const auto& r : records) {
    out.push_back(r.value);
    out.push_back(r.probability);
    out.push_back(r.metrics.work_extracted);
    out.push_back(r.metrics.e_feedback);
    out.insert(out.end(), r.theta_opt.begin(), r.theta_opt.end());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--quick") == 0) quick = true;

  engine::SystemSpec spec;
  spec.n_sites = 2;
  spec.epsilon = {-0.05, -0.10};
  spec.coupling = {{1, 2, -0.2}};
  spec.beta = 1.0;
  const auto rho_th = engine::thermal_state(spec);
  const std::vector<engine::DetectorSpec> dets = {{1, 0.2}, {2, 0.2}};
  const auto branch = engine::measure(rho_th, dets).front();

  opt::SearchConfig dense;
  dense.grid_spacing = quick ? 0.1 : 0.02;

  std::vector<double> kappas;
  const int kappa_points = quick ? 12 : 99;
  for (int i = 1; i <= kappa_points; ++i) kappas.push_back(i / double(kappa_points + 1));

  const int lattice = quick ? 121 : 361;

  std::vector<Row> rows;
  rows.push_back(time_both("hybrid seeds " + std::to_string(int(std::round(2 * M_PI / dense.grid_spacing))) +
                               "^2",
                           [&](Exec exec) {
                             return flatten(opt::hybrid_search(*branch.state, spec, dense, exec));
                           }));
  rows.push_back(time_both("grid lattice " + std::to_string(lattice) + "^2", [&](Exec exec) {
    return flatten(opt::grid_search(*branch.state, spec, {}, lattice, exec));
  }));
  rows.push_back(time_both("kappa sweep " + std::to_string(kappa_points) + " pts", [&](Exec exec) {
    return flatten(sweeps::kappa_sweep(spec, sweeps::Configuration::n2_D1D2, kappas,
                                       sweeps::BranchPolicy::all, {}, exec));
  }));

  std::printf("threads: %d%s\n", max_threads(), quick ? " (quick)" : "");
  std::printf("%-24s %12s %12s %9s %10s\n", "kernel", "serial ms", "parallel ms", "speedup",
              "identical");
  bool all_identical = true;
  for (const auto& r : rows) {
    std::printf("%-24s %12.1f %12.1f %8.2fx %10s\n", r.name.c_str(), r.serial_ms, r.parallel_ms,
                r.serial_ms / std::max(r.parallel_ms, 1e-9), r.identical ? "yes" : "NO");
    all_identical = all_identical && r.identical;
  }
  return all_identical ? 0 : 1;
}
