#include "qme/config.hpp"

#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace qme::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw ValidationError(path + ": " + why);
}

void reject_unknown_keys(const json& obj, const std::string& path,
                         std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) { known = true; break; }
    if (!known) fail(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& require(const json& obj, const char* key, const std::string& path) {
  const json* v = find(obj, key);
  if (!v) fail(path.empty() ? key : path + "." + key, "missing required key");
  return *v;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_number_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// A grid is either an explicit array, {"values": [...]}, or an inclusive
// {"min", "max", "step"} range. The epsilon in the point count keeps ranges
// like 1.2 / 0.01 from losing their endpoint to rounding.
std::vector<double> materialize_range(double min, double max, double step, const std::string& path) {
  if (!(step > 0.0)) fail(path + ".step", "must be positive");
  if (max < min) fail(path + ".max", "must be at least min");
  const double raw = (max - min) / step + 1e-6;
  if (raw > 1e6) fail(path, "range materializes to more than 1e6 points");
  const long count = static_cast<long>(std::floor(raw));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count) + 1);
  for (long i = 0; i <= count; ++i) out.push_back(min + static_cast<double>(i) * step);
  return out;
}

std::vector<double> materialize_grid(const json& v, const std::string& path) {
  if (v.is_array()) return as_number_array(v, path);
  if (v.is_object()) {
    reject_unknown_keys(v, path, {"values", "min", "max", "step"});
    if (const json* values = find(v, "values")) return as_number_array(*values, path + ".values");
    return materialize_range(as_number(require(v, "min", path), path + ".min"),
                             as_number(require(v, "max", path), path + ".max"),
                             as_number(require(v, "step", path), path + ".step"), path);
  }
  fail(path, "expected an array, {values}, or {min, max, step}");
}

// Robustness perturbations carry an explicit unit key; stored in degrees.
std::vector<double> materialize_error_grid(const json& v, const std::string& path) {
  if (!v.is_object() || !v.contains("unit"))
    fail(path, "perturbation grid needs an explicit \"unit\" key (deg or rad)");
  reject_unknown_keys(v, path, {"unit", "values", "min", "max", "step"});
  const std::string unit = as_string(*find(v, "unit"), path + ".unit");
  std::vector<double> grid;
  if (const json* values = find(v, "values")) {
    grid = as_number_array(*values, path + ".values");
  } else {
    grid = materialize_range(as_number(require(v, "min", path), path + ".min"),
                             as_number(require(v, "max", path), path + ".max"),
                             as_number(require(v, "step", path), path + ".step"), path);
  }
  if (unit == "deg") return grid;
  if (unit == "rad") {
    for (double& x : grid) x *= 180.0 / std::numbers::pi;
    return grid;
  }
  fail(path + ".unit", "expected \"deg\" or \"rad\"");
}

engine::SystemSpec parse_system(const json& v) {
  if (!v.is_object()) fail("system", "expected an object");
  reject_unknown_keys(v, "system", {"n_sites", "epsilon", "coupling", "beta"});
  engine::SystemSpec spec;
  spec.n_sites = as_int(require(v, "n_sites", "system"), "system.n_sites");
  if (spec.n_sites < 1) fail("system.n_sites", "must be at least 1");
  spec.epsilon = as_number_array(require(v, "epsilon", "system"), "system.epsilon");
  if (static_cast<int>(spec.epsilon.size()) != spec.n_sites)
    fail("system.epsilon", "expected one entry per site");
  if (const json* coupling = find(v, "coupling")) {
    if (!coupling->is_array()) fail("system.coupling", "expected an array");
    for (std::size_t i = 0; i < coupling->size(); ++i) {
      const std::string path = "system.coupling[" + std::to_string(i) + "]";
      const json& c = (*coupling)[i];
      if (!c.is_object()) fail(path, "expected an object");
      reject_unknown_keys(c, path, {"j", "k", "delta"});
      engine::Coupling pair;
      pair.j = as_int(require(c, "j", path), path + ".j");
      pair.k = as_int(require(c, "k", path), path + ".k");
      pair.delta = as_number(require(c, "delta", path), path + ".delta");
      if (pair.j < 1 || pair.j > spec.n_sites) fail(path + ".j", "site out of range");
      if (pair.k < 1 || pair.k > spec.n_sites) fail(path + ".k", "site out of range");
      if (pair.j >= pair.k) fail(path, "requires j < k");
      spec.coupling.push_back(pair);
    }
  }
  if (const json* beta = find(v, "beta")) {
    spec.beta = as_number(*beta, "system.beta");
    if (!(spec.beta > 0.0)) fail("system.beta", "must be positive");
  }
  spec.validate();
  return spec;
}

std::vector<engine::DetectorSpec> parse_detectors(const json& v, const engine::SystemSpec& spec) {
  if (!v.is_array()) fail("detectors", "expected an array");
  std::vector<engine::DetectorSpec> dets;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string path = "detectors[" + std::to_string(i) + "]";
    const json& d = v[i];
    if (!d.is_object()) fail(path, "expected an object");
    reject_unknown_keys(d, path, {"site", "kappa"});
    engine::DetectorSpec det;
    det.site = as_int(require(d, "site", path), path + ".site");
    det.kappa = as_number(require(d, "kappa", path), path + ".kappa");
    if (det.site < 1 || det.site > spec.n_sites) fail(path + ".site", "site out of range");
    if (det.kappa < 0.0 || det.kappa > 1.0) fail(path + ".kappa", "must lie in [0, 1]");
    dets.push_back(det);
  }
  return dets;
}

opt::SearchConfig parse_search(const json& v) {
  if (!v.is_object()) fail("search", "expected an object");
  reject_unknown_keys(v, "search",
                      {"grid_spacing", "theta_min", "theta_max", "k_max", "convergence_tol",
                       "cluster_tol", "gradient_tol"});
  opt::SearchConfig cfg;
  if (const json* x = find(v, "grid_spacing")) cfg.grid_spacing = as_number(*x, "search.grid_spacing");
  if (const json* x = find(v, "theta_min")) cfg.theta_min = as_number(*x, "search.theta_min");
  if (const json* x = find(v, "theta_max")) cfg.theta_max = as_number(*x, "search.theta_max");
  if (const json* x = find(v, "k_max")) cfg.k_max = as_int(*x, "search.k_max");
  if (const json* x = find(v, "convergence_tol")) cfg.convergence_tol = as_number(*x, "search.convergence_tol");
  if (const json* x = find(v, "cluster_tol")) cfg.cluster_tol = as_number(*x, "search.cluster_tol");
  if (const json* x = find(v, "gradient_tol")) cfg.gradient_tol = as_number(*x, "search.gradient_tol");
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    fail("search", e.what());
  }
  return cfg;
}

std::vector<sweeps::Configuration> parse_configurations(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of configuration labels");
  std::vector<sweeps::Configuration> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    try {
      out.push_back(sweeps::configuration_from_label(as_string(v[i], p)));
    } catch (const ValidationError& e) {
      fail(p, e.what());
    }
  }
  if (out.empty()) fail(path, "must not be empty");
  return out;
}

SweepSpec parse_sweep(const json& v, const engine::SystemSpec& spec) {
  if (!v.is_object()) fail("sweep", "expected an object");
  SweepSpec sw;
  sw.kind = sweep_kind_from_name(as_string(require(v, "kind", "sweep"), "sweep.kind"));

  switch (sw.kind) {
    case SweepKind::kappa: {
      reject_unknown_keys(v, "sweep", {"kind", "grid", "configurations"});
      sw.grid = find(v, "grid") ? materialize_grid(*find(v, "grid"), "sweep.grid")
                                : sweeps::default_kappa_grid();
      for (double k : sw.grid)
        if (k < 0.0 || k > 1.0) fail("sweep.grid", "kappa values must lie in [0, 1]");
      if (const json* c = find(v, "configurations")) {
        sw.configurations = parse_configurations(*c, "sweep.configurations");
      } else {
        sw.configurations = spec.n_sites == 2
                                ? std::vector<sweeps::Configuration>{sweeps::Configuration::n1,
                                                                     sweeps::Configuration::n2_D1,
                                                                     sweeps::Configuration::n2_D1D2}
                                : std::vector<sweeps::Configuration>{sweeps::Configuration::n1};
      }
      break;
    }
    case SweepKind::spectrum: {
      reject_unknown_keys(v, "sweep", {"kind", "grid"});
      if (spec.n_sites != 2) fail("sweep.kind", "spectrum needs a two-qubit system");
      sw.grid = find(v, "grid") ? materialize_grid(*find(v, "grid"), "sweep.grid")
                                : sweeps::default_delta_grid();
      break;
    }
    case SweepKind::detuning: {
      reject_unknown_keys(v, "sweep", {"kind", "grid", "configurations", "kappa"});
      if (spec.n_sites != 2) fail("sweep.kind", "detuning needs a two-qubit system");
      sw.grid = find(v, "grid") ? materialize_grid(*find(v, "grid"), "sweep.grid")
                                : sweeps::default_xi_grid();
      if (const json* k = find(v, "kappa")) {
        sw.kappa = as_number(*k, "sweep.kappa");
        if (sw.kappa < 0.0 || sw.kappa > 1.0) fail("sweep.kappa", "must lie in [0, 1]");
      }
      if (const json* c = find(v, "configurations")) {
        sw.configurations = parse_configurations(*c, "sweep.configurations");
        for (sweeps::Configuration conf : sw.configurations)
          if (conf == sweeps::Configuration::n1)
            fail("sweep.configurations", "n=1 has no detuning axis");
      } else {
        sw.configurations = {sweeps::Configuration::n2_D1, sweeps::Configuration::n2_D1D2};
      }
      break;
    }
    case SweepKind::local_global: {
      reject_unknown_keys(v, "sweep", {"kind", "grid", "detector_sites"});
      if (spec.n_sites != 2) fail("sweep.kind", "local_global needs a two-qubit system");
      sw.grid = find(v, "grid") ? materialize_grid(*find(v, "grid"), "sweep.grid")
                                : sweeps::default_kappa_grid();
      for (double k : sw.grid)
        if (k < 0.0 || k > 1.0) fail("sweep.grid", "kappa values must lie in [0, 1]");
      if (const json* s = find(v, "detector_sites")) {
        if (!s->is_array()) fail("sweep.detector_sites", "expected an array of sites");
        for (std::size_t i = 0; i < s->size(); ++i) {
          const std::string p = "sweep.detector_sites[" + std::to_string(i) + "]";
          const int site = as_int((*s)[i], p);
          if (site < 1 || site > spec.n_sites) fail(p, "site out of range");
          sw.detector_sites.push_back(site);
        }
        if (sw.detector_sites.empty()) fail("sweep.detector_sites", "must not be empty");
      } else {
        sw.detector_sites = {1, 2};
      }
      break;
    }
    case SweepKind::robustness: {
      reject_unknown_keys(v, "sweep", {"kind", "grid", "branch"});
      sw.grid = find(v, "grid") ? materialize_error_grid(*find(v, "grid"), "sweep.grid")
                                : sweeps::default_error_grid();
      for (double d : sw.grid)
        if (d < 0.0) fail("sweep.grid", "error magnitudes must be non-negative");
      if (const json* b = find(v, "branch")) sw.branch = as_string(*b, "sweep.branch");
      break;
    }
    case SweepKind::beta: {
      reject_unknown_keys(v, "sweep", {"kind", "grid", "target"});
      sw.grid = find(v, "grid") ? materialize_grid(*find(v, "grid"), "sweep.grid")
                                : sweeps::default_beta_grid();
      for (double b : sw.grid)
        if (!(b > 0.0)) fail("sweep.grid", "beta values must be positive");
      if (const json* t = find(v, "target")) {
        if (!t->is_object()) fail("sweep.target", "expected an object");
        reject_unknown_keys(*t, "sweep.target", {"w", "eta"});
        sweeps::BetaTarget target;
        target.w = as_number(require(*t, "w", "sweep.target"), "sweep.target.w");
        target.eta = as_number(require(*t, "eta", "sweep.target"), "sweep.target.eta");
        if (target.w == 0.0) fail("sweep.target.w", "must be nonzero");
        if (target.eta == 0.0) fail("sweep.target.eta", "must be nonzero");
        sw.target = target;
      }
      break;
    }
  }
  if (sw.grid.empty()) fail("sweep.grid", "must not be empty");
  return sw;
}

OutputSpec parse_output(const json& v) {
  if (!v.is_object()) fail("output", "expected an object");
  reject_unknown_keys(v, "output", {"path", "format"});
  OutputSpec out;
  out.path = as_string(require(v, "path", "output"), "output.path");
  if (out.path.empty()) fail("output.path", "must not be empty");
  if (const json* f = find(v, "format")) {
    const std::string format = as_string(*f, "output.format");
    if (format == "csv") out.format = OutputFormat::csv;
    else if (format == "json") out.format = OutputFormat::json;
    else fail("output.format", "expected \"csv\" or \"json\"");
  }
  return out;
}

}  // namespace

const char* sweep_kind_name(SweepKind k) {
  switch (k) {
    case SweepKind::kappa: return "kappa";
    case SweepKind::spectrum: return "spectrum";
    case SweepKind::detuning: return "detuning";
    case SweepKind::local_global: return "local_global";
    case SweepKind::robustness: return "robustness";
    case SweepKind::beta: return "beta";
  }
  return "unknown";
}

SweepKind sweep_kind_from_name(const std::string& name) {
  if (name == "kappa") return SweepKind::kappa;
  if (name == "spectrum") return SweepKind::spectrum;
  if (name == "detuning") return SweepKind::detuning;
  if (name == "local_global") return SweepKind::local_global;
  if (name == "robustness") return SweepKind::robustness;
  if (name == "beta") return SweepKind::beta;
  throw ValidationError("sweep.kind: unknown kind '" + name + "'");
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; translate to line and column.
    std::size_t line = 1, column = 1;
    const std::size_t stop = e.byte > 0 ? std::min(e.byte - 1, text.size()) : 0;
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') { ++line; column = 1; } else { ++column; }
    }
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                     e.what());
  }
  if (!root.is_object()) throw ValidationError("top level: expected a JSON object");
  reject_unknown_keys(root, "",
                      {"system", "detectors", "search", "branch_policy", "feedback_mode", "theta",
                       "sweep", "output"});

  RunConfig cfg;
  cfg.system = parse_system(require(root, "system", ""));
  if (const json* d = find(root, "detectors")) cfg.detectors = parse_detectors(*d, cfg.system);
  if (const json* s = find(root, "search")) cfg.search = parse_search(*s);
  if (const json* b = find(root, "branch_policy")) {
    try {
      cfg.branch_policy = sweeps::branch_policy_from_name(as_string(*b, "branch_policy"));
    } catch (const ValidationError& e) {
      fail("branch_policy", e.what());
    }
  }
  if (const json* m = find(root, "feedback_mode")) {
    const std::string mode = as_string(*m, "feedback_mode");
    if (mode == "local") cfg.feedback_mode = engine::FeedbackMode::local;
    else if (mode == "global") cfg.feedback_mode = engine::FeedbackMode::global;
    else fail("feedback_mode", "expected \"local\" or \"global\"");
  }
  if (cfg.feedback_mode == engine::FeedbackMode::global && cfg.system.n_sites != 2)
    fail("feedback_mode", "global feedback needs a two-qubit system");
  if (const json* t = find(root, "theta")) {
    cfg.theta = as_number_array(*t, "theta");
    const std::size_t expected =
        cfg.feedback_mode == engine::FeedbackMode::local ? static_cast<std::size_t>(cfg.system.n_sites) : 1;
    if (cfg.theta->size() != expected)
      fail("theta", "expected " + std::to_string(expected) + " angle(s)");
  }
  if (const json* s = find(root, "sweep")) cfg.sweep = parse_sweep(*s, cfg.system);
  if (const json* o = find(root, "output")) cfg.output = parse_output(*o);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
  json j;
  j["system"]["n_sites"] = cfg.system.n_sites;
  j["system"]["epsilon"] = cfg.system.epsilon;
  if (!cfg.system.coupling.empty()) {
    json arr = json::array();
    for (const engine::Coupling& c : cfg.system.coupling)
      arr.push_back({{"j", c.j}, {"k", c.k}, {"delta", c.delta}});
    j["system"]["coupling"] = std::move(arr);
  }
  j["system"]["beta"] = cfg.system.beta;

  if (!cfg.detectors.empty()) {
    json arr = json::array();
    for (const engine::DetectorSpec& d : cfg.detectors)
      arr.push_back({{"site", d.site}, {"kappa", d.kappa}});
    j["detectors"] = std::move(arr);
  }

  j["search"] = {{"grid_spacing", cfg.search.grid_spacing},
                 {"theta_min", cfg.search.theta_min},
                 {"theta_max", cfg.search.theta_max},
                 {"k_max", cfg.search.k_max},
                 {"convergence_tol", cfg.search.convergence_tol},
                 {"cluster_tol", cfg.search.cluster_tol},
                 {"gradient_tol", cfg.search.gradient_tol}};
  j["branch_policy"] = sweeps::branch_policy_name(cfg.branch_policy);
  j["feedback_mode"] = cfg.feedback_mode == engine::FeedbackMode::local ? "local" : "global";
  if (cfg.theta) j["theta"] = *cfg.theta;

  if (cfg.sweep) {
    const SweepSpec& sw = *cfg.sweep;
    json s;
    s["kind"] = sweep_kind_name(sw.kind);
    if (sw.kind == SweepKind::robustness) {
      s["grid"] = {{"unit", "deg"}, {"values", sw.grid}};
      if (!sw.branch.empty()) s["branch"] = sw.branch;
    } else {
      s["grid"] = sw.grid;
    }
    if (sw.kind == SweepKind::kappa || sw.kind == SweepKind::detuning) {
      json arr = json::array();
      for (sweeps::Configuration c : sw.configurations) arr.push_back(sweeps::configuration_label(c));
      s["configurations"] = std::move(arr);
    }
    if (sw.kind == SweepKind::detuning) s["kappa"] = sw.kappa;
    if (sw.kind == SweepKind::local_global) s["detector_sites"] = sw.detector_sites;
    if (sw.kind == SweepKind::beta && sw.target)
      s["target"] = {{"w", sw.target->w}, {"eta", sw.target->eta}};
    j["sweep"] = std::move(s);
  }

  if (cfg.output) {
    j["output"] = {{"path", cfg.output->path},
                   {"format", cfg.output->format == OutputFormat::csv ? "csv" : "json"}};
  }
  return j.dump(2) + "\n";
}

}  // namespace qme::config
