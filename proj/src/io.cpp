#include "qme/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qme/errors.hpp"

namespace qme::io {

namespace {

using nlohmann::json;

std::size_t max_theta_size(std::span<const sweeps::SweepRecord> records) {
  std::size_t n = 0;
  for (const sweeps::SweepRecord& r : records) n = std::max(n, r.theta_opt.size());
  return n;
}

json sweep_record_to_json(const sweeps::SweepRecord& r) {
  json o;
  o["variable"] = r.variable;
  o["value"] = r.value;
  o["configuration"] = r.config_label;
  o["branch"] = r.branch;
  o["probability"] = r.probability;
  o["theta_opt"] = r.theta_opt;
  o["e_initial"] = r.metrics.e_initial;
  o["e_measured"] = r.metrics.e_measured;
  o["e_feedback"] = r.metrics.e_feedback;
  o["w_ext"] = r.metrics.work_extracted;
  o["w_er"] = r.metrics.work_erasure;
  if (r.metrics.efficiency) o["eta"] = *r.metrics.efficiency; else o["eta"] = nullptr;
  if (r.w_expected) o["w_expected"] = *r.w_expected; else o["w_expected"] = nullptr;
  return o;
}

}  // namespace

std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw Error("write to '" + path + "' failed");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string sweep_records_csv(std::span<const sweeps::SweepRecord> records,
                              const std::string& variable) {
  const std::size_t n_theta = max_theta_size(records);
  std::ostringstream out;
  out << variable << ",configuration,branch,probability,e_initial,e_measured,e_feedback,w_ext,w_er,eta,w_expected";
  for (std::size_t j = 1; j <= n_theta; ++j) out << ",theta_" << j;
  out << "\n";
  for (const sweeps::SweepRecord& r : records) {
    out << format_g17(r.value) << ',' << r.config_label << ',' << r.branch << ','
        << format_g17(r.probability) << ',' << format_g17(r.metrics.e_initial) << ','
        << format_g17(r.metrics.e_measured) << ',' << format_g17(r.metrics.e_feedback) << ','
        << format_g17(r.metrics.work_extracted) << ',' << format_g17(r.metrics.work_erasure) << ',';
    if (r.metrics.efficiency) out << format_g17(*r.metrics.efficiency);
    out << ',';
    if (r.w_expected) out << format_g17(*r.w_expected);
    for (std::size_t j = 0; j < n_theta; ++j) {
      out << ',';
      if (j < r.theta_opt.size()) out << format_g17(r.theta_opt[j]);
    }
    out << "\n";
  }
  return out.str();
}

std::string spectrum_csv(std::span<const sweeps::SpectrumRecord> records) {
  std::ostringstream out;
  out << "delta_z,e0,e1,e2,e3,gap\n";
  for (const sweeps::SpectrumRecord& r : records) {
    out << format_g17(r.delta_z);
    for (double e : r.levels) out << ',' << format_g17(e);
    out << ',' << format_g17(r.gap) << "\n";
  }
  return out.str();
}

std::string pair_records_csv(std::span<const sweeps::PairRecord> records) {
  std::ostringstream out;
  out << "kappa,branch,probability,w_local,w_global,ef_local,ef_global,theta_local_1,theta_local_2,theta_global\n";
  for (const sweeps::PairRecord& r : records) {
    out << format_g17(r.kappa) << ',' << r.branch << ',' << format_g17(r.probability) << ','
        << format_g17(r.w_local) << ',' << format_g17(r.w_global) << ','
        << format_g17(r.ef_local) << ',' << format_g17(r.ef_global);
    for (std::size_t j = 0; j < 2; ++j) {
      out << ',';
      if (j < r.theta_local.size()) out << format_g17(r.theta_local[j]);
    }
    out << ',' << format_g17(r.theta_global) << "\n";
  }
  return out.str();
}

std::string robustness_csv(std::span<const sweeps::RobustnessRecord> records) {
  std::size_t n_dir = 0;
  for (const sweeps::RobustnessRecord& r : records) n_dir = std::max(n_dir, r.worst_direction.size());
  std::ostringstream out;
  out << "delta_deg,worst_ratio,w_perturbed";
  for (std::size_t j = 1; j <= n_dir; ++j) out << ",dir_" << j;
  out << "\n";
  for (const sweeps::RobustnessRecord& r : records) {
    out << format_g17(r.delta_deg) << ',' << format_g17(r.ratio) << ','
        << format_g17(r.w_perturbed);
    for (std::size_t j = 0; j < n_dir; ++j) {
      out << ',';
      if (j < r.worst_direction.size()) out << format_g17(r.worst_direction[j]);
    }
    out << "\n";
  }
  return out.str();
}

std::string sweep_records_json(std::span<const sweeps::SweepRecord> records) {
  json arr = json::array();
  for (const sweeps::SweepRecord& r : records) arr.push_back(sweep_record_to_json(r));
  return arr.dump(2) + "\n";
}

std::string spectrum_json(std::span<const sweeps::SpectrumRecord> records) {
  json arr = json::array();
  for (const sweeps::SpectrumRecord& r : records) {
    json o;
    o["delta_z"] = r.delta_z;
    o["levels"] = r.levels;
    o["gap"] = r.gap;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

std::string pair_records_json(std::span<const sweeps::PairRecord> records) {
  json arr = json::array();
  for (const sweeps::PairRecord& r : records) {
    json o;
    o["kappa"] = r.kappa;
    o["branch"] = r.branch;
    o["probability"] = r.probability;
    o["w_local"] = r.w_local;
    o["w_global"] = r.w_global;
    o["ef_local"] = r.ef_local;
    o["ef_global"] = r.ef_global;
    o["theta_local"] = r.theta_local;
    o["theta_global"] = r.theta_global;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

std::string robustness_json(std::span<const sweeps::RobustnessRecord> records) {
  json arr = json::array();
  for (const sweeps::RobustnessRecord& r : records) {
    json o;
    o["delta_deg"] = r.delta_deg;
    o["worst_ratio"] = r.ratio;
    o["w_perturbed"] = r.w_perturbed;
    o["worst_direction"] = r.worst_direction;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

}  // namespace qme::io
