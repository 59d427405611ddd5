#pragma once

#include <span>
#include <string>
#include <vector>

#include "qme/sweeps.hpp"

namespace qme::io {

// Full-precision decimal form (printf %.17g); round-trips through strtod.
std::string format_g17(double x);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// CSV emitters. Header row, comma separator, "." decimal, "\n" newlines,
// empty cells for absent optionals. The leading column is the sweep variable.
std::string sweep_records_csv(std::span<const sweeps::SweepRecord> records,
                              const std::string& variable);
std::string spectrum_csv(std::span<const sweeps::SpectrumRecord> records);
std::string pair_records_csv(std::span<const sweeps::PairRecord> records);
std::string robustness_csv(std::span<const sweeps::RobustnessRecord> records);

// The same tables as JSON arrays of objects, for output.format = "json".
std::string sweep_records_json(std::span<const sweeps::SweepRecord> records);
std::string spectrum_json(std::span<const sweeps::SpectrumRecord> records);
std::string pair_records_json(std::span<const sweeps::PairRecord> records);
std::string robustness_json(std::span<const sweeps::RobustnessRecord> records);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

// Minimal reader for the emitters above: no quoting, cells split on commas.
CsvTable parse_csv(const std::string& text);

}  // namespace qme::io
