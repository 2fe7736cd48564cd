#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "masschase/core.hpp"
#include "masschase/density.hpp"

namespace masschase {

namespace detail {
inline std::string full_precision(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// One row per cell: center coordinates, value. Doubles at %.17g so the
/// round trip is bit-exact.
template <std::size_t Dim>
void write_density_csv(const GridDensity<Dim>& m, std::ostream& out) {
  for (std::size_t i = 0; i < Dim; ++i) out << "x" << i << ",";
  out << "value\n";
  for (std::size_t flat = 0; flat < m.values().size(); ++flat) {
    const auto x = m.cell_center(m.unflatten(flat));
    for (std::size_t i = 0; i < Dim; ++i) out << detail::full_precision(x[i]) << ",";
    out << detail::full_precision(m.values()[flat]) << "\n";
  }
}

template <std::size_t Dim>
nlohmann::ordered_json density_header_json(const GridDensity<Dim>& m) {
  nlohmann::ordered_json j;
  j["dim"] = Dim;
  j["origin"] = m.origin();
  j["spacing"] = m.spacing();
  j["extents"] = m.extents();
  return j;
}

/// Writes base_path.json (grid header) and base_path.csv (cell values).
template <std::size_t Dim>
void save_density(const GridDensity<Dim>& m, const std::string& base_path) {
  {
    std::ofstream jf(base_path + ".json");
    if (!jf) throw ConfigError("save_density: cannot open " + base_path + ".json");
    jf << density_header_json(m).dump(2) << "\n";
  }
  std::ofstream cf(base_path + ".csv");
  if (!cf) throw ConfigError("save_density: cannot open " + base_path + ".csv");
  write_density_csv(m, cf);
}

template <std::size_t Dim>
GridDensity<Dim> load_density(const std::string& base_path) {
  std::ifstream jf(base_path + ".json");
  if (!jf) throw ConfigError("load_density: cannot open " + base_path + ".json");
  nlohmann::json j;
  jf >> j;
  if (j.at("dim").get<std::size_t>() != Dim)
    throw ConfigError("load_density: dimension mismatch in " + base_path + ".json");
  Vec<Dim> origin, spacing;
  std::array<int, Dim> extents;
  for (std::size_t i = 0; i < Dim; ++i) {
    origin[i] = j.at("origin").at(i).get<double>();
    spacing[i] = j.at("spacing").at(i).get<double>();
    extents[i] = j.at("extents").at(i).get<int>();
  }
  std::ifstream cf(base_path + ".csv");
  if (!cf) throw ConfigError("load_density: cannot open " + base_path + ".csv");
  std::string line;
  std::getline(cf, line);  // header
  std::vector<double> values;
  while (std::getline(cf, line)) {
    if (line.empty()) continue;
    const auto pos = line.rfind(',');
    if (pos == std::string::npos)
      throw ConfigError("load_density: malformed row in " + base_path + ".csv");
    values.push_back(std::strtod(line.c_str() + pos + 1, nullptr));
  }
  return GridDensity<Dim>(origin, spacing, extents, std::move(values));
}

}  // namespace masschase
