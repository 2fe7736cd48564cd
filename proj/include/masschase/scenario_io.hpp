#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "masschase/core.hpp"
#include "masschase/density.hpp"
#include "masschase/density_io.hpp"
#include "masschase/fields.hpp"
#include "masschase/game.hpp"

namespace masschase {

struct GridSpec {
  double origin = 0;
  double spacing = 0;
  int cells = 0;

  double span() const { return spacing * cells; }

  GridSpec with_cells(int new_cells) const {
    GridSpec g;
    g.origin = origin;
    g.cells = new_cells;
    g.spacing = span() / new_cells;
    return g;
  }
};

/// Parametric initial density, kept around so an instance can be re-realized
/// at other resolutions (refinement studies, coarse value recursions).
struct DensitySpec {
  enum class Kind { Uniform, Hat, GaussianTruncated, Table };
  Kind kind = Kind::Uniform;
  double value = 1;                     // uniform
  double support_lo = 0, support_hi = 1;
  double peak = 0, height = 1;          // hat
  double center = 0, sigma = 1;         // gaussian
  std::string file;                     // table base path

  GridDensity<1> realize(const GridSpec& grid) const {
    if (kind == Kind::Table) {
      auto m = load_density<1>(file);
      return m;
    }
    auto fn = [this](const Vec<1>& xv) -> double {
      const double x = xv[0];
      switch (kind) {
        case Kind::Uniform:
          return (x >= support_lo && x <= support_hi) ? value : 0.0;
        case Kind::Hat: {
          if (x <= support_lo || x >= support_hi) return 0.0;
          if (x <= peak) return height * (x - support_lo) / (peak - support_lo);
          return height * (support_hi - x) / (support_hi - peak);
        }
        case Kind::GaussianTruncated: {
          if (x < support_lo || x > support_hi) return 0.0;
          const double u = (x - center) / sigma;
          return height * std::exp(-0.5 * u * u);
        }
        case Kind::Table:
          return 0.0;
      }
      return 0.0;
    };
    return GridDensity<1>::from_function({grid.origin}, {grid.spacing}, {grid.cells}, fn);
  }
};

/// A parsed, validated game instance plus everything needed to re-realize it
/// and to report on it.
struct LoadedScenario {
  Scenario scenario;
  DensitySpec density_spec;
  GridSpec grid_spec;
  bool normalized = false;
  double normalization_factor = 1;
  std::vector<std::string> notes;
  std::vector<Admissibility> dictB_verdicts;
  std::string digest;
  std::string path;

  GridDensity<1> density_at(const GridSpec& grid) const {
    GridDensity<1> m = density_spec.realize(grid);
    if (!normalized) return m;
    const double total = mass(m);
    if (!(total > 0)) throw ConfigError("scenario density: zero mass, cannot normalize");
    std::vector<double> vals = m.values();
    for (auto& v : vals) v /= total;
    return GridDensity<1>(m.origin(), m.spacing(), m.extents(), std::move(vals));
  }

  /// A coarsened/refined copy of the instance (steps and/or grid cells).
  Scenario instance(std::optional<int> steps, std::optional<int> grid_cells,
                    std::optional<double> substep = std::nullopt) const {
    Scenario sc = scenario;
    if (steps) sc.steps = *steps;
    if (grid_cells) sc.m0 = density_at(grid_spec.with_cells(*grid_cells));
    if (substep) sc.integrator.substep = *substep;
    return sc;
  }
};

namespace detail {

struct ScnLine {
  int number = 0;
  std::string section;
  std::string key;
  std::string value;
};

struct ScnDoc {
  std::string path;
  std::vector<ScnLine> lines;

  [[noreturn]] static void fail(const std::string& path, int line, const std::string& msg) {
    throw ConfigError(path + ":" + std::to_string(line) + ": " + msg);
  }

  const ScnLine* find(const std::string& section, const std::string& key) const {
    for (const auto& l : lines)
      if (l.section == section && l.key == key) return &l;
    return nullptr;
  }

  std::vector<const ScnLine*> find_all(const std::string& section, const std::string& key) const {
    std::vector<const ScnLine*> out;
    for (const auto& l : lines)
      if (l.section == section && l.key == key) out.push_back(&l);
    return out;
  }

  const ScnLine& require(const std::string& section, const std::string& key) const {
    const ScnLine* l = find(section, key);
    if (!l) throw ConfigError(path + ": missing required key [" + section + "]." + key);
    return *l;
  }
};

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline ScnDoc parse_kv_tree(const std::string& text, const std::string& path) {
  ScnDoc doc;
  doc.path = path;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') ScnDoc::fail(path, number, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) ScnDoc::fail(path, number, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) ScnDoc::fail(path, number, "expected key = value");
    if (section.empty()) ScnDoc::fail(path, number, "key outside any [section]");
    ScnLine l;
    l.number = number;
    l.section = section;
    l.key = trim(line.substr(0, eq));
    l.value = trim(line.substr(eq + 1));
    if (l.key.empty()) ScnDoc::fail(path, number, "empty key");
    doc.lines.push_back(std::move(l));
  }
  return doc;
}

inline double parse_num(const ScnDoc& doc, const ScnLine& l, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0')
    ScnDoc::fail(doc.path, l.number, "[" + l.section + "]." + l.key + ": not a number: '" + t + "'");
  return v;
}

inline double parse_num(const ScnDoc& doc, const ScnLine& l) { return parse_num(doc, l, l.value); }

inline std::vector<double> parse_list(const ScnDoc& doc, const ScnLine& l,
                                      const std::string& text) {
  std::string t = trim(text);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']')
    ScnDoc::fail(doc.path, l.number, "[" + l.section + "]." + l.key + ": expected [a, b, ...]");
  t = t.substr(1, t.size() - 2);
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= t.size()) {
    const auto comma = t.find(',', pos);
    const std::string item = t.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!trim(item).empty()) out.push_back(parse_num(doc, l, item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// Tagged record: "kind key=value key=[a,b] ..." where values may be numbers,
// lists, or bare strings.
struct Record {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> fields;

  const std::string* get(const std::string& key) const {
    for (const auto& [k, v] : fields)
      if (k == key) return &v;
    return nullptr;
  }
};

inline Record parse_record(const ScnDoc& doc, const ScnLine& l) {
  Record r;
  std::istringstream in(l.value);
  std::string tok;
  if (!(in >> r.kind)) ScnDoc::fail(doc.path, l.number, "empty record");
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      ScnDoc::fail(doc.path, l.number, "record token '" + tok + "' is not key=value");
    r.fields.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  return r;
}

// Record without a kind tag: every token is key=value.
inline Record parse_record_kv(const ScnDoc& doc, const ScnLine& l) {
  Record r;
  r.kind = l.key;
  std::istringstream in(l.value);
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      ScnDoc::fail(doc.path, l.number, "record token '" + tok + "' is not key=value");
    r.fields.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  if (r.fields.empty()) ScnDoc::fail(doc.path, l.number, "empty record");
  return r;
}

inline double record_num(const ScnDoc& doc, const ScnLine& l, const Record& r,
                         const std::string& key) {
  const std::string* v = r.get(key);
  if (!v) ScnDoc::fail(doc.path, l.number, r.kind + " record: missing " + key + "=");
  return parse_num(doc, l, *v);
}

inline std::pair<double, double> record_interval(const ScnDoc& doc, const ScnLine& l,
                                                 const Record& r, const std::string& key) {
  const std::string* v = r.get(key);
  if (!v) ScnDoc::fail(doc.path, l.number, r.kind + " record: missing " + key + "=");
  const auto list = parse_list(doc, l, *v);
  if (list.size() != 2 || !(list[0] < list[1]))
    ScnDoc::fail(doc.path, l.number, r.kind + " record: " + key + " must be [lo,hi] with lo < hi");
  return {list[0], list[1]};
}

inline FieldSpec<1> parse_field_record(const ScnDoc& doc, const ScnLine& l) {
  const Record r = parse_record(doc, l);
  if (r.kind == "constant") {
    const auto [lo, hi] = record_interval(doc, l, r, "window");
    return FieldSpec<1>::constant({record_num(doc, l, r, "v")}, Box<1>{{lo}, {hi}},
                                  record_num(doc, l, r, "margin"), l.value);
  }
  if (r.kind == "linear_window") {
    const auto [lo, hi] = record_interval(doc, l, r, "window");
    return FieldSpec<1>::linear_window(record_num(doc, l, r, "lambda"), Box<1>{{lo}, {hi}},
                                       record_num(doc, l, r, "margin"), l.value);
  }
  if (r.kind == "clamp_ramp") {
    return FieldSpec<1>::clamp_ramp(record_num(doc, l, r, "L"), record_num(doc, l, r, "R"),
                                    record_num(doc, l, r, "c"), record_num(doc, l, r, "smooth"),
                                    l.value);
  }
  ScnDoc::fail(doc.path, l.number,
               "unknown field kind '" + r.kind + "' (expected constant | linear_window | clamp_ramp)");
}

inline DensitySpec parse_density_record(const ScnDoc& doc, const ScnLine& l) {
  const Record r = parse_record(doc, l);
  DensitySpec d;
  if (r.kind == "uniform") {
    d.kind = DensitySpec::Kind::Uniform;
    d.value = record_num(doc, l, r, "value");
    std::tie(d.support_lo, d.support_hi) = record_interval(doc, l, r, "support");
  } else if (r.kind == "hat") {
    d.kind = DensitySpec::Kind::Hat;
    std::tie(d.support_lo, d.support_hi) = record_interval(doc, l, r, "support");
    d.peak = record_num(doc, l, r, "peak");
    d.height = record_num(doc, l, r, "height");
    if (!(d.support_lo < d.peak && d.peak < d.support_hi))
      ScnDoc::fail(doc.path, l.number, "hat record: peak must lie strictly inside support");
  } else if (r.kind == "gaussian_truncated") {
    d.kind = DensitySpec::Kind::GaussianTruncated;
    d.center = record_num(doc, l, r, "center");
    d.sigma = record_num(doc, l, r, "sigma");
    d.height = record_num(doc, l, r, "height");
    std::tie(d.support_lo, d.support_hi) = record_interval(doc, l, r, "support");
    if (!(d.sigma > 0)) ScnDoc::fail(doc.path, l.number, "gaussian record: sigma must be > 0");
  } else if (r.kind == "table") {
    d.kind = DensitySpec::Kind::Table;
    const std::string* f = r.get("file");
    if (!f) ScnDoc::fail(doc.path, l.number, "table record: missing file=");
    d.file = *f;
  } else {
    ScnDoc::fail(doc.path, l.number, "unknown density kind '" + r.kind + "'");
  }
  return d;
}

inline std::string fnv1a_digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

inline LoadedScenario load_scenario_text(const std::string& text, const std::string& path) {
  using detail::ScnDoc;
  const ScnDoc doc = detail::parse_kv_tree(text, path);

  std::vector<std::string> notes;

  const double T = detail::parse_num(doc, doc.require("horizon", "T"));
  if (!(T > 0)) ScnDoc::fail(path, doc.require("horizon", "T").number, "[horizon].T must be > 0");
  const double steps_raw = detail::parse_num(doc, doc.require("horizon", "steps"));
  const int steps = int(steps_raw);
  if (steps < 1 || steps != steps_raw)
    ScnDoc::fail(path, doc.require("horizon", "steps").number, "[horizon].steps must be a positive integer");

  const double x0 = detail::parse_num(doc, doc.require("player", "x0"));
  const double c = detail::parse_num(doc, doc.require("player", "c"));
  if (!(c >= 0)) ScnDoc::fail(path, doc.require("player", "c").number, "[player].c must be >= 0");
  PlayerDynamics dyn{c, std::nullopt};
  if (const auto* l = doc.find("player", "drift")) dyn.drift = detail::parse_field_record(doc, *l);

  const auto& density_line = doc.require("mass", "density");
  const DensitySpec density_spec = detail::parse_density_record(doc, density_line);

  GridSpec grid;
  if (density_spec.kind != DensitySpec::Kind::Table || doc.find("mass", "grid")) {
    const auto& grid_line = doc.require("mass", "grid");
    const auto rec = detail::parse_record_kv(doc, grid_line);
    grid.origin = detail::record_num(doc, grid_line, rec, "origin");
    grid.spacing = detail::record_num(doc, grid_line, rec, "spacing");
    if (!(grid.spacing > 0))
      ScnDoc::fail(path, grid_line.number, "[mass].grid.spacing must be > 0");
    const double cells_raw = detail::record_num(doc, grid_line, rec, "cells");
    grid.cells = int(cells_raw);
    if (grid.cells < 3 || grid.cells != cells_raw)
      ScnDoc::fail(path, grid_line.number, "[mass].grid.cells must be an integer >= 3");
  }

  const auto& dictA_line = doc.require("controls", "dictA");
  const auto dictA = detail::parse_list(doc, dictA_line, dictA_line.value);
  if (dictA.empty()) ScnDoc::fail(path, dictA_line.number, "[controls].dictA must be non-empty");
  std::vector<Vec<1>> controls;
  for (double a : dictA) {
    if (std::abs(a) > c)
      ScnDoc::fail(path, dictA_line.number, "[controls].dictA element outside [-c, c]");
    controls.push_back({a});
  }

  const double M = detail::parse_num(doc, doc.require("controls", "M"));
  if (!(M > 0)) ScnDoc::fail(path, doc.require("controls", "M").number, "[controls].M must be > 0");
  double c1 = std::numeric_limits<double>::infinity();
  if (const auto* l = doc.find("controls", "c1")) c1 = detail::parse_num(doc, *l);

  std::vector<FieldSpec<1>> dictB;
  for (const auto* l : doc.find_all("controls", "field"))
    dictB.push_back(detail::parse_field_record(doc, *l));
  if (dictB.empty())
    throw ConfigError(path + ": [controls] needs at least one 'field = ...' entry");

  CostSpec cost;
  const auto& running_line = doc.require("cost", "running");
  {
    const auto r = detail::parse_record(doc, running_line);
    if (r.kind == "zero")
      cost.running = {RunningCost::Kind::Zero, 0};
    else if (r.kind == "window_occupancy")
      cost.running = {RunningCost::Kind::WindowOccupancy,
                      detail::record_num(doc, running_line, r, "r")};
    else
      ScnDoc::fail(path, running_line.number, "unknown running cost '" + r.kind + "'");
  }
  const auto& terminal_line = doc.require("cost", "terminal");
  {
    const auto r = detail::parse_record(doc, terminal_line);
    if (r.kind == "window_mass")
      cost.terminal = {TerminalCost::Kind::WindowMass,
                       detail::record_num(doc, terminal_line, r, "r")};
    else if (r.kind == "squared_mean_distance")
      cost.terminal = {TerminalCost::Kind::SquaredMeanDistance, 0};
    else
      ScnDoc::fail(path, terminal_line.number, "unknown terminal cost '" + r.kind + "'");
  }

  double substep = 1e-3 * T;
  if (const auto* l = doc.find("integrator", "substep")) {
    substep = detail::parse_num(doc, *l);
    if (!(substep > 0)) ScnDoc::fail(path, l->number, "[integrator].substep must be > 0");
  } else {
    notes.push_back("substep defaulted to 1e-3*T");
  }

  GridDensity<1> m0 = density_spec.realize(grid);
  if (density_spec.kind == DensitySpec::Kind::Table)
    grid = GridSpec{m0.origin()[0], m0.spacing()[0], m0.extents()[0]};
  bool normalized = false;
  double normalization_factor = 1;
  if (cost.terminal.kind == TerminalCost::Kind::SquaredMeanDistance) {
    const double total = mass(m0);
    if (!(total > 0)) throw ConfigError(path + ": density has zero mass");
    normalized = true;  // keep renormalizing on re-realization
    if (std::abs(total - 1.0) > 1e-12) {
      normalization_factor = 1.0 / total;
      std::vector<double> vals = m0.values();
      for (auto& v : vals) v *= normalization_factor;
      m0 = GridDensity<1>(m0.origin(), m0.spacing(), m0.extents(), std::move(vals));
      notes.push_back("density normalized to unit mass (factor " +
                      detail::full_precision(normalization_factor) + ")");
    }
  }

  LoadedScenario out{.scenario = Scenario{.horizon = T,
                                          .steps = steps,
                                          .x0 = x0,
                                          .m0 = std::move(m0),
                                          .dynamics = dyn,
                                          .cost = cost,
                                          .controls = ControlSetA<1>::make(c, std::move(controls)),
                                          .mass_fields = std::move(dictB),
                                          .integrator = {substep},
                                          .admissibility_bound = M,
                                          .ramp_slope_bound = c1},
                     .density_spec = density_spec,
                     .grid_spec = grid,
                     .normalized = normalized,
                     .normalization_factor = normalization_factor,
                     .notes = std::move(notes),
                     .dictB_verdicts = {},
                     .digest = detail::fnv1a_digest(text),
                     .path = path};

  for (std::size_t i = 0; i < out.scenario.mass_fields.size(); ++i)
    out.dictB_verdicts.push_back(check_admissible(out.scenario.mass_fields[i], M));

  validate_scenario(out.scenario);
  return out;
}

inline LoadedScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario_text(buf.str(), path);
}

}  // namespace masschase
