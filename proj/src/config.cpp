#include "wgflow/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace wgf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      throw ConfigError("bad number '" + item + "' for key '" + key + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty list for key '" + key + "'");
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (double v : parse_double_list(s, key)) out.push_back(static_cast<int>(v));
  return out;
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    return std::stod(trim(s));
  } catch (...) {
    throw ConfigError("bad number '" + s + "' for key '" + key + "'");
  }
}

int parse_int(const std::string& s, const std::string& key) {
  try {
    return std::stoi(trim(s));
  } catch (...) {
    throw ConfigError("bad integer '" + s + "' for key '" + key + "'");
  }
}

bool parse_bool(const std::string& s, const std::string& key) {
  const std::string v = trim(s);
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("bad boolean '" + s + "' for key '" + key + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, double>)
      out += fmt(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  ExperimentConfig cfg;
  std::map<std::string, std::set<std::string>> schema = {
      {"testcase", {"name"}},
      {"potential", {"type", "stiffness", "center", "a", "b"}},
      {"grid", {"dim", "lo", "hi", "cells", "lo_y", "hi_y", "cells_y"}},
      {"endpoints", {"rho0", "rho1"}},
      {"sweep", {"tau", "k_per_segment"}},
      {"solvers", {"sinkhorn_eps", "dt_max", "jko_t", "jko_n"}},
      {"particles", {"sizes", "seeds", "t", "dt"}},
      {"tolerances", {"duality_rel", "entropic_rel", "static_dynamic_rel"}},
      {"run", {"seed", "reproducible", "out"}},
  };

  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("bad section header at line " +
                                                std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      if (!schema.count(section))
        throw ConfigError("unknown section '[" + section + "]'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' outside any section");
    if (!schema[section].count(key))
      throw ConfigError("unknown key '" + key + "' in section [" + section + "]");

    if (section == "testcase") {
      cfg.name = value;
    } else if (section == "potential") {
      if (key == "type") {
        if (value != "quadratic" && value != "double_well")
          throw ConfigError("unknown potential type '" + value + "'");
        cfg.potential_type = value;
      } else if (key == "stiffness")
        cfg.stiffness = parse_double(value, key);
      else if (key == "center")
        cfg.center = parse_double(value, key);
      else if (key == "a")
        cfg.well_a = parse_double(value, key);
      else if (key == "b")
        cfg.well_b = parse_double(value, key);
    } else if (section == "grid") {
      if (key == "dim") cfg.dim = parse_int(value, key);
      else if (key == "lo") cfg.lo = parse_double(value, key);
      else if (key == "hi") cfg.hi = parse_double(value, key);
      else if (key == "cells") cfg.cells = parse_int(value, key);
      else if (key == "lo_y") cfg.lo_y = parse_double(value, key);
      else if (key == "hi_y") cfg.hi_y = parse_double(value, key);
      else if (key == "cells_y") cfg.cells_y = parse_int(value, key);
    } else if (section == "endpoints") {
      if (key == "rho0") cfg.rho0 = value;
      else cfg.rho1 = value;
    } else if (section == "sweep") {
      if (key == "tau") cfg.taus = parse_double_list(value, key);
      else cfg.k_per_segment = parse_int(value, key);
    } else if (section == "solvers") {
      if (key == "sinkhorn_eps") cfg.sinkhorn_eps = parse_double(value, key);
      else if (key == "dt_max") cfg.dt_max = parse_double(value, key);
      else if (key == "jko_t") cfg.jko_t = parse_double(value, key);
      else if (key == "jko_n") cfg.jko_n = parse_int_list(value, key);
    } else if (section == "particles") {
      if (key == "sizes") cfg.particle_sizes = parse_int_list(value, key);
      else if (key == "seeds") cfg.particle_seeds = parse_int(value, key);
      else if (key == "t") cfg.particle_t = parse_double(value, key);
      else if (key == "dt") cfg.particle_dt = parse_double(value, key);
    } else if (section == "tolerances") {
      if (key == "duality_rel") cfg.duality_rel = parse_double(value, key);
      else if (key == "entropic_rel") cfg.entropic_rel = parse_double(value, key);
      else if (key == "static_dynamic_rel") cfg.static_dynamic_rel = parse_double(value, key);
    } else if (section == "run") {
      if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(trim(value)));
      else if (key == "reproducible") cfg.reproducible = parse_bool(value, key);
      else cfg.out = value;
    }
  }

  if (cfg.dim != 1 && cfg.dim != 2) throw ConfigError("grid dim must be 1 or 2");
  if (cfg.cells < 2) throw ConfigError("grid cells must be >= 2");
  if (cfg.dim == 2 && cfg.cells_y == 0) cfg.cells_y = cfg.cells;
  return cfg;
}

std::string ExperimentConfig::echo() const {
  std::ostringstream os;
  os << "[testcase]\nname = " << name << "\n\n";
  os << "[potential]\ntype = " << potential_type << "\nstiffness = " << fmt(stiffness)
     << "\ncenter = " << fmt(center) << "\na = " << fmt(well_a) << "\nb = " << fmt(well_b)
     << "\n\n";
  os << "[grid]\ndim = " << dim << "\nlo = " << fmt(lo) << "\nhi = " << fmt(hi)
     << "\ncells = " << cells << "\nlo_y = " << fmt(lo_y) << "\nhi_y = " << fmt(hi_y)
     << "\ncells_y = " << cells_y << "\n\n";
  os << "[endpoints]\nrho0 = " << rho0 << "\nrho1 = " << rho1 << "\n\n";
  os << "[sweep]\ntau = " << fmt_list(taus) << "\nk_per_segment = " << k_per_segment
     << "\n\n";
  os << "[solvers]\nsinkhorn_eps = " << fmt(sinkhorn_eps) << "\ndt_max = " << fmt(dt_max)
     << "\njko_t = " << fmt(jko_t) << "\njko_n = " << fmt_list(jko_n) << "\n\n";
  os << "[particles]\nsizes = " << fmt_list(particle_sizes)
     << "\nseeds = " << particle_seeds << "\nt = " << fmt(particle_t)
     << "\ndt = " << fmt(particle_dt) << "\n\n";
  os << "[tolerances]\nduality_rel = " << fmt(duality_rel)
     << "\nentropic_rel = " << fmt(entropic_rel)
     << "\nstatic_dynamic_rel = " << fmt(static_dynamic_rel) << "\n\n";
  os << "[run]\nseed = " << seed << "\nreproducible = " << (reproducible ? "true" : "false")
     << "\nout = " << out << "\n";
  return os.str();
}

GridPtr ExperimentConfig::make_grid() const {
  if (dim == 1) return Grid::make_1d(lo, hi, cells);
  return Grid::make_2d(lo, hi, cells, lo_y, hi_y, cells_y);
}

AnalyticPotential ExperimentConfig::make_potential() const {
  if (potential_type == "quadratic") return AnalyticPotential::quadratic(stiffness, center);
  return AnalyticPotential::double_well(well_a, well_b);
}

GridDensity ExperimentConfig::make_density(const std::string& spec,
                                           const GridPtr& grid) const {
  if (spec.rfind("gaussian:", 0) == 0) {
    const auto params = parse_double_list(spec.substr(9), "endpoint gaussian");
    if (params.size() == 2) return gaussian_density(grid, params[0], params[1]);
    if (params.size() == 4)
      return gaussian_density(grid, params[0], params[1], params[2], params[3]);
    throw ConfigError("gaussian endpoint needs 2 or 4 parameters: " + spec);
  }
  if (spec == "gibbs") {
    return make_potential().sample(grid).gibbs_density();
  }
  if (spec.rfind("file:", 0) == 0) {
    const std::string path = spec.substr(5);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open density file '" + path + "'");
    Vector masses = Vector::Zero(grid->cells());
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(ss, field, ',')) fields.push_back(field);
      if (fields.size() < 2) throw ConfigError("bad density row: " + line);
      const int idx = parse_int(fields[0], "density cell index");
      if (idx < 0 || idx >= grid->cells())
        throw ConfigError("density cell index out of range: " + fields[0]);
      masses[idx] = parse_double(fields.back(), "density mass");
    }
    return GridDensity::normalized(grid, masses);
  }
  throw ConfigError("unknown endpoint spec '" + spec + "'");
}

}  // namespace wgf
