#include "hypctrl/reports.hpp"

#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace hypctrl {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void require_nonempty(const GridSet& grid) {
  if (grid.empty()) throw PreconditionError("render_raster: grid is empty");
  if (grid.dim() > 2) throw PreconditionError("render_raster: only 1-D and 2-D grids can be rasterized");
}

}  // namespace

std::string pgm_raster(const GridSet& grid) {
  require_nonempty(grid);
  const auto res = static_cast<std::size_t>(grid.resolution());
  const std::size_t rows = grid.dim() == 1 ? 1 : res;
  std::string pixels(res * rows, static_cast<char>(255));
  for (auto cell : grid.cells()) {
    const auto c = grid.coords(cell);
    const std::size_t row = grid.dim() == 1 ? 0 : res - 1 - static_cast<std::size_t>(c[1]);
    pixels[row * res + static_cast<std::size_t>(c[0])] = 0;
  }
  std::ostringstream os;
  os << "P5\n" << res << ' ' << rows << "\n255\n" << pixels;
  return os.str();
}

std::string svg_raster(const GridSet& grid, int size) {
  require_nonempty(grid);
  if (size <= 0) throw PreconditionError("svg_raster: size must be positive");
  const Box& r = grid.region();
  const double sx = size / r.extent()(0);
  const double sy = grid.dim() == 1 ? 0.0 : size / r.extent()(1);
  const int height = grid.dim() == 1 ? 1 : size;
  std::ostringstream os;
  os << std::setprecision(10);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << size << ' ' << height << "\">\n";
  os << "<rect width=\"" << size << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  for (auto cell : grid.cells()) {
    const Box b = grid.cell_box(cell);
    const double x = (b.lo(0) - r.lo(0)) * sx;
    const double w = b.extent()(0) * sx;
    double y = 0, h = 1;
    if (grid.dim() == 2) {
      // Screen y grows downward.
      y = (r.hi(1) - b.hi(1)) * sy;
      h = b.extent()(1) * sy;
    }
    os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
       << "\" fill=\"black\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void render_raster(const GridSet& grid, const std::string& path) {
  const bool svg = path.size() >= 4 && path.compare(path.size() - 4, 4, ".svg") == 0;
  write_file(path, svg ? svg_raster(grid) : pgm_raster(grid));
}

json to_json(const PressureEstimate& p) {
  json series = json::array();
  for (const auto& [tau, v] : p.series) series.push_back({tau, v});
  json j = {{"value", p.value},
            {"value_nats", p.value_nats()},
            {"base", 2},
            {"method", to_string(p.method)},
            {"stderr", p.std_error},
            {"series", series},
            {"fit_taus", p.fit_taus},
            {"truncated", p.truncated}};
  if (p.method == PressureMethod::Ulam) {
    j["resolution"] = p.resolution;
    j["eigenvalue"] = p.eigenvalue;
    j["iterations"] = p.iterations;
  }
  if (p.samples) j["samples"] = p.samples;
  return j;
}

std::string series_csv(const PressureEstimate& p, const std::string& column) {
  std::ostringstream os;
  os << "tau," << column << '\n';
  for (const auto& [tau, v] : p.series) os << tau << ',' << fmt(v) << '\n';
  return os.str();
}

std::string sweep_csv(const SweepResult& s) {
  std::ostringstream os;
  os << "rate,success_fraction,mean_sup_dist\n";
  for (const auto& pt : s.points) os << fmt(pt.rate) << ',' << fmt(pt.success_fraction) << ',' << fmt(pt.mean_sup_dist) << '\n';
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw IoError("write to '" + path + "' failed");
}

// ---- configuration ----------------------------------------------------------------------------

std::vector<std::string> command_names() {
  return {"invariant-set", "pressure-ulam", "pressure-separated", "escape-rate-mc", "shadow",
          "periodic-orbit", "rate-R0", "rate-sweep", "henon-demo"};
}

namespace {

template <class T>
T get_as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("");
      if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (v.is_number_integer() && v.get<std::int64_t>() < 0) throw ConfigError("");
      }
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected " +
                      (std::is_same_v<T, std::string> ? "a string"
                       : std::is_same_v<T, bool>      ? "a boolean"
                       : std::is_same_v<T, double>    ? "a number"
                                                      : "a nonnegative integer") +
                      ", got " + v.dump());
  }
}

std::vector<double> get_vector(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(get_as<double>(e, key));
  return out;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a table of keys");
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "command") c.command = get_as<std::string>(v, key);
    else if (key == "system") c.system = get_as<std::string>(v, key);
    else if (key == "params") {
      if (!v.is_object()) throw ConfigError("params: expected a table of numbers");
      for (const auto& [k, pv] : v.items()) c.params[k] = get_as<double>(pv, "params." + k);
    }
    else if (key == "region_lo") c.region_lo = get_vector(v, key);
    else if (key == "region_hi") c.region_hi = get_vector(v, key);
    else if (key == "resolution") c.resolution = get_as<int>(v, key);
    else if (key == "fiber_resolution") c.fiber_resolution = get_as<int>(v, key);
    else if (key == "samples_per_cell") c.samples_per_cell = get_as<int>(v, key);
    else if (key == "tau_min") c.tau_min = get_as<int>(v, key);
    else if (key == "tau_max") c.tau_max = get_as<int>(v, key);
    else if (key == "sep_eps") c.sep_eps = get_as<double>(v, key);
    else if (key == "sep_orbits") c.sep_orbits = get_as<int>(v, key);
    else if (key == "half_window") c.half_window = get_as<int>(v, key);
    else if (key == "samples") c.samples = get_as<std::uint64_t>(v, key);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    else if (key == "stab_eps") c.stab_eps = get_as<double>(v, key);
    else if (key == "delta") c.delta = get_as<double>(v, key);
    else if (key == "horizon") c.horizon = get_as<int>(v, key);
    else if (key == "trials") c.trials = get_as<int>(v, key);
    else if (key == "rates") c.rates = get_vector(v, key);
    else if (key == "orbit_seed") c.orbit_seed = get_vector(v, key);
    else if (key == "period") c.period = get_as<int>(v, key);
    else if (key == "boundary") c.boundary = get_as<std::string>(v, key);
    else if (key == "controlled") c.controlled = get_as<bool>(v, key);
    else if (key == "input") c.input = get_as<std::string>(v, key);
    else if (key == "output_dir") c.output_dir = get_as<std::string>(v, key);
    else if (key == "nats") c.nats = get_as<bool>(v, key);
    else throw ConfigError(key + ": unknown configuration key");
  }

  const auto cmds = command_names();
  require(std::find(cmds.begin(), cmds.end(), c.command) != cmds.end(), "command",
          c.command.empty() ? "missing" : "unknown command '" + c.command + "'");
  // Resolves the system name and parameter overrides now so bad values fail before any work.
  ControlSystem sys;
  try {
    sys = make_system(c.system, c.params);
  } catch (const ConfigError& e) {
    // Re-key the library's "system.<name>" messages to the config layout.
    const std::string msg = e.what();
    const auto dot = msg.find('.'), colon = msg.find(':');
    const std::string sub = msg.substr(dot + 1, colon - dot - 1);
    throw ConfigError((sub == "name" ? std::string("system") : "params." + sub) + msg.substr(colon));
  }
  const auto d = static_cast<std::size_t>(sys.state_dim);
  require(c.region_lo.size() == c.region_hi.size(), "region_lo", "region_lo and region_hi must both be given");
  if (!c.region_lo.empty()) {
    require(c.region_lo.size() == d, "region_lo", "expected " + std::to_string(d) + " coordinates");
    for (std::size_t k = 0; k < d; ++k) require(c.region_lo[k] < c.region_hi[k], "region_hi", "must exceed region_lo");
  }
  require(power_of_two(c.resolution), "resolution", "must be a positive power of two");
  require(power_of_two(c.fiber_resolution), "fiber_resolution", "must be a positive power of two");
  require(c.samples_per_cell > 0, "samples_per_cell", "must be positive");
  require(c.tau_min >= 0 && c.tau_max >= 0, "tau_min", "must be nonnegative");
  require(c.tau_min == 0 || c.tau_max == 0 || c.tau_max > c.tau_min, "tau_max", "must exceed tau_min");
  require(c.sep_eps > 0, "sep_eps", "must be positive");
  require(c.sep_orbits > 0, "sep_orbits", "must be positive");
  require(c.half_window > 0, "half_window", "must be positive");
  require(c.samples >= 100000, "samples", "must be at least 100000");
  require(c.stab_eps > 0, "stab_eps", "must be positive");
  require(c.delta > 0 && c.delta < c.stab_eps, "delta", "must lie in (0, stab_eps)");
  require(c.horizon > 0, "horizon", "must be positive");
  require(c.trials > 0, "trials", "must be positive");
  for (std::size_t i = 0; i < c.rates.size(); ++i) {
    require(c.rates[i] > 0, "rates", "must be positive");
    require(i == 0 || c.rates[i] > c.rates[i - 1], "rates", "must be strictly increasing");
  }
  require(c.orbit_seed.empty() || c.orbit_seed.size() == d, "orbit_seed",
          "expected " + std::to_string(d) + " coordinates");
  require(c.period > 0, "period", "must be positive");
  require(c.boundary == "anchored" || c.boundary == "periodic", "boundary", "must be 'anchored' or 'periodic'");
  require(!c.output_dir.empty(), "output_dir", "must not be empty");
  require(c.command != "shadow" || !c.input.empty(), "input", "the shadow command needs a pseudo-orbit CSV");
  return c;
}

json config_to_json(const RunConfig& c) {
  json params = json::object();
  for (const auto& [k, v] : c.params) params[k] = v;
  return {{"command", c.command},
          {"system", c.system},
          {"params", params},
          {"region_lo", c.region_lo},
          {"region_hi", c.region_hi},
          {"resolution", c.resolution},
          {"fiber_resolution", c.fiber_resolution},
          {"samples_per_cell", c.samples_per_cell},
          {"tau_min", c.tau_min},
          {"tau_max", c.tau_max},
          {"sep_eps", c.sep_eps},
          {"sep_orbits", c.sep_orbits},
          {"half_window", c.half_window},
          {"samples", c.samples},
          {"seed", c.seed},
          {"stab_eps", c.stab_eps},
          {"delta", c.delta},
          {"horizon", c.horizon},
          {"trials", c.trials},
          {"rates", c.rates},
          {"orbit_seed", c.orbit_seed},
          {"period", c.period},
          {"boundary", c.boundary},
          {"controlled", c.controlled},
          {"input", c.input},
          {"output_dir", c.output_dir},
          {"nats", c.nats}};
}

namespace {

json toml_node(const toml::node& n, const std::string& key) {
  if (auto t = n.as_table()) {
    json o = json::object();
    for (const auto& [k, v] : *t) {
      const std::string name(k.str());
      o[name] = toml_node(v, key.empty() ? name : key + "." + name);
    }
    return o;
  }
  if (auto a = n.as_array()) {
    json arr = json::array();
    for (const auto& v : *a) arr.push_back(toml_node(v, key));
    return arr;
  }
  if (auto v = n.as_integer()) return v->get();
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_boolean()) return v->get();
  if (auto v = n.as_string()) return v->get();
  throw ConfigError(key + ": unsupported TOML value type");
}

}  // namespace

json toml_to_json(const std::string& text) {
  try {
    return toml_node(toml::parse(text), "");
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config: TOML parse error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
}

json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const bool is_json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  if (!is_json) return toml_to_json(buf.str());
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  if (j.is_object() && j.contains("config") && j["config"].is_object()) return j["config"];
  return j;
}

int exit_status(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 3;
  return 2;
}

}  // namespace hypctrl
