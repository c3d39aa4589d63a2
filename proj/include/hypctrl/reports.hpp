#pragma once

#include "hypctrl/pressure.hpp"
#include "hypctrl/ratelimited.hpp"
#include "hypctrl/setops.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypctrl {

/// A file could not be written (exit status 2).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary PGM (P5), one pixel per cell, occupied cells 0 on 255; row 0 is the top (largest
/// second coordinate). 1-D grids give a single row.
std::string pgm_raster(const GridSet& grid);
/// One rect per occupied cell; the region maps affinely onto a size x size viewport.
std::string svg_raster(const GridSet& grid, int size = 800);

void render_raster(const GridSet& grid, const std::string& path);

/// value (bits), value_nats, method, base, series, stderr and diagnostics.
nlohmann::json to_json(const PressureEstimate& p);
/// "tau,<column>" followed by one row per series entry.
std::string series_csv(const PressureEstimate& p, const std::string& column);
std::string sweep_csv(const SweepResult& s);

void write_file(const std::string& path, const std::string& content);

/// Effective configuration of one CLI run. Keys mirror the TOML/JSON names; CLI flags use
/// the same names in kebab case.
struct RunConfig {
  std::string command;
  std::string system = "henon_planar";
  std::map<std::string, double> params;
  /// Empty: the system's default region.
  std::vector<double> region_lo, region_hi;
  int resolution = 1024;
  int fiber_resolution = 1024;
  int samples_per_cell = 100;
  /// 0: command default.
  int tau_min = 0;
  int tau_max = 0;
  double sep_eps = 0.5;
  int sep_orbits = 3000;
  int half_window = 50;
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 1;
  double stab_eps = 0.1;
  double delta = 1e-3;
  int horizon = 10000;
  int trials = 50;
  /// Empty: command default.
  std::vector<double> rates;
  std::vector<double> orbit_seed;
  int period = 1;
  /// shadow: "anchored" or "periodic".
  std::string boundary = "anchored";
  bool controlled = false;
  std::string input;
  std::string output_dir = "hypctrl_out";
  bool nats = false;
};

std::vector<std::string> command_names();

/// Throws ConfigError naming the first unknown key or ill-typed / out-of-range value.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
/// TOML text to the same JSON object config_from_json accepts.
nlohmann::json toml_to_json(const std::string& text);
/// .json files may be a run summary (its "config" member is used) or a plain config object.
nlohmann::json load_config_file(const std::string& path);

/// Runs the configured command, writes its artifacts and returns the JSON summary.
/// Errors propagate as exceptions; see exit_status.
nlohmann::json run(const RunConfig& config, std::ostream& log);

/// 0 on success, 2 for domain and I/O errors, 3 for configuration errors.
int exit_status(const std::exception& e);

}  // namespace hypctrl
