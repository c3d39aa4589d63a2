// hypctrl: command-line front end. Flags mirror the configuration keys in kebab case;
// a --config file (TOML, or a JSON run summary) supplies defaults that flags override.

#include "hypctrl/reports.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <sstream>

using nlohmann::json;

namespace {

enum class Kind { Int, UInt, Real, Text, Reals, Flag };

struct Key {
  const char* name;
  Kind kind;
  const char* help;
};

const Key kKeys[] = {
    {"system", Kind::Text, "built-in system name"},
    {"region_lo", Kind::Reals, "lower region corner, comma separated"},
    {"region_hi", Kind::Reals, "upper region corner, comma separated"},
    {"resolution", Kind::Int, "grid cells per axis (power of two)"},
    {"fiber_resolution", Kind::Int, "resolution of invariant-set rasters used as fibers"},
    {"samples_per_cell", Kind::Int, "Ulam samples per cell"},
    {"tau_min", Kind::Int, "smallest horizon of a pressure series"},
    {"tau_max", Kind::Int, "largest horizon of a pressure series"},
    {"sep_eps", Kind::Real, "separation radius of separated sets"},
    {"sep_orbits", Kind::Int, "orbit windows sampled for separated sets"},
    {"half_window", Kind::Int, "half length of sampled orbit windows"},
    {"samples", Kind::UInt, "Monte-Carlo samples"},
    {"seed", Kind::UInt, "global seed"},
    {"stab_eps", Kind::Real, "stabilization radius"},
    {"delta", Kind::Real, "initial error radius of rate-sweep trials"},
    {"horizon", Kind::Int, "closed-loop horizon"},
    {"trials", Kind::Int, "trials per rate"},
    {"rates", Kind::Reals, "data rates in bits/step, comma separated, increasing"},
    {"orbit_seed", Kind::Reals, "Newton seed of the periodic orbit"},
    {"period", Kind::Int, "period of the periodic orbit"},
    {"boundary", Kind::Text, "shadow boundary: anchored or periodic"},
    {"input", Kind::Text, "pseudo-orbit CSV (t, x..., [u...])"},
    {"output_dir", Kind::Text, "artifact directory"},
    {"controlled", Kind::Flag, "invariant-set: take the union over the control range"},
    {"nats", Kind::Flag, "report pressures in nats as well"},
};

std::string kebab(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

double to_real(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw hypctrl::ConfigError(key + ": '" + text + "' is not a number");
}

json to_value(const Key& k, const std::string& text) {
  const std::string key = k.name;
  switch (k.kind) {
    case Kind::Int:
    case Kind::UInt: {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used == text.size() && (k.kind == Kind::Int || v >= 0)) return v;
      } catch (const std::exception&) {
      }
      throw hypctrl::ConfigError(key + ": '" + text + "' is not an integer");
    }
    case Kind::Real:
      return to_real(key, text);
    case Kind::Reals: {
      json arr = json::array();
      std::stringstream ss(text);
      std::string tok;
      while (std::getline(ss, tok, ',')) arr.push_back(to_real(key, tok));
      return arr;
    }
    default:
      return text;
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Set-oriented and orbit-based computations for controlled hyperbolic sets", "hypctrl"};
  std::string command, config_path;
  std::vector<std::string> params;
  std::vector<double> region;
  std::optional<double> eps;
  std::map<std::string, std::string> text;
  std::map<std::string, bool> flags;

  std::string names;
  for (const auto& n : hypctrl::command_names()) names += (names.empty() ? "" : ", ") + n;
  app.add_option("command", command, "one of: " + names);
  app.add_option("--config", config_path, "TOML config or JSON run summary");
  app.add_option("--param", params, "system parameter override key=value (repeatable)");
  app.add_option("--eps", eps, "control radius (same as --param eps=...)");
  app.add_option("--region", region, "lo_0 .. lo_{d-1} hi_0 .. hi_{d-1}")->delimiter(',');
  for (const auto& k : kKeys) {
    if (k.kind == Kind::Flag) {
      flags[k.name] = false;
      app.add_flag("--" + kebab(k.name), flags[k.name], k.help);
    } else {
      app.add_option("--" + kebab(k.name), text[k.name], k.help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  json cfg = config_path.empty() ? json::object() : hypctrl::load_config_file(config_path);
  if (!command.empty()) cfg["command"] = command;
  for (const auto& k : kKeys) {
    if (k.kind == Kind::Flag) {
      if (app.count("--" + kebab(k.name))) cfg[k.name] = flags[k.name];
    } else if (app.count("--" + kebab(k.name))) {
      cfg[k.name] = to_value(k, text[k.name]);
    }
  }
  if (!region.empty()) {
    if (region.size() % 2) throw hypctrl::ConfigError("region: expected 2d numbers (lower corner, upper corner)");
    const auto half = static_cast<std::ptrdiff_t>(region.size() / 2);
    cfg["region_lo"] = std::vector<double>(region.begin(), region.begin() + half);
    cfg["region_hi"] = std::vector<double>(region.begin() + half, region.end());
  }
  if (!cfg.contains("params")) cfg["params"] = json::object();
  if (eps) cfg["params"]["eps"] = *eps;
  for (const auto& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw hypctrl::ConfigError("params: expected key=value, got '" + p + "'");
    const std::string key = p.substr(0, eq);
    cfg["params"][key] = to_real("params." + key, p.substr(eq + 1));
  }

  const auto config = hypctrl::config_from_json(cfg);
  const json summary = hypctrl::run(config, std::cerr);
  std::cout << summary["results"].dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hypctrl::exit_status(e);
  }
}
