#include "hypctrl/reports.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace hypctrl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool is_henon(const ControlSystem& sys) { return sys.name.rfind("henon", 0) == 0; }

Box default_region(const ControlSystem& sys) {
  const Vec zero = Vec::Zero(sys.state_dim);
  if (is_henon(sys)) return Box::centered(zero, henon_square_side(sys.parameters.at("a"), sys.parameters.at("b")));
  return Box::centered(zero, 2.0);
}

std::vector<int> tau_range(const RunConfig& c, int lo, int hi) {
  const int a = c.tau_min ? c.tau_min : lo;
  const int b = c.tau_max ? c.tau_max : std::max(hi, a + 1);
  if (b <= a) throw ConfigError("tau_max: must exceed tau_min");
  std::vector<int> out;
  for (int t = a; t <= b; ++t) out.push_back(t);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// States, controls and per-step defect |f(x_t, u_t) - x_{t+1}| (last row: 0).
std::string orbit_csv(const ControlSystem& sys, const OrbitSegment& o) {
  std::ostringstream os;
  os << 't';
  for (int k = 0; k < sys.state_dim; ++k) os << ",x" << k;
  for (int k = 0; k < sys.control_dim; ++k) os << ",u" << k;
  os << ",defect\n";
  for (int t = o.start_time; t <= o.end_time(); ++t) {
    const Vec& x = o.at(t);
    const Vec& u = o.controls.at(t);
    os << t;
    for (int k = 0; k < sys.state_dim; ++k) os << ',' << fmt(x(k));
    for (int k = 0; k < sys.control_dim; ++k) os << ',' << fmt(u(k));
    const double defect = t < o.end_time() ? (sys.step(x, u) - o.at(t + 1)).norm() : 0.0;
    os << ',' << fmt(defect) << '\n';
  }
  return os.str();
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json grid_json(const GridSet& g) {
  return {{"region_lo", vec_json(g.region().lo)},
          {"region_hi", vec_json(g.region().hi)},
          {"resolution", g.resolution()},
          {"cells", g.size()},
          {"volume", g.occupied_volume()}};
}

json report_json(const HyperbolicityReport& r) {
  return {{"c", r.c},
          {"lambda", r.lambda},
          {"dims", {r.d_plus, r.d_minus}},
          {"residuals", {r.unstable_invariance_residual, r.stable_invariance_residual}}};
}

// One command invocation: artifacts are buffered and written together at the end.
struct Job {
  const RunConfig& cfg;
  std::ostream& log;
  ControlSystem sys;
  Box region;
  json results = json::object();
  std::map<std::string, std::string> files;

  Job(const RunConfig& c, std::ostream& l) : cfg(c), log(l), sys(make_system(c.system, c.params)) {
    region = default_region(sys);
    if (!c.region_lo.empty()) {
      region.lo = Eigen::Map<const Eigen::VectorXd>(c.region_lo.data(), static_cast<Eigen::Index>(c.region_lo.size()));
      region.hi = Eigen::Map<const Eigen::VectorXd>(c.region_hi.data(), static_cast<Eigen::Index>(c.region_hi.size()));
    }
  }

  ControlSequence nominal() const { return ControlSequence::constant(sys.nominal_control); }

  json pressure(const PressureEstimate& p) const {
    json j = to_json(p);
    j["reported"] = cfg.nats ? p.value_nats() : p.value;
    j["unit"] = cfg.nats ? "nats/step" : "bits/step";
    j["entropy_lower_bound"] = invariance_entropy_lower_bound(p);
    return j;
  }

  void raster(const std::string& stem, const GridSet& g) {
    files[stem + ".pgm"] = pgm_raster(g);
    files[stem + ".svg"] = svg_raster(g);
  }

  PressureEstimate ulam() {
    log << "ulam: resolution " << cfg.resolution << '\n';
    auto p = ulam_escape_rate(sys, sys.nominal_control, region, cfg.resolution, cfg.samples_per_cell);
    log << "ulam: " << p.value << " bits/step (" << p.value_nats() << " nats/step)\n";
    return p;
  }

  GridSet lambda_set() {
    log << "invariant set: resolution " << cfg.fiber_resolution << '\n';
    auto g = maximal_invariant(sys, sys.nominal_control, region, cfg.fiber_resolution);
    if (g.empty()) throw DomainError("region does not isolate an invariant set");
    return g;
  }

  PressureEstimate separated(const GridSet& fiber) {
    SeparatedOptions o;
    o.orbit_count = static_cast<std::size_t>(cfg.sep_orbits);
    o.half_window = cfg.half_window;
    auto p = pressure_separated(sys, fiber, tau_range(cfg, 1, 8), cfg.sep_eps, o);
    log << "separated: " << p.value << " bits/step\n";
    return p;
  }

  PressureEstimate volume_decay() {
    VolumeDecayOptions o;
    o.samples = cfg.samples;
    o.seed = substream_seed(cfg.seed, "escape-rate-mc");
    auto p = volume_decay_escape_rate(sys, nominal(), region, tau_range(cfg, is_henon(sys) ? 4 : 1, is_henon(sys) ? 12 : 10), o);
    log << "volume decay: " << p.value << " +/- " << p.std_error << " bits/step\n";
    return p;
  }

  OrbitSegment periodic_orbit() const {
    Vec seed;
    if (!cfg.orbit_seed.empty()) {
      seed = Eigen::Map<const Eigen::VectorXd>(cfg.orbit_seed.data(), static_cast<Eigen::Index>(cfg.orbit_seed.size()));
    } else if (is_henon(sys)) {
      seed = henon_fixed_points(sys.parameters.at("a"), sys.parameters.at("b")).first;
      if (sys.state_dim == 1) seed = seed.head(1);
    } else {
      seed = Vec::Zero(sys.state_dim);
    }
    const std::vector<Vec> u(static_cast<std::size_t>(cfg.period), sys.nominal_control);
    return find_periodic_orbit(sys, ControlSequence::periodic(u), seed);
  }

  double r0(const OrbitSegment& orbit) {
    const double r = data_rate_R0(sys, orbit);
    results["R0"] = r;
    results["orbit"] = json::array();
    for (const auto& x : orbit.states) results["orbit"].push_back(vec_json(x));
    log << "R0: " << r << " bits/step\n";
    return r;
  }

  SweepResult sweep(const OrbitSegment& orbit, double r) {
    std::vector<double> rates = cfg.rates;
    if (rates.empty()) {
      for (int k = -5; k <= 5; ++k) {
        const double v = std::round((r + 0.1 * k) * 10) / 10;
        if (v > 0 && (rates.empty() || v > rates.back())) rates.push_back(v);
      }
    }
    log << "rate sweep: " << rates.size() << " rates x " << cfg.trials << " trials\n";
    auto s = rate_sweep(sys, orbit, rates, cfg.trials, cfg.stab_eps, cfg.delta, cfg.horizon,
                        substream_seed(cfg.seed, "rate-sweep"));
    json pts = json::array();
    for (const auto& p : s.points)
      pts.push_back({{"rate", p.rate}, {"success_fraction", p.success_fraction}, {"mean_sup_dist", p.mean_sup_dist},
                     {"zoom", p.zoom}});
    results["sweep"] = {{"points", pts},
                        {"below", std::isnan(s.below) ? json(nullptr) : json(s.below)},
                        {"above", std::isnan(s.above) ? json(nullptr) : json(s.above)}};
    files["rate_sweep.csv"] = sweep_csv(s);
    return s;
  }

  void run_shadow() {
    std::ifstream in(cfg.input);
    if (!in) throw ConfigError("input: cannot read '" + cfg.input + "'");
    std::vector<Vec> states, controls;
    int t0 = 0;
    bool first = true, with_controls = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string tok;
      bool numeric = true;
      while (std::getline(ss, tok, ',')) {
        try {
          std::size_t used = 0;
          row.push_back(std::stod(tok, &used));
        } catch (const std::exception&) {
          numeric = false;
          break;
        }
      }
      if (!numeric) {
        if (states.empty()) continue;  // header
        throw ConfigError("input: line " + std::to_string(lineno) + " is not numeric");
      }
      const auto d = static_cast<std::size_t>(sys.state_dim), m = static_cast<std::size_t>(sys.control_dim);
      if (row.size() != 1 + d && row.size() != 1 + d + m)
        throw ConfigError("input: line " + std::to_string(lineno) + " needs t, " + std::to_string(d) +
                          " state and optionally " + std::to_string(m) + " control columns");
      if (first) {
        t0 = static_cast<int>(row[0]);
        with_controls = row.size() == 1 + d + m;
        first = false;
      }
      if (static_cast<int>(row[0]) != t0 + static_cast<int>(states.size()))
        throw ConfigError("input: line " + std::to_string(lineno) + " breaks the consecutive time index");
      states.push_back(Eigen::Map<const Eigen::VectorXd>(row.data() + 1, static_cast<Eigen::Index>(d)));
      if (with_controls) {
        if (row.size() != 1 + d + m) throw ConfigError("input: line " + std::to_string(lineno) + " lacks controls");
        controls.push_back(Eigen::Map<const Eigen::VectorXd>(row.data() + 1 + d, static_cast<Eigen::Index>(m)));
      }
    }
    if (states.size() < 2) throw ConfigError("input: a pseudo-orbit needs at least two states");
    ControlSequence u = with_controls ? ControlSequence(controls, t0) : nominal();
    const Boundary b = cfg.boundary == "periodic" ? Boundary::Periodic : Boundary::Anchored;
    if (b == Boundary::Periodic && with_controls) u = ControlSequence(controls, t0, ControlSequence::Extension::Periodic);
    auto pseudo = PseudoOrbit::make(sys, std::move(states), u, t0);
    auto r = refine_to_orbit(sys, pseudo, b);
    results["alpha"] = b == Boundary::Periodic ? pseudo.periodic_alpha(sys) : pseudo.alpha;
    results["beta"] = r.beta;
    results["residual"] = r.residual;
    results["iterations"] = r.iterations;
    files["shadow_orbit.csv"] = orbit_csv(sys, r.orbit);
    log << "shadow: beta " << r.beta << ", residual " << r.residual << '\n';
  }

  void run_periodic() {
    auto orbit = periodic_orbit();
    r0(orbit);
    files["periodic_orbit.csv"] = orbit_csv(sys, orbit);
    // Repeat the cycle far enough for the splitting to settle on both sides.
    const int p = orbit.size(), half = 60 * p;
    OrbitSegment longer;
    longer.start_time = -half;
    longer.controls = orbit.controls;
    for (int t = -half; t <= half; ++t) longer.states.push_back(orbit.states[static_cast<std::size_t>(((t % p) + p) % p)]);
    auto split = estimate_splitting(sys, longer);
    results["hyperbolicity"] = report_json(verify_hyperbolicity(sys, longer, split));
  }

  void run_demo() {
    if (!is_henon(sys) || sys.state_dim != 2) throw ConfigError("system: henon-demo needs henon_planar");
    auto u = ulam();
    auto lambda = lambda_set();
    auto sep = separated(lambda);
    auto mc = volume_decay();
    results["pressure"] = {{"ulam", pressure(u)}, {"separated", pressure(sep)}, {"volume_decay", pressure(mc)}};
    files["pressure_separated.csv"] = series_csv(sep, "log2_sum");
    files["escape_rate_mc.csv"] = series_csv(mc, "log2_volume");
    raster("lambda", lambda);
    results["lambda_set"] = grid_json(lambda);

    log << "controlled invariant set: eps " << sys.parameters.at("eps") << '\n';
    auto q = controlled_invariant(sys, region, cfg.fiber_resolution);
    raster("q_eps", q);
    results["q_eps"] = grid_json(q);
    results["q_eps"]["contains_lambda"] = lambda.subset_of(q);

    auto orbit = periodic_orbit();
    sweep(orbit, r0(orbit));
  }

  void execute() {
    const std::string& c = cfg.command;
    if (c == "invariant-set") {
      auto g = cfg.controlled ? controlled_invariant(sys, region, cfg.resolution)
                              : maximal_invariant(sys, sys.nominal_control, region, cfg.resolution);
      if (g.empty()) throw DomainError("region does not isolate an invariant set");
      results["set"] = grid_json(g);
      results["set"]["controlled"] = cfg.controlled;
      raster("invariant_set", g);
    } else if (c == "pressure-ulam") {
      results["pressure"] = pressure(ulam());
    } else if (c == "pressure-separated") {
      auto p = separated(lambda_set());
      results["pressure"] = pressure(p);
      files["pressure_separated.csv"] = series_csv(p, "log2_sum");
    } else if (c == "escape-rate-mc") {
      auto p = volume_decay();
      results["pressure"] = pressure(p);
      files["escape_rate_mc.csv"] = series_csv(p, "log2_volume");
    } else if (c == "shadow") {
      run_shadow();
    } else if (c == "periodic-orbit") {
      run_periodic();
    } else if (c == "rate-R0") {
      r0(periodic_orbit());
    } else if (c == "rate-sweep") {
      auto orbit = periodic_orbit();
      sweep(orbit, r0(orbit));
    } else if (c == "henon-demo") {
      run_demo();
    }
  }
};

void prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("output_dir: cannot create '" + dir + "': " + ec.message());
  const fs::path probe = fs::path(dir) / ".hypctrl_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output_dir: '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

}  // namespace

json run(const RunConfig& config, std::ostream& log) {
  // Re-validates so that programmatic callers get the same checks as the CLI.
  const RunConfig cfg = config_from_json(config_to_json(config));
  prepare_output_dir(cfg.output_dir);

  Job job(cfg, log);
  job.execute();

  json summary = {{"command", cfg.command}, {"config", config_to_json(cfg)}, {"results", job.results}};
  json artifacts = json::array();
  for (const auto& [name, _] : job.files) artifacts.push_back(name);
  artifacts.push_back(cfg.command + ".json");
  summary["artifacts"] = artifacts;

  for (const auto& [name, content] : job.files) write_file((fs::path(cfg.output_dir) / name).string(), content);
  write_file((fs::path(cfg.output_dir) / (cfg.command + ".json")).string(), summary.dump(2) + "\n");
  return summary;
}

}  // namespace hypctrl
