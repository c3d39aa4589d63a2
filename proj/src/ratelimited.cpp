#include "hypctrl/ratelimited.hpp"

#include "hypctrl/pressure.hpp"
#include "hypctrl/setops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace hypctrl {

std::vector<int> bit_schedule(double rate_bits, int base_period) {
  if (!(rate_bits > 0) || !std::isfinite(rate_bits)) throw PreconditionError("rate_bits must be positive");
  if (base_period < 1) throw PreconditionError("base period must be positive");
  if (rate_bits > 30) throw PreconditionError("rate_bits too large");
  int period = base_period;
  for (int k = 1; k <= 1000; ++k) {
    const double total = rate_bits * base_period * k;
    period = base_period * k;
    if (std::abs(total - std::round(total)) < 1e-9) break;
  }
  const double exact = rate_bits * period;
  const auto total = static_cast<long long>(std::abs(exact - std::round(exact)) < 1e-9 ? std::round(exact) : std::floor(exact));
  // Cumulative rounding: step t gets floor((t+1) B / P) - floor(t B / P).
  std::vector<int> bits(static_cast<std::size_t>(period));
  for (int t = 0; t < period; ++t)
    bits[static_cast<std::size_t>(t)] = static_cast<int>((t + 1) * total / period - t * total / period);
  return bits;
}

Channel::Channel(std::vector<int> schedule) : bits(std::move(schedule)) {
  if (bits.empty()) throw PreconditionError("empty alphabet schedule");
  for (int b : bits)
    if (b < 0 || b > 31) throw PreconditionError("alphabet bits must lie in [0, 31]");
}

double Channel::average_rate() const {
  double s = 0.0;
  for (int b : bits) s += b;
  return s / period();
}

double Channel::achieved_rate() const {
  if (log.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t < log.size(); ++t) s += bits_at(static_cast<int>(t));
  return s / static_cast<double>(log.size());
}

void Channel::transmit(std::uint32_t symbol) {
  if (symbol >= alphabet(static_cast<int>(log.size())))
    throw PreconditionError("symbol does not fit the alphabet");
  log.push_back(symbol);
}

Eigen::VectorXd CoderController::unstable_coords(int t, const Vec& error) const {
  return coord[static_cast<std::size_t>(t % tau)] * Eigen::VectorXd(error);
}

CoderController design_controller(const ControlSystem& sys, const OrbitSegment& orbit, double rate_bits, double eps,
                                  const DesignOptions& opts) {
  if (!(rate_bits > 0)) throw PreconditionError("rate_bits must be positive");
  if (!(eps > 0)) throw PreconditionError("eps must be positive");
  const int tau = orbit.size();
  const int d = sys.state_dim;
  const double r0 = data_rate_R0(sys, orbit);  // also checks periodicity and hyperbolicity

  std::vector<Vec> window;
  for (int k = 0; k < std::max(tau, d); ++k) window.push_back(orbit.controls.at(orbit.start_time + k % tau));
  if (regularity_rank(sys, orbit.states.front(), window) < d) throw DomainError("linearization not controllable");

  CoderController cc;
  cc.tau = tau;
  cc.rate_bits = rate_bits;
  cc.eps = eps;
  cc.margin = opts.margin;
  for (int t = 0; t < tau; ++t) {
    cc.points.push_back(orbit.states[static_cast<std::size_t>(t)]);
    cc.nominal.push_back(orbit.controls.at(orbit.start_time + t));
  }
  std::vector<ChainStep> chain;
  for (int t = 0; t < tau; ++t) chain.push_back({cc.points[t], cc.nominal[t], 0.0});
  const Splitting split = periodic_chain_splitting(sys, chain, opts.settle);
  cc.d_plus = split.d_plus;
  const int dp = cc.d_plus;

  for (int t = 0; t <= tau; ++t) {
    Mat basis(d, d);
    basis << split.unstable_at(t), split.stable_at(t);
    const Eigen::MatrixXd inv = Eigen::MatrixXd(basis).inverse();
    if (t < tau) cc.unstable.push_back(split.unstable_at(t));
    cc.coord.push_back(inv.topRows(dp));
  }
  for (int t = 0; t < tau; ++t) {
    const Eigen::MatrixXd a = sys.jac_state(cc.points[t], cc.nominal[t]);
    const Eigen::MatrixXd b = sys.jac_control(cc.points[t], cc.nominal[t]);
    cc.m.push_back(cc.coord[static_cast<std::size_t>(t + 1)] * a * Eigen::MatrixXd(cc.unstable[t]));
    cc.n.push_back(cc.coord[static_cast<std::size_t>(t + 1)] * b);
  }
  cc.coord.pop_back();  // frame at tau duplicates phase 0

  // Shortest horizon h whose unstable reachability matrix has full row rank; the gain is
  // the first block of the minimum-norm sequence that zeroes the unstable coordinates.
  const int mdim = sys.control_dim;
  for (int t = 0; t < tau; ++t) {
    Eigen::MatrixXd g;
    for (int h = 1; h <= 2 * tau + d && g.size() == 0; ++h) {
      Eigen::MatrixXd reach(dp, h * mdim);
      Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(dp, dp);
      for (int s = h - 1; s >= 0; --s) {
        const auto k = static_cast<std::size_t>((t + s) % tau);
        reach.middleCols(s * mdim, mdim) = phi * cc.n[k];
        phi = phi * cc.m[k];
      }
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(reach);
      cod.setThreshold(1e-10);
      if (cod.rank() == dp) g = -(cod.pseudoInverse() * phi).topRows(mdim);
    }
    if (dp > 0 && g.size() == 0) throw DomainError("linearization not controllable");
    if (dp == 0) g = Eigen::MatrixXd::Zero(mdim, 0);
    cc.gain.push_back(g);
  }

  cc.schedule = bit_schedule(rate_bits, tau);
  cc.zoom = std::exp2(r0 - rate_bits);
  cc.contracting = cc.zoom * (1 + cc.margin) < 1;
  return cc;
}

Decoder::Decoder(const ControlSystem& sys, const CoderController& cc, double delta) : sys_(&sys), cc_(&cc) {
  if (!(delta >= 0)) throw PreconditionError("delta must be nonnegative");
  center_ = Eigen::VectorXd::Zero(cc.d_plus);
  half_.resize(cc.d_plus);
  for (int k = 0; k < cc.d_plus; ++k)
    half_(k) = cc.coord.front().row(k).norm() * delta * (1 + cc.margin) + cc.floor;
}

int Decoder::coord_bits(int k, int bits) const {
  const int dp = cc_->d_plus;
  return bits / dp + (k < bits % dp ? 1 : 0);
}

std::uint32_t Decoder::encode(const Eigen::VectorXd& a, int bits) const {
  std::uint32_t symbol = 0;
  std::uint32_t radix = 1;
  for (int k = 0; k < cc_->d_plus; ++k) {
    const int bk = coord_bits(k, bits);
    const std::int64_t cells = std::int64_t{1} << bk;
    const double pos = (a(k) - (center_(k) - half_(k))) / (2 * half_(k)) * static_cast<double>(cells);
    // Out-of-box values saturate at the edge cells.
    const std::int64_t idx = std::isfinite(pos) ? std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(std::clamp(pos, -1.0, static_cast<double>(cells)))), 0, cells - 1) : 0;
    symbol += static_cast<std::uint32_t>(idx) * radix;
    radix <<= bk;
  }
  return symbol;
}

Vec Decoder::step(std::uint32_t symbol, int bits, bool* saturated) {
  const CoderController& cc = *cc_;
  const auto ph = static_cast<std::size_t>(t_ % cc.tau);
  Eigen::VectorXd est(cc.d_plus), post(cc.d_plus);
  for (int k = 0; k < cc.d_plus; ++k) {
    const int bk = coord_bits(k, bits);
    const std::uint32_t cells = 1u << bk;
    const std::uint32_t idx = symbol % cells;
    symbol /= cells;
    const double width = 2 * half_(k) / cells;
    est(k) = center_(k) - half_(k) + (idx + 0.5) * width;
    post(k) = width / 2;
  }
  const Vec& u0 = cc.nominal[ph];
  const Vec want = u0 + Vec(cc.gain[ph] * est);
  Vec u = sys_->control_range.clamp(want);
  const Vec dev = u - u0;
  if (dev.norm() > cc.eps) u = u0 + dev * (cc.eps / dev.norm());
  if (saturated) *saturated = (u - want).norm() > 1e-15 * (1 + want.norm());

  const Eigen::VectorXd v = u - u0;
  center_ = cc.m[ph] * est + cc.n[ph] * v;
  half_ = cc.m[ph].cwiseAbs() * post * (1 + cc.margin);
  half_.array() += cc.floor;
  ++t_;
  return u;
}

namespace {

double orbit_distance(const CoderController& cc, const Vec& x) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : cc.points) best = std::min(best, (x - p).norm());
  return std::isfinite(best) ? best : std::numeric_limits<double>::infinity();
}

}  // namespace

RateLimitedRun simulate_run(const ControlSystem& sys, const CoderController& cc, Channel channel, const Vec& x0,
                            int horizon, double eps, double delta) {
  if (horizon < 0) throw PreconditionError("horizon must be nonnegative");
  if (!((x0 - cc.points.front()).norm() <= delta * (1 + 1e-12)))
    throw PreconditionError("x0 must lie within delta of the orbit point");
  RateLimitedRun run;
  run.trajectory.start_time = 0;
  run.trajectory.states.push_back(x0);
  Decoder dec(sys, cc, delta);
  Vec x = x0;
  for (int t = 0;; ++t) {
    const double dist = x.allFinite() ? orbit_distance(cc, x) : std::numeric_limits<double>::infinity();
    run.sup_dist = std::max(run.sup_dist, dist);
    if (dist > 10 * eps) {
      run.escaped = true;
      break;
    }
    if (t == horizon) break;
    const int ph = t % cc.tau;
    const Eigen::VectorXd a = cc.unstable_coords(ph, x - cc.points[static_cast<std::size_t>(ph)]);
    const int bits = channel.bits_at(t);
    const std::uint32_t sym = dec.encode(a, bits);
    channel.transmit(sym);
    bool sat = false;
    const Vec u = dec.step(sym, bits, &sat);
    run.saturated_steps += sat;
    run.sup_ctrl_dev = std::max(run.sup_ctrl_dev, (u - cc.nominal[static_cast<std::size_t>(ph)]).norm());
    run.controls.push_back(u);
    x = sys.forward(x, u);
    run.trajectory.states.push_back(x);
  }
  std::vector<Vec> ctrl = run.controls;
  if (ctrl.empty()) ctrl.push_back(cc.nominal.front());
  run.trajectory.controls = ControlSequence(ctrl, 0, ControlSequence::Extension::ConstantHold);
  run.channel = std::move(channel);
  run.success = !run.escaped && run.sup_dist <= eps && run.sup_ctrl_dev <= eps;
  return run;
}

std::vector<Vec> replay_controls(const ControlSystem& sys, const CoderController& cc, const Channel& channel,
                                 double delta) {
  Decoder dec(sys, cc, delta);
  std::vector<Vec> out;
  for (std::size_t t = 0; t < channel.log.size(); ++t) out.push_back(dec.step(channel.log[t], channel.bits_at(static_cast<int>(t))));
  return out;
}

bool recompute_success(const RateLimitedRun& run, const CoderController& cc, double eps) {
  double sup_dist = 0.0, sup_dev = 0.0;
  for (const auto& x : run.trajectory.states)
    sup_dist = std::max(sup_dist, x.allFinite() ? orbit_distance(cc, x) : std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < run.controls.size(); ++t)
    sup_dev = std::max(sup_dev, (run.controls[t] - cc.nominal[t % static_cast<std::size_t>(cc.tau)]).norm());
  return sup_dist <= eps && sup_dev <= eps;
}

SweepResult rate_sweep(const ControlSystem& sys, const OrbitSegment& orbit, const std::vector<double>& rates,
                       int trials_per_rate, double eps, double delta, int horizon, std::uint64_t seed) {
  if (rates.empty()) throw PreconditionError("no rates");
  if (!std::is_sorted(rates.begin(), rates.end())) throw PreconditionError("rates must be sorted ascending");
  if (trials_per_rate < 1) throw PreconditionError("trials_per_rate must be positive");
  SweepResult res;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  res.below = nan;
  res.above = nan;
  const int d = sys.state_dim;
  for (std::size_t ri = 0; ri < rates.size(); ++ri) {
    const CoderController cc = design_controller(sys, orbit, rates[ri], eps);
    std::vector<std::uint8_t> ok(static_cast<std::size_t>(trials_per_rate), 0);
    std::vector<double> sup(static_cast<std::size_t>(trials_per_rate), 0.0);
    parallel_for(static_cast<std::size_t>(trials_per_rate), [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        std::mt19937_64 rng(substream_seed(seed, "rate_sweep", ri * static_cast<std::size_t>(trials_per_rate) + k));
        std::normal_distribution<double> n01;
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Vec dir(d);
        for (int i = 0; i < d; ++i) dir(i) = n01(rng);
        const double r = delta * std::pow(unit(rng), 1.0 / d);
        const Vec x0 = cc.points.front() + r * dir / dir.norm();
        const auto run = simulate_run(sys, cc, Channel(cc.schedule), x0, horizon, eps, delta);
        ok[k] = run.success;
        sup[k] = run.sup_dist;
      }
    });
    SweepPoint p;
    p.rate = rates[ri];
    p.zoom = cc.zoom;
    for (std::size_t k = 0; k < ok.size(); ++k) {
      p.success_fraction += ok[k];
      p.mean_sup_dist += sup[k];
    }
    p.success_fraction /= trials_per_rate;
    p.mean_sup_dist /= trials_per_rate;
    res.points.push_back(p);
  }
  for (const auto& p : res.points)
    if (p.success_fraction < 0.5) res.below = p.rate;
  for (auto it = res.points.rbegin(); it != res.points.rend(); ++it)
    if (it->success_fraction > 0.5) res.above = it->rate;
  return res;
}

void write_symbol_log(const std::string& path, const Channel& channel) {
  for (int b : channel.bits)
    if (b > 8) throw PreconditionError("symbol log needs alphabets of at most 256 symbols");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write " + path);
  for (auto s : channel.log) out.put(static_cast<char>(static_cast<unsigned char>(s)));
  if (!out) throw DomainError("cannot write " + path);
}

}  // namespace hypctrl
