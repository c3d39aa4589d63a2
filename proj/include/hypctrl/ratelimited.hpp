#pragma once

#include "hypctrl/hyperbolicity.hpp"
#include "hypctrl/system.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hypctrl {

/// Per-step bit counts b_t (alphabet size 2^b_t) repeating with period bits.size(), over
/// which the total is floor(period * rate) spread by largest-remainder rounding of the
/// cumulative sums. The period is the shortest multiple of `base_period` (up to 1000x)
/// on which rate * period is an integer.
std::vector<int> bit_schedule(double rate_bits, int base_period = 1);

/// Noiseless discrete channel with a periodic alphabet schedule and a transmission log.
struct Channel {
  std::vector<int> bits;
  std::vector<std::uint32_t> log;

  explicit Channel(std::vector<int> schedule = {0});

  int period() const { return static_cast<int>(bits.size()); }
  int bits_at(int t) const { return bits[static_cast<std::size_t>(t % period())]; }
  std::uint64_t alphabet(int t) const { return std::uint64_t{1} << bits_at(t); }
  /// Schedule average (1/P) sum log2 |A_t|.
  double average_rate() const;
  /// (1/n) sum_{t < n} log2 |A_t| over the n logged transmissions.
  double achieved_rate() const;
  /// Appends a symbol; throws PreconditionError if it does not fit the alphabet at step log.size().
  void transmit(std::uint32_t symbol);
};

/// Coder-controller for local stabilization to a periodic orbit: the unstable coordinates of
/// the state error are quantized in a box that both ends propagate from the symbols alone,
/// and the control is the minimum-norm deadbeat correction of the decoded estimate.
struct CoderController {
  /// Orbit points p_t and nominal controls u0_t, t in [0; tau).
  std::vector<Vec> points;
  std::vector<Vec> nominal;
  int tau = 0;
  int d_plus = 0;
  /// Unstable frame E+_t and coordinate map P+_t (rows of [E+ E-]^{-1}), per phase.
  std::vector<Mat> unstable;
  std::vector<Eigen::MatrixXd> coord;
  /// Unstable-coordinate dynamics a_{t+1} = M_t a_t + N_t v_t.
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> n;
  /// v_t = gain_t * a_t cancels the unstable error over the shortest controllable horizon.
  std::vector<Eigen::MatrixXd> gain;
  std::vector<int> schedule;
  double rate_bits = 0.0;
  /// Stabilization radius: controls are also kept within eps of u0.
  double eps = 0.0;
  /// Relative widening of the quantizer box per step (nonlinearity margin).
  double margin = 0.05;
  /// Nominal per-step box factor (prod |unstable eigenvalues|)^(1/tau) / 2^rate.
  double zoom = 0.0;
  bool contracting = false;
  /// Smallest quantizer half-width; keeps the box above roundoff.
  double floor = 1e-12;

  /// Unstable coordinates of a state error at phase t.
  Eigen::VectorXd unstable_coords(int t, const Vec& error) const;
};

struct DesignOptions {
  double margin = 0.05;
  int settle = 30;
};

/// Throws DomainError("linearization not controllable") when the one-period control
/// sensitivity along the orbit has rank below d, PreconditionError for rate_bits <= 0.
CoderController design_controller(const ControlSystem& sys, const OrbitSegment& orbit, double rate_bits,
                                  double eps, const DesignOptions& opts = {});

/// Controller-side state: everything here is computed from transmitted symbols only.
class Decoder {
 public:
  Decoder(const ControlSystem& sys, const CoderController& cc, double delta);

  int time() const { return t_; }
  const Eigen::VectorXd& center() const { return center_; }
  const Eigen::VectorXd& half_width() const { return half_; }
  /// Decodes the symbol sent at the current step, returns the control and advances.
  Vec step(std::uint32_t symbol, int bits, bool* saturated = nullptr);
  /// Symbol the coder sends for unstable coordinates a at the current step.
  std::uint32_t encode(const Eigen::VectorXd& a, int bits) const;

 private:
  // Bits assigned to coordinate k out of b.
  int coord_bits(int k, int bits) const;

  const ControlSystem* sys_;
  const CoderController* cc_;
  int t_ = 0;
  Eigen::VectorXd center_;
  Eigen::VectorXd half_;
};

struct RateLimitedRun {
  OrbitSegment trajectory;
  std::vector<Vec> controls;
  Channel channel;
  double sup_dist = 0.0;
  double sup_ctrl_dev = 0.0;
  int saturated_steps = 0;
  /// The state left the 10 eps envelope (run stopped there).
  bool escaped = false;
  bool success = false;
};

/// Closed-loop rollout for `horizon` steps from x0 (which must lie within `delta` of the
/// orbit point p_0). Failure is reported in the result, not thrown.
RateLimitedRun simulate_run(const ControlSystem& sys, const CoderController& cc, Channel channel, const Vec& x0,
                            int horizon, double eps, double delta);

/// Controls reproduced by a fresh decoder from the channel log alone.
std::vector<Vec> replay_controls(const ControlSystem& sys, const CoderController& cc, const Channel& channel,
                                 double delta);

/// success_fraction recomputed from the stored trajectory and controls.
bool recompute_success(const RateLimitedRun& run, const CoderController& cc, double eps);

struct SweepPoint {
  double rate = 0.0;
  double success_fraction = 0.0;
  double mean_sup_dist = 0.0;
  double zoom = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  /// Largest rate with success fraction < 0.5 and smallest with > 0.5 (NaN if absent).
  double below = 0.0;
  double above = 0.0;
};

/// Trials start uniformly in the delta-ball around p_0; seeds split per (rate, trial).
SweepResult rate_sweep(const ControlSystem& sys, const OrbitSegment& orbit, const std::vector<double>& rates,
                       int trials_per_rate, double eps, double delta, int horizon, std::uint64_t seed = 1);

/// One byte per symbol; requires every alphabet size <= 256.
void write_symbol_log(const std::string& path, const Channel& channel);

}  // namespace hypctrl
