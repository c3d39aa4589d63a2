#pragma once

#include "hypctrl/system.hpp"

#include <optional>
#include <vector>

namespace hypctrl {

/// Stable/unstable frames along an orbit window [t_begin; t_begin + size).
/// Frames are orthonormal column sets; unstable(t) is d x d_plus, stable(t) is d x d_minus.
struct Splitting {
  int t_begin = 0;
  int d_plus = 0;
  int d_minus = 0;
  std::vector<Mat> unstable;
  std::vector<Mat> stable;
  /// Per-step average log2 growth rates seen while settling, sorted descending.
  std::vector<double> growth_rates;

  int size() const { return static_cast<int>(unstable.size()); }
  int t_end() const { return t_begin + size() - 1; }
  bool covers(int t) const { return t >= t_begin && t <= t_end(); }
  const Mat& unstable_at(int t) const;
  const Mat& stable_at(int t) const;
};

struct HyperbolicityReport {
  double c = 1.0;
  double lambda = 0.0;
  int worst_t = 0;
  int d_plus = 0;
  int d_minus = 0;
  /// max over t of || (I - P+_{t+1}) Df E+_t || and the stable analogue.
  double unstable_invariance_residual = 0.0;
  double stable_invariance_residual = 0.0;
};

struct SplittingOptions {
  int settle = 30;
  /// Successive per-step growth factors closer than this ratio count as degenerate.
  double min_separation = 1.01;
  std::uint64_t seed = 0x5eed;
};

/// Splitting by forward (unstable) and backward (stable) QR power iteration.
/// The orbit must extend `settle` steps beyond both ends of the returned window.
Splitting estimate_splitting(const ControlSystem& sys, const OrbitSegment& orbit,
                             const SplittingOptions& opts = {});

/// log2 |det( E+_{t0+t}^T Dphi_t(x_{t0}) E+_{t0} )| accumulated one step at a time.
double unstable_log_det(const ControlSystem& sys, const OrbitSegment& orbit, const Splitting& split,
                        int t0, int t);

/// One-step values log2 J+ f(x_t) for t in [t0; t0 + count).
std::vector<double> unstable_log_det_steps(const ControlSystem& sys, const OrbitSegment& orbit,
                                           const Splitting& split, int t0, int count);

struct HyperbolicityOptions {
  int horizon = 10;
  double lambda_grid = 1e-3;
  /// Norm ||v||_S = ||S v||; identity when empty.
  std::optional<Mat> metric;
};

/// Fits (c, lambda) with |Dphi_k v| <= c lambda^k |v| on E- and |Dphi_{-k} v| <= c lambda^k |v|
/// on E+ for k <= horizon. lambda is the grid ceiling of the worst tail growth rate,
/// c the smallest constant making every sampled inequality hold.
HyperbolicityReport verify_hyperbolicity(const ControlSystem& sys, const OrbitSegment& orbit,
                                         const Splitting& split, const HyperbolicityOptions& opts = {});

/// True iff |Dphi_k v| >= c^{-1} lambda^{-k} |v| for v in E+ and k <= horizon.
bool check_expansion_equivalence(const ControlSystem& sys, const OrbitSegment& orbit,
                                 const Splitting& split, const HyperbolicityReport& report,
                                 int horizon, const std::optional<Mat>& metric = std::nullopt);

/// Largest principal angle (radians) between the column spans of two frames.
double principal_angle(const Mat& a, const Mat& b);

}  // namespace hypctrl
