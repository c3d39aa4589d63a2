#pragma once

#include "hypctrl/hyperbolicity.hpp"
#include "hypctrl/setops.hpp"
#include "hypctrl/shadowing.hpp"
#include "hypctrl/system.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace hypctrl {

enum class PressureMethod { Separated, Ulam, VolumeDecay };
std::string to_string(PressureMethod m);

/// Pressure / escape-rate estimate in bits per step.
struct PressureEstimate {
  double value = 0.0;
  double std_error = 0.0;
  PressureMethod method = PressureMethod::Ulam;
  /// (tau, log2 of the summed weight or volume); empty for the eigenvalue method.
  std::vector<std::pair<int, double>> series;
  /// Points of `series` entering the slope fit.
  std::vector<int> fit_taus;
  int resolution = 0;
  std::uint64_t samples = 0;
  /// Eigenvalue method: leading eigenvalue and iterations used.
  double eigenvalue = 0.0;
  int iterations = 0;
  /// Series cut short because the largest taus had no survivors.
  bool truncated = false;

  double value_nats() const;
};

/// OLS slope of y against x.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y);
/// OLS slope over the last half (rounded up) of the series.
double tail_slope(const std::vector<std::pair<int, double>>& series, std::vector<int>* used = nullptr);

// ---- separated sets ------------------------------------------------------------------------

struct SeparatedSet {
  int tau = 0;
  double eps = 0.0;
  std::vector<Vec> points;
  /// Candidate positions of the chosen points.
  std::vector<std::size_t> chosen;
  /// No candidate can be added.
  bool maximal = true;
};

/// Greedy (u,tau,eps)-separated subset of candidate trajectories, in candidate order:
/// trajectories[i][t] = phi(t, x_i, u) for t < tau. Strict separation: distance > eps.
std::vector<std::size_t> greedy_separated(const std::vector<std::vector<Vec>>& trajectories, double eps);

/// Greedy maximal separated subset of the candidate cell centers in index order.
SeparatedSet max_separated_set(const ControlSystem& sys, const ControlSequence& u, int tau, double eps,
                               const GridSet& candidates);

struct SeparatedOptions {
  /// Orbit windows sampled through the fiber raster.
  std::size_t orbit_count = 2000;
  int half_window = 50;
  int settle = 20;
};

/// (1/tau) log2 sum_{x in F} 1/J+phi_tau(x) over maximal separated sets F drawn from points
/// of the given true orbits. value = OLS slope of log2 sum against tau on the last half of
/// tau_list. The orbits must run under the nominal control.
PressureEstimate pressure_separated(const ControlSystem& sys, const std::vector<OrbitSegment>& orbits,
                                    const std::vector<int>& tau_list, double eps, int settle = 20);

/// As above, with orbits sampled through the fiber raster (nominal control).
PressureEstimate pressure_separated(const ControlSystem& sys, const GridSet& fiber,
                                    const std::vector<int>& tau_list, double eps,
                                    const SeparatedOptions& opts = {});

// ---- Ulam ------------------------------------------------------------------------------------

/// Sub-stochastic transfer matrix over grid cells in CSR form: entry (i, j) is the fraction of
/// cell i's samples landing in cell j. Mass leaving the region is dropped.
struct TransferMatrix {
  GridSet::Index cells = 0;
  std::vector<std::uint64_t> row_ptr;
  std::vector<std::uint32_t> cols;
  std::vector<float> vals;

  std::size_t nnz() const { return cols.size(); }
  double row_sum(GridSet::Index i) const;
};

TransferMatrix ulam_matrix(const ControlSystem& sys, const Vec& u_fixed, const Box& region, int resolution,
                           int samples_per_cell);

struct PowerOptions {
  double tolerance = 1e-10;
  int max_iterations = 100000;
};

/// Leading eigenvalue of a nonnegative matrix by left power iteration restricted to the
/// cells lying on cycles. Returns (eigenvalue, iterations).
std::pair<double, int> leading_eigenvalue(const TransferMatrix& p, const PowerOptions& opts = {});

/// log2 of the leading eigenvalue of the Ulam matrix.
PressureEstimate ulam_escape_rate(const ControlSystem& sys, const Vec& u_fixed, const Box& region,
                                  int resolution, int samples_per_cell = 100, const PowerOptions& opts = {});

// ---- volume decay ------------------------------------------------------------------------------

struct VolumeDecayOptions {
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 1;
  int bootstrap = 100;
};

/// Slope of log2 vol{x in region : phi(t,x,u) in region, t < tau} over the last half of tau_list.
PressureEstimate volume_decay_escape_rate(const ControlSystem& sys, const ControlSequence& u, const Box& region,
                                          const std::vector<int>& tau_list, const VolumeDecayOptions& opts = {});

/// Same with the survival condition dist(phi(t,x,u), fiber) <= eps (sampling box: the
/// eps-dilated bounding box of the fiber).
PressureEstimate volume_decay_escape_rate(const ControlSystem& sys, const ControlSequence& u, const GridSet& fiber,
                                          double eps, const std::vector<int>& tau_list,
                                          const VolumeDecayOptions& opts = {});

/// max(0, -pressure) bits per step.
double invariance_entropy_lower_bound(const PressureEstimate& pressure);
double invariance_entropy_lower_bound(double pressure_bits);

// ---- spanning sets -------------------------------------------------------------------------------

struct SpanningResult {
  int count = 0;
  /// Indices into the codebook.
  std::vector<std::size_t> chosen;
  int greedy_count = 0;
  int lower_bound = 0;
  bool exact = false;
};

struct SpanningOptions {
  /// Branch-and-bound node budget; beyond it the greedy count is returned with exact = false.
  std::uint64_t node_limit = 5000000;
};

/// Minimum number of codebook sequences such that every K-cell center x has one with
/// phi(t,x,u) in Q for t = 0..tau (tau transitions). Greedy cover, then branch and bound
/// with disjoint-packing lower bounds.
SpanningResult spanning_count_oracle(const ControlSystem& sys, const GridSet& K, const GridSet& Q, int tau,
                                     const std::vector<ControlSequence>& codebook, const SpanningOptions& opts = {});

/// All sequences of length tau over the given control values.
std::vector<ControlSequence> product_codebook(const std::vector<Vec>& values, int tau);

// ---- periodic structure ------------------------------------------------------------------------

/// (1/tau) sum_t log2 vol_{d+}(Df(x_t) E+_t) along a chain whose point t sits at split time t0 + t.
double morse_exponent(const ControlSystem& sys, const std::vector<ChainStep>& chain, const Splitting& split,
                      int t0 = 0);

/// Splitting along a closed chain repeated periodically (`settle` steps each side).
Splitting periodic_chain_splitting(const ControlSystem& sys, const std::vector<ChainStep>& chain, int settle = 30);

/// (1/tau) sum_{|lambda| > 1} log2 |lambda| over eigenvalues of Dphi_tau at the base point of a
/// tau-periodic orbit (tau = orbit.size()).
double data_rate_R0(const ControlSystem& sys, const OrbitSegment& periodic_orbit);

// ---- combinatorial utilities --------------------------------------------------------------------

/// v(k, s) = v_k(f^s x) for 0 < k, s + k <= n.
using CocycleFn = std::function<double(int k, int s)>;

/// Time 0 <= n1 < n with v(k, n1)/k > v(n, 0)/n - eps for 0 < k <= n - n1.
int subadditive_select(const CocycleFn& v, int n, double eps, double omega);

/// Pairs (i, j), 0 <= i < m, 0 <= j < q_i, where n = i + q_i m + r_i with 0 <= r_i < m.
std::vector<std::pair<int, int>> partition_indices(int n, int m);

}  // namespace hypctrl
