#pragma once

#include "hypctrl/system.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace hypctrl {

struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  Vec center() const { return (lo + hi) / 2; }
  Vec extent() const { return hi - lo; }
  double volume() const { return extent().prod(); }
  bool contains(const Vec& x) const;

  /// Square (cube) of side `side` centered at `center`.
  static Box centered(const Vec& center, double side);
};

/// Occupied cells of a uniform grid with `resolution` cells per axis over `region`.
/// Cell multi-index (i_0, ..., i_{d-1}) has linear index i_0 + res i_1 + res^2 i_2 + ...
class GridSet {
 public:
  using Index = std::uint64_t;

  GridSet() = default;
  GridSet(Box region, int resolution, std::vector<Index> cells = {});

  static GridSet full(Box region, int resolution);

  const Box& region() const { return region_; }
  int resolution() const { return res_; }
  int dim() const { return region_.dim(); }
  Index total_cells() const;

  /// Sorted, duplicate-free.
  const std::vector<Index>& cells() const { return cells_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

  Vec cell_size() const;
  double cell_volume() const { return region_.volume() / static_cast<double>(total_cells()); }
  double half_diagonal() const { return cell_size().norm() / 2; }
  double occupied_volume() const { return cell_volume() * static_cast<double>(size()); }

  Vec center(Index cell) const;
  Box cell_box(Index cell) const;
  std::vector<int> coords(Index cell) const;
  Index linear(const std::vector<int>& coords) const;
  /// Cell containing x, if x lies in the region.
  std::optional<Index> locate(const Vec& x) const;

  bool occupied(Index cell) const;
  bool contains_point(const Vec& x) const;

  /// Each cell split into 2^d children.
  GridSet refined() const;
  /// Every cell of this set lies inside an occupied cell of `coarse` (same region, coarse
  /// resolution dividing ours).
  bool covered_by(const GridSet& coarse) const;
  bool subset_of(const GridSet& other) const;

 private:
  Box region_;
  int res_ = 0;
  std::vector<Index> cells_;
};

/// Dense occupancy with a summed-area table: O(2^d) emptiness tests for index boxes.
class OccupancyTable {
 public:
  explicit OccupancyTable(const GridSet& set);

  using Coords = std::array<int, kMaxDim>;

  /// Any occupied cell with lo[k] <= i_k <= hi[k]; indices are clamped to the grid.
  bool any_in(Coords lo, Coords hi) const;
  /// Any occupied cell whose interior meets the real box [lo, hi].
  bool any_in(const Box& box) const;
  /// Euclidean distance from x to the nearest occupied cell center, if within `radius`.
  std::optional<double> nearest_center_within(const Vec& x, double radius) const;
  /// Occupied cells whose centers lie within `radius` of x.
  std::vector<GridSet::Index> centers_within(const Vec& x, double radius) const;

  bool occupied(const Coords& coords) const;
  const GridSet& set() const { return set_; }
  std::size_t dense_index(const Coords& c) const;

 private:
  std::uint32_t prefix_at(const Coords& c) const;  // c_k in [0, res]
  const GridSet& set_;
  int d_;
  int res_;
  std::vector<std::uint8_t> dense_;
  std::vector<std::uint32_t> prefix_;  // (res+1)^d
};

struct InvariantOptions {
  /// Selection sweeps per subdivision level.
  int horizon = 12;
  /// Subdivision starts from this resolution (power of two, at most the target).
  int coarse_resolution = 8;
};

/// Outer approximation of the maximal invariant set of f_{u_fixed} in `region` by
/// subdivision: at each level a cell survives a sweep iff the enclosure of its forward
/// image and of its backward image both meet the current set.
GridSet maximal_invariant(const ControlSystem& sys, const Vec& u_fixed, const Box& region,
                          int resolution, const InvariantOptions& opts = {});

/// As maximal_invariant, with enclosures taken over the whole control range: a cell survives
/// iff some admissible control keeps it connected forward and backward.
GridSet controlled_invariant(const ControlSystem& sys, const Box& region, int resolution,
                             const InvariantOptions& opts = {});

/// Enclosure of { f_u(x) : x in cell, u in U } where U is {u_center} widened by the
/// per-axis control half-extent. Linear part from the Jacobian at the center, curvature
/// margin from corner evaluations.
Box image_enclosure(const ControlSystem& sys, const Box& cell, const Vec& u_center,
                    const Vec& u_half, bool backward);

/// Outer distance to a grid set: nearest center distance minus the half diagonal, >= 0.
double grid_distance(const OccupancyTable& table, const Vec& x, double cap);

/// Some occupied cell center lies within `radius` of x.
bool any_center_within(const OccupancyTable& table, const Vec& x, double radius);

struct VolumeEstimate {
  double volume = 0.0;
  double std_error = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t samples = 0;
  bool zero_hits = false;
};

/// Monte-Carlo volume of { x : dist(phi(t,x,u), fiber_t) <= eps, 0 <= t < tau }.
/// `fibers` holds fiber_t for t = 0..; the last entry is reused for larger t.
VolumeEstimate fiber_tube_volume(const ControlSystem& sys, const ControlSequence& u, int tau,
                                 double eps, const std::vector<GridSet>& fibers,
                                 std::uint64_t samples, std::uint64_t seed);

VolumeEstimate fiber_tube_volume(const ControlSystem& sys, const ControlSequence& u, int tau,
                                 double eps, const GridSet& fiber, std::uint64_t samples,
                                 std::uint64_t seed);

/// d x (t m) matrix of derivatives of phi(t, x, u) with respect to u_0, ..., u_{t-1}.
Eigen::MatrixXd control_sensitivity(const ControlSystem& sys, const Vec& x,
                                    const std::vector<Vec>& u_window);

/// Numerical rank (singular values above 1e-8 of the largest) of control_sensitivity.
int regularity_rank(const ControlSystem& sys, const Vec& x, const std::vector<Vec>& u_window);

/// One link of a controlled chain; jump = |f_control(point) - next.point|. The terminal
/// link carries the end point, the nominal control and jump 0.
struct ChainStep {
  Vec point;
  Vec control;
  double jump = 0.0;
};

struct ChainOptions {
  /// Cap on explored nodes.
  int max_length = 100000;
  /// Newton iterations for the exact steering attempt towards the target.
  int steering_iterations = 20;
};

/// Controlled eps-chain from x to y through the cells of `grid` (breadth-first over cells,
/// stencil controls, jumps to cell centers within eps). Throws DomainError when none exists.
std::vector<ChainStep> controlled_chain(const ControlSystem& sys, const GridSet& grid,
                                        const Vec& x, const Vec& y, double eps,
                                        const ChainOptions& opts = {});

/// Admissible u with |f_u(x) - target| <= tol, by damped Gauss-Newton on u and projection.
std::optional<Vec> steer(const ControlSystem& sys, const Vec& x, const Vec& target, double tol,
                         int iterations = 20);

}  // namespace hypctrl
