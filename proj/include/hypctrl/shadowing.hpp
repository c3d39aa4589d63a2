#pragma once

#include "hypctrl/setops.hpp"
#include "hypctrl/system.hpp"

#include <limits>
#include <vector>

namespace hypctrl {

/// States x_t, t in [start_time; start_time + size), with controls and the largest jump
/// alpha = max_t |f_{u_t}(x_t) - x_{t+1}|.
struct PseudoOrbit {
  int start_time = 0;
  std::vector<Vec> states;
  ControlSequence controls;
  double alpha = 0.0;

  static PseudoOrbit make(const ControlSystem& sys, std::vector<Vec> states, ControlSequence controls,
                          int start_time = 0);
  int size() const { return static_cast<int>(states.size()); }
  int end_time() const { return start_time + size() - 1; }
  double recompute_alpha(const ControlSystem& sys) const;
  /// Largest jump including the wrap x_{end} -> x_{start}.
  double periodic_alpha(const ControlSystem& sys) const;
};

enum class Boundary {
  /// x_{t+1} = f(x_t) for all t with indices taken mod the length.
  Periodic,
  /// Free ends; each Newton step is the minimum-norm correction.
  Anchored,
};

struct ShadowOptions {
  int max_iterations = 50;
  double tolerance = 1e-12;
  /// Results farther than this from the pseudo-orbit count as failures.
  double max_beta = 1.0;
  /// Newton start; the pseudo-orbit states when empty.
  std::vector<Vec> initial_guess;
};

struct ShadowResult {
  OrbitSegment orbit;
  double beta = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Newton refinement of a pseudo-orbit to a true orbit. For Periodic boundary the result
/// is a periodic orbit of period size(). Throws DomainError on divergence.
ShadowResult refine_to_orbit(const ControlSystem& sys, const PseudoOrbit& pseudo, Boundary boundary,
                             const ShadowOptions& opts = {});

/// tau-periodic orbit (tau = u_periodic.size()) refined from the forward iterates of seed.
OrbitSegment find_periodic_orbit(const ControlSystem& sys, const ControlSequence& u_periodic,
                                 const Vec& seed, const ShadowOptions& opts = {});

/// h_u(x_s) for the nominal-control orbit window `base` (a true orbit) at time s: the
/// center state of the anchored refinement of (theta^t u, base_t) over |t - s| <= T.
Vec conjugacy_point(const ControlSystem& sys, const OrbitSegment& base, int s,
                    const ControlSequence& u, int window, const ShadowOptions& opts = {});

/// As above with the base window generated by iterating x under the nominal control; only
/// suitable for short windows since backward iteration amplifies roundoff.
Vec conjugacy_point(const ControlSystem& sys, const Vec& x, const ControlSequence& u, int window,
                    const ShadowOptions& opts = {});

/// max_{|t| <= horizon} |phi(t,x,u) - phi(t,y,u)|; +inf once either orbit overflows.
double expansivity_probe(const ControlSystem& sys, const ControlSequence& u, const Vec& x,
                         const Vec& y, int horizon);

/// Pseudo-orbit through the center of `cell`: successors (and predecessors) are the nearest
/// occupied centers to the image (preimage) under the nominal control.
PseudoOrbit raster_pseudo_orbit(const ControlSystem& sys, const GridSet& grid, GridSet::Index cell,
                                int half_window);

/// True nominal-control orbit windows over [-half_window; half_window], one per selected
/// cell of `grid` (count cells evenly spaced in index order). Cells whose raster
/// pseudo-orbit does not refine are skipped.
std::vector<OrbitSegment> sample_invariant_orbits(const ControlSystem& sys, const GridSet& grid,
                                                  std::size_t count, int half_window,
                                                  const ShadowOptions& opts = {});

}  // namespace hypctrl
