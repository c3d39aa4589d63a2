#include "hypctrl/shadowing.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace hypctrl {

PseudoOrbit PseudoOrbit::make(const ControlSystem& sys, std::vector<Vec> states, ControlSequence controls,
                              int start_time) {
  PseudoOrbit p;
  p.start_time = start_time;
  p.states = std::move(states);
  p.controls = std::move(controls);
  p.alpha = p.recompute_alpha(sys);
  return p;
}

double PseudoOrbit::recompute_alpha(const ControlSystem& sys) const {
  double a = 0.0;
  for (int k = 0; k + 1 < size(); ++k)
    a = std::max(a, (sys.step(states[k], controls.at(start_time + k)) - states[k + 1]).norm());
  return a;
}

double PseudoOrbit::periodic_alpha(const ControlSystem& sys) const {
  double a = recompute_alpha(sys);
  if (size() > 0)
    a = std::max(a, (sys.step(states.back(), controls.at(end_time())) - states.front()).norm());
  return a;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

[[noreturn]] void shadow_failed() {
  throw DomainError("shadowing failed (pseudo-orbit too far from hyperbolic set)");
}

// Defects G_t = x_{t+1} - f(x_t, u_t), stacked; `links` defects for `n` states.
Eigen::VectorXd defects(const ControlSystem& sys, const std::vector<Vec>& x, const ControlSequence& u,
                        int t0, bool periodic) {
  const int n = static_cast<int>(x.size());
  const int d = sys.state_dim;
  const int links = periodic ? n : n - 1;
  Eigen::VectorXd g(links * d);
  for (int t = 0; t < links; ++t)
    g.segment(t * d, d) = x[(t + 1) % n] - sys.forward(x[t], u.at(t0 + t));
  return g;
}

double max_block_norm(const Eigen::VectorXd& g, int d) {
  double m = 0.0;
  for (int t = 0; t < g.size() / d; ++t) m = std::max(m, g.segment(t * d, d).norm());
  return m;
}

SpMat defect_jacobian(const ControlSystem& sys, const std::vector<Vec>& x, const ControlSequence& u, int t0,
                      bool periodic) {
  const int n = static_cast<int>(x.size());
  const int d = sys.state_dim;
  const int links = periodic ? n : n - 1;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(links * (d * d + d)));
  for (int t = 0; t < links; ++t) {
    const Mat a = sys.jac_state(x[t], u.at(t0 + t));
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) trip.emplace_back(t * d + i, t * d + j, -a(i, j));
      trip.emplace_back(t * d + i, ((t + 1) % n) * d + i, 1.0);
    }
  }
  SpMat j(links * d, n * d);
  j.setFromTriplets(trip.begin(), trip.end());
  return j;
}

}  // namespace

ShadowResult refine_to_orbit(const ControlSystem& sys, const PseudoOrbit& pseudo, Boundary boundary,
                             const ShadowOptions& opts) {
  const int n = pseudo.size();
  const int d = sys.state_dim;
  const bool periodic = boundary == Boundary::Periodic;
  if (n < (periodic ? 1 : 2)) throw PreconditionError("pseudo-orbit too short");
  for (int t = 0; t < (periodic ? n : n - 1); ++t) sys.require_control(pseudo.controls.at(pseudo.start_time + t));

  std::vector<Vec> x = opts.initial_guess.empty() ? pseudo.states : opts.initial_guess;
  if (static_cast<int>(x.size()) != n) throw PreconditionError("initial guess has the wrong length");

  Eigen::VectorXd g = defects(sys, x, pseudo.controls, pseudo.start_time, periodic);
  int it = 0;
  while (max_block_norm(g, d) >= opts.tolerance) {
    if (it == opts.max_iterations || !g.allFinite()) shadow_failed();
    ++it;
    const SpMat j = defect_jacobian(sys, x, pseudo.controls, pseudo.start_time, periodic);
    Eigen::VectorXd delta;
    if (periodic) {
      Eigen::SparseLU<SpMat> lu;
      lu.compute(j);
      if (lu.info() != Eigen::Success) shadow_failed();
      delta = lu.solve(-g);
    } else {
      // Minimum-norm step: delta = J^T (J J^T)^{-1} (-g); J J^T is block tridiagonal SPD.
      const SpMat jjt = j * SpMat(j.transpose());
      Eigen::SimplicialLDLT<SpMat> ldlt;
      ldlt.compute(jjt);
      if (ldlt.info() != Eigen::Success) shadow_failed();
      delta = j.transpose() * ldlt.solve(-g);
    }
    if (!delta.allFinite()) shadow_failed();

    // Halving line search on the Euclidean defect norm.
    const double g0 = g.norm();
    double step = 1.0;
    std::vector<Vec> trial(x.size());
    Eigen::VectorXd gt;
    for (int halvings = 0;; ++halvings) {
      for (int t = 0; t < n; ++t) trial[t] = x[t] + step * Vec(delta.segment(t * d, d));
      gt = defects(sys, trial, pseudo.controls, pseudo.start_time, periodic);
      if (gt.allFinite() && gt.norm() < g0) break;
      if (halvings == 30) {
        // Accept tiny non-improving steps only at roundoff level.
        if (gt.allFinite() && max_block_norm(gt, d) < opts.tolerance) break;
        shadow_failed();
      }
      step /= 2;
    }
    x = std::move(trial);
    g = std::move(gt);
  }

  ShadowResult res;
  res.iterations = it;
  res.residual = max_block_norm(g, d);
  for (int t = 0; t < n; ++t) res.beta = std::max(res.beta, (x[t] - pseudo.states[t]).norm());
  if (!(res.beta <= opts.max_beta)) shadow_failed();
  res.orbit.start_time = pseudo.start_time;
  res.orbit.states = std::move(x);
  res.orbit.controls = pseudo.controls;
  return res;
}

OrbitSegment find_periodic_orbit(const ControlSystem& sys, const ControlSequence& u_periodic, const Vec& seed,
                                 const ShadowOptions& opts) {
  if (u_periodic.extension() != ControlSequence::Extension::Periodic)
    throw PreconditionError("control sequence must be periodic");
  const int tau = u_periodic.size();
  std::vector<Vec> states{seed};
  for (int t = 0; t + 1 < tau; ++t) {
    Vec next = sys.step(states.back(), u_periodic.at(t));
    if (!next.allFinite()) next = seed;
    states.push_back(next);
  }
  PseudoOrbit pseudo = PseudoOrbit::make(sys, std::move(states), u_periodic, 0);
  ShadowOptions o = opts;
  o.max_beta = std::numeric_limits<double>::infinity();
  try {
    return refine_to_orbit(sys, pseudo, Boundary::Periodic, o).orbit;
  } catch (const DomainError&) {
    throw DomainError("no periodic orbit found from seed");
  }
}

Vec conjugacy_point(const ControlSystem& sys, const OrbitSegment& base, int s, const ControlSequence& u,
                    int window, const ShadowOptions& opts) {
  if (window < 1) throw PreconditionError("window must be positive");
  if (s - window < base.start_time || s + window > base.end_time())
    throw RangeError("base orbit does not cover the conjugacy window");
  std::vector<Vec> states;
  for (int t = s - window; t <= s + window; ++t) states.push_back(base.at(t));
  // Re-index so that the window center sits at time 0 and sees u_0 there.
  PseudoOrbit pseudo = PseudoOrbit::make(sys, std::move(states), u, -window);
  try {
    return refine_to_orbit(sys, pseudo, Boundary::Anchored, opts).orbit.states[static_cast<std::size_t>(window)];
  } catch (const DomainError&) {
    throw DomainError("conjugacy undefined (control too large?)");
  }
}

Vec conjugacy_point(const ControlSystem& sys, const Vec& x, const ControlSequence& u, int window,
                    const ShadowOptions& opts) {
  const auto nominal = ControlSequence::constant(sys.nominal_control);
  OrbitSegment base;
  base.start_time = -window;
  base.controls = nominal;
  for (int t = -window; t <= window; ++t) base.states.push_back(transition(sys, t, x, nominal));
  return conjugacy_point(sys, base, 0, u, window, opts);
}

double expansivity_probe(const ControlSystem& sys, const ControlSequence& u, const Vec& x, const Vec& y,
                         int horizon) {
  if (horizon < 0) throw PreconditionError("horizon must be nonnegative");
  double best = (x - y).norm();
  for (int dir : {1, -1}) {
    Vec a = x, b = y;
    for (int k = 1; k <= horizon; ++k) {
      const int t = dir > 0 ? k - 1 : -k;
      const Vec& ut = u.at(t);
      a = dir > 0 ? sys.step(a, ut) : sys.inverse_step(a, ut);
      b = dir > 0 ? sys.step(b, ut) : sys.inverse_step(b, ut);
      const double dist = (a - b).norm();
      if (!std::isfinite(dist)) return std::numeric_limits<double>::infinity();
      best = std::max(best, dist);
    }
  }
  return best;
}

namespace {

PseudoOrbit raster_pseudo_orbit(const ControlSystem& sys, const OccupancyTable& table, GridSet::Index cell,
                                int half_window) {
  const GridSet& grid = table.set();
  if (!grid.occupied(cell)) throw PreconditionError("cell is not occupied");
  if (half_window < 1) throw PreconditionError("window must be positive");
  const Vec& u0 = sys.nominal_control;
  const double reach = grid.region().extent().norm();

  auto nearest = [&](const Vec& z) -> Vec {
    double r = 2 * grid.half_diagonal();
    while (r <= reach) {
      auto cells = table.centers_within(z, r);
      if (!cells.empty()) {
        Vec best = grid.center(cells.front());
        for (auto c : cells) {
          Vec p = grid.center(c);
          if ((p - z).norm() < (best - z).norm()) best = p;
        }
        return best;
      }
      r *= 2;
    }
    return z;
  };

  std::vector<Vec> fwd{grid.center(cell)}, bwd;
  for (int k = 0; k < half_window; ++k) fwd.push_back(nearest(sys.forward(fwd.back(), u0)));
  Vec p = fwd.front();
  for (int k = 0; k < half_window; ++k) {
    p = nearest(sys.inverse(p, u0));
    bwd.push_back(p);
  }
  std::vector<Vec> states(bwd.rbegin(), bwd.rend());
  states.insert(states.end(), fwd.begin(), fwd.end());
  return PseudoOrbit::make(sys, std::move(states), ControlSequence::constant(u0), -half_window);
}

}  // namespace

PseudoOrbit raster_pseudo_orbit(const ControlSystem& sys, const GridSet& grid, GridSet::Index cell,
                                int half_window) {
  OccupancyTable table(grid);
  return raster_pseudo_orbit(sys, table, cell, half_window);
}

std::vector<OrbitSegment> sample_invariant_orbits(const ControlSystem& sys, const GridSet& grid,
                                                  std::size_t count, int half_window,
                                                  const ShadowOptions& opts) {
  if (grid.empty()) throw PreconditionError("grid is empty");
  count = std::min(count, grid.size());
  std::vector<OrbitSegment> out(count);
  std::vector<std::uint8_t> ok(count, 0);
  OccupancyTable table(grid);
  parallel_for(count, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto cell = grid.cells()[i * grid.size() / count];
      try {
        auto pseudo = raster_pseudo_orbit(sys, table, cell, half_window);
        out[i] = refine_to_orbit(sys, pseudo, Boundary::Anchored, opts).orbit;
        ok[i] = 1;
      } catch (const DomainError&) {
      }
    }
  });
  std::vector<OrbitSegment> kept;
  for (std::size_t i = 0; i < count; ++i)
    if (ok[i]) kept.push_back(std::move(out[i]));
  return kept;
}

}  // namespace hypctrl
