#include "hypctrl/setops.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <unordered_map>

namespace hypctrl {

bool Box::contains(const Vec& x) const {
  return ((x - lo).array() >= 0).all() && ((hi - x).array() >= 0).all();
}

Box Box::centered(const Vec& center, double side) {
  Vec h = Vec::Constant(center.size(), side / 2);
  return {center - h, center + h};
}

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Calls fn(coords) for every multi-index with lo <= c <= hi (axis 0 fastest).
template <class C, class Fn>
void for_each_index(const C& lo, const C& hi, std::size_t d, Fn&& fn) {
  for (std::size_t k = 0; k < d; ++k)
    if (lo[k] > hi[k]) return;
  C c = lo;
  while (true) {
    if (!fn(c)) return;
    std::size_t k = 0;
    while (k < d && ++c[k] > hi[k]) {
      c[k] = lo[k];
      ++k;
    }
    if (k == d) return;
  }
}

}  // namespace

GridSet::GridSet(Box region, int resolution, std::vector<Index> cells)
    : region_(std::move(region)), res_(resolution), cells_(std::move(cells)) {
  if (region_.dim() < 1 || region_.dim() > kMaxDim || region_.hi.size() != region_.lo.size())
    throw PreconditionError("grid region has invalid dimension");
  if (!((region_.hi - region_.lo).array() > 0).all())
    throw PreconditionError("grid region must have positive extent");
  if (!is_power_of_two(res_)) throw PreconditionError("grid resolution must be a power of two");
  if (std::pow(static_cast<double>(res_), dim()) > 9.0e15)
    throw PreconditionError("grid resolution too large for 64-bit cell indices");
  if (!std::is_sorted(cells_.begin(), cells_.end())) std::sort(cells_.begin(), cells_.end());
  cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
  if (!cells_.empty() && cells_.back() >= total_cells())
    throw PreconditionError("grid cell index outside the grid");
}

GridSet GridSet::full(Box region, int resolution) {
  GridSet g(std::move(region), resolution);
  g.cells_.resize(g.total_cells());
  for (Index i = 0; i < g.cells_.size(); ++i) g.cells_[i] = i;
  return g;
}

GridSet::Index GridSet::total_cells() const {
  Index n = 1;
  for (int k = 0; k < dim(); ++k) n *= static_cast<Index>(res_);
  return n;
}

Vec GridSet::cell_size() const { return region_.extent() / res_; }

std::vector<int> GridSet::coords(Index cell) const {
  std::vector<int> c(static_cast<std::size_t>(dim()));
  for (auto& ck : c) {
    ck = static_cast<int>(cell % static_cast<Index>(res_));
    cell /= static_cast<Index>(res_);
  }
  return c;
}

GridSet::Index GridSet::linear(const std::vector<int>& c) const {
  Index idx = 0;
  for (int k = dim() - 1; k >= 0; --k) idx = idx * static_cast<Index>(res_) + static_cast<Index>(c[k]);
  return idx;
}

Vec GridSet::center(Index cell) const {
  const auto c = coords(cell);
  const Vec h = cell_size();
  Vec x(dim());
  for (int k = 0; k < dim(); ++k) x(k) = region_.lo(k) + (c[k] + 0.5) * h(k);
  return x;
}

Box GridSet::cell_box(Index cell) const {
  const Vec c = center(cell);
  const Vec h = cell_size() / 2;
  return {c - h, c + h};
}

std::optional<GridSet::Index> GridSet::locate(const Vec& x) const {
  if (!region_.contains(x)) return std::nullopt;
  const Vec h = cell_size();
  std::vector<int> c(static_cast<std::size_t>(dim()));
  for (int k = 0; k < dim(); ++k)
    c[k] = std::min(res_ - 1, static_cast<int>(std::floor((x(k) - region_.lo(k)) / h(k))));
  return linear(c);
}

bool GridSet::occupied(Index cell) const {
  return std::binary_search(cells_.begin(), cells_.end(), cell);
}

bool GridSet::contains_point(const Vec& x) const {
  auto c = locate(x);
  return c && occupied(*c);
}

GridSet GridSet::refined() const {
  GridSet out(region_, res_ * 2);
  const int d = dim();
  out.cells_.reserve(cells_.size() << d);
  std::vector<int> fine(static_cast<std::size_t>(d));
  for (Index cell : cells_) {
    const auto c = coords(cell);
    for (int child = 0; child < (1 << d); ++child) {
      for (int k = 0; k < d; ++k) fine[k] = 2 * c[k] + ((child >> k) & 1);
      out.cells_.push_back(out.linear(fine));
    }
  }
  std::sort(out.cells_.begin(), out.cells_.end());
  return out;
}

bool GridSet::covered_by(const GridSet& coarse) const {
  if (coarse.dim() != dim() || !coarse.region_.lo.isApprox(region_.lo) ||
      !coarse.region_.hi.isApprox(region_.hi))
    throw PreconditionError("grid sets live on different regions");
  if (coarse.res_ > res_ || res_ % coarse.res_ != 0)
    throw PreconditionError("coarse resolution must divide the fine resolution");
  const int ratio = res_ / coarse.res_;
  for (Index cell : cells_) {
    auto c = coords(cell);
    for (auto& ck : c) ck /= ratio;
    if (!coarse.occupied(coarse.linear(c))) return false;
  }
  return true;
}

bool GridSet::subset_of(const GridSet& other) const {
  if (other.res_ != res_) return covered_by(other);
  return std::includes(other.cells_.begin(), other.cells_.end(), cells_.begin(), cells_.end());
}

// ---------------------------------------------------------------------------------------------

OccupancyTable::OccupancyTable(const GridSet& set) : set_(set), d_(set.dim()), res_(set.resolution()) {
  const double dense_cells = std::pow(static_cast<double>(res_), d_);
  if (dense_cells > static_cast<double>(1u << 28))
    throw PreconditionError("grid too fine for a dense occupancy table");
  dense_.assign(static_cast<std::size_t>(set.total_cells()), 0);
  for (auto c : set.cells()) dense_[c] = 1;

  std::size_t n = 1;
  for (int k = 0; k < d_; ++k) n *= static_cast<std::size_t>(res_ + 1);
  prefix_.assign(n, 0);
  // prefix[c] counts cells with i_k < c_k; seed with shifted occupancy then sum per axis.
  for (auto cell : set.cells()) {
    auto c = set.coords(cell);
    std::size_t idx = 0;
    for (int k = d_ - 1; k >= 0; --k) idx = idx * (res_ + 1) + static_cast<std::size_t>(c[k] + 1);
    prefix_[idx] = 1;
  }
  std::size_t stride = 1;
  for (int k = 0; k < d_; ++k) {
    for (std::size_t i = 0; i < n; ++i)
      if ((i / stride) % static_cast<std::size_t>(res_ + 1) != 0) prefix_[i] += prefix_[i - stride];
    stride *= static_cast<std::size_t>(res_ + 1);
  }
}

std::size_t OccupancyTable::dense_index(const Coords& c) const {
  std::size_t idx = 0;
  for (int k = d_ - 1; k >= 0; --k) idx = idx * static_cast<std::size_t>(res_) + static_cast<std::size_t>(c[k]);
  return idx;
}

std::uint32_t OccupancyTable::prefix_at(const Coords& c) const {
  std::size_t idx = 0;
  for (int k = d_ - 1; k >= 0; --k) idx = idx * (res_ + 1) + static_cast<std::size_t>(c[k]);
  return prefix_[idx];
}

bool OccupancyTable::occupied(const Coords& c) const {
  for (int k = 0; k < d_; ++k)
    if (c[k] < 0 || c[k] >= res_) return false;
  return dense_[dense_index(c)] != 0;
}

bool OccupancyTable::any_in(Coords lo, Coords hi) const {
  for (int k = 0; k < d_; ++k) {
    lo[k] = std::max(lo[k], 0);
    hi[k] = std::min(hi[k], res_ - 1);
    if (lo[k] > hi[k]) return false;
  }
  std::int64_t total = 0;
  Coords corner{};
  for (int mask = 0; mask < (1 << d_); ++mask) {
    int lows = 0;
    for (int k = 0; k < d_; ++k) {
      if ((mask >> k) & 1) {
        corner[k] = lo[k];
        ++lows;
      } else {
        corner[k] = hi[k] + 1;
      }
    }
    const std::int64_t v = prefix_at(corner);
    total += (lows % 2 == 0) ? v : -v;
  }
  return total > 0;
}

bool OccupancyTable::any_in(const Box& box) const {
  const Vec h = set_.cell_size();
  const Box& r = set_.region();
  Coords lo{}, hi{};
  for (int k = 0; k < d_; ++k) {
    const double a = (box.lo(k) - r.lo(k)) / h(k);
    const double b = (box.hi(k) - r.lo(k)) / h(k);
    if (b <= 0 || a >= res_) return false;
    lo[k] = static_cast<int>(std::floor(std::max(a, -1.0) + 1e-9));
    hi[k] = static_cast<int>(std::ceil(std::min(b, res_ + 1.0) - 1e-9)) - 1;
  }
  return any_in(lo, hi);
}

namespace {

// Index range of cells whose centers lie in [x - a, x + a] per axis.
using Coords = OccupancyTable::Coords;

void center_range(const GridSet& g, const Vec& x, double a, Coords& lo, Coords& hi) {
  const Vec h = g.cell_size();
  const int d = g.dim();
  for (int k = 0; k < d; ++k) {
    const double s = (x(k) - g.region().lo(k)) / h(k) - 0.5;
    const double w = a / h(k);
    lo[k] = static_cast<int>(std::ceil(std::max(s - w, -1.0)));
    hi[k] = static_cast<int>(std::floor(std::min(s + w, g.resolution() + 0.0)));
    lo[k] = std::max(lo[k], 0);
    hi[k] = std::min(hi[k], g.resolution() - 1);
  }
}

}  // namespace

std::optional<double> OccupancyTable::nearest_center_within(const Vec& x, double radius) const {
  Coords lo{}, hi{};
  center_range(set_, x, radius, lo, hi);
  if (!any_in(lo, hi)) return std::nullopt;
  double best = radius;
  bool found = false;
  const Vec h = set_.cell_size();
  for_each_index(lo, hi, static_cast<std::size_t>(d_), [&](const Coords& c) {
    if (dense_[dense_index(c)]) {
      double s = 0;
      for (int k = 0; k < d_; ++k) {
        const double dk = set_.region().lo(k) + (c[k] + 0.5) * h(k) - x(k);
        s += dk * dk;
      }
      s = std::sqrt(s);
      if (s <= best) {
        best = s;
        found = true;
      }
    }
    return true;
  });
  if (!found) return std::nullopt;
  return best;
}

std::vector<GridSet::Index> OccupancyTable::centers_within(const Vec& x, double radius) const {
  std::vector<GridSet::Index> out;
  Coords lo{}, hi{};
  center_range(set_, x, radius, lo, hi);
  if (!any_in(lo, hi)) return out;
  for_each_index(lo, hi, static_cast<std::size_t>(d_), [&](const Coords& c) {
    const auto idx = static_cast<GridSet::Index>(dense_index(c));
    if (dense_[idx] && (set_.center(idx) - x).norm() <= radius) out.push_back(idx);
    return true;
  });
  return out;
}

double grid_distance(const OccupancyTable& table, const Vec& x, double cap) {
  const double hd = table.set().half_diagonal();
  auto d = table.nearest_center_within(x, cap + hd);
  if (!d) return cap + hd;
  return std::max(0.0, *d - hd);
}

// Some occupied center within `radius` of x; cheap accept/reject before a scan.
bool any_center_within(const OccupancyTable& table, const Vec& x, double radius) {
  const GridSet& g = table.set();
  const int d = g.dim();
  Coords lo{}, hi{};
  center_range(g, x, radius, lo, hi);
  if (!table.any_in(lo, hi)) return false;
  center_range(g, x, radius / std::sqrt(static_cast<double>(d)), lo, hi);
  if (table.any_in(lo, hi)) return true;
  return table.nearest_center_within(x, radius).has_value();
}

// ---------------------------------------------------------------------------------------------

Box image_enclosure(const ControlSystem& sys, const Box& cell, const Vec& u_center,
                    const Vec& u_half, bool backward) {
  const int d = sys.state_dim;
  const int m = sys.control_dim;
  const Vec c = cell.center();
  const Vec r = cell.extent() / 2;
  const MapFn& map = backward ? sys.inverse : sys.forward;

  const Vec y0 = map(c, u_center);
  Mat jx, ju;
  if (!backward) {
    jx = sys.jac_state(c, u_center);
    ju = sys.jac_control(c, u_center);
  } else {
    // g = f_u^{-1}: Dg_x = (Df_x)^{-1}, Dg_u = -(Df_x)^{-1} Df_u, both at g(c).
    const Mat fx = sys.jac_state(y0, u_center);
    jx = fx.inverse();
    ju = -jx * sys.jac_control(y0, u_center);
  }

  Vec half = jx.cwiseAbs() * r + ju.cwiseAbs() * u_half;

  // Curvature margin: linearization error at state corners times control corners.
  Vec margin = Vec::Zero(d);
  const bool has_control = u_half.size() > 0 && u_half.maxCoeff() > 0;
  const int control_masks = has_control ? (1 << m) : 1;
  Vec dx(d), du(m);
  for (int sm = 0; sm < (1 << d); ++sm) {
    for (int k = 0; k < d; ++k) dx(k) = ((sm >> k) & 1) ? r(k) : -r(k);
    for (int cm = 0; cm < control_masks; ++cm) {
      for (int k = 0; k < m; ++k) du(k) = has_control ? (((cm >> k) & 1) ? u_half(k) : -u_half(k)) : 0.0;
      const Vec err = map(c + dx, u_center + du) - y0 - jx * dx - ju * du;
      margin = margin.cwiseMax(err.cwiseAbs());
    }
  }
  half += margin + Vec::Constant(d, 1e-12 * (1.0 + y0.cwiseAbs().maxCoeff()));
  if (!half.allFinite() || !y0.allFinite()) {
    Vec inf = Vec::Constant(d, std::numeric_limits<double>::infinity());
    return {inf, inf};  // lies outside every region
  }
  return {y0 - half, y0 + half};
}

namespace {

GridSet select_invariant(const ControlSystem& sys, const Box& region, int resolution,
                         const InvariantOptions& opts, const Vec& u_center, const Vec& u_half) {
  if (region.dim() != sys.state_dim) throw PreconditionError("region dimension differs from the state");
  if (!is_power_of_two(resolution)) throw PreconditionError("resolution must be a power of two");
  if (opts.horizon < 1) throw PreconditionError("horizon must be positive");
  const int coarse = std::min(opts.coarse_resolution, resolution);
  if (!is_power_of_two(coarse)) throw PreconditionError("coarse resolution must be a power of two");

  GridSet cur = GridSet::full(region, coarse);
  for (int res = coarse;; res *= 2) {
    if (res > coarse) cur = cur.refined();
    const auto& cells = cur.cells();
    std::vector<Box> fwd(cells.size()), bwd(cells.size());
    parallel_for(cells.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const Box cell = cur.cell_box(cells[i]);
        fwd[i] = image_enclosure(sys, cell, u_center, u_half, false);
        bwd[i] = image_enclosure(sys, cell, u_center, u_half, true);
      }
    });
    for (int sweep = 0; sweep < opts.horizon && !cur.empty(); ++sweep) {
      OccupancyTable table(cur);
      std::vector<std::uint8_t> keep(cur.size());
      parallel_for(cur.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) keep[i] = table.any_in(fwd[i]) && table.any_in(bwd[i]);
      });
      std::vector<GridSet::Index> next;
      std::vector<Box> nf, nb;
      for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        next.push_back(cur.cells()[i]);
        nf.push_back(fwd[i]);
        nb.push_back(bwd[i]);
      }
      const bool stable = next.size() == cur.size();
      cur = GridSet(region, res, std::move(next));
      fwd = std::move(nf);
      bwd = std::move(nb);
      if (stable) break;
    }
    if (cur.empty()) break;
    if (res == resolution) break;
  }
  if (cur.empty()) throw DomainError("no invariant set at this resolution");
  return cur;
}

}  // namespace

GridSet maximal_invariant(const ControlSystem& sys, const Vec& u_fixed, const Box& region,
                          int resolution, const InvariantOptions& opts) {
  if (u_fixed.size() != sys.control_dim) throw PreconditionError("control has the wrong dimension");
  return select_invariant(sys, region, resolution, opts, u_fixed, Vec::Zero(sys.control_dim));
}

GridSet controlled_invariant(const ControlSystem& sys, const Box& region, int resolution,
                             const InvariantOptions& opts) {
  const auto& cr = sys.control_range;
  const Vec center = (cr.kind() == ControlRange::Kind::Disk) ? cr.center() : Vec((cr.lo() + cr.hi()) / 2);
  return select_invariant(sys, region, resolution, opts, center, cr.half_extent());
}

// ---------------------------------------------------------------------------------------------

VolumeEstimate fiber_tube_volume(const ControlSystem& sys, const ControlSequence& u, int tau,
                                 double eps, const std::vector<GridSet>& fibers,
                                 std::uint64_t samples, std::uint64_t seed) {
  if (tau < 1) throw PreconditionError("tau must be at least 1");
  if (fibers.empty() || fibers.front().empty()) throw PreconditionError("fiber must be nonempty");
  if (eps < 0) throw PreconditionError("eps must be nonnegative");
  if (samples == 0) throw PreconditionError("sample count must be positive");
  for (int t = 0; t < tau; ++t) sys.require_control(u.at(t));

  std::vector<OccupancyTable> tables;
  tables.reserve(fibers.size());
  for (const auto& f : fibers) {
    if (f.empty()) throw PreconditionError("fiber must be nonempty");
    tables.emplace_back(f);
  }

  const GridSet& f0 = fibers.front();
  const int d = f0.dim();
  const double reach0 = eps + f0.half_diagonal();
  Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  for (auto c : f0.cells()) {
    const Vec x = f0.center(c);
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  lo.array() -= reach0;
  hi.array() += reach0;
  const double box_volume = (hi - lo).prod();

  constexpr std::uint64_t kBlock = 1 << 14;
  const std::uint64_t blocks = (samples + kBlock - 1) / kBlock;
  std::vector<std::uint64_t> hits(blocks, 0);
  parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      std::mt19937_64 rng(substream_seed(seed, "fiber_tube_volume", b));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const std::uint64_t n = std::min(kBlock, samples - b * kBlock);
      Vec x(d);
      for (std::uint64_t s = 0; s < n; ++s) {
        for (int k = 0; k < d; ++k) x(k) = lo(k) + (hi(k) - lo(k)) * unit(rng);
        bool inside = true;
        for (int t = 0; t < tau && inside; ++t) {
          const auto& table = tables[std::min<std::size_t>(static_cast<std::size_t>(t), tables.size() - 1)];
          inside = x.allFinite() && any_center_within(table, x, eps + table.set().half_diagonal());
          if (inside && t + 1 < tau) x = sys.forward(x, u.at(t));
        }
        hits[b] += inside;
      }
    }
  });

  VolumeEstimate est;
  est.samples = samples;
  for (auto h : hits) est.hits += h;
  const double p = static_cast<double>(est.hits) / static_cast<double>(samples);
  est.volume = box_volume * p;
  est.std_error = box_volume * std::sqrt(p * (1 - p) / static_cast<double>(samples));
  est.zero_hits = est.hits == 0;
  return est;
}

VolumeEstimate fiber_tube_volume(const ControlSystem& sys, const ControlSequence& u, int tau,
                                 double eps, const GridSet& fiber, std::uint64_t samples,
                                 std::uint64_t seed) {
  return fiber_tube_volume(sys, u, tau, eps, std::vector<GridSet>{fiber}, samples, seed);
}

// ---------------------------------------------------------------------------------------------

Eigen::MatrixXd control_sensitivity(const ControlSystem& sys, const Vec& x,
                                    const std::vector<Vec>& u_window) {
  const int t = static_cast<int>(u_window.size());
  if (t < 1) throw PreconditionError("control window must have length >= 1");
  const int d = sys.state_dim;
  const int m = sys.control_dim;
  std::vector<Vec> xs{x};
  for (int s = 0; s + 1 < t; ++s) xs.push_back(sys.step(xs.back(), u_window[s]));
  Eigen::MatrixXd out(d, t * m);
  Eigen::MatrixXd prop = Eigen::MatrixXd::Identity(d, d);
  for (int s = t - 1; s >= 0; --s) {
    out.middleCols(s * m, m) = prop * Eigen::MatrixXd(sys.jac_control(xs[s], u_window[s]));
    prop = prop * Eigen::MatrixXd(sys.jac_state(xs[s], u_window[s]));
  }
  return out;
}

int regularity_rank(const ControlSystem& sys, const Vec& x, const std::vector<Vec>& u_window) {
  const Eigen::MatrixXd a = control_sensitivity(sys, x, u_window);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) rank += sv(i) > 1e-8 * sv(0);
  return rank;
}

// ---------------------------------------------------------------------------------------------

std::optional<Vec> steer(const ControlSystem& sys, const Vec& x, const Vec& target, double tol,
                         int iterations) {
  Vec u = sys.nominal_control;
  for (int it = 0; it <= iterations; ++it) {
    const Vec r = sys.forward(x, u) - target;
    if (!r.allFinite()) return std::nullopt;
    if (r.norm() <= tol) return u;
    if (it == iterations) break;
    const Eigen::MatrixXd ju = sys.jac_control(x, u);
    const Eigen::VectorXd du = ju.completeOrthogonalDecomposition().solve(Eigen::VectorXd(-r));
    const Vec next = sys.control_range.clamp(u + Vec(du));
    if ((next - u).norm() <= 1e-15 * (1 + u.norm())) break;
    u = next;
  }
  const Vec r = sys.forward(x, u) - target;
  if (r.norm() <= tol) return u;
  return std::nullopt;
}

std::vector<ChainStep> controlled_chain(const ControlSystem& sys, const GridSet& grid, const Vec& x,
                                        const Vec& y, double eps, const ChainOptions& opts) {
  if (eps < 0) throw PreconditionError("eps must be nonnegative");
  if (!grid.contains_point(x) || !grid.contains_point(y))
    throw PreconditionError("chain end points must lie in occupied cells");
  if (x == y) return {ChainStep{x, sys.nominal_control, 0.0}};

  struct Node {
    Vec point;
    int parent;
    Vec control;  // control applied at the parent
  };
  std::vector<Node> nodes{{x, -1, sys.nominal_control}};
  std::unordered_map<GridSet::Index, int> seen;
  OccupancyTable table(grid);
  const auto stencil = sys.control_range.stencil();
  // Exact steering tolerance: never looser than eps, never tighter than roundoff.
  const double steer_tol = std::max(eps, 1e-12 * (1 + y.norm()));

  std::deque<int> queue{0};
  while (!queue.empty()) {
    const int id = queue.front();
    queue.pop_front();
    const Vec p = nodes[static_cast<std::size_t>(id)].point;

    if (auto u = steer(sys, p, y, steer_tol, opts.steering_iterations)) {
      std::vector<int> path{id};
      while (nodes[static_cast<std::size_t>(path.back())].parent >= 0)
        path.push_back(nodes[static_cast<std::size_t>(path.back())].parent);
      std::reverse(path.begin(), path.end());
      std::vector<ChainStep> chain;
      for (std::size_t i = 0; i < path.size(); ++i) {
        const Node& n = nodes[static_cast<std::size_t>(path[i])];
        const Vec next = (i + 1 < path.size()) ? nodes[static_cast<std::size_t>(path[i + 1])].point : y;
        const Vec ctl = (i + 1 < path.size()) ? nodes[static_cast<std::size_t>(path[i + 1])].control : *u;
        chain.push_back({n.point, ctl, (sys.forward(n.point, ctl) - next).norm()});
      }
      chain.push_back({y, sys.nominal_control, 0.0});
      return chain;
    }
    if (static_cast<int>(nodes.size()) >= opts.max_length) continue;

    for (const Vec& u : stencil) {
      const Vec z = sys.forward(p, u);
      if (!z.allFinite()) continue;
      for (auto cell : table.centers_within(z, eps)) {
        if (seen.count(cell)) continue;
        seen.emplace(cell, static_cast<int>(nodes.size()));
        queue.push_back(static_cast<int>(nodes.size()));
        nodes.push_back({grid.center(cell), id, u});
      }
    }
  }
  throw DomainError("not chain-connected at this eps/resolution");
}

}  // namespace hypctrl
