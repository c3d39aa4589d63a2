#include "hypctrl/pressure.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <unordered_map>

namespace hypctrl {

std::string to_string(PressureMethod m) {
  switch (m) {
    case PressureMethod::Separated:
      return "separated";
    case PressureMethod::Ulam:
      return "ulam";
    case PressureMethod::VolumeDecay:
      return "volume-decay";
  }
  return "unknown";
}

double PressureEstimate::value_nats() const { return value * std::log(2.0); }

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("slope fit needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw PreconditionError("slope fit needs distinct abscissae");
  return sxy / sxx;
}

double tail_slope(const std::vector<std::pair<int, double>>& series, std::vector<int>* used) {
  if (series.empty()) throw PreconditionError("empty series");
  if (used) used->clear();
  if (series.size() == 1) {
    if (used) used->push_back(series[0].first);
    return series[0].second / series[0].first;
  }
  const std::size_t keep = std::max<std::size_t>(2, (series.size() + 1) / 2);
  std::vector<double> x, y;
  for (std::size_t i = series.size() - keep; i < series.size(); ++i) {
    x.push_back(series[i].first);
    y.push_back(series[i].second);
    if (used) used->push_back(series[i].first);
  }
  return ols_slope(x, y);
}

namespace {

void require_taus(const std::vector<int>& taus) {
  if (taus.empty()) throw PreconditionError("tau_list must be nonempty");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (taus[i] < 1) throw PreconditionError("tau_list entries must be positive");
    if (i > 0 && taus[i] <= taus[i - 1]) throw PreconditionError("tau_list must be strictly increasing");
  }
}

// log2(2^a + 2^b) without overflow.
double log2_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log2(1.0 + std::exp2(lo - hi));
}

std::uint64_t mix(std::uint64_t h, std::int64_t v) {
  h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

}  // namespace

// ---- separated sets ------------------------------------------------------------------------

namespace {

// Greedy separated subset of n candidate trajectories of length tau; state(i, t) gives the
// t-th point of candidate i. Bowen-close points are eps-close at t = 0 and t = tau - 1, so
// they share a hash cell up to one step in each of the 2d hashed coordinates.
template <class State>
std::vector<std::size_t> greedy_separated_impl(std::size_t n, int tau, int d, double eps, const State& state) {
  if (!(eps > 0)) throw PreconditionError("eps must be positive");
  using Key = std::array<std::int64_t, 2 * kMaxDim>;
  auto cell_of = [&](std::size_t i, Key& c) {
    const Vec& a = state(i, 0);
    const Vec& b = state(i, tau - 1);
    for (int k = 0; k < d; ++k) {
      c[k] = static_cast<std::int64_t>(std::floor(a(k) / eps));
      c[d + k] = static_cast<std::int64_t>(std::floor(b(k) / eps));
    }
  };
  auto key_of = [&](const Key& c) {
    std::uint64_t h = 0;
    for (int k = 0; k < 2 * d; ++k) h = mix(h, c[k]);
    return h;
  };
  auto close = [&](std::size_t i, std::size_t j) {
    for (int t = 0; t < tau; ++t)
      if ((state(i, t) - state(j, t)).norm() > eps) return false;
    return true;
  };

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  std::vector<std::size_t> chosen;
  int offsets = 1;
  for (int k = 0; k < 2 * d; ++k) offsets *= 3;
  Key c{}, nb{};
  for (std::size_t i = 0; i < n; ++i) {
    bool finite = true;
    for (int t = 0; t < tau; ++t) finite = finite && state(i, t).allFinite();
    if (!finite) continue;
    cell_of(i, c);
    bool separated = true;
    for (int o = 0; o < offsets && separated; ++o) {
      int code = o;
      for (int k = 0; k < 2 * d; ++k) {
        nb[k] = c[k] + (code % 3) - 1;
        code /= 3;
      }
      auto it = buckets.find(key_of(nb));
      if (it == buckets.end()) continue;
      for (auto j : it->second)
        if (close(i, j)) {
          separated = false;
          break;
        }
    }
    if (separated) {
      chosen.push_back(i);
      buckets[key_of(c)].push_back(i);
    }
  }
  return chosen;
}

}  // namespace

std::vector<std::size_t> greedy_separated(const std::vector<std::vector<Vec>>& trajectories, double eps) {
  if (trajectories.empty()) return {};
  const std::size_t tau = trajectories.front().size();
  if (tau == 0) throw PreconditionError("trajectories must be nonempty");
  for (const auto& tr : trajectories)
    if (tr.size() != tau) throw PreconditionError("trajectories must share one length");
  const int d = static_cast<int>(trajectories.front().front().size());
  return greedy_separated_impl(trajectories.size(), static_cast<int>(tau), d, eps,
                               [&](std::size_t i, int t) -> const Vec& { return trajectories[i][static_cast<std::size_t>(t)]; });
}

SeparatedSet max_separated_set(const ControlSystem& sys, const ControlSequence& u, int tau, double eps,
                               const GridSet& candidates) {
  if (candidates.empty()) throw PreconditionError("candidate set is empty");
  if (tau < 1) throw PreconditionError("tau must be at least 1");
  for (int t = 0; t + 1 < tau; ++t) sys.require_control(u.at(t));
  std::vector<std::vector<Vec>> traj(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Vec x = candidates.center(candidates.cells()[i]);
      traj[i].reserve(static_cast<std::size_t>(tau));
      for (int t = 0; t < tau; ++t) {
        traj[i].push_back(x);
        if (t + 1 < tau) x = sys.forward(x, u.at(t));
      }
    }
  });
  SeparatedSet out;
  out.tau = tau;
  out.eps = eps;
  out.chosen = greedy_separated(traj, eps);
  for (auto i : out.chosen) out.points.push_back(traj[i].front());
  out.maximal = true;
  return out;
}

PressureEstimate pressure_separated(const ControlSystem& sys, const std::vector<OrbitSegment>& orbits,
                                    const std::vector<int>& tau_list, double eps, int settle) {
  require_taus(tau_list);
  if (orbits.empty()) throw PreconditionError("no candidate orbits");
  const Vec& u0 = sys.nominal_control;

  // Per orbit: frame window and prefix sums of the one-step unstable log-determinants.
  struct Prepared {
    const OrbitSegment* orbit;
    int t_begin;
    int t_end;
    std::vector<double> prefix;
  };
  std::vector<Prepared> prep(orbits.size());
  SplittingOptions sopts;
  sopts.settle = settle;
  parallel_for(orbits.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto& o = orbits[i];
      for (int t = o.start_time; t <= o.end_time(); ++t)
        if (o.controls.at(t) != u0) throw PreconditionError("candidate orbits must run under the nominal control");
      const Splitting split = estimate_splitting(sys, o, sopts);
      const auto steps = unstable_log_det_steps(sys, o, split, split.t_begin, split.size() - 1);
      Prepared p{&o, split.t_begin, split.t_end(), {0.0}};
      for (double s : steps) p.prefix.push_back(p.prefix.back() + s);
      prep[i] = std::move(p);
    }
  });

  PressureEstimate est;
  est.method = PressureMethod::Separated;
  const int d = sys.state_dim;
  for (int tau : tau_list) {
    // Candidate (orbit, start) pairs whose frames cover [start; start + tau].
    std::vector<std::pair<std::uint32_t, int>> cand;
    for (std::size_t o = 0; o < prep.size(); ++o)
      for (int s = prep[o].t_begin; s + tau <= prep[o].t_end; ++s) cand.emplace_back(static_cast<std::uint32_t>(o), s);
    if (cand.empty()) throw PreconditionError("orbit windows too short for tau=" + std::to_string(tau));
    const auto chosen = greedy_separated_impl(cand.size(), tau, d, eps, [&](std::size_t i, int t) -> const Vec& {
      return prep[cand[i].first].orbit->at(cand[i].second + t);
    });
    if (chosen.empty()) throw DomainError("empty separated set");
    double sum = -std::numeric_limits<double>::infinity();
    for (auto i : chosen) {
      const auto& p = prep[cand[i].first];
      const auto k = static_cast<std::size_t>(cand[i].second - p.t_begin);
      sum = log2_add(sum, -(p.prefix[k + static_cast<std::size_t>(tau)] - p.prefix[k]));
    }
    est.series.emplace_back(tau, sum);
    est.samples += cand.size();
  }
  est.value = tail_slope(est.series, &est.fit_taus);
  return est;
}

PressureEstimate pressure_separated(const ControlSystem& sys, const GridSet& fiber,
                                    const std::vector<int>& tau_list, double eps, const SeparatedOptions& opts) {
  require_taus(tau_list);
  if (fiber.empty()) throw PreconditionError("fiber is empty");
  // Refining keeps the covered set and multiplies the distinct raster start points.
  GridSet starts = fiber;
  while (starts.size() < opts.orbit_count && starts.resolution() < (1 << 14)) starts = starts.refined();
  auto orbits = sample_invariant_orbits(sys, starts, opts.orbit_count, opts.half_window);
  if (orbits.empty()) throw DomainError("no orbit of the fiber raster could be shadowed");
  auto est = pressure_separated(sys, orbits, tau_list, eps, opts.settle);
  est.resolution = fiber.resolution();
  return est;
}

// ---- Ulam ------------------------------------------------------------------------------------

double TransferMatrix::row_sum(GridSet::Index i) const {
  double s = 0.0;
  for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += vals[k];
  return s;
}

TransferMatrix ulam_matrix(const ControlSystem& sys, const Vec& u_fixed, const Box& region, int resolution,
                           int samples_per_cell) {
  sys.require_control(u_fixed);
  if (region.dim() != sys.state_dim) throw PreconditionError("region dimension differs from the state dimension");
  const GridSet grid(region, resolution);
  const int d = grid.dim();
  const int sub = static_cast<int>(std::lround(std::pow(samples_per_cell, 1.0 / d)));
  if (sub < 1 || std::pow(sub, d) != samples_per_cell)
    throw PreconditionError("samples_per_cell must be a perfect d-th power");
  const GridSet::Index n = grid.total_cells();
  if (n >= std::numeric_limits<std::uint32_t>::max()) throw PreconditionError("grid too fine for a transfer matrix");
  const Vec h = grid.cell_size();

  struct Chunk {
    std::vector<std::uint32_t> nnz;
    std::vector<std::uint32_t> cols;
    std::vector<float> vals;
  };
  std::map<std::size_t, Chunk> chunks;
  std::mutex lock;
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t b, std::size_t e) {
    Chunk ch;
    ch.nnz.reserve(e - b);
    std::vector<std::uint32_t> hits;
    Vec x(d);
    for (std::size_t cell = b; cell < e; ++cell) {
      const Vec lo = grid.cell_box(cell).lo;
      hits.clear();
      for (int s = 0; s < samples_per_cell; ++s) {
        int code = s;
        for (int k = 0; k < d; ++k) {
          x(k) = lo(k) + h(k) * ((code % sub) + 0.5) / sub;
          code /= sub;
        }
        const Vec y = sys.forward(x, u_fixed);
        if (!y.allFinite()) continue;
        if (auto j = grid.locate(y)) hits.push_back(static_cast<std::uint32_t>(*j));
      }
      std::sort(hits.begin(), hits.end());
      std::uint32_t row = 0;
      for (std::size_t k = 0; k < hits.size();) {
        std::size_t m = k;
        while (m < hits.size() && hits[m] == hits[k]) ++m;
        ch.cols.push_back(hits[k]);
        ch.vals.push_back(static_cast<float>(static_cast<double>(m - k) / samples_per_cell));
        ++row;
        k = m;
      }
      ch.nnz.push_back(row);
    }
    std::lock_guard<std::mutex> g(lock);
    chunks.emplace(b, std::move(ch));
  });

  TransferMatrix p;
  p.cells = n;
  p.row_ptr.reserve(static_cast<std::size_t>(n) + 1);
  p.row_ptr.push_back(0);
  for (auto& [b, ch] : chunks) {
    for (auto r : ch.nnz) p.row_ptr.push_back(p.row_ptr.back() + r);
    p.cols.insert(p.cols.end(), ch.cols.begin(), ch.cols.end());
    p.vals.insert(p.vals.end(), ch.vals.begin(), ch.vals.end());
  }
  return p;
}

std::pair<double, int> leading_eigenvalue(const TransferMatrix& p, const PowerOptions& opts) {
  const auto n = static_cast<std::size_t>(p.cells);
  if (p.row_ptr.size() != n + 1) throw PreconditionError("malformed transfer matrix");

  // Cells on a bi-infinite path: repeatedly strip cells without successors or predecessors.
  std::vector<std::uint32_t> in(n, 0), out(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (auto k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k)
      if (p.vals[k] > 0) {
        ++out[i];
        ++in[p.cols[k]];
      }
  std::vector<std::uint8_t> alive(n, 1);
  std::vector<std::uint32_t> queue;
  for (std::size_t i = 0; i < n; ++i)
    if (in[i] == 0 || out[i] == 0) {
      alive[i] = 0;
      queue.push_back(static_cast<std::uint32_t>(i));
    }
  // Predecessor lists are only needed for the cells that get removed for lack of successors.
  std::vector<std::uint64_t> tptr(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (auto k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k)
      if (p.vals[k] > 0) ++tptr[p.cols[k] + 1];
  for (std::size_t i = 0; i < n; ++i) tptr[i + 1] += tptr[i];
  std::vector<std::uint32_t> pred(tptr[n]);
  {
    std::vector<std::uint64_t> fill(tptr.begin(), tptr.end() - 1);
    for (std::size_t i = 0; i < n; ++i)
      for (auto k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k)
        if (p.vals[k] > 0) pred[fill[p.cols[k]]++] = static_cast<std::uint32_t>(i);
  }
  while (!queue.empty()) {
    const std::uint32_t c = queue.back();
    queue.pop_back();
    for (auto k = p.row_ptr[c]; k < p.row_ptr[c + 1]; ++k) {
      const auto j = p.cols[k];
      if (p.vals[k] > 0 && alive[j] && --in[j] == 0) {
        alive[j] = 0;
        queue.push_back(j);
      }
    }
    for (auto k = tptr[c]; k < tptr[c + 1]; ++k) {
      const auto j = pred[k];
      if (alive[j] && --out[j] == 0) {
        alive[j] = 0;
        queue.push_back(j);
      }
    }
  }

  std::vector<std::int64_t> local(n, -1);
  std::vector<std::uint32_t> core;
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) {
      local[i] = static_cast<std::int64_t>(core.size());
      core.push_back(static_cast<std::uint32_t>(i));
    }
  if (core.empty()) return {0.0, 0};

  std::vector<std::uint64_t> cptr{0};
  std::vector<std::uint32_t> ccol;
  std::vector<double> cval;
  for (auto i : core) {
    for (auto k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k)
      if (p.vals[k] > 0 && alive[p.cols[k]]) {
        ccol.push_back(static_cast<std::uint32_t>(local[p.cols[k]]));
        cval.push_back(p.vals[k]);
      }
    cptr.push_back(ccol.size());
  }

  // Left iteration m <- m P / |m P|_1; |m P|_1 converges to the Perron root.
  const std::size_t m = core.size();
  std::vector<double> a(m, 1.0 / static_cast<double>(m)), b(m);
  double lambda = 0.0;
  int it = 0;
  while (it < opts.max_iterations) {
    ++it;
    std::fill(b.begin(), b.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double w = a[i];
      if (w == 0.0) continue;
      for (auto k = cptr[i]; k < cptr[i + 1]; ++k) b[ccol[k]] += w * cval[k];
    }
    const double norm = std::accumulate(b.begin(), b.end(), 0.0);
    if (!(norm > 0)) return {0.0, it};
    double change = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      b[i] /= norm;
      change += std::abs(b[i] - a[i]);
    }
    a.swap(b);
    const bool settled = std::abs(norm - lambda) <= opts.tolerance * norm && change <= std::sqrt(opts.tolerance);
    lambda = norm;
    if (settled) break;
  }
  return {lambda, it};
}

PressureEstimate ulam_escape_rate(const ControlSystem& sys, const Vec& u_fixed, const Box& region, int resolution,
                                  int samples_per_cell, const PowerOptions& opts) {
  const TransferMatrix p = ulam_matrix(sys, u_fixed, region, resolution, samples_per_cell);
  const auto [lambda, it] = leading_eigenvalue(p, opts);
  if (lambda < 1e-12) throw DomainError("region does not isolate an invariant set");
  PressureEstimate est;
  est.method = PressureMethod::Ulam;
  est.eigenvalue = lambda;
  est.iterations = it;
  est.value = std::log2(lambda);
  est.resolution = resolution;
  est.samples = static_cast<std::uint64_t>(p.cells) * static_cast<std::uint64_t>(samples_per_cell);
  return est;
}

// ---- volume decay ------------------------------------------------------------------------------

namespace {

// survivors[k] = number of samples whose survival time is exactly k (k = 0..tau_max).
PressureEstimate decay_fit(const std::vector<std::uint64_t>& hist, std::uint64_t samples, double box_volume,
                           const std::vector<int>& tau_list, const VolumeDecayOptions& opts) {
  const int tmax = tau_list.back();
  auto series_from = [&](const std::vector<std::uint64_t>& h, bool& truncated) {
    // alive[t] = samples with survival time >= t.
    std::vector<std::uint64_t> alive(static_cast<std::size_t>(tmax) + 2, 0);
    for (int t = tmax; t >= 0; --t) alive[t] = alive[t + 1] + h[t];
    std::vector<std::pair<int, double>> s;
    truncated = false;
    for (int tau : tau_list) {
      if (alive[tau] == 0) {
        truncated = true;
        break;
      }
      s.emplace_back(tau, std::log2(box_volume * static_cast<double>(alive[tau]) / static_cast<double>(samples)));
    }
    return s;
  };

  PressureEstimate est;
  est.method = PressureMethod::VolumeDecay;
  est.samples = samples;
  est.series = series_from(hist, est.truncated);
  if (est.series.empty()) throw DomainError("no survivors at the smallest tau");
  est.value = tail_slope(est.series, &est.fit_taus);

  // Bootstrap: multinomial resampling of the survival-time histogram by chained binomials.
  if (opts.bootstrap > 1 && est.series.size() >= 2) {
    std::mt19937_64 rng(substream_seed(opts.seed, "volume_decay.bootstrap"));
    std::vector<double> slopes;
    std::vector<std::uint64_t> h(hist.size());
    for (int r = 0; r < opts.bootstrap; ++r) {
      std::uint64_t left = samples;
      double mass = 1.0;
      for (std::size_t k = 0; k < hist.size(); ++k) {
        const double pk = static_cast<double>(hist[k]) / static_cast<double>(samples);
        if (k + 1 == hist.size() || mass <= 0) {
          h[k] = left;
        } else {
          std::binomial_distribution<std::uint64_t> bin(left, std::clamp(pk / mass, 0.0, 1.0));
          h[k] = bin(rng);
        }
        left -= h[k];
        mass -= pk;
      }
      bool trunc = false;
      auto s = series_from(h, trunc);
      if (s.size() < est.series.size()) continue;
      slopes.push_back(tail_slope(s));
    }
    if (slopes.size() >= 2) {
      const double mean = std::accumulate(slopes.begin(), slopes.end(), 0.0) / static_cast<double>(slopes.size());
      double ss = 0.0;
      for (double s : slopes) ss += (s - mean) * (s - mean);
      est.std_error = std::sqrt(ss / static_cast<double>(slopes.size() - 1));
    }
  }
  return est;
}

template <class Inside>
std::vector<std::uint64_t> survival_histogram(const ControlSystem& sys, const ControlSequence& u, const Vec& lo,
                                              const Vec& hi, int tmax, std::uint64_t samples, std::uint64_t seed,
                                              const Inside& inside) {
  constexpr std::uint64_t kBlock = 1 << 14;
  const std::uint64_t blocks = (samples + kBlock - 1) / kBlock;
  const int d = static_cast<int>(lo.size());
  std::vector<std::vector<std::uint64_t>> per(blocks, std::vector<std::uint64_t>(static_cast<std::size_t>(tmax) + 1, 0));
  parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      std::mt19937_64 rng(substream_seed(seed, "volume_decay", b));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const std::uint64_t n = std::min(kBlock, samples - b * kBlock);
      Vec x(d);
      for (std::uint64_t s = 0; s < n; ++s) {
        for (int k = 0; k < d; ++k) x(k) = lo(k) + (hi(k) - lo(k)) * unit(rng);
        // Survival time: largest k <= tmax with x_t inside for all t < k.
        int k = 0;
        while (k < tmax && x.allFinite() && inside(x)) {
          ++k;
          if (k < tmax) x = sys.forward(x, u.at(k - 1));
        }
        ++per[b][static_cast<std::size_t>(k)];
      }
    }
  });
  std::vector<std::uint64_t> hist(static_cast<std::size_t>(tmax) + 1, 0);
  for (const auto& h : per)
    for (std::size_t k = 0; k < h.size(); ++k) hist[k] += h[k];
  return hist;
}

void require_decay(const ControlSystem& sys, const ControlSequence& u, const std::vector<int>& tau_list,
                   const VolumeDecayOptions& opts) {
  require_taus(tau_list);
  if (opts.samples < 100000) throw PreconditionError("volume decay needs at least 1e5 samples");
  for (int t = 0; t + 1 < tau_list.back(); ++t) sys.require_control(u.at(t));
}

}  // namespace

PressureEstimate volume_decay_escape_rate(const ControlSystem& sys, const ControlSequence& u, const Box& region,
                                          const std::vector<int>& tau_list, const VolumeDecayOptions& opts) {
  require_decay(sys, u, tau_list, opts);
  if (region.dim() != sys.state_dim) throw PreconditionError("region dimension differs from the state dimension");
  const auto hist = survival_histogram(sys, u, region.lo, region.hi, tau_list.back(), opts.samples, opts.seed,
                                       [&](const Vec& x) { return region.contains(x); });
  return decay_fit(hist, opts.samples, region.volume(), tau_list, opts);
}

PressureEstimate volume_decay_escape_rate(const ControlSystem& sys, const ControlSequence& u, const GridSet& fiber,
                                          double eps, const std::vector<int>& tau_list,
                                          const VolumeDecayOptions& opts) {
  require_decay(sys, u, tau_list, opts);
  if (fiber.empty()) throw PreconditionError("fiber is empty");
  if (eps < 0) throw PreconditionError("eps must be nonnegative");
  const OccupancyTable table(fiber);
  const double reach = eps + fiber.half_diagonal();
  const int d = fiber.dim();
  Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  for (auto c : fiber.cells()) {
    const Vec x = fiber.center(c);
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  lo.array() -= reach;
  hi.array() += reach;
  const auto hist = survival_histogram(sys, u, lo, hi, tau_list.back(), opts.samples, opts.seed,
                                       [&](const Vec& x) { return any_center_within(table, x, reach); });
  auto est = decay_fit(hist, opts.samples, (hi - lo).prod(), tau_list, opts);
  est.resolution = fiber.resolution();
  return est;
}

double invariance_entropy_lower_bound(double pressure_bits) {
  if (!std::isfinite(pressure_bits)) throw PreconditionError("pressure must be finite");
  return std::max(0.0, -pressure_bits);
}

double invariance_entropy_lower_bound(const PressureEstimate& pressure) {
  return invariance_entropy_lower_bound(pressure.value);
}

// ---- spanning sets -------------------------------------------------------------------------------

namespace {

struct Bits {
  std::vector<std::uint64_t> w;
  explicit Bits(std::size_t n = 0) : w((n + 63) / 64, 0) {}
  void set(std::size_t i) { w[i / 64] |= 1ULL << (i % 64); }
  bool test(std::size_t i) const { return (w[i / 64] >> (i % 64)) & 1ULL; }
  std::size_t count() const {
    std::size_t c = 0;
    for (auto x : w) c += static_cast<std::size_t>(__builtin_popcountll(x));
    return c;
  }
  std::size_t count_and_not(const Bits& covered) const {
    std::size_t c = 0;
    for (std::size_t k = 0; k < w.size(); ++k) c += static_cast<std::size_t>(__builtin_popcountll(w[k] & ~covered.w[k]));
    return c;
  }
  bool intersects(const Bits& o) const {
    for (std::size_t k = 0; k < w.size(); ++k)
      if (w[k] & o.w[k]) return true;
    return false;
  }
  void unite(const Bits& o) {
    for (std::size_t k = 0; k < w.size(); ++k) w[k] |= o.w[k];
  }
};

class CoverSearch {
 public:
  CoverSearch(std::vector<Bits> sets, std::size_t elements, std::uint64_t node_limit)
      : sets_(std::move(sets)), n_(elements), limit_(node_limit), covers_(elements) {
    for (std::size_t e = 0; e < n_; ++e) {
      covers_[e] = Bits(sets_.size());
      for (std::size_t s = 0; s < sets_.size(); ++s)
        if (sets_[s].test(e)) covers_[e].set(s);
    }
  }

  std::vector<std::size_t> greedy() const {
    Bits covered(n_);
    std::vector<std::size_t> pick;
    while (covered.count() < n_) {
      std::size_t best = 0, gain = 0;
      for (std::size_t s = 0; s < sets_.size(); ++s) {
        const auto g = sets_[s].count_and_not(covered);
        if (g > gain) {
          gain = g;
          best = s;
        }
      }
      pick.push_back(best);
      covered.unite(sets_[best]);
    }
    return pick;
  }

  // Uncovered elements no two of which share a covering set.
  int packing_bound(const Bits& covered) const {
    Bits used(sets_.size());
    int k = 0;
    for (std::size_t e = 0; e < n_; ++e) {
      if (covered.test(e) || covers_[e].intersects(used)) continue;
      used.unite(covers_[e]);
      ++k;
    }
    return k;
  }

  void solve(std::vector<std::size_t> upper) {
    best_ = std::move(upper);
    Bits covered(n_);
    std::vector<std::size_t> cur;
    exact_ = true;
    branch(covered, cur);
  }

  const std::vector<std::size_t>& best() const { return best_; }
  bool exact() const { return exact_; }

 private:
  void branch(const Bits& covered, std::vector<std::size_t>& cur) {
    if (++nodes_ > limit_) {
      exact_ = false;
      return;
    }
    // Uncovered element with the fewest covering sets.
    std::size_t pivot = n_, fewest = std::numeric_limits<std::size_t>::max();
    for (std::size_t e = 0; e < n_; ++e) {
      if (covered.test(e)) continue;
      const auto c = covers_[e].count();
      if (c < fewest) {
        fewest = c;
        pivot = e;
      }
    }
    if (pivot == n_) {
      if (cur.size() < best_.size()) best_ = cur;
      return;
    }
    if (cur.size() + static_cast<std::size_t>(packing_bound(covered)) >= best_.size()) return;
    std::vector<std::pair<std::size_t, std::size_t>> opts;
    for (std::size_t s = 0; s < sets_.size(); ++s)
      if (covers_[pivot].test(s)) opts.emplace_back(sets_[s].count_and_not(covered), s);
    std::sort(opts.begin(), opts.end(), [](auto a, auto b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (auto [gain, s] : opts) {
      if (!exact_) return;
      Bits next = covered;
      next.unite(sets_[s]);
      cur.push_back(s);
      branch(next, cur);
      cur.pop_back();
    }
  }

  std::vector<Bits> sets_;
  std::size_t n_;
  std::uint64_t limit_;
  std::vector<Bits> covers_;
  std::vector<std::size_t> best_;
  std::uint64_t nodes_ = 0;
  bool exact_ = true;
};

}  // namespace

SpanningResult spanning_count_oracle(const ControlSystem& sys, const GridSet& K, const GridSet& Q, int tau,
                                     const std::vector<ControlSequence>& codebook, const SpanningOptions& opts) {
  if (K.empty()) throw PreconditionError("K is empty");
  if (Q.empty()) throw PreconditionError("Q is empty");
  if (codebook.empty()) throw PreconditionError("codebook is empty");
  if (tau < 0) throw PreconditionError("tau must be nonnegative");
  const std::size_t n = K.size();

  std::vector<Bits> sets(codebook.size(), Bits(n));
  parallel_for(codebook.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t s = b; s < e; ++s) {
      for (int t = 0; t < tau; ++t) sys.require_control(codebook[s].at(t));
      for (std::size_t i = 0; i < n; ++i) {
        Vec x = K.center(K.cells()[i]);
        bool ok = Q.contains_point(x);
        for (int t = 0; t < tau && ok; ++t) {
          x = sys.forward(x, codebook[s].at(t));
          ok = x.allFinite() && Q.contains_point(x);
        }
        if (ok) sets[s].set(i);
      }
    }
  });
  Bits any(n);
  for (const auto& s : sets) any.unite(s);
  if (any.count() < n) throw DomainError("pair (K,Q) not admissible under codebook");

  CoverSearch search(sets, n, opts.node_limit);
  const auto greedy = search.greedy();
  search.solve(greedy);
  SpanningResult r;
  r.greedy_count = static_cast<int>(greedy.size());
  r.chosen = search.best();
  std::sort(r.chosen.begin(), r.chosen.end());
  r.count = static_cast<int>(r.chosen.size());
  r.exact = search.exact();
  r.lower_bound = r.exact ? r.count : search.packing_bound(Bits(n));
  return r;
}

std::vector<ControlSequence> product_codebook(const std::vector<Vec>& values, int tau) {
  if (values.empty()) throw PreconditionError("no control values");
  if (tau < 1) throw PreconditionError("tau must be at least 1");
  const double total = std::pow(static_cast<double>(values.size()), tau);
  if (total > 1e6) throw PreconditionError("codebook too large");
  std::vector<ControlSequence> out;
  std::vector<std::size_t> digit(static_cast<std::size_t>(tau), 0);
  for (std::size_t c = 0; c < static_cast<std::size_t>(total); ++c) {
    std::vector<Vec> seq;
    for (int t = 0; t < tau; ++t) seq.push_back(values[digit[t]]);
    out.emplace_back(std::move(seq), 0, ControlSequence::Extension::ConstantHold);
    for (int t = tau - 1; t >= 0; --t) {
      if (++digit[t] < values.size()) break;
      digit[t] = 0;
    }
  }
  return out;
}

// ---- periodic structure ------------------------------------------------------------------------

double morse_exponent(const ControlSystem& sys, const std::vector<ChainStep>& chain, const Splitting& split,
                      int t0) {
  if (chain.empty()) throw PreconditionError("chain is empty");
  const int tau = static_cast<int>(chain.size());
  double sum = 0.0;
  for (int t = 0; t < tau; ++t) {
    if (!split.covers(t0 + t)) throw PreconditionError("no splitting frame at chain step " + std::to_string(t));
    const Mat& e = split.unstable_at(t0 + t);
    if (e.cols() == 0) continue;
    const Mat m = sys.jac_state(chain[t].point, chain[t].control) * e;
    sum += 0.5 * std::log2((m.transpose() * m).determinant());
  }
  return sum / tau;
}

Splitting periodic_chain_splitting(const ControlSystem& sys, const std::vector<ChainStep>& chain, int settle) {
  if (chain.empty()) throw PreconditionError("chain is empty");
  const int tau = static_cast<int>(chain.size());
  std::vector<Vec> controls;
  for (const auto& c : chain) controls.push_back(c.control);
  OrbitSegment ext;
  ext.start_time = -settle;
  ext.controls = ControlSequence::periodic(controls);
  for (int t = -settle; t <= tau + settle; ++t) ext.states.push_back(chain[static_cast<std::size_t>(((t % tau) + tau) % tau)].point);
  SplittingOptions o;
  o.settle = settle;
  return estimate_splitting(sys, ext, o);
}

double data_rate_R0(const ControlSystem& sys, const OrbitSegment& orbit) {
  const int tau = orbit.size();
  if (tau < 1) throw PreconditionError("periodic orbit is empty");
  for (int t = 0; t < tau; ++t) {
    const Vec& x = orbit.states[static_cast<std::size_t>(t)];
    const Vec& next = orbit.states[static_cast<std::size_t>((t + 1) % tau)];
    const double res = (sys.step(x, orbit.controls.at(orbit.start_time + t)) - next).norm();
    if (!(res < 1e-12 * (1 + next.norm())))
      throw PreconditionError("orbit is not periodic (residual " + std::to_string(res) + ")");
  }
  Mat m = Mat::Identity(sys.state_dim, sys.state_dim);
  for (int t = 0; t < tau; ++t)
    m = sys.jac_state(orbit.states[static_cast<std::size_t>(t)], orbit.controls.at(orbit.start_time + t)) * m;
  Eigen::EigenSolver<Mat> es(m, false);
  double sum = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double a = std::abs(es.eigenvalues()(i));
    if (std::abs(a - 1.0) < 1e-8) throw DomainError("orbit not hyperbolic");
    if (a > 1.0) sum += std::log2(a);
  }
  return sum / tau;
}

// ---- combinatorial utilities --------------------------------------------------------------------

int subadditive_select(const CocycleFn& v, int n, double eps, double omega) {
  if (n < 1) throw PreconditionError("n must be positive");
  if (!(omega > 0) || !(eps > 0) || !(eps < 2 * omega)) throw PreconditionError("need 0 < eps < 2 omega");
  for (int s = 0; s < n; ++s)
    for (int k = 1; s + k <= n; ++k)
      if (!(std::abs(v(k, s)) <= omega * k * (1 + 1e-12)))
        throw PreconditionError("|v_k|/k exceeds omega at k=" + std::to_string(k) + ", s=" + std::to_string(s));
  const double sigma = v(n, 0) / n;
  // Last k < n whose average drops to sigma - eps; starting there every window average stays above.
  for (int k = n - 1; k > 0; --k)
    if (v(k, 0) / k <= sigma - eps) return k;
  return 0;
}

std::vector<std::pair<int, int>> partition_indices(int n, int m) {
  if (m < 1 || m >= n) throw PreconditionError("need 0 < m < n");
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < m; ++i) {
    const int q = (n - i) / m;
    for (int j = 0; j < q; ++j) out.emplace_back(i, j);
  }
  return out;
}

}  // namespace hypctrl
