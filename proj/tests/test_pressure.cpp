#include "doctest.h"
#include "hypctrl/pressure.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace hypctrl;

namespace {
Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Box henon_square() { return Box::centered(v2(0, 0), henon_square_side()); }
Box interval(double lo, double hi) { return Box{v1(lo), v1(hi)}; }

// Unstable eigenvalue modulus of Df at the Hénon fixed point, by the eigensolver.
double henon_unstable_modulus() {
  const double x = henon_fixed_points().first(0);
  Eigen::Matrix2d a;
  a << -2 * x, -0.3, 1, 0;
  Eigen::EigenSolver<Eigen::Matrix2d> es(a);
  return std::max(std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(1)));
}

std::pair<Vec, Vec> two_cycle() {
  const double s = 1.3, p = 1.69 - 5.0;
  const double disc = std::sqrt(s * s - 4 * p);
  const double x1 = (s + disc) / 2, x2 = (s - disc) / 2;
  return {v2(x1, x2), v2(x2, x1)};
}

OrbitSegment constant_orbit(const Vec& x, const Vec& u, int half) {
  OrbitSegment o;
  o.start_time = -half;
  o.states.assign(static_cast<std::size_t>(2 * half + 1), x);
  o.controls = ControlSequence::constant(u);
  return o;
}
}  // namespace

TEST_CASE("tail slope fits the last half of the series") {
  std::vector<std::pair<int, double>> s{{1, 100.0}, {2, 7.0}, {3, 3.0 - 0.5 * 3}, {4, 3.0 - 0.5 * 4}, {5, 3.0 - 0.5 * 5}};
  std::vector<int> used;
  CHECK(tail_slope(s, &used) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(used == std::vector<int>{3, 4, 5});
  CHECK_THROWS_AS(ols_slope({1.0, 1.0}, {0.0, 1.0}), PreconditionError);
}

TEST_CASE("greedy separated sets are separated and maximal") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(-1, 1);
  const double eps = 0.15;
  std::vector<std::vector<Vec>> traj;
  for (int i = 0; i < 400; ++i) {
    std::vector<Vec> tr;
    for (int t = 0; t < 3; ++t) tr.push_back(v2(unit(rng), unit(rng)));
    traj.push_back(tr);
  }
  auto bowen = [&](std::size_t i, std::size_t j) {
    double m = 0;
    for (int t = 0; t < 3; ++t) m = std::max(m, (traj[i][t] - traj[j][t]).norm());
    return m;
  };
  const auto chosen = greedy_separated(traj, eps);
  for (std::size_t a = 0; a < chosen.size(); ++a)
    for (std::size_t b = a + 1; b < chosen.size(); ++b) CHECK(bowen(chosen[a], chosen[b]) > eps);
  // Brute-force greedy replay: same choice in the same order.
  std::vector<std::size_t> replay;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    bool ok = true;
    for (auto j : replay) ok = ok && bowen(i, j) > eps;
    if (ok) replay.push_back(i);
  }
  CHECK(chosen == replay);
}

TEST_CASE("maximal separated sets of grid centers") {
  auto toy = linear_toy();
  auto zero = ControlSequence::constant(v2(0, 0));
  const Box sq = Box::centered(v2(0, 0), 2.0);
  auto grid = GridSet::full(sq, 8);
  CHECK(max_separated_set(toy, zero, 1, 10.0, grid).points.size() == 1);
  // Spacing 0.25 exceeds eps: nothing to remove.
  CHECK(max_separated_set(toy, zero, 1, 0.2, grid).points.size() == grid.size());

  // Cells along the unstable axis (y index fixed), spacing 2/2048 ~ 1e-3 on [-1,1].
  const int res = 2048;
  std::vector<GridSet::Index> cells;
  for (int i = 0; i < res; ++i) cells.push_back(static_cast<GridSet::Index>(i) + static_cast<GridSet::Index>(res) * (res / 2));
  GridSet line(Box{v2(-1, -1e-6), v2(1, 1e-6)}, res, cells);
  const int tau = 5;
  const double eps = 0.1;
  auto f = max_separated_set(toy, zero, tau, eps, line);
  // Oracle: greedy over the 1-D centers with Bowen distance 2^(tau-1) |dx|.
  std::vector<double> picked;
  for (int i = 0; i < res; ++i) {
    const double x = -1 + (i + 0.5) * 2.0 / res;
    bool ok = true;
    for (double p : picked) ok = ok && std::ldexp(std::abs(x - p), tau - 1) > eps;
    if (ok) picked.push_back(x);
  }
  CHECK(f.points.size() == picked.size());
  const double bracket = 2.0 * std::ldexp(1.0, tau - 1) / eps;
  CHECK(f.points.size() >= bracket / 2);
  CHECK(f.points.size() <= bracket * 2);
  // One more step roughly doubles the count; the grid spacing makes the ratio coarse.
  auto g = max_separated_set(toy, zero, tau + 1, eps, line);
  const double ratio = static_cast<double>(g.points.size()) / static_cast<double>(f.points.size());
  CHECK(ratio > 1.5);
  CHECK(ratio < 2.5);
}

TEST_CASE("separated-set pressure on single orbits") {
  auto sys = henon_planar(0.08);
  const Vec xs = henon_fixed_points().first;
  std::vector<OrbitSegment> fixed{constant_orbit(xs, v2(0, 0), 40)};
  auto est = pressure_separated(sys, fixed, {1, 2, 3, 4, 5, 6}, 0.1);
  CHECK(est.value == doctest::Approx(-std::log2(henon_unstable_modulus())).epsilon(1e-9));
  CHECK(est.method == PressureMethod::Separated);
  CHECK(est.fit_taus == std::vector<int>{4, 5, 6});

  auto toy = linear_toy();
  auto origin = pressure_separated(toy, {constant_orbit(v2(0, 0), v2(0, 0), 40)}, {2, 4, 8}, 0.1);
  CHECK(std::abs(origin.value + 1.0) < 1e-12);
  for (auto [tau, y] : origin.series) CHECK(std::abs(y + tau) < 1e-9);

  CHECK_THROWS_AS(pressure_separated(toy, {constant_orbit(v2(0, 0), v2(0.1, 0), 40)}, {2}, 0.1),
                  PreconditionError);
  CHECK_THROWS_AS(pressure_separated(toy, {constant_orbit(v2(0, 0), v2(0, 0), 23)}, {8}, 0.1),
                  PreconditionError);
}

TEST_CASE("separated-set sums shrink as eps grows") {
  auto sys = henon_planar(0.08);
  auto lam = maximal_invariant(sys, v2(0, 0), henon_square(), 512);
  auto orbits = sample_invariant_orbits(sys, lam, 300, 40);
  REQUIRE(orbits.size() >= 200);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.1, 0.2, 0.4, 0.8}) {
    const double y = pressure_separated(sys, orbits, {4}, eps).series.front().second;
    CHECK(y <= prev);
    prev = y;
  }
}

TEST_CASE("Ulam matrix entries match an independent recount") {
  auto sys = henon_planar(0.08);
  const Box sq = henon_square();
  const int res = 16;
  auto p = ulam_matrix(sys, v2(0, 0), sq, res, 9);
  const GridSet grid(sq, res);
  REQUIRE(p.row_ptr.size() == grid.total_cells() + 1);
  for (GridSet::Index i = 0; i < grid.total_cells(); ++i) {
    CHECK(p.row_sum(i) <= 1.0 + 1e-6);
    std::map<GridSet::Index, int> counts;
    const Box b = grid.cell_box(i);
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 3; ++c) {
        const Vec x = b.lo + (b.hi - b.lo).cwiseProduct(v2((a + 0.5) / 3, (c + 0.5) / 3));
        const Vec y = v2(5 - 0.3 * x(1) - x(0) * x(0), x(0));
        if (sq.contains(y)) {
          const int ix = std::min(res - 1, static_cast<int>((y(0) - sq.lo(0)) / (sq.hi(0) - sq.lo(0)) * res));
          const int iy = std::min(res - 1, static_cast<int>((y(1) - sq.lo(1)) / (sq.hi(1) - sq.lo(1)) * res));
          ++counts[static_cast<GridSet::Index>(ix + res * iy)];
        }
      }
    REQUIRE(p.row_ptr[i + 1] - p.row_ptr[i] == counts.size());
    std::size_t k = p.row_ptr[i];
    for (auto [j, n] : counts) {
      CHECK(p.cols[k] == j);
      CHECK(p.vals[k] == doctest::Approx(n / 9.0).epsilon(1e-6));
      CHECK(p.vals[k] > 0);
      CHECK(p.vals[k] <= 1);
      ++k;
    }
  }
  CHECK_THROWS_AS(ulam_matrix(sys, v2(0, 0), sq, res, 10), PreconditionError);
}

TEST_CASE("power iteration agrees with a dense eigensolver") {
  auto sys = henon_planar(0.08);
  auto p = ulam_matrix(sys, v2(0, 0), henon_square(), 16, 100);
  const auto n = static_cast<Eigen::Index>(p.cells);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (auto k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) dense(i, p.cols[k]) = p.vals[k];
  Eigen::EigenSolver<Eigen::MatrixXd> es(dense, false);
  double rho = 0;
  for (Eigen::Index i = 0; i < n; ++i) rho = std::max(rho, std::abs(es.eigenvalues()(i)));
  const auto [lambda, it] = leading_eigenvalue(p);
  CHECK(it < 100000);
  CHECK(lambda == doctest::Approx(rho).epsilon(1e-7));
}

TEST_CASE("Ulam escape rates") {
  auto toy = linear_toy();
  auto lin = ulam_escape_rate(toy, v2(0, 0), Box::centered(v2(0, 0), 2.0), 256);
  CHECK(std::abs(lin.value + 1.0) < 0.05);
  CHECK(lin.value == doctest::Approx(std::log2(lin.eigenvalue)));

  // Attractor with a trapping region: nothing escapes.
  auto attractor = henon_planar(0.08, 1.4, -0.3);
  auto att = ulam_escape_rate(attractor, v2(0, 0), Box::centered(v2(0, 0), 4.0), 256);
  CHECK(std::abs(att.value) < 0.02);
  CHECK(invariance_entropy_lower_bound(att) == doctest::Approx(0.0).epsilon(0.02));

  auto sys = henon_planar(0.08);
  CHECK_THROWS_AS(ulam_escape_rate(sys, v2(0, 0), Box{v2(10, 10), v2(11, 11)}, 64), DomainError);
}

TEST_CASE("volume decay escape rates") {
  auto toy = linear_toy();
  auto zero = ControlSequence::constant(v2(0, 0));
  std::vector<int> taus{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  auto lin = volume_decay_escape_rate(toy, zero, Box::centered(v2(0, 0), 2.0), taus);
  CHECK(std::abs(lin.value + 1.0) < 0.05);
  CHECK(lin.std_error > 0);
  CHECK(lin.std_error < 0.05);
  CHECK(!lin.truncated);
  // Recompute the slope from the stored series.
  std::vector<double> x, y;
  for (auto [t, v] : lin.series)
    if (t >= 6) {
      x.push_back(t);
      y.push_back(v);
    }
  CHECK(ols_slope(x, y) == doctest::Approx(lin.value).epsilon(1e-12));

  auto contract = linear_diagonal({0.5, 0.5});
  auto flat = volume_decay_escape_rate(contract, zero, Box::centered(v2(0, 0), 2.0), taus);
  CHECK(flat.value == 0.0);

  VolumeDecayOptions small;
  small.samples = 100000;
  std::vector<int> longer;
  for (int t = 1; t <= 40; ++t) longer.push_back(t);
  auto cut = volume_decay_escape_rate(toy, zero, Box::centered(v2(0, 0), 2.0), longer, small);
  CHECK(cut.truncated);
  CHECK(cut.series.size() < longer.size());
  small.samples = 1000;
  CHECK_THROWS_AS(volume_decay_escape_rate(toy, zero, Box::centered(v2(0, 0), 2.0), taus, small),
                  PreconditionError);

  // Fiber version: survivors stay eps-close to the origin cell.
  GridSet origin(Box::centered(v2(0, 0), 2.0), 64);
  origin = GridSet(origin.region(), 64, {*origin.locate(v2(1e-9, 1e-9))});
  auto tube = volume_decay_escape_rate(toy, zero, origin, 0.1, taus);
  CHECK(std::abs(tube.value + 1.0) < 0.05);

  VolumeDecayOptions a, b;
  a.seed = b.seed = 9;
  auto r1 = volume_decay_escape_rate(toy, zero, Box::centered(v2(0, 0), 2.0), taus, a);
  auto r2 = volume_decay_escape_rate(toy, zero, Box::centered(v2(0, 0), 2.0), taus, b);
  CHECK(r1.value == r2.value);
  CHECK(r1.std_error == r2.std_error);
}

TEST_CASE("invariance entropy lower bound") {
  CHECK(invariance_entropy_lower_bound(-0.696) == doctest::Approx(0.696));
  CHECK(invariance_entropy_lower_bound(0.0) == 0.0);
  CHECK(invariance_entropy_lower_bound(-1.0) == 1.0);
  CHECK(invariance_entropy_lower_bound(0.3) == 0.0);
  CHECK_THROWS_AS(invariance_entropy_lower_bound(std::nan("")), PreconditionError);
}

namespace {
// Minimum cover by exhaustive subset enumeration; sets as bitmasks over at most 64 elements.
int brute_force_cover(const std::vector<std::uint64_t>& sets, std::uint64_t all) {
  const std::size_t n = sets.size();
  int best = 1 << 30;
  for (std::uint64_t mask = 1; mask < (1ULL << n); ++mask) {
    std::uint64_t u = 0;
    for (std::size_t s = 0; s < n; ++s)
      if (mask >> s & 1) u |= sets[s];
    if (u == all) best = std::min(best, __builtin_popcountll(mask));
  }
  return best;
}
}  // namespace

TEST_CASE("spanning counts on the doubling and contracting toys") {
  auto doubling = make_system("doubling");
  const Box k = interval(-0.5, 0.5);
  const std::vector<Vec> values{v1(-0.5), v1(0.0), v1(0.5)};

  // tau = 1 with constant controls: left half needs +0.5, right half -0.5.
  {
    GridSet grid = GridSet::full(k, 8);
    std::vector<ControlSequence> constants;
    for (const auto& v : values) constants.push_back(ControlSequence::constant(v));
    auto r = spanning_count_oracle(doubling, grid, grid, 1, constants);
    CHECK(r.count == 2);
    CHECK(r.exact);
  }

  // Every interval of width 2^-tau holds at most 4 centers at resolution 2^(tau+2), so
  // 2^tau sequences are needed and the dyadic tiles achieve it.
  for (int tau = 1; tau <= 5; ++tau) {
    GridSet grid = GridSet::full(k, 1 << (tau + 2));
    auto r = spanning_count_oracle(doubling, grid, grid, tau, product_codebook(values, tau));
    CHECK(r.count == (1 << tau));
    CHECK(r.exact);
    CHECK(r.greedy_count >= r.count);
  }

  // Independent exhaustive oracle over all 2^9 subsets at tau = 2.
  {
    GridSet grid = GridSet::full(k, 16);
    const auto book = product_codebook(values, 2);
    std::vector<std::uint64_t> masks;
    for (const auto& u : book) {
      std::uint64_t m = 0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        double x = grid.center(grid.cells()[i])(0);
        bool ok = std::abs(x) <= 0.5;
        for (int t = 0; t < 2 && ok; ++t) {
          x = 2 * x + u.at(t)(0);
          ok = std::abs(x) <= 0.5;
        }
        if (ok) m |= 1ULL << i;
      }
      masks.push_back(m);
    }
    auto r = spanning_count_oracle(doubling, grid, grid, 2, book);
    CHECK(r.count == brute_force_cover(masks, (1ULL << grid.size()) - 1));
  }

  auto contracting = make_system("contracting");
  GridSet q = GridSet::full(k, 32);
  for (int tau : {1, 4, 8}) {
    auto r = spanning_count_oracle(contracting, q, q, tau, {ControlSequence::constant(v1(0.0))});
    CHECK(r.count == 1);
  }

  GridSet wide = GridSet::full(interval(-1, 1), 16);
  CHECK_THROWS_AS(spanning_count_oracle(doubling, wide, wide, 1, {ControlSequence::constant(v1(0.0))}),
                  DomainError);
}

TEST_CASE("product codebooks enumerate every sequence once") {
  auto book = product_codebook({v1(0), v1(1)}, 3);
  REQUIRE(book.size() == 8);
  std::set<std::vector<double>> seen;
  for (const auto& u : book) seen.insert({u.at(0)(0), u.at(1)(0), u.at(2)(0)});
  CHECK(seen.size() == 8);
}

TEST_CASE("data rate R0") {
  auto sys = henon_planar(0.08);
  const Vec xs = henon_fixed_points().first;
  OrbitSegment fixed;
  fixed.states = {xs};
  fixed.controls = ControlSequence::constant(v2(0, 0));
  CHECK(data_rate_R0(sys, fixed) == doctest::Approx(std::log2(henon_unstable_modulus())).epsilon(1e-12));

  auto toy = linear_toy();
  OrbitSegment origin;
  origin.states = {v2(0, 0)};
  origin.controls = ControlSequence::constant(v2(0, 0));
  CHECK(data_rate_R0(toy, origin) == 1.0);

  // Period 2: eigenvalues of Df^2 against the per-step unstable determinants.
  auto [c1, c2] = two_cycle();
  OrbitSegment cyc;
  cyc.states = {c1, c2};
  cyc.controls = ControlSequence::constant(v2(0, 0));
  Eigen::Matrix2d a1, a2;
  a1 << -2 * c1(0), -0.3, 1, 0;
  a2 << -2 * c2(0), -0.3, 1, 0;
  Eigen::EigenSolver<Eigen::Matrix2d> es(a2 * a1);
  const double mu = std::max(std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(1)));
  const double r0 = data_rate_R0(sys, cyc);
  CHECK(r0 == doctest::Approx(0.5 * std::log2(mu)).epsilon(1e-12));
  std::vector<ChainStep> chain{{c1, v2(0, 0), 0.0}, {c2, v2(0, 0), 0.0}};
  const Splitting split = periodic_chain_splitting(sys, chain);
  CHECK(std::abs(morse_exponent(sys, chain, split) - r0) < 1e-8);

  OrbitSegment bad = cyc;
  bad.states[1](0) += 1e-6;
  CHECK_THROWS_AS(data_rate_R0(sys, bad), PreconditionError);

  auto rot = rotation(0.3);
  OrbitSegment still;
  still.states = {v2(0, 0)};
  still.controls = ControlSequence::constant(v2(0, 0));
  CHECK_THROWS_AS(data_rate_R0(rot, still), DomainError);
}

TEST_CASE("Morse exponents of chains") {
  auto sys = henon_planar(0.08);
  const Vec xs = henon_fixed_points().first;
  std::vector<ChainStep> at_fixed(4, ChainStep{xs, v2(0, 0), 0.0});
  auto split = periodic_chain_splitting(sys, at_fixed);
  CHECK(morse_exponent(sys, at_fixed, split) == doctest::Approx(std::log2(henon_unstable_modulus())).epsilon(1e-9));
  CHECK_THROWS_AS(morse_exponent(sys, at_fixed, split, 10000), PreconditionError);

  auto toy = linear_toy();
  std::vector<ChainStep> origin(3, ChainStep{v2(0, 0), v2(0, 0), 0.0});
  CHECK(std::abs(morse_exponent(toy, origin, periodic_chain_splitting(toy, origin)) - 1.0) < 1e-12);

  // Closed eps-chains around a period-6 orbit: the exponent approaches the orbit value.
  auto lam = maximal_invariant(sys, v2(0, 0), henon_square(), 256);
  auto six = ControlSequence::periodic(std::vector<Vec>(6, v2(0, 0)));
  OrbitSegment orbit;
  bool found = false;
  for (auto c : lam.cells()) {
    try {
      orbit = find_periodic_orbit(sys, six, lam.center(c));
    } catch (const DomainError&) {
      continue;
    }
    // Skip orbits of lower period.
    if ((orbit.states[0] - orbit.states[1]).norm() > 1e-3 && (orbit.states[0] - orbit.states[2]).norm() > 1e-3 &&
        (orbit.states[0] - orbit.states[3]).norm() > 1e-3) {
      found = true;
      break;
    }
  }
  REQUIRE(found);
  std::vector<ChainStep> exact;
  for (const auto& x : orbit.states) exact.push_back({x, v2(0, 0), 0.0});
  const double ref = data_rate_R0(sys, orbit);
  CHECK(std::abs(morse_exponent(sys, exact, periodic_chain_splitting(sys, exact)) - ref) < 1e-8);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(-1, 1);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    std::vector<ChainStep> chain = exact;
    for (auto& s : chain) s.point += eps * v2(unit(rng), unit(rng)) / std::sqrt(2.0);
    const double err = std::abs(morse_exponent(sys, chain, periodic_chain_splitting(sys, chain)) - ref);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("subadditive selection on random cocycles") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(-2, 2);
  std::uniform_int_distribution<int> length(1, 200);
  for (int inst = 0; inst < 1000; ++inst) {
    const int n = length(rng);
    // v_k(f^s x) = log2 |A_{s+k-1} ... A_s| for random 2x2 matrices: submultiplicative norms.
    std::vector<Eigen::Matrix2d> a(static_cast<std::size_t>(n));
    for (auto& m : a) m << unit(rng), unit(rng), unit(rng), unit(rng);
    std::vector<std::vector<double>> table(static_cast<std::size_t>(n) + 1);
    double omega = 0;
    for (int s = 0; s < n; ++s) {
      Eigen::Matrix2d p = Eigen::Matrix2d::Identity();
      table[s].assign(static_cast<std::size_t>(n - s) + 1, 0.0);
      for (int k = 1; s + k <= n; ++k) {
        p = a[static_cast<std::size_t>(s + k - 1)] * p;
        table[s][k] = std::log2(p.operatorNorm());
        omega = std::max(omega, std::abs(table[s][k]) / k);
      }
    }
    auto v = [&](int k, int s) { return table[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)]; };
    const double eps = omega * (0.05 + 1.9 * (inst % 97) / 97.0);
    const int n1 = subadditive_select(v, n, eps, omega);
    REQUIRE(n1 >= 0);
    REQUIRE(n1 < n);
    const double sigma = v(n, 0) / n;
    for (int k = 1; k <= n - n1; ++k) CHECK(v(k, n1) / k > sigma - eps);
    CHECK(n - n1 >= eps * n / (2 * omega) - 1e-9);
  }

  auto additive = [](int k, int) { return 0.7 * k; };
  CHECK(subadditive_select(additive, 50, 0.1, 1.0) == 0);
  auto rate = [](int k, int) { return -1.0 * k; };
  CHECK(subadditive_select(rate, 50, 0.5, 1.0) == 0);
  CHECK_THROWS_AS(subadditive_select(rate, 50, 0.5, 0.9), PreconditionError);
  CHECK_THROWS_AS(subadditive_select(rate, 50, 2.5, 1.0), PreconditionError);
}

TEST_CASE("partition indices") {
  auto small = partition_indices(5, 2);
  std::set<int> got;
  for (auto [i, j] : small) got.insert(i + j * 2);
  CHECK(got == std::set<int>{0, 1, 2, 3});
  got.clear();
  for (auto [i, j] : partition_indices(7, 3)) got.insert(i + j * 3);
  CHECK(got == std::set<int>{0, 1, 2, 3, 4});

  for (int n = 2; n <= 50; ++n)
    for (int m = 1; m < n; ++m) {
      std::multiset<int> values;
      for (auto [i, j] : partition_indices(n, m)) {
        CHECK(i >= 0);
        CHECK(i < m);
        CHECK(j >= 0);
        values.insert(i + j * m);
      }
      std::multiset<int> expect;
      for (int l = 0; l <= n - m; ++l) expect.insert(l);
      CHECK(values == expect);
    }
  CHECK_THROWS_AS(partition_indices(5, 5), PreconditionError);
  CHECK_THROWS_AS(partition_indices(5, 0), PreconditionError);
}
