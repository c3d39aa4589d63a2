#include "doctest.h"
#include "hypctrl/system.hpp"

#include <cmath>
#include <random>

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
}  // namespace

TEST_CASE("step evaluates the Hénon formula") {
  auto sys = henon_planar(0.08);
  CHECK((sys.step(v2(0, 0), v2(0, 0)) - v2(5, 0)).norm() == doctest::Approx(0.0));
  CHECK((sys.step(v2(1, 1), v2(0, 0)) - v2(3.7, 1)).norm() < 1e-15);
  CHECK((sys.step(v2(2, -1), v2(0.05, 0)) - v2(1.35, 2)).norm() < 1e-15);
}

TEST_CASE("step rejects controls outside the disk") {
  auto sys = henon_planar(0.08);
  CHECK_THROWS_AS(sys.step(v2(0, 0), v2(0.07, 0.07)), DomainError);
  CHECK_THROWS_AS(sys.inverse_step(v2(0, 0), v2(0.1, 0)), DomainError);
  CHECK_NOTHROW(sys.step(v2(0, 0), v2(0.08, 0)));
}

TEST_CASE("inverse_step undoes step") {
  auto sys = henon_planar(0.08);
  CHECK((sys.inverse_step(v2(5, 0), v2(0, 0)) - v2(0, 0)).norm() < 1e-15);
  CHECK((sys.inverse_step(v2(3.7, 1), v2(0, 0)) - v2(1, 1)).norm() < 1e-14);

  auto scalar = henon_scalar(1.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> box(-3, 3), ctl(-0.05, 0.05);
  for (int i = 0; i < 1000; ++i) {
    Vec x = v2(box(rng), box(rng));
    Vec u = v2(ctl(rng), ctl(rng));
    Vec back = sys.inverse_step(sys.step(x, u), u);
    CHECK((back - x).norm() <= 1e-10 * (1 + x.norm()));
    Vec us = v1(ctl(rng));
    Vec back2 = scalar.inverse_step(scalar.step(x, us), us);
    CHECK((back2 - x).norm() <= 1e-10 * (1 + x.norm()));
  }
}

TEST_CASE("closed-form inverse of the scalar system") {
  // f_u^{-1}(x,y) = (y, (5 - y^2 - x + u)/0.3)
  auto sys = henon_scalar(1.0);
  Vec x = v2(0.7, -1.2);
  Vec u = v1(0.3);
  Vec expect = v2(-1.2, (5 - 1.44 - 0.7 + 0.3) / 0.3);
  CHECK((sys.inverse_step(x, u) - expect).norm() < 1e-14);
}

TEST_CASE("jac_state matches central differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> box(-3, 3);
  for (const auto& sys : {henon_planar(0.08), henon_scalar(1.0), linear_toy()}) {
    for (int i = 0; i < 50; ++i) {
      Vec x = v2(box(rng), box(rng));
      Vec u = sys.nominal_control;
      Mat J = sys.jac_state(x, u);
      const double h = 1e-6;
      Mat fd(2, 2);
      for (int j = 0; j < 2; ++j) {
        Vec e = Vec::Zero(2);
        e(j) = h;
        fd.col(j) = (sys.forward(x + e, u) - sys.forward(x - e, u)) / (2 * h);
      }
      CHECK((fd - J).norm() <= 1e-5 * std::max(1.0, J.norm()));
    }
  }
}

TEST_CASE("transition: identity at t=0 and composition") {
  auto sys = henon_planar(0.08);
  auto zero = ControlSequence::constant(v2(0, 0));
  Vec x = v2(0.3, -0.4);
  CHECK(transition(sys, 0, x, zero) == x);
  CHECK((transition(sys, 2, v2(0, 0), zero) - v2(-20, 5)).norm() < 1e-13);
}

TEST_CASE("transition satisfies the cocycle identity for both signs") {
  auto sys = henon_planar(0.08);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ctl(-0.05, 0.05), box(-1.5, 1.5);
  std::vector<Vec> window;
  for (int i = 0; i < 20; ++i) window.push_back(v2(ctl(rng), ctl(rng)));
  ControlSequence u(window, -10, ControlSequence::Extension::None);
  // Stay near the horseshoe for a few steps: use the fixed point as base.
  const Vec xs = henon_fixed_points().first;
  for (int trial = 0; trial < 20; ++trial) {
    Vec x = xs + 1e-3 * v2(box(rng), box(rng));
    for (auto [t, s] : {std::pair{2, 3}, std::pair{-3, 2}, std::pair{1, -4}, std::pair{-2, -2}}) {
      Vec direct = transition(sys, t + s, x, u);
      Vec split = transition(sys, s, transition(sys, t, x, u), u.shifted(t));
      CHECK((direct - split).norm() <= 1e-10 * (1 + direct.norm()));
    }
    for (int t : {1, 3, 5}) {
      Vec fwd = transition(sys, t, x, u);
      Vec back = transition(sys, -t, fwd, u.shifted(t));
      CHECK((back - x).norm() <= 1e-10 * (1 + x.norm()));
    }
  }
  auto zero = ControlSequence::constant(v2(0, 0));
  Vec x0 = v2(0.1, 0.2);
  Vec d5 = transition(sys, 5, x0, zero);
  Vec d23 = transition(sys, 3, transition(sys, 2, x0, zero), zero.shifted(2));
  CHECK((d5 - d23).norm() <= 1e-12 * (1 + d5.norm()));
}

TEST_CASE("transition outside a window without extension is a range error") {
  auto sys = linear_toy();
  ControlSequence u({v2(0, 0), v2(0, 0)}, 0, ControlSequence::Extension::None);
  CHECK_NOTHROW(transition(sys, 2, v2(1, 1), u));
  CHECK_THROWS_AS(transition(sys, 3, v2(1, 1), u), RangeError);
  CHECK_THROWS_AS(transition(sys, -1, v2(1, 1), u), RangeError);
}

TEST_CASE("periodic and constant-hold extensions") {
  ControlSequence p = ControlSequence::periodic({v1(1), v1(2), v1(3)});
  CHECK(p.at(0)(0) == 1);
  CHECK(p.at(4)(0) == 2);
  CHECK(p.at(-1)(0) == 3);
  ControlSequence c({v1(1), v1(2)}, 5);
  CHECK(c.at(0)(0) == 1);
  CHECK(c.at(100)(0) == 2);
  CHECK(c.shifted(5).at(0)(0) == 1);
}

TEST_CASE("transition Jacobian obeys the chain rule") {
  auto sys = henon_scalar(1.0);
  std::vector<Vec> w;
  for (int i = 0; i < 6; ++i) w.push_back(v1(0.01 * i));
  ControlSequence u(w);
  Vec x = henon_fixed_points().first + v2(1e-3, -2e-3);
  Mat J5 = transition_jacobian(sys, 5, x, u);
  Mat J2 = transition_jacobian(sys, 2, x, u);
  Mat J3 = transition_jacobian(sys, 3, transition(sys, 2, x, u), u.shifted(2));
  CHECK((J5 - J3 * J2).norm() <= 1e-10 * J5.norm());
  const double h = 1e-6;
  Mat fd(2, 2);
  for (int j = 0; j < 2; ++j) {
    Vec e = Vec::Zero(2);
    e(j) = h;
    fd.col(j) = (transition(sys, 5, x + e, u) - transition(sys, 5, x - e, u)) / (2 * h);
  }
  CHECK((fd - J5).norm() <= 1e-4 * J5.norm());
  Mat Jm = transition_jacobian(sys, -3, x, u);
  for (int j = 0; j < 2; ++j) {
    Vec e = Vec::Zero(2);
    e(j) = h;
    fd.col(j) = (transition(sys, -3, x + e, u) - transition(sys, -3, x - e, u)) / (2 * h);
  }
  CHECK((fd - Jm).norm() <= 1e-4 * Jm.norm());
}

TEST_CASE("bowen_distance") {
  auto sys = henon_planar(0.08);
  auto zero = ControlSequence::constant(v2(0, 0));
  Vec x = v2(0.5, 0.5), y = v2(0.51, 0.5);
  CHECK(bowen_distance(sys, zero, 5, x, x) == 0.0);
  CHECK(bowen_distance(sys, zero, 1, x, y) == doctest::Approx((x - y).norm()));
  CHECK_THROWS_AS(bowen_distance(sys, zero, 0, x, y), PreconditionError);

  auto doubling = linear_diagonal({2.0}, 0.0, "doubling");
  Vec a = v1(0), b = v1(1e-3);
  CHECK(bowen_distance(doubling, ControlSequence::constant(v1(0)), 4, a, b) ==
        doctest::Approx(0.008).epsilon(1e-12));
}

TEST_CASE("orbit segments and defects") {
  auto sys = henon_planar(0.08);
  auto seg = OrbitSegment::generate(sys, v2(0.1, 0.1), ControlSequence::constant(v2(0.01, 0)), -3, 4);
  CHECK(seg.size() == 5);
  CHECK(seg.end_time() == 1);
  CHECK(seg.max_defect(sys) <= 1e-10);
  CHECK_THROWS_AS(seg.at(2), RangeError);
}

TEST_CASE("square side and fixed points of the Hénon map") {
  CHECK(henon_square_side() == doctest::Approx(1.3 + std::sqrt(1.69 + 20)));
  auto [p, q] = henon_fixed_points();
  CHECK(p(0) == doctest::Approx((-1.3 + std::sqrt(21.69)) / 2));
  CHECK(p(0) == doctest::Approx(1.678626).epsilon(1e-6));
  CHECK(q(0) == doctest::Approx(-2.978626).epsilon(1e-6));
  auto sys = henon_planar(0.08);
  CHECK((sys.forward(p, v2(0, 0)) - p).norm() < 1e-14);
}

TEST_CASE("make_system") {
  CHECK(make_system("henon_planar").control_range.radius() == doctest::Approx(0.08));
  CHECK(make_system("henon_planar", {{"eps", 0.04}}).control_range.radius() == doctest::Approx(0.04));
  CHECK(make_system("linear_toy").state_dim == 2);
  CHECK(make_system("doubling").state_dim == 1);
  CHECK_THROWS_AS(make_system("lorenz"), ConfigError);
  try {
    make_system("henon_scalar", {{"epsilon", 1.0}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("epsilon") != std::string::npos);
  }
}

TEST_CASE("control stencil has nine points on the disk") {
  auto sys = henon_planar(0.08);
  auto st = sys.control_range.stencil();
  CHECK(st.size() == 9);
  for (const auto& u : st) CHECK(sys.control_range.contains(u));
  auto zero = henon_planar(0.0).control_range.stencil();
  CHECK(zero.size() == 1);
}
