#include "hypctrl/system.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hypctrl {

// ControlRange

ControlRange ControlRange::box(Vec lo, Vec hi) {
  if (lo.size() != hi.size() || lo.size() == 0) throw PreconditionError("control box: size mismatch");
  if ((hi.array() < lo.array()).any()) throw PreconditionError("control box: hi < lo");
  ControlRange r;
  r.kind_ = Kind::Box;
  r.center_ = 0.5 * (lo + hi);
  r.lo_ = std::move(lo);
  r.hi_ = std::move(hi);
  return r;
}

ControlRange ControlRange::disk(Vec center, double radius) {
  if (!(radius >= 0.0)) throw PreconditionError("control disk: negative radius");
  ControlRange r;
  r.kind_ = Kind::Disk;
  r.radius_ = radius;
  r.lo_ = center.array() - radius;
  r.hi_ = center.array() + radius;
  r.center_ = std::move(center);
  return r;
}

bool ControlRange::contains(const Vec& u, double slack) const {
  if (u.size() != lo_.size()) return false;
  if (kind_ == Kind::Disk) return (u - center_).norm() <= radius_ + slack;
  return ((u.array() >= lo_.array() - slack) && (u.array() <= hi_.array() + slack)).all();
}

Vec ControlRange::clamp(const Vec& u) const {
  if (kind_ == Kind::Disk) {
    Vec d = u - center_;
    double n = d.norm();
    if (n <= radius_) return u;
    return center_ + d * (radius_ / n);
  }
  return u.cwiseMax(lo_).cwiseMin(hi_);
}

Vec ControlRange::half_extent() const { return 0.5 * (hi_ - lo_); }

std::vector<Vec> ControlRange::stencil() const {
  const int m = dim();
  std::vector<Vec> pts;
  pts.push_back(center_);
  Vec half = half_extent();
  for (int i = 0; i < m; ++i) {
    for (double s : {-1.0, 1.0}) {
      Vec p = center_;
      p(i) += s * half(i);
      pts.push_back(p);
    }
  }
  if (m == 2) {
    // Diagonals sit on the boundary of the range (box corner or disk rim).
    const double k = kind_ == Kind::Disk ? 1.0 / std::sqrt(2.0) : 1.0;
    for (double s0 : {-1.0, 1.0})
      for (double s1 : {-1.0, 1.0}) {
        Vec p = center_;
        p(0) += s0 * k * half(0);
        p(1) += s1 * k * half(1);
        pts.push_back(p);
      }
  }
  std::vector<Vec> unique;
  for (const auto& p : pts) {
    bool dup = std::any_of(unique.begin(), unique.end(),
                           [&](const Vec& q) { return (p - q).norm() <= 1e-15; });
    if (!dup) unique.push_back(p);
  }
  return unique;
}

// ControlSystem

void ControlSystem::require_control(const Vec& u) const {
  if (!control_range.contains(u)) {
    std::ostringstream os;
    os << name << ": control (" << u.transpose() << ") outside control range";
    throw DomainError(os.str());
  }
}

Vec ControlSystem::step(const Vec& x, const Vec& u) const {
  require_control(u);
  return forward(x, u);
}

Vec ControlSystem::inverse_step(const Vec& x, const Vec& u) const {
  require_control(u);
  return inverse(x, u);
}

Mat ControlSystem::inverse_jac_state(const Vec& x, const Vec& u) const {
  Vec pre = inverse(x, u);
  return jac_state(pre, u).inverse();
}

// ControlSequence

ControlSequence::ControlSequence(std::vector<Vec> values, int t_min, Extension ext)
    : values_(std::move(values)), t_min_(t_min), ext_(ext) {
  if (values_.empty()) throw PreconditionError("control sequence: empty window");
}

ControlSequence ControlSequence::constant(const Vec& u) {
  return ControlSequence({u}, 0, Extension::ConstantHold);
}

ControlSequence ControlSequence::periodic(std::vector<Vec> one_period) {
  return ControlSequence(std::move(one_period), 0, Extension::Periodic);
}

const Vec& ControlSequence::at(int t) const {
  const int n = size();
  const int k = t - t_min_;
  if (k >= 0 && k < n) return values_[k];
  switch (ext_) {
    case Extension::ConstantHold:
      return k < 0 ? values_.front() : values_.back();
    case Extension::Periodic:
      return values_[((k % n) + n) % n];
    case Extension::None:
      break;
  }
  throw RangeError("control index " + std::to_string(t) + " outside window [" +
                   std::to_string(t_min_) + "; " + std::to_string(t_max()) + "]");
}

ControlSequence ControlSequence::shifted(int s) const {
  return ControlSequence(values_, t_min_ - s, ext_);
}

void ControlSequence::validate(const ControlRange& range) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!range.contains(values_[i])) {
      throw DomainError("control sequence entry at t=" + std::to_string(t_min_ + static_cast<int>(i)) +
                        " outside control range");
    }
  }
}

// Transition map

Vec transition(const ControlSystem& sys, int t, const Vec& x, const ControlSequence& u) {
  Vec y = x;
  if (t >= 0) {
    for (int k = 0; k < t; ++k) y = sys.step(y, u.at(k));
  } else {
    for (int k = -1; k >= t; --k) y = sys.inverse_step(y, u.at(k));
  }
  return y;
}

Mat transition_jacobian(const ControlSystem& sys, int t, const Vec& x, const ControlSequence& u) {
  Mat J = Mat::Identity(sys.state_dim, sys.state_dim);
  Vec y = x;
  if (t >= 0) {
    for (int k = 0; k < t; ++k) {
      const Vec& uk = u.at(k);
      sys.require_control(uk);
      J = sys.jac_state(y, uk) * J;
      y = sys.forward(y, uk);
    }
  } else {
    for (int k = -1; k >= t; --k) {
      const Vec& uk = u.at(k);
      sys.require_control(uk);
      J = sys.inverse_jac_state(y, uk) * J;
      y = sys.inverse(y, uk);
    }
  }
  return J;
}

double bowen_distance(const ControlSystem& sys, const ControlSequence& u, int tau, const Vec& x,
                      const Vec& y) {
  if (tau < 1) throw PreconditionError("bowen_distance: tau must be >= 1");
  Vec a = x, b = y;
  double d = (a - b).norm();
  for (int t = 1; t < tau; ++t) {
    const Vec& ut = u.at(t - 1);
    a = sys.step(a, ut);
    b = sys.step(b, ut);
    d = std::max(d, (a - b).norm());
  }
  return d;
}

// OrbitSegment

const Vec& OrbitSegment::at(int t) const {
  const int k = t - start_time;
  if (k < 0 || k >= size()) throw RangeError("orbit index " + std::to_string(t) + " outside segment");
  return states[k];
}

OrbitSegment OrbitSegment::generate(const ControlSystem& sys, const Vec& x, ControlSequence u,
                                    int start_time, int steps) {
  OrbitSegment seg;
  seg.start_time = start_time;
  seg.states.reserve(static_cast<std::size_t>(steps) + 1);
  seg.states.push_back(x);
  for (int k = 0; k < steps; ++k)
    seg.states.push_back(sys.step(seg.states.back(), u.at(start_time + k)));
  seg.controls = std::move(u);
  return seg;
}

double OrbitSegment::max_defect(const ControlSystem& sys) const {
  double d = 0.0;
  for (int k = 0; k + 1 < size(); ++k) {
    Vec fx = sys.forward(states[k], controls.at(start_time + k));
    d = std::max(d, (states[k + 1] - fx).norm());
  }
  return d;
}

// Built-ins

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

ControlSystem henon_common(double a, double b) {
  if (b == 0.0) throw ConfigError("b: Hénon coefficient must be nonzero for invertibility");
  ControlSystem s;
  s.state_dim = 2;
  s.parameters = {{"a", a}, {"b", b}};
  s.jac_state = [b](const Vec& x, const Vec&) {
    Mat J(2, 2);
    J << -2.0 * x(0), -b, 1.0, 0.0;
    return J;
  };
  return s;
}

}  // namespace

ControlSystem henon_planar(double eps, double a, double b) {
  if (!(eps >= 0.0)) throw ConfigError("eps: must be nonnegative");
  ControlSystem s = henon_common(a, b);
  s.name = "henon_planar";
  s.control_dim = 2;
  s.nominal_control = Vec::Zero(2);
  s.control_range = ControlRange::disk(Vec::Zero(2), eps);
  s.parameters["eps"] = eps;
  s.forward = [a, b](const Vec& x, const Vec& u) {
    return vec2(a - b * x(1) - x(0) * x(0) + u(0), x(0) + u(1));
  };
  s.inverse = [a, b](const Vec& x, const Vec& u) {
    const double px = x(1) - u(1);
    return vec2(px, (a - px * px + u(0) - x(0)) / b);
  };
  s.jac_control = [](const Vec&, const Vec&) { return Mat(Mat::Identity(2, 2)); };
  return s;
}

ControlSystem henon_scalar(double eps, double a, double b) {
  if (!(eps >= 0.0)) throw ConfigError("eps: must be nonnegative");
  ControlSystem s = henon_common(a, b);
  s.name = "henon_scalar";
  s.control_dim = 1;
  s.nominal_control = Vec::Zero(1);
  Vec lo(1), hi(1);
  lo << -eps;
  hi << eps;
  s.control_range = ControlRange::box(lo, hi);
  s.parameters["eps"] = eps;
  s.forward = [a, b](const Vec& x, const Vec& u) {
    return vec2(a - b * x(1) - x(0) * x(0) + u(0), x(0));
  };
  s.inverse = [a, b](const Vec& x, const Vec& u) {
    return vec2(x(1), (a - x(1) * x(1) - x(0) + u(0)) / b);
  };
  s.jac_control = [](const Vec&, const Vec&) {
    Mat B(2, 1);
    B << 1.0, 0.0;
    return B;
  };
  return s;
}

ControlSystem linear_diagonal(std::vector<double> gains, double bound, std::string name) {
  const int d = static_cast<int>(gains.size());
  if (d < 1 || d > kMaxDim) throw ConfigError("gains: dimension must be in [1, 4]");
  for (double g : gains)
    if (g == 0.0) throw ConfigError("gains: zero gain is not invertible");
  if (!(bound >= 0.0)) throw ConfigError("bound: must be nonnegative");
  Vec diag(d);
  for (int i = 0; i < d; ++i) diag(i) = gains[static_cast<std::size_t>(i)];
  ControlSystem s;
  s.name = std::move(name);
  s.state_dim = d;
  s.control_dim = d;
  s.nominal_control = Vec::Zero(d);
  s.control_range = ControlRange::box(Vec::Constant(d, -bound), Vec::Constant(d, bound));
  s.parameters["bound"] = bound;
  for (int i = 0; i < d; ++i) s.parameters["gain" + std::to_string(i)] = diag(i);
  s.forward = [diag](const Vec& x, const Vec& u) -> Vec { return diag.cwiseProduct(x) + u; };
  s.inverse = [diag](const Vec& x, const Vec& u) -> Vec { return (x - u).cwiseQuotient(diag); };
  s.jac_state = [diag](const Vec&, const Vec&) -> Mat { return diag.asDiagonal(); };
  s.jac_control = [d](const Vec&, const Vec&) -> Mat { return Mat::Identity(d, d); };
  return s;
}

ControlSystem linear_toy(double bound) { return linear_diagonal({2.0, 0.5}, bound, "linear_toy"); }

ControlSystem rotation(double angle, double bound) {
  Mat R(2, 2);
  R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  ControlSystem s;
  s.name = "rotation";
  s.state_dim = 2;
  s.control_dim = 2;
  s.nominal_control = Vec::Zero(2);
  s.control_range = ControlRange::box(Vec::Constant(2, -bound), Vec::Constant(2, bound));
  s.parameters = {{"angle", angle}, {"bound", bound}};
  s.forward = [R](const Vec& x, const Vec& u) -> Vec { return R * x + u; };
  s.inverse = [R](const Vec& x, const Vec& u) -> Vec { return R.transpose() * (x - u); };
  s.jac_state = [R](const Vec&, const Vec&) -> Mat { return R; };
  s.jac_control = [](const Vec&, const Vec&) -> Mat { return Mat::Identity(2, 2); };
  return s;
}

double henon_square_side(double a, double b) {
  const double bb = 1.0 + std::abs(b);
  return bb + std::sqrt(bb * bb + 4.0 * a);
}

std::pair<Vec, Vec> henon_fixed_points(double a, double b) {
  const double p = 1.0 + b;
  const double disc = p * p + 4.0 * a;
  if (disc < 0.0) throw DomainError("Hénon map has no real fixed points");
  const double x1 = (-p + std::sqrt(disc)) / 2.0;
  const double x2 = (-p - std::sqrt(disc)) / 2.0;
  return {vec2(x1, x1), vec2(x2, x2)};
}

namespace {

double take(std::map<std::string, double>& o, const std::string& key, double fallback) {
  auto it = o.find(key);
  if (it == o.end()) return fallback;
  double v = it->second;
  o.erase(it);
  return v;
}

void reject_leftovers(const std::map<std::string, double>& o, const std::string& system) {
  if (!o.empty())
    throw ConfigError("system." + o.begin()->first + ": unknown parameter for system '" + system + "'");
}

}  // namespace

ControlSystem make_system(const std::string& name, const std::map<std::string, double>& overrides) {
  auto o = overrides;
  ControlSystem s;
  if (name == "henon_planar") {
    double eps = take(o, "eps", 0.08), a = take(o, "a", 5.0), b = take(o, "b", 0.3);
    s = henon_planar(eps, a, b);
  } else if (name == "henon_scalar") {
    double eps = take(o, "eps", 1.0), a = take(o, "a", 5.0), b = take(o, "b", 0.3);
    s = henon_scalar(eps, a, b);
  } else if (name == "linear_toy") {
    double bound = take(o, "bound", 1.0);
    double g0 = take(o, "gain0", 2.0), g1 = take(o, "gain1", 0.5);
    s = linear_diagonal({g0, g1}, bound, "linear_toy");
  } else if (name == "doubling") {
    double bound = take(o, "bound", 0.5), g = take(o, "gain0", 2.0);
    s = linear_diagonal({g}, bound, "doubling");
  } else if (name == "contracting") {
    double bound = take(o, "bound", 0.5), g = take(o, "gain0", 0.5);
    s = linear_diagonal({g}, bound, "contracting");
  } else {
    throw ConfigError("system.name: unknown system '" + name + "'");
  }
  reject_leftovers(o, name);
  return s;
}

std::vector<std::string> builtin_system_names() {
  return {"henon_planar", "henon_scalar", "linear_toy", "doubling", "contracting"};
}

}  // namespace hypctrl
