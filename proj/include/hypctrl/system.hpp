#pragma once

#include "hypctrl/core.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hypctrl {

/// Admissible control values: an axis-aligned box or a closed Euclidean disk.
class ControlRange {
 public:
  enum class Kind { Box, Disk };

  static ControlRange box(Vec lo, Vec hi);
  static ControlRange disk(Vec center, double radius);

  Kind kind() const { return kind_; }
  int dim() const { return static_cast<int>(lo_.size()); }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  const Vec& center() const { return center_; }
  double radius() const { return radius_; }

  bool contains(const Vec& u, double slack = 1e-12) const;
  /// Nearest admissible control (Euclidean projection).
  Vec clamp(const Vec& u) const;
  /// Half-extent per axis of the bounding box.
  Vec half_extent() const;

  /// Center, the 2m axis extremes and (for m = 2) the 4 diagonal points; duplicates removed.
  std::vector<Vec> stencil() const;

 private:
  Kind kind_ = Kind::Box;
  Vec lo_, hi_, center_;
  double radius_ = 0.0;
};

using MapFn = std::function<Vec(const Vec& x, const Vec& u)>;
using JacFn = std::function<Mat(const Vec& x, const Vec& u)>;

/// A smooth invertible discrete-time control system x_{t+1} = f(x_t, u_t) on R^d.
struct ControlSystem {
  std::string name;
  int state_dim = 0;
  int control_dim = 0;
  ControlRange control_range;
  Vec nominal_control;  // u^0, the control whose autonomous map carries the hyperbolic set
  MapFn forward;
  MapFn inverse;
  JacFn jac_state;
  JacFn jac_control;
  std::map<std::string, double> parameters;

  /// f_u(x); throws DomainError when u is outside the control range.
  Vec step(const Vec& x, const Vec& u) const;
  /// f_u^{-1}(x); throws DomainError when u is outside the control range.
  Vec inverse_step(const Vec& x, const Vec& u) const;

  /// Jacobian of the inverse map at x: (D_x f(f_u^{-1}(x), u))^{-1}.
  Mat inverse_jac_state(const Vec& x, const Vec& u) const;

  void require_control(const Vec& u) const;
};

/// Finite window of controls u_t, t in [t_min; t_min + size) with an extension rule.
class ControlSequence {
 public:
  enum class Extension { None, ConstantHold, Periodic };

  ControlSequence() = default;
  ControlSequence(std::vector<Vec> values, int t_min = 0, Extension ext = Extension::ConstantHold);

  static ControlSequence constant(const Vec& u);
  static ControlSequence periodic(std::vector<Vec> one_period);

  /// u_t, resolved through the extension rule; RangeError outside the window when Extension::None.
  const Vec& at(int t) const;
  /// theta^s u, i.e. (theta^s u)_t = u_{t+s}.
  ControlSequence shifted(int s) const;

  int t_min() const { return t_min_; }
  int t_max() const { return t_min_ + static_cast<int>(values_.size()) - 1; }
  int size() const { return static_cast<int>(values_.size()); }
  Extension extension() const { return ext_; }
  const std::vector<Vec>& values() const { return values_; }

  /// Throws DomainError if any stored value lies outside the range.
  void validate(const ControlRange& range) const;

 private:
  std::vector<Vec> values_;
  int t_min_ = 0;
  Extension ext_ = Extension::ConstantHold;
};

/// phi(t, x, u) for either sign of t.
Vec transition(const ControlSystem& sys, int t, const Vec& x, const ControlSequence& u);

/// D_x phi(t, x, u) accumulated by the chain rule.
Mat transition_jacobian(const ControlSystem& sys, int t, const Vec& x, const ControlSequence& u);

/// max_{0 <= t < tau} |phi(t,x,u) - phi(t,y,u)|.
double bowen_distance(const ControlSystem& sys, const ControlSequence& u, int tau, const Vec& x,
                      const Vec& y);

/// Orbit x_t for t in [start_time; start_time + states.size()).
struct OrbitSegment {
  int start_time = 0;
  std::vector<Vec> states;
  ControlSequence controls;

  int size() const { return static_cast<int>(states.size()); }
  int end_time() const { return start_time + size() - 1; }
  const Vec& at(int t) const;

  /// Runs the system from x at start_time for `steps` transitions (steps + 1 states).
  static OrbitSegment generate(const ControlSystem& sys, const Vec& x, ControlSequence u,
                               int start_time, int steps);

  /// max_t |x_{t+1} - f(x_t, u_t)|.
  double max_defect(const ControlSystem& sys) const;
};

// Built-in systems.

/// f(x,y) = (a - b y - x^2 + u, x + v) with ||(u,v)|| <= eps.
ControlSystem henon_planar(double eps = 0.08, double a = 5.0, double b = 0.3);
/// f(x,y) = (a - b y - x^2 + u, x) with |u| <= eps.
ControlSystem henon_scalar(double eps = 1.0, double a = 5.0, double b = 0.3);
/// f(x) = diag(gains) x + u with u in [-bound, bound]^d.
ControlSystem linear_diagonal(std::vector<double> gains, double bound = 1.0,
                              std::string name = "linear");
/// diag(2, 0.5) with additive control in [-bound, bound]^2.
ControlSystem linear_toy(double bound = 1.0);
/// Planar rotation by angle (an isometry) with additive control.
ControlSystem rotation(double angle, double bound = 1.0);

/// Side length R = b' + sqrt(b'^2 + 4a) of the square containing the Hénon horseshoe,
/// with b' = 1 + |b|; equals 1.3 + sqrt(1.69 + 20) for (a, b) = (5, 0.3).
double henon_square_side(double a = 5.0, double b = 0.3);

/// Fixed points of the uncontrolled Hénon map: x = y = (-(1+b) +/- sqrt((1+b)^2 + 4a)) / 2.
std::pair<Vec, Vec> henon_fixed_points(double a = 5.0, double b = 0.3);

/// Looks up a built-in by name with optional parameter overrides ("eps", "a", "b", "bound",
/// "gain0", ...). Throws ConfigError naming the bad key.
ControlSystem make_system(const std::string& name, const std::map<std::string, double>& overrides = {});

std::vector<std::string> builtin_system_names();

}  // namespace hypctrl
