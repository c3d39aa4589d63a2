#include "hypctrl/hyperbolicity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hypctrl {

const Mat& Splitting::unstable_at(int t) const {
  if (!covers(t)) throw RangeError("splitting has no frame at t=" + std::to_string(t));
  return unstable[static_cast<std::size_t>(t - t_begin)];
}

const Mat& Splitting::stable_at(int t) const {
  if (!covers(t)) throw RangeError("splitting has no frame at t=" + std::to_string(t));
  return stable[static_cast<std::size_t>(t - t_begin)];
}

namespace {

Mat random_frame(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Mat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = n01(rng);
  Eigen::HouseholderQR<Mat> qr(m);
  return qr.householderQ() * Mat::Identity(d, d);
}

// Q R = M with R having a nonnegative diagonal.
void thin_qr(const Mat& m, Mat& q, Vec& rdiag) {
  const int d = static_cast<int>(m.rows());
  const int k = static_cast<int>(m.cols());
  Eigen::HouseholderQR<Mat> qr(m);
  q = qr.householderQ() * Mat::Identity(d, k);
  Mat r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  rdiag.resize(k);
  for (int i = 0; i < k; ++i) {
    if (r(i, i) < 0) q.col(i) = -q.col(i);
    rdiag(i) = std::abs(r(i, i));
  }
}

std::vector<Mat> orbit_jacobians(const ControlSystem& sys, const OrbitSegment& orbit) {
  std::vector<Mat> jac;
  jac.reserve(orbit.states.size());
  for (int k = 0; k + 1 < orbit.size(); ++k)
    jac.push_back(sys.jac_state(orbit.states[static_cast<std::size_t>(k)],
                                orbit.controls.at(orbit.start_time + k)));
  return jac;
}

// Growth factors sup / inf over v in span(frame) of ||S A v|| / ||S v||.
struct GrowthBounds {
  double sup = 0.0;
  double inf = 0.0;
};

GrowthBounds restricted_growth(const Mat& a, const Mat& frame, const Mat& metric) {
  if (frame.cols() == 0) return {0.0, 0.0};
  Mat w = metric * frame;
  Mat v = metric * a * frame;
  Eigen::HouseholderQR<Mat> qr(w);
  Mat r = qr.matrixQR().topRows(w.cols()).template triangularView<Eigen::Upper>();
  Mat m = v * r.inverse();
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& s = svd.singularValues();
  return {s(0), s(s.size() - 1)};
}

}  // namespace

Splitting estimate_splitting(const ControlSystem& sys, const OrbitSegment& orbit,
                             const SplittingOptions& opts) {
  const int n = orbit.size();
  const int d = sys.state_dim;
  const int settle = opts.settle;
  if (settle < 1) throw PreconditionError("estimate_splitting: settle must be >= 1");
  if (n < 2 * settle + 1)
    throw PreconditionError("estimate_splitting: orbit must extend `settle` steps beyond the window");

  const auto jac = orbit_jacobians(sys, orbit);
  std::mt19937_64 rng(opts.seed);

  // Forward sweep: the leading columns converge to the most expanded directions.
  std::vector<Mat> fwd(static_cast<std::size_t>(n));
  Vec log_growth = Vec::Zero(d);
  fwd[0] = random_frame(d, rng);
  for (int k = 0; k + 1 < n; ++k) {
    Mat q;
    Vec r;
    thin_qr(jac[static_cast<std::size_t>(k)] * fwd[static_cast<std::size_t>(k)], q, r);
    fwd[static_cast<std::size_t>(k + 1)] = q;
    if (k >= settle) log_growth += r.array().log2().matrix();
  }
  const int measured = n - 1 - settle;
  std::vector<double> rates(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) rates[static_cast<std::size_t>(i)] = log_growth(i) / measured;

  const double gap = std::log2(opts.min_separation);
  int d_plus = 0;
  for (int i = 0; i < d; ++i) {
    const double r = rates[static_cast<std::size_t>(i)];
    if (!std::isfinite(r) || std::abs(r) < gap)
      throw DomainError("no hyperbolic splitting detected (neutral growth rate " + std::to_string(r) + ")");
    if (r > 0) ++d_plus;
  }
  const int d_minus = d - d_plus;

  // Backward sweep with inverse Jacobians: leading columns converge to the stable directions.
  std::vector<Mat> bwd(static_cast<std::size_t>(n));
  bwd[static_cast<std::size_t>(n - 1)] = random_frame(d, rng);
  for (int k = n - 2; k >= 0; --k) {
    Mat q;
    Vec r;
    thin_qr(jac[static_cast<std::size_t>(k)].inverse() * bwd[static_cast<std::size_t>(k + 1)], q, r);
    bwd[static_cast<std::size_t>(k)] = q;
  }

  Splitting split;
  split.t_begin = orbit.start_time + settle;
  split.d_plus = d_plus;
  split.d_minus = d_minus;
  split.growth_rates = rates;
  for (int k = settle; k <= n - 1 - settle; ++k) {
    split.unstable.push_back(fwd[static_cast<std::size_t>(k)].leftCols(d_plus));
    split.stable.push_back(bwd[static_cast<std::size_t>(k)].leftCols(d_minus));
  }
  return split;
}

std::vector<double> unstable_log_det_steps(const ControlSystem& sys, const OrbitSegment& orbit,
                                           const Splitting& split, int t0, int count) {
  if (count < 0) throw PreconditionError("unstable_log_det: negative step count");
  if (!split.covers(t0) || !split.covers(t0 + count))
    throw RangeError("unstable_log_det: [" + std::to_string(t0) + "; " + std::to_string(t0 + count) +
                     "] outside splitting window");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int t = t0; t < t0 + count; ++t) {
    const Mat& e0 = split.unstable_at(t);
    const Mat& e1 = split.unstable_at(t + 1);
    if (e0.cols() == 0) {
      out.push_back(0.0);
      continue;
    }
    Mat a = sys.jac_state(orbit.at(t), orbit.controls.at(t));
    Mat m = e1.transpose() * a * e0;
    out.push_back(std::log2(std::abs(m.determinant())));
  }
  return out;
}

double unstable_log_det(const ControlSystem& sys, const OrbitSegment& orbit, const Splitting& split,
                        int t0, int t) {
  const auto steps = unstable_log_det_steps(sys, orbit, split, t0, t);
  return std::accumulate(steps.begin(), steps.end(), 0.0);
}

HyperbolicityReport verify_hyperbolicity(const ControlSystem& sys, const OrbitSegment& orbit,
                                         const Splitting& split, const HyperbolicityOptions& opts) {
  const int d = sys.state_dim;
  const int horizon = opts.horizon;
  if (horizon < 2) throw PreconditionError("verify_hyperbolicity: horizon must be >= 2");
  const Mat metric = opts.metric.value_or(Mat::Identity(d, d));
  const auto jac = orbit_jacobians(sys, orbit);
  const int first = orbit.start_time;

  // Per window time t: growth factors for k = 1..horizon.
  struct Series {
    int t;
    std::vector<double> g;
  };
  std::vector<Series> stable_series, unstable_series;

  HyperbolicityReport rep;
  rep.d_plus = split.d_plus;
  rep.d_minus = split.d_minus;

  for (int t = split.t_begin; t <= split.t_end(); ++t) {
    const Mat& es = split.stable_at(t);
    const Mat& eu = split.unstable_at(t);
    if (t + 1 <= split.t_end()) {
      const Mat& a = jac[static_cast<std::size_t>(t - first)];
      if (es.cols() > 0) {
        const Mat& es1 = split.stable_at(t + 1);
        Mat res = (Mat::Identity(d, d) - es1 * es1.transpose()) * a * es;
        rep.stable_invariance_residual = std::max(rep.stable_invariance_residual, res.norm());
      }
      if (eu.cols() > 0) {
        const Mat& eu1 = split.unstable_at(t + 1);
        Mat res = (Mat::Identity(d, d) - eu1 * eu1.transpose()) * a * eu;
        rep.unstable_invariance_residual = std::max(rep.unstable_invariance_residual, res.norm());
      }
    }
  }

  // Growth along a bundle is measured through the inverse of the map in the other time
  // direction: |Dphi_k| on E-_t equals 1 / inf |Dphi_{-k}| on E-_{t+k}, and that
  // backward product acts stably on stable vectors (likewise forward on E+).
  for (int t = split.t_begin; t <= split.t_end(); ++t) {
    if (split.d_minus > 0 && t + horizon <= split.t_end()) {
      Series s{t, {}};
      Mat prod = Mat::Identity(d, d);
      for (int k = 1; k <= horizon; ++k) {
        // prod = Dphi_{-k} at x_{t+k}
        prod = prod * jac[static_cast<std::size_t>(t + k - 1 - first)].inverse();
        s.g.push_back(1.0 / restricted_growth(prod, split.stable_at(t + k), metric).inf);
      }
      stable_series.push_back(std::move(s));
    }
    if (split.d_plus > 0 && t - horizon >= split.t_begin) {
      Series s{t, {}};
      Mat prod = Mat::Identity(d, d);
      for (int k = 1; k <= horizon; ++k) {
        // prod = Dphi_k at x_{t-k}
        prod = prod * jac[static_cast<std::size_t>(t - k - first)];
        s.g.push_back(1.0 / restricted_growth(prod, split.unstable_at(t - k), metric).inf);
      }
      unstable_series.push_back(std::move(s));
    }
  }
  if (stable_series.empty() && unstable_series.empty())
    throw PreconditionError("verify_hyperbolicity: orbit too short for the requested horizon");

  // Tail rate between horizon/2 and horizon; for orbits that return to the same point this
  // ratio is independent of the chosen norm.
  const int k0 = horizon / 2;
  double rate = 0.0;
  for (const auto* group : {&stable_series, &unstable_series}) {
    for (const auto& s : *group) {
      const double hi = s.g[static_cast<std::size_t>(horizon - 1)];
      const double lo = s.g[static_cast<std::size_t>(k0 - 1)];
      rate = std::max(rate, std::pow(hi / lo, 1.0 / (horizon - k0)));
    }
  }
  const double step = opts.lambda_grid;
  const double lambda = std::max(step, std::ceil(rate / step - 1e-9) * step);
  if (!(lambda < 1.0)) throw DomainError("not uniformly hyperbolic at this horizon");

  double c = 1.0;
  int worst = split.t_begin;
  for (const auto* group : {&stable_series, &unstable_series}) {
    for (const auto& s : *group) {
      for (int k = 1; k <= horizon; ++k) {
        const double need = s.g[static_cast<std::size_t>(k - 1)] / std::pow(lambda, k);
        if (need > c) {
          c = need;
          worst = s.t;
        }
      }
    }
  }
  rep.c = c;
  rep.lambda = lambda;
  rep.worst_t = worst;
  return rep;
}

bool check_expansion_equivalence(const ControlSystem& sys, const OrbitSegment& orbit,
                                 const Splitting& split, const HyperbolicityReport& report,
                                 int horizon, const std::optional<Mat>& metric) {
  const int d = sys.state_dim;
  const Mat s = metric.value_or(Mat::Identity(d, d));
  const auto jac = orbit_jacobians(sys, orbit);
  const int first = orbit.start_time;
  const int last = orbit.end_time();
  for (int t = split.t_begin; t <= split.t_end(); ++t) {
    const Mat& eu = split.unstable_at(t);
    if (eu.cols() == 0) continue;
    Mat prod = Mat::Identity(d, d);
    for (int k = 1; k <= horizon && t + k <= last; ++k) {
      prod = jac[static_cast<std::size_t>(t + k - 1 - first)] * prod;
      const double inf = restricted_growth(prod, eu, s).inf;
      const double bound = 1.0 / (report.c * std::pow(report.lambda, k));
      if (inf < bound * (1.0 - 1e-12)) return false;
    }
  }
  return true;
}

double principal_angle(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw PreconditionError("principal_angle: frame dimensions differ");
  if (a.cols() == 0) return 0.0;
  Mat qa, qb;
  Vec r;
  thin_qr(a, qa, r);
  thin_qr(b, qb, r);
  Eigen::JacobiSVD<Mat> svd(qa.transpose() * qb);
  const double smin = std::clamp(svd.singularValues().minCoeff(), 0.0, 1.0);
  return std::acos(smin);
}

}  // namespace hypctrl
