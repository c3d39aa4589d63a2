#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hypctrl {

// States and controls live in R^d with d <= 4; fixed max size keeps them on the stack.
inline constexpr int kMaxDim = 4;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// A mathematical precondition or domain restriction was violated
/// (control out of range, non-hyperbolic input, Newton divergence, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An index or time outside the data that was supplied.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Caller-side argument contract broken (sizes, orderings, nonpositive counts).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration key or value; the message names the key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Global relative tolerance for exact identities (roundtrips, cocycle checks).
double identity_tolerance();
void set_identity_tolerance(double tol);

/// Number of worker threads; honours HYPCTRL_THREADS, defaults to hardware concurrency.
unsigned worker_count();

/// Runs body(begin, end) over [0, n) split into contiguous chunks, one per worker.
/// Chunk boundaries depend only on n and the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// Deterministic 64-bit seed for a named sub-stream of a global seed.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

}  // namespace hypctrl
