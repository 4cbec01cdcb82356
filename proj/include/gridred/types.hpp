#ifndef GRIDRED_TYPES_HPP
#define GRIDRED_TYPES_HPP

#include <Eigen/Core>
#include <complex>
#include <stdexcept>
#include <string>

namespace gridred {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using Eigen::VectorXi;

inline constexpr double kOmegaSync = 2.0 * 3.14159265358979323846 * 60.0;  // rad/s
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr const char* kToolName = "gridred";
inline constexpr const char* kToolVersion = "0.1.0";

/// Malformed input file or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Solver breakdown: Newton divergence, singular matrix, non-finite state
/// (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Principal value in (-pi, pi].
inline double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

/// Shift `a` by multiples of 2*pi so it lies within pi of `reference`.
inline double unwrap_near(double a, double reference) {
  return reference + wrap_angle(a - reference);
}

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// FNV-1a over a string; used for stable config hashes in file headers.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Portable uniform doubles from a 64-bit generator state (splitmix64).
/// std::uniform_real_distribution is implementation-defined; outputs here
/// must be reproducible across builds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

 private:
  std::uint64_t state_;
};

}  // namespace gridred

#endif  // GRIDRED_TYPES_HPP
