#ifndef VCS_COMMON_HPP
#define VCS_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcs {

using Vec = std::vector<double>;

// ---- error taxonomy (maps onto CLI exit codes: config=2, divergence=3, io=4)

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct InvalidActionError : Error {
  using Error::Error;
};

struct DivergenceError : Error {
  long step = -1;
  DivergenceError(const std::string& msg, long at_step)
      : Error(msg + " (step " + std::to_string(at_step) + ")"), step(at_step) {}
};

struct IoError : Error {
  using Error::Error;
};

struct BadMagicError : IoError {
  using IoError::IoError;
};

struct UnsupportedVersionError : IoError {
  using IoError::IoError;
};

struct TruncatedFileError : IoError {
  using IoError::IoError;
};

struct DegenerateReferenceError : Error {
  using Error::Error;
};

struct MissingCheckpointsError : Error {
  using Error::Error;
};

// ---- deterministic rng
//
// Thin wrapper over mt19937_64 with explicit bit-to-double conversion so
// that every draw is reproducible independent of the standard library's
// distribution implementations.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// derive an independent stream seed from a base seed and a salt
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return splitmix64(base ^ splitmix64(salt));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; second value cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // unbiased integer in [0, n)
  std::uint64_t randint(std::uint64_t n) {
    __uint128_t m = static_cast<__uint128_t>(gen_()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t threshold = (-n) % n;
      while (lo < threshold) {
        m = static_cast<__uint128_t>(gen_()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---- small numeric helpers

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void axpy(Vec& dst, double scale, const Vec& src) {
  if (dst.size() != src.size()) throw DimensionError("axpy: size mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double l2_dist(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DimensionError("l2_dist: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// FNV-1a over raw bytes; used for artifact provenance hashes
std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t h);

}  // namespace vcs

#endif  // VCS_COMMON_HPP
