#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>

namespace ccsim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Configuration or usage error (bad scene file, invalid solver setup).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure inside a solve (factorization breakdown, non-finite energy).
struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Geometric precondition violation (degenerate element, coincident spring endpoints).
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic RNG used everywhere randomness is needed.
using Rng = std::mt19937_64;

/// FNV-1a over a byte range. Used to key cached artifacts.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::uint64_t fnv1a(const Vec& v, std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()), h);
}

/// Locale-independent shortest round-trip formatting for doubles, so emitted
/// CSV bytes are stable across runs and platforms.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  // trim to shortest representation that round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char probe[32];
    std::snprintf(probe, sizeof probe, "%.*g", prec, x);
    if (std::strtod(probe, nullptr) == x) return probe;
  }
  return buf;
}

}  // namespace ccsim
