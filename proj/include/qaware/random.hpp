#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace qaware {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Derives independent, named random streams from one master seed.
///
/// Each noise source (process, measurement, channel, ...) draws from its own
/// stream, so switching one source off never shifts the numbers another sees.
/// `fork` produces a child factory, e.g. one per episode.
class SeedTree {
 public:
  explicit SeedTree(std::uint64_t master) : master_(master) {}

  [[nodiscard]] std::uint64_t master() const { return master_; }

  [[nodiscard]] std::uint64_t derive(std::string_view name, std::uint64_t index = 0) const {
    return detail::splitmix64(detail::splitmix64(master_ ^ detail::fnv1a(name)) + index);
  }

  [[nodiscard]] Rng stream(std::string_view name, std::uint64_t index = 0) const {
    return Rng{derive(name, index)};
  }

  [[nodiscard]] SeedTree fork(std::string_view name, std::uint64_t index = 0) const {
    return SeedTree{derive(name, index)};
  }

 private:
  std::uint64_t master_;
};

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline Eigen::VectorXd standard_normal_vector(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = dist(rng);
  return z;
}

// Column-major fill; column j is the j-th draw.
inline Eigen::MatrixXd standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd z(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = dist(rng);
  return z;
}

inline double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace qaware
