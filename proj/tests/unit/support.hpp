#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>
#include <unistd.h>

#include "treeseg/cloud.hpp"

namespace treeseg::test {

// Seeded generator for property tests. Every property test names its seed so failures replay.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double sigma = 1.0) { return std::normal_distribution<double>(0.0, sigma)(rng_); }
  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

  Point3 point(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }

  std::vector<Point3> cloud(std::size_t n, double lo, double hi) {
    std::vector<Point3> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(point(lo, hi));
    return out;
  }

  // Coordinates snapped to a coarse lattice so distance ties actually occur.
  std::vector<Point3> lattice_cloud(std::size_t n, int cells, double step) {
    std::vector<Point3> out;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back({static_cast<double>(below(cells)) * step, static_cast<double>(below(cells)) * step,
                     static_cast<double>(below(cells)) * step});
    }
    return out;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("treeseg_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline double dist2(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace treeseg::test

namespace doctest {
template <>
struct StringMaker<treeseg::PointLabel> {
  static String convert(const treeseg::PointLabel& l) { return treeseg::to_string(l).c_str(); }
};
}  // namespace doctest
