#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "treeseg/cloud.hpp"

namespace treeseg {

/// Eigen-decomposition of a local 3x3 covariance.
struct EigenFrame {
  /// Descending, clamped at zero.
  std::array<double, 3> values{};
  /// Unit eigenvectors matching `values`. Each vector's largest-magnitude component is non-negative.
  std::array<Vec3, 3> vectors{};
};

/// Population covariance (divisor n) of the neighborhood and its eigen-decomposition.
/// Returns nullopt for fewer than three points.
std::optional<EigenFrame> local_eigen(std::span<const Point3> neighborhood);

/// Below this lambda2/lambda1 ratio a neighborhood counts as a line.
inline constexpr double kLineRatio = 1e-9;

/// Verticality from a frame: 1 - |e3 . z|, or |e1 . z| for line-like frames. Clamped to [0, 1].
double verticality_of(const EigenFrame& frame);

struct VerticalityOptions {
  double radius = 0.5;
  unsigned workers = 1;
};

/// Per-point verticality over the fixed-radius neighborhood of each point (the point included).
/// Neighborhoods with fewer than three points yield 0.
std::vector<double> verticality(std::span<const Point3> points, const VerticalityOptions& options = {});

inline std::vector<double> verticality(const PointCloud& cloud, double radius, unsigned workers = 1) {
  return verticality(cloud.points, VerticalityOptions{radius, workers});
}

}  // namespace treeseg
