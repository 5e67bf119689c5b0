#include "treeseg/features.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "treeseg/parallel.hpp"
#include "treeseg/spatial_index.hpp"

namespace treeseg {

std::optional<EigenFrame> local_eigen(std::span<const Point3> neighborhood) {
  if (neighborhood.size() < 3) return std::nullopt;
  const double n = static_cast<double>(neighborhood.size());
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : neighborhood) mean += Eigen::Vector3d(p.x, p.y, p.z);
  mean /= n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : neighborhood) {
    const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= n;

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  EigenFrame frame;
  // Eigen returns ascending eigenvalues.
  for (int k = 0; k < 3; ++k) {
    const int src = 2 - k;
    frame.values[k] = std::max(0.0, solver.eigenvalues()[src]);
    Eigen::Vector3d v = solver.eigenvectors().col(src).normalized();
    Eigen::Index largest = 0;
    v.cwiseAbs().maxCoeff(&largest);
    if (v[largest] < 0) v = -v;
    frame.vectors[k] = {v.x(), v.y(), v.z()};
  }
  return frame;
}

double verticality_of(const EigenFrame& frame) {
  const double l1 = frame.values[0];
  if (!(l1 > 0.0)) return 0.0;
  double v = 0.0;
  if (frame.values[1] / l1 < kLineRatio) {
    v = std::abs(frame.vectors[0].z);
  } else {
    v = 1.0 - std::abs(frame.vectors[2].z);
  }
  return std::clamp(v, 0.0, 1.0);
}

std::vector<double> verticality(std::span<const Point3> points, const VerticalityOptions& options) {
  if (!(options.radius > 0.0)) throw InvalidArgument("verticality: radius must be positive");
  std::vector<double> out(points.size(), 0.0);
  if (points.empty()) return out;
  const NeighborIndex index = NeighborIndex::from_points(points, 3);
  parallel_for(points.size(), options.workers, [&](std::size_t begin, std::size_t end) {
    std::vector<Index> nbrs;
    std::vector<Point3> hood;
    for (std::size_t i = begin; i < end; ++i) {
      const double q[3] = {points[i].x, points[i].y, points[i].z};
      index.radius_neighbors(q, options.radius, nbrs);
      hood.clear();
      // Centering on the query point keeps the covariance well conditioned for large coordinates.
      for (Index j : nbrs) hood.push_back(points[j] - points[i]);
      const auto frame = local_eigen(hood);
      out[i] = frame ? verticality_of(*frame) : 0.0;
    }
  });
  return out;
}

}  // namespace treeseg
