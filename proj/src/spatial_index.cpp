#include "treeseg/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

namespace treeseg {
namespace {

constexpr std::size_t kLeafSize = 12;

struct HeapEntry {
  double d2;
  Index index;
  // Max-heap on (distance, index): the top is the worst kept candidate.
  bool operator<(const HeapEntry& o) const {
    return d2 < o.d2 || (d2 == o.d2 && index < o.index);
  }
};

}  // namespace

NeighborIndex::NeighborIndex(std::vector<double> coords, int dim)
    : coords_(std::move(coords)), dim_(dim), size_(0) {
  if (dim_ != 2 && dim_ != 3) throw InvalidArgument("NeighborIndex: dimension must be 2 or 3");
  if (coords_.size() % static_cast<std::size_t>(dim_) != 0) {
    throw InvalidArgument("NeighborIndex: coordinate count is not a multiple of the dimension");
  }
  size_ = coords_.size() / dim_;
  if (size_ == 0) throw InvalidArgument("NeighborIndex: empty point set");
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    if (!std::isfinite(coords_[i])) {
      throw InvalidArgument("NeighborIndex: non-finite coordinate at point index " +
                            std::to_string(i / dim_));
    }
  }
  order_.resize(size_);
  for (Index i = 0; i < size_; ++i) order_[i] = i;
  nodes_.reserve(2 * (size_ / kLeafSize + 1));
  build(0, size_);
}

NeighborIndex NeighborIndex::from_points(std::span<const Point3> points, int dim) {
  std::vector<double> coords;
  coords.reserve(points.size() * dim);
  for (const auto& p : points) {
    coords.push_back(p.x);
    coords.push_back(p.y);
    if (dim == 3) coords.push_back(p.z);
  }
  return NeighborIndex(std::move(coords), dim);
}

int NeighborIndex::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  for (int a = 0; a < dim_; ++a) {
    node.lo[a] = point(order_[begin])[a];
    node.hi[a] = node.lo[a];
  }
  for (std::size_t i = begin + 1; i < end; ++i) {
    const double* p = point(order_[i]);
    for (int a = 0; a < dim_; ++a) {
      node.lo[a] = std::min(node.lo[a], p[a]);
      node.hi[a] = std::max(node.hi[a], p[a]);
    }
  }
  if (end - begin > kLeafSize) {
    int axis = 0;
    for (int a = 1; a < dim_; ++a) {
      if (node.hi[a] - node.lo[a] > node.hi[axis] - node.lo[axis]) axis = a;
    }
    if (node.hi[axis] > node.lo[axis]) {
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                       [&](Index l, Index r) { return point(l)[axis] < point(r)[axis]; });
      node.axis = axis;
      node.split = point(order_[mid])[axis];
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
  }
  nodes_[id] = node;
  return id;
}

double NeighborIndex::box_distance(const Node& node, const double* q) const {
  double d2 = 0.0;
  for (int a = 0; a < dim_; ++a) {
    double d = 0.0;
    if (q[a] < node.lo[a]) {
      d = node.lo[a] - q[a];
    } else if (q[a] > node.hi[a]) {
      d = q[a] - node.hi[a];
    }
    d2 += d * d;
  }
  return d2;
}

double NeighborIndex::squared_distance(std::span<const double> query, Index i) const {
  const double* p = point(i);
  double d2 = 0.0;
  for (int a = 0; a < dim_; ++a) {
    const double d = query[a] - p[a];
    d2 += d * d;
  }
  return d2;
}

std::vector<Index> NeighborIndex::radius_neighbors(std::span<const double> query,
                                                   double radius) const {
  std::vector<Index> out;
  radius_neighbors(query, radius, out);
  return out;
}

void NeighborIndex::radius_neighbors(std::span<const double> query, double radius,
                                     std::vector<Index>& out) const {
  out.clear();
  if (!(radius > 0.0)) throw InvalidArgument("radius_neighbors: radius must be positive");
  if (query.size() < static_cast<std::size_t>(dim_)) {
    throw InvalidArgument("radius_neighbors: query has too few coordinates");
  }
  const double r2 = radius * radius;
  // Boxes are pruned conservatively; the exact test below decides membership.
  const double prune = r2 * (1.0 + 1e-12);
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_distance(node, query.data()) > prune) continue;
    if (node.left < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const Index idx = order_[i];
        if (squared_distance(query, idx) < r2) out.push_back(idx);
      }
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  std::sort(out.begin(), out.end());
}

std::vector<NeighborIndex::Neighbor> NeighborIndex::k_nearest_with_distance(
    std::span<const double> query, std::size_t k) const {
  if (k == 0) throw InvalidArgument("k_nearest: k must be at least 1");
  if (query.size() < static_cast<std::size_t>(dim_)) {
    throw InvalidArgument("k_nearest: query has too few coordinates");
  }
  k = std::min(k, size_);
  std::priority_queue<HeapEntry> heap;
  // Explicit stack ordered so the nearer child is visited first.
  std::vector<int> stack;
  stack.reserve(64);
  stack.push_back(0);
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    const double box = box_distance(node, query.data());
    // Equal distances must still be visited: a lower index could win the tie.
    if (heap.size() == k && box > heap.top().d2) continue;
    if (node.left < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const HeapEntry e{squared_distance(query, order_[i]), order_[i]};
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
    } else {
      const bool left_first = query[node.axis] < node.split;
      stack.push_back(left_first ? node.right : node.left);
      stack.push_back(left_first ? node.left : node.right);
    }
  }
  std::vector<Neighbor> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = {heap.top().index, heap.top().d2};
    heap.pop();
  }
  return out;
}

std::vector<Index> NeighborIndex::k_nearest(std::span<const double> query, std::size_t k) const {
  std::vector<Index> out;
  for (const auto& n : k_nearest_with_distance(query, k)) out.push_back(n.index);
  return out;
}

}  // namespace treeseg
