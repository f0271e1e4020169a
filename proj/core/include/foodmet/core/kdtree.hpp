#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "foodmet/core/geometry.hpp"

namespace foodmet {

/// Static 3D k-d tree for exact nearest-neighbor queries. Holds a copy of
/// the points; immutable after construction and safe to query concurrently.
class KdTree {
 public:
  struct Hit {
    std::uint32_t index;
    /// Squared Euclidean distance, computed as dx*dx + dy*dy + dz*dz.
    double squared_distance;
  };

  explicit KdTree(std::span<const Vec3> points);

  /// Exact nearest neighbor; ties resolve to the lowest point index.
  /// Precondition: the tree is non-empty.
  Hit nearest(const Vec3& query) const;

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::uint32_t i) const { return points_[i]; }

 private:
  struct Node {
    // Leaf: [begin, end) into order_. Inner: split axis/value and children.
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double split = 0.0;
    int axis = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, int depth);
  void search(std::int32_t node, const Vec3& q, Hit& best) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Squared distance with the same operation order the tree uses; brute-force
/// oracles should call this to stay bit-comparable.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace foodmet
