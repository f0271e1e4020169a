#pragma once

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "foodmet/core/geometry.hpp"

namespace foodmet::refine {

/// Edge incidence of a triangle mesh.
class EdgeTopology {
 public:
  explicit EdgeTopology(const TriangleMesh& mesh);

  /// Undirected edges used by exactly one face.
  std::size_t boundary_edge_count() const { return boundary_edges_; }
  /// No directed edge appears in two faces.
  bool consistently_oriented() const { return consistent_; }

  /// Closed loops of boundary half-edges, each listed in the direction the
  /// faces traverse them (a -> b where the face owns a -> b and no face owns
  /// b -> a). Loops are returned in order of their smallest starting edge.
  std::vector<std::vector<std::uint32_t>> boundary_loops() const;

 private:
  static std::uint64_t key(std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }

  std::unordered_map<std::uint64_t, int> directed_;  // (a,b) -> face count
  std::vector<std::pair<std::uint32_t, std::uint32_t>> boundary_half_edges_;
  std::size_t boundary_edges_ = 0;
  bool consistent_ = true;
};

}  // namespace foodmet::refine
