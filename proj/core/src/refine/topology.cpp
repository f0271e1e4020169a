#include "foodmet/refine/topology.hpp"

#include <algorithm>
#include <map>

namespace foodmet::refine {

EdgeTopology::EdgeTopology(const TriangleMesh& mesh) {
  directed_.reserve(mesh.faces.size() * 3);
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const auto a = f[static_cast<std::size_t>(k)];
      const auto b = f[static_cast<std::size_t>((k + 1) % 3)];
      if (a == b) continue;  // collapsed edge of a sliver face
      if (++directed_[key(a, b)] > 1) consistent_ = false;
    }
  }
  // Visit half-edges in face order so loop extraction is deterministic.
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const auto a = f[static_cast<std::size_t>(k)];
      const auto b = f[static_cast<std::size_t>((k + 1) % 3)];
      if (a == b) continue;
      const int ab = directed_[key(a, b)];
      const auto it = directed_.find(key(b, a));
      const int ba = it == directed_.end() ? 0 : it->second;
      if (ab + ba == 1) {
        boundary_half_edges_.emplace_back(a, b);
        ++boundary_edges_;
      }
    }
  }
}

std::vector<std::vector<std::uint32_t>> EdgeTopology::boundary_loops() const {
  std::multimap<std::uint32_t, std::size_t> by_start;
  for (std::size_t i = 0; i < boundary_half_edges_.size(); ++i) {
    by_start.emplace(boundary_half_edges_[i].first, i);
  }
  std::vector<bool> used(boundary_half_edges_.size(), false);
  std::vector<std::vector<std::uint32_t>> loops;
  for (std::size_t start = 0; start < boundary_half_edges_.size(); ++start) {
    if (used[start]) continue;
    std::vector<std::uint32_t> loop;
    std::size_t e = start;
    for (;;) {
      used[e] = true;
      loop.push_back(boundary_half_edges_[e].first);
      const auto next_vertex = boundary_half_edges_[e].second;
      if (next_vertex == boundary_half_edges_[start].first) break;
      std::size_t next = boundary_half_edges_.size();
      auto [lo, hi] = by_start.equal_range(next_vertex);
      for (auto it = lo; it != hi; ++it) {
        if (!used[it->second]) {
          next = it->second;
          break;
        }
      }
      if (next == boundary_half_edges_.size()) break;  // open chain (non-manifold)
      e = next;
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

}  // namespace foodmet::refine
