#include "foodmet/scale/corners.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>

namespace foodmet::scale {

namespace {

struct Lattice {
  int x;
  int y;
};

struct CrackEdge {
  Lattice from;
  Lattice to;
};

// 4-connected labels of pixels at or above the threshold; -1 elsewhere.
std::vector<int> label_white(const GrayImage& image, int threshold,
                             std::vector<std::vector<int>>& members) {
  const int w = image.width();
  const int h = image.height();
  std::vector<int> labels(image.size(), -1);
  auto at = [w](int x, int y) {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
  };
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (image.at(x, y) < threshold || labels[at(x, y)] >= 0) continue;
      const int label = static_cast<int>(members.size());
      members.emplace_back();
      labels[at(x, y)] = label;
      stack.push_back(y * w + x);
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        members[static_cast<std::size_t>(label)].push_back(p);
        const int px = p % w;
        const int py = p / w;
        const int nx[4] = {px + 1, px - 1, px, px};
        const int ny[4] = {py, py, py + 1, py - 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
          auto& l = labels[at(nx[k], ny[k])];
          if (l >= 0 || image.at(nx[k], ny[k]) < threshold) continue;
          l = label;
          stack.push_back(ny[k] * w + nx[k]);
        }
      }
    }
  }
  return labels;
}

// Outer boundary of one region as a closed lattice polygon. Edges are
// oriented with the region on their right (image coordinates, y down).
std::vector<Lattice> outer_boundary(const std::vector<int>& pixels,
                                    const std::vector<int>& labels, int label,
                                    int w, int h) {
  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h &&
           labels[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                  static_cast<std::size_t>(x)] == label;
  };
  std::vector<CrackEdge> edges;
  for (int p : pixels) {
    const int x = p % w;
    const int y = p / w;
    if (!inside(x, y - 1)) edges.push_back({{x, y}, {x + 1, y}});
    if (!inside(x + 1, y)) edges.push_back({{x + 1, y}, {x + 1, y + 1}});
    if (!inside(x, y + 1)) edges.push_back({{x + 1, y + 1}, {x, y + 1}});
    if (!inside(x - 1, y)) edges.push_back({{x, y + 1}, {x, y}});
  }

  auto key = [w](Lattice v) {
    return static_cast<std::uint64_t>(v.y) * static_cast<std::uint64_t>(w + 1) +
           static_cast<std::uint64_t>(v.x);
  };
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> outgoing;
  outgoing.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) outgoing[key(edges[e].from)].push_back(e);

  std::vector<bool> used(edges.size(), false);
  std::vector<Lattice> best_loop;
  double best_area = -1.0;
  for (std::size_t start = 0; start < edges.size(); ++start) {
    if (used[start]) continue;
    std::vector<Lattice> loop;
    std::size_t e = start;
    while (!used[e]) {
      used[e] = true;
      loop.push_back(edges[e].from);
      const int dx = edges[e].to.x - edges[e].from.x;
      const int dy = edges[e].to.y - edges[e].from.y;
      const auto& next = outgoing[key(edges[e].to)];
      std::size_t chosen = edges.size();
      for (std::size_t cand : next) {
        if (used[cand] && cand != start) continue;
        const int cx = edges[cand].to.x - edges[cand].from.x;
        const int cy = edges[cand].to.y - edges[cand].from.y;
        // At a pinch vertex, turn toward the region (right turn).
        if (chosen == edges.size() || (cx == -dy && cy == dx)) chosen = cand;
      }
      if (chosen == edges.size() || chosen == start) break;
      e = chosen;
    }
    double area2 = 0.0;
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const Lattice& a = loop[i];
      const Lattice& b = loop[(i + 1) % loop.size()];
      area2 += static_cast<double>(a.x) * b.y - static_cast<double>(b.x) * a.y;
    }
    if (std::abs(area2) > best_area) {
      best_area = std::abs(area2);
      best_loop = std::move(loop);
    }
  }
  return best_loop;
}

struct Point2 {
  double x;
  double y;
};

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

// Douglas-Peucker on the open chain pts[first..last] (indices modulo n);
// appends kept interior vertices to `out`.
void simplify_chain(const std::vector<Point2>& pts, std::size_t first, std::size_t last,
                    double eps, std::vector<std::size_t>& out) {
  const std::size_t n = pts.size();
  const std::size_t span = (last + n - first) % n;
  if (span < 2) return;
  double worst = -1.0;
  std::size_t worst_idx = first;
  for (std::size_t k = 1; k < span; ++k) {
    const std::size_t i = (first + k) % n;
    const double d = segment_distance(pts[i], pts[first], pts[last]);
    if (d > worst) {
      worst = d;
      worst_idx = i;
    }
  }
  if (worst <= eps) return;
  simplify_chain(pts, first, worst_idx, eps, out);
  out.push_back(worst_idx);
  simplify_chain(pts, worst_idx, last, eps, out);
}

std::vector<Point2> simplify_closed(const std::vector<Point2>& pts, double eps) {
  const std::size_t n = pts.size();
  if (n <= 3) return pts;
  Point2 c{0, 0};
  for (const auto& p : pts) {
    c.x += p.x;
    c.y += p.y;
  }
  c.x /= static_cast<double>(n);
  c.y /= static_cast<double>(n);
  auto farthest_from = [&](const Point2& q) {
    std::size_t best = 0;
    double bd = -1;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::hypot(pts[i].x - q.x, pts[i].y - q.y);
      if (d > bd) {
        bd = d;
        best = i;
      }
    }
    return best;
  };
  const std::size_t a = farthest_from(c);
  const std::size_t b = farthest_from(pts[a]);

  std::vector<std::size_t> kept{a};
  simplify_chain(pts, a, b, eps, kept);
  kept.push_back(b);
  simplify_chain(pts, b, a, eps, kept);

  std::vector<Point2> poly;
  poly.reserve(kept.size());
  for (auto i : kept) poly.push_back(pts[i]);

  // The anchors need not be true corners; drop any vertex that lies within
  // eps of the segment joining its neighbors.
  bool changed = true;
  while (changed && poly.size() > 3) {
    changed = false;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Point2& prev = poly[(i + poly.size() - 1) % poly.size()];
      const Point2& next = poly[(i + 1) % poly.size()];
      if (segment_distance(poly[i], prev, next) <= eps) {
        poly.erase(poly.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  return poly;
}

bool is_square_like(const std::vector<Point2>& quad, double tolerance) {
  if (quad.size() != 4) return false;
  double sides[4];
  int sign = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Point2& a = quad[i];
    const Point2& b = quad[(i + 1) % 4];
    const Point2& c = quad[(i + 2) % 4];
    sides[i] = std::hypot(b.x - a.x, b.y - a.y);
    const double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
    const int s = cross > 0 ? 1 : (cross < 0 ? -1 : 0);
    if (s == 0 || (sign != 0 && s != sign)) return false;  // not strictly convex
    sign = s;
  }
  const double lo = *std::min_element(sides, sides + 4);
  const double hi = *std::max_element(sides, sides + 4);
  return hi > 0 && (hi - lo) <= tolerance * hi;
}

}  // namespace

std::vector<sfmio::Pixel> detect_corners(const GrayImage& image,
                                         const CornerOptions& options) {
  if (image.empty()) throw ParameterError("detect_corners: empty image");
  if (options.intensity_threshold < 0 || options.intensity_threshold > 255) {
    throw ParameterError("detect_corners: threshold must be in [0, 255]");
  }

  std::vector<std::vector<int>> members;
  const auto labels = label_white(image, options.intensity_threshold, members);

  std::vector<Point2> raw;
  for (std::size_t label = 0; label < members.size(); ++label) {
    if (static_cast<int>(members[label].size()) < options.min_region_pixels) continue;
    const auto loop = outer_boundary(members[label], labels, static_cast<int>(label),
                                     image.width(), image.height());
    // Keep only turning vertices of the lattice loop.
    std::vector<Point2> turns;
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const Lattice& p = loop[(i + loop.size() - 1) % loop.size()];
      const Lattice& q = loop[i];
      const Lattice& r = loop[(i + 1) % loop.size()];
      const int cross = (q.x - p.x) * (r.y - q.y) - (q.y - p.y) * (r.x - q.x);
      if (cross != 0) turns.push_back({static_cast<double>(q.x), static_cast<double>(q.y)});
    }
    if (turns.size() < 4) continue;
    const double perimeter = static_cast<double>(loop.size());
    const double eps = std::max(1.0, options.simplify_fraction * perimeter);
    const auto poly = simplify_closed(turns, eps);
    if (!is_square_like(poly, options.side_tolerance)) continue;
    raw.insert(raw.end(), poly.begin(), poly.end());
  }

  // Greedy merge in a fixed order so the output does not depend on region
  // labeling details.
  std::sort(raw.begin(), raw.end(), [](const Point2& a, const Point2& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  struct Cluster {
    double sx = 0, sy = 0;
    int n = 0;
    double cx() const { return sx / n; }
    double cy() const { return sy / n; }
  };
  std::vector<Cluster> clusters;
  for (const Point2& p : raw) {
    Cluster* target = nullptr;
    for (Cluster& c : clusters) {
      if (std::hypot(c.cx() - p.x, c.cy() - p.y) <= options.merge_radius) {
        target = &c;
        break;
      }
    }
    if (target == nullptr) {
      clusters.emplace_back();
      target = &clusters.back();
    }
    target->sx += p.x;
    target->sy += p.y;
    ++target->n;
  }

  std::vector<sfmio::Pixel> corners;
  corners.reserve(clusters.size());
  for (const Cluster& c : clusters) corners.push_back({c.cx(), c.cy()});
  std::sort(corners.begin(), corners.end(), [](const sfmio::Pixel& a, const sfmio::Pixel& b) {
    return a.v != b.v ? a.v < b.v : a.u < b.u;
  });
  return corners;
}

}  // namespace foodmet::scale
