#include "climsom/geometry.hpp"

#include <algorithm>
#include <limits>

namespace climsom {

Box bounding_box(std::span<Vec2 const> points) {
  Box box{std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};
  for (auto const& p : points) {
    box.xmin = std::min(box.xmin, p.x);
    box.ymin = std::min(box.ymin, p.y);
    box.xmax = std::max(box.xmax, p.x);
    box.ymax = std::max(box.ymax, p.y);
  }
  return box;
}

Box box_union(Box const& a, Box const& b) {
  return {std::min(a.xmin, b.xmin), std::min(a.ymin, b.ymin),
          std::max(a.xmax, b.xmax), std::max(a.ymax, b.ymax)};
}

bool on_segment(Vec2 p, Vec2 a, Vec2 b) {
  if (cross(b - a, p - a) != 0.0) {
    return false;
  }
  return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
         p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y);
}

bool point_in_ring(Vec2 p, std::span<Vec2 const> ring) {
  auto n = ring.size();
  if (n >= 2 && ring.front() == ring.back()) {
    --n;
  }
  if (n < 3) {
    return false;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    auto const& a = ring[i];
    auto const& b = ring[j];
    if (on_segment(p, a, b)) {
      return true;
    }
    if ((a.y > p.y) != (b.y > p.y)) {
      double const x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) {
        inside = !inside;
      }
    }
  }
  return inside;
}

bool point_in_polygon(Vec2 p, Polygon const& polygon) {
  bool inside = false;
  for (auto const& ring : polygon.rings) {
    auto n = ring.size();
    if (n >= 2 && ring.front() == ring.back()) {
      --n;
    }
    for (std::size_t i = 0, j = n - 1; n >= 2 && i < n; j = i++) {
      if (on_segment(p, ring[i], ring[j])) {
        return true;
      }
    }
    if (point_in_ring(p, ring)) {
      inside = !inside;
    }
  }
  return inside;
}

bool point_in_multipolygon(Vec2 p, MultiPolygon const& region) {
  return std::any_of(region.begin(), region.end(),
                     [&](Polygon const& poly) { return point_in_polygon(p, poly); });
}

double signed_area(std::span<Vec2 const> ring) {
  auto n = ring.size();
  if (n >= 2 && ring.front() == ring.back()) {
    --n;
  }
  double twice = 0.0;
  for (std::size_t i = 0, j = n - 1; n >= 3 && i < n; j = i++) {
    twice += cross(ring[j], ring[i]);
  }
  return 0.5 * twice;
}

Ring open_ring(std::span<Vec2 const> ring) {
  Ring out(ring.begin(), ring.end());
  if (out.size() >= 2 && out.front() == out.back()) {
    out.pop_back();
  }
  return out;
}

namespace {

int orientation(Vec2 a, Vec2 b, Vec2 c) {
  double const v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

bool segments_touch(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  int const o1 = orientation(p1, p2, q1);
  int const o2 = orientation(p1, p2, q2);
  int const o3 = orientation(q1, q2, p1);
  int const o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) {
    return true;
  }
  return (o1 == 0 && on_segment(q1, p1, p2)) || (o2 == 0 && on_segment(q2, p1, p2)) ||
         (o3 == 0 && on_segment(p1, q1, q2)) || (o4 == 0 && on_segment(p2, q1, q2));
}

}  // namespace

bool is_simple_ring(std::span<Vec2 const> ring) {
  auto const r = open_ring(ring);
  auto const n = r.size();
  if (n < 3) {
    return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i] == r[(i + 1) % n]) {
      return false;
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      bool const adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) {
        continue;
      }
      if (segments_touch(r[i], r[(i + 1) % n], r[j], r[(j + 1) % n])) {
        return false;
      }
    }
  }
  return true;
}

Ring convex_hull(std::vector<Vec2> points) {
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) {
    return points;
  }
  Ring hull(2 * points.size());
  std::size_t k = 0;
  for (auto const& p : points) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) {
      --k;
    }
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    auto const& p = points[i];
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) {
      --k;
    }
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace climsom
