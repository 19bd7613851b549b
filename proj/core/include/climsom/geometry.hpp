#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace climsom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
  friend auto operator<=>(Vec2 const& a, Vec2 const& b) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

// A ring is a vertex list; a trailing vertex equal to the first is allowed
// and ignored.
using Ring = std::vector<Vec2>;

// Rings are combined with the even-odd rule, so rings after the first act
// as holes.
struct Polygon {
  std::vector<Ring> rings;
};

using MultiPolygon = std::vector<Polygon>;

struct Box {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double diagonal() const { return std::hypot(width(), height()); }
  bool contains(Vec2 p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
  friend bool operator==(Box const&, Box const&) = default;
};

Box bounding_box(std::span<Vec2 const> points);
Box box_union(Box const& a, Box const& b);

bool on_segment(Vec2 p, Vec2 a, Vec2 b);

// Even-odd containment; points on an edge count as inside.
bool point_in_ring(Vec2 p, std::span<Vec2 const> ring);
bool point_in_polygon(Vec2 p, Polygon const& polygon);
bool point_in_multipolygon(Vec2 p, MultiPolygon const& region);

// Shoelace area, positive for counter-clockwise rings.
double signed_area(std::span<Vec2 const> ring);

// Drops a closing duplicate vertex if present.
Ring open_ring(std::span<Vec2 const> ring);

// True when no two non-adjacent edges touch.
bool is_simple_ring(std::span<Vec2 const> ring);

// Counter-clockwise hull without the closing vertex. Collinear boundary
// points are dropped. Degenerate inputs return the distinct extreme points.
Ring convex_hull(std::vector<Vec2> points);

}  // namespace climsom
