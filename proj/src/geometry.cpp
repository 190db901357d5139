#include "borfem/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace borfem {

ProfileSegment ProfileSegment::line(Vec2 a, Vec2 b, SegmentRole role) {
  ProfileSegment s;
  s.kind = Kind::Line;
  s.role = role;
  s.a = a;
  s.b = b;
  return s;
}

ProfileSegment ProfileSegment::arc(Vec2 center, Vec2 radii, double t0, double t1,
                                   SegmentRole role) {
  ProfileSegment s;
  s.kind = Kind::Arc;
  s.role = role;
  s.center = center;
  s.radii = radii;
  s.t0 = t0;
  s.t1 = t1;
  s.a = s.point(0.0);
  s.b = s.point(1.0);
  return s;
}

Vec2 ProfileSegment::point(double s) const {
  if (kind == Kind::Line) return a + s * (b - a);
  const double t = t0 + s * (t1 - t0);
  Vec2 p(center.x() + radii.x() * std::cos(t), center.y() + radii.y() * std::sin(t));
  // Endpoints on the axis must be exactly on the axis.
  if (std::abs(p.x()) < 1e-14) p.x() = 0.0;
  return p;
}

double ProfileSegment::length() const {
  if (kind == Kind::Line) return (b - a).norm();
  // Composite Gauss-Legendre on the speed |dp/dt|.
  static constexpr double gx[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const int panels = 64;
  const double dt = (t1 - t0) / panels;
  double len = 0.0;
  for (int k = 0; k < panels; ++k) {
    for (int q = 0; q < 3; ++q) {
      const double t = t0 + dt * (k + 0.5 + 0.5 * gx[q]);
      len += 0.5 * std::abs(dt) * gw[q] *
             std::hypot(radii.x() * std::sin(t), radii.y() * std::cos(t));
    }
  }
  return len;
}

std::vector<Vec2> ProfileSegment::sample(double max_len) const {
  const int n = std::max(1, static_cast<int>(std::ceil(length() / max_len - 1e-9)));
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    if (kind == Kind::Line) {
      pts.push_back(point(static_cast<double>(i) / n));
    } else {
      // Equal parameter steps; refine until every chord is short enough.
      pts.push_back(point(static_cast<double>(i) / n));
    }
  }
  if (kind == Kind::Arc) {
    double worst = 0.0;
    for (int i = 0; i < n; ++i) worst = std::max(worst, (pts[i + 1] - pts[i]).norm());
    if (worst > max_len) {
      const int m = static_cast<int>(std::ceil(n * worst / max_len));
      pts.clear();
      for (int i = 0; i <= m; ++i) pts.push_back(point(static_cast<double>(i) / m));
    }
  }
  pts.front() = a;
  pts.back() = b;
  return pts;
}

BoRProfile::BoRProfile(std::vector<ProfileSegment> segments) : segments_(std::move(segments)) {
  if (segments_.empty()) throw GeometryError("profile has no segments");
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    const auto& next = segments_[(i + 1) % segments_.size()];
    if ((s.b - next.a).norm() > 1e-12) throw GeometryError("profile segments are not connected");
    if (s.a.x() < -1e-14 || s.b.x() < -1e-14)
      throw GeometryError("profile vertex with negative rho");
  }
}

std::vector<Vec2> BoRProfile::vertices() const {
  std::vector<Vec2> v;
  for (const auto& s : segments_) v.push_back(s.a);
  return v;
}

std::vector<Vec2> BoRProfile::polygon(double max_len) const {
  std::vector<Vec2> poly;
  for (const auto& s : segments_) {
    auto pts = s.sample(max_len);
    poly.insert(poly.end(), pts.begin(), pts.end() - 1);
  }
  return poly;
}

double BoRProfile::area() const {
  double twice = 0.0;
  for (const auto& s : segments_) {
    if (s.kind == ProfileSegment::Kind::Line) {
      twice += s.a.x() * s.b.y() - s.b.x() * s.a.y();
    } else {
      const double cx = s.center.x(), cz = s.center.y();
      const double ra = s.radii.x(), rz = s.radii.y();
      twice += cx * rz * (std::sin(s.t1) - std::sin(s.t0)) -
               cz * ra * (std::cos(s.t1) - std::cos(s.t0)) + ra * rz * (s.t1 - s.t0);
    }
  }
  return 0.5 * twice;
}

double BoRProfile::surface_length() const {
  double len = 0.0;
  for (const auto& s : segments_)
    if (s.role == SegmentRole::Surface) len += s.length();
  return len;
}

namespace {
// Candidate extremum points of a segment: endpoints plus arc points where
// d(rho)/dt or dz/dt vanishes.
std::vector<Vec2> critical_points(const ProfileSegment& s) {
  std::vector<Vec2> pts{s.a, s.b};
  if (s.kind == ProfileSegment::Kind::Arc) {
    const double lo = std::min(s.t0, s.t1), hi = std::max(s.t0, s.t1);
    for (int k = static_cast<int>(std::floor(lo / (kPi / 2))) - 1; k * (kPi / 2) <= hi + 1e-15; ++k) {
      const double t = k * (kPi / 2);
      if (t < lo || t > hi) continue;
      pts.push_back({s.center.x() + s.radii.x() * std::cos(t), s.center.y() + s.radii.y() * std::sin(t)});
    }
  }
  return pts;
}

template <typename F>
double extremum(const std::vector<ProfileSegment>& segs, F f, bool want_max) {
  double best = want_max ? -1e300 : 1e300;
  for (const auto& s : segs)
    for (const auto& p : critical_points(s)) best = want_max ? std::max(best, f(p)) : std::min(best, f(p));
  return best;
}
}  // namespace

double BoRProfile::max_rho() const {
  return extremum(segments_, [](const Vec2& p) { return p.x(); }, true);
}
double BoRProfile::min_z() const {
  return extremum(segments_, [](const Vec2& p) { return p.y(); }, false);
}
double BoRProfile::max_z() const {
  return extremum(segments_, [](const Vec2& p) { return p.y(); }, true);
}

bool BoRProfile::touches_axis() const {
  return std::any_of(segments_.begin(), segments_.end(),
                     [](const auto& s) { return s.role == SegmentRole::Axis; });
}
bool BoRProfile::touches_ground() const {
  return std::any_of(segments_.begin(), segments_.end(),
                     [](const auto& s) { return s.role == SegmentRole::Ground; });
}

namespace {
double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}
bool segments_cross(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 &&
         d4 != 0;
}
}  // namespace

bool BoRProfile::is_simple(double max_len) const {
  const auto poly = polygon(max_len);
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  // Orientation must be counter-clockwise for a positive enclosed area.
  return area() > 0.0;
}

bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

BoRProfile build_human_profile(double h, double girth) {
  if (!(h >= 0.5 && h <= 2.5)) throw ParameterError("body height must lie in [0.5, 2.5] m");
  if (!(girth >= 0.05 && girth <= 0.5)) throw ParameterError("body girth must lie in [0.05, 0.5] m");
  using P = HumanProportions;
  const double R = girth;
  const double r_leg = P::leg_radius * R;
  const double z_leg = P::leg_top * h;
  const double z_mid = P::torso_center * h;
  // Lower torso: ellipse centred at the widest point, passing through the leg top.
  const double rho_ratio = P::leg_radius;                          // cos(t0)
  const double sin_t0 = -std::sqrt(1.0 - rho_ratio * rho_ratio);  // below the centre
  const double torso_half = (z_mid - z_leg) / -sin_t0;
  const double t0 = std::atan2(sin_t0, rho_ratio);

  const double head_a = P::head_radius * R;
  const double head_b = P::head_half_height * h;
  const double head_zc = h - head_b;
  const double tj = -std::acos(P::neck_radius / P::head_radius);

  std::vector<ProfileSegment> segs;
  segs.push_back(ProfileSegment::line({0.0, 0.0}, {r_leg, 0.0}, SegmentRole::Ground));
  segs.push_back(ProfileSegment::line({r_leg, 0.0}, {r_leg, z_leg}));
  auto torso = ProfileSegment::arc({0.0, z_mid}, {R, torso_half}, t0, 0.0);
  torso.a = {r_leg, z_leg};
  segs.push_back(torso);
  segs.push_back(ProfileSegment::line({R, z_mid}, {P::chest_radius * R, P::shoulder_z * h}));
  auto shoulder = ProfileSegment::arc({P::neck_radius * R, P::shoulder_z * h},
                                      {(P::chest_radius - P::neck_radius) * R,
                                       (P::neck_base - P::shoulder_z) * h},
                                      0.0, kPi / 2);
  shoulder.b = {P::neck_radius * R, P::neck_base * h};
  segs.push_back(shoulder);
  auto head = ProfileSegment::arc({0.0, head_zc}, {head_a, head_b}, tj, kPi / 2);
  head.b = {0.0, h};
  segs.push_back(ProfileSegment::line({P::neck_radius * R, P::neck_base * h}, head.a));
  segs.push_back(head);
  segs.push_back(ProfileSegment::line({0.0, h}, {0.0, 0.0}, SegmentRole::Axis));
  return BoRProfile(std::move(segs));
}

BoRProfile build_cylinder_profile(double radius, double height) {
  if (!(radius > 0.0) || !(height > 0.0))
    throw ParameterError("cylinder radius and height must be positive");
  std::vector<ProfileSegment> segs;
  segs.push_back(ProfileSegment::line({0.0, 0.0}, {radius, 0.0}, SegmentRole::Ground));
  segs.push_back(ProfileSegment::line({radius, 0.0}, {radius, height}));
  segs.push_back(ProfileSegment::line({radius, height}, {0.0, height}));
  segs.push_back(ProfileSegment::line({0.0, height}, {0.0, 0.0}, SegmentRole::Axis));
  return BoRProfile(std::move(segs));
}

BoRProfile build_sphere_profile(double radius, double center_z, bool ground) {
  if (!(radius > 0.0)) throw ParameterError("sphere radius must be positive");
  if (ground && center_z < radius) throw GeometryError("sphere intersects the ground plane");
  std::vector<ProfileSegment> segs;
  auto arc = ProfileSegment::arc({0.0, center_z}, {radius, radius}, -kPi / 2, kPi / 2);
  arc.a = {0.0, center_z - radius};
  arc.b = {0.0, center_z + radius};
  segs.push_back(arc);
  segs.push_back(ProfileSegment::line(arc.b, arc.a, SegmentRole::Axis));
  return BoRProfile(std::move(segs));
}

}  // namespace borfem
