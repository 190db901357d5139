#pragma once

#include <vector>

#include "borfem/types.hpp"

namespace borfem {

/// Role of a generatrix segment. AXIS and GROUND segments close the body
/// against rho = 0 and z = 0; SURFACE segments are the physical body outline.
enum class SegmentRole { Surface, Axis, Ground };

/// Straight line or elliptical arc in the (rho, z) half-plane.
/// Arcs are parameterised as center + (radii.x cos t, radii.y sin t), t in [t0, t1].
struct ProfileSegment {
  enum class Kind { Line, Arc };

  Kind kind = Kind::Line;
  SegmentRole role = SegmentRole::Surface;
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
  Vec2 center = Vec2::Zero();
  Vec2 radii = Vec2::Zero();
  double t0 = 0.0;
  double t1 = 0.0;

  static ProfileSegment line(Vec2 a, Vec2 b, SegmentRole role = SegmentRole::Surface);
  static ProfileSegment arc(Vec2 center, Vec2 radii, double t0, double t1,
                            SegmentRole role = SegmentRole::Surface);

  Vec2 point(double s) const;  // s in [0, 1]
  double length() const;
  /// Points from start to end (inclusive) with spacing <= max_len.
  std::vector<Vec2> sample(double max_len) const;
};

/// Closed generatrix of a body of revolution, counter-clockwise in (rho, z).
class BoRProfile {
 public:
  BoRProfile() = default;
  explicit BoRProfile(std::vector<ProfileSegment> segments);

  const std::vector<ProfileSegment>& segments() const { return segments_; }

  /// Segment start points in order (corner list of the closed outline).
  std::vector<Vec2> vertices() const;
  /// Closed polygon approximating the outline, edge length <= max_len.
  std::vector<Vec2> polygon(double max_len) const;

  double area() const;
  double surface_length() const;
  double max_rho() const;
  double min_z() const;
  double max_z() const;
  bool touches_axis() const;
  bool touches_ground() const;
  bool is_simple(double max_len) const;

 private:
  std::vector<ProfileSegment> segments_;
};

/// Proportions of the stacked-primitive human generatrix. Every rho value is
/// a multiple of the girth R_h and every z value a multiple of the height h.
struct HumanProportions {
  static constexpr double leg_radius = 0.6;      // x R_h
  static constexpr double leg_top = 0.45;        // x h
  static constexpr double torso_center = 0.60;   // x h, widest point (rho = R_h)
  static constexpr double chest_radius = 0.9;    // x R_h at shoulder line
  static constexpr double shoulder_z = 0.78;     // x h
  static constexpr double neck_base = 0.83;      // x h
  static constexpr double neck_radius = 0.3;     // x R_h
  static constexpr double head_radius = 0.55;    // x R_h (radial semi-axis)
  // Vertical head semi-axis, chosen so the head is a sphere for h/R_h = 8.5.
  static constexpr double head_half_height = 0.55 * 0.2 / 1.7;  // x h
};

BoRProfile build_human_profile(double h, double girth);
BoRProfile build_cylinder_profile(double radius, double height);
BoRProfile build_sphere_profile(double radius, double center_z, bool ground = false);

/// Even-odd point-in-polygon test.
bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& p);

}  // namespace borfem
