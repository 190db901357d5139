#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "borfem/geometry.hpp"

namespace borfem {

enum class Region : int { Body = 0, Air = 1, Pml = 2 };
enum class BoundaryTag : int { None = 0, Axis = 1, Ground = 2, PmlOuter = 3 };

const char* to_string(Region r);
const char* to_string(BoundaryTag t);

/// Geometry of the computational half-plane around one body.
/// Physical (non-PML) region: rho in [0, rho_max], z in [z_min, z_max];
/// the PML wraps it on the outer side (and below when there is no ground).
struct DomainSpec {
  BoRProfile body;
  double rho_max = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;
  bool ground = true;
  double pml_thickness = 0.0;
  double h_air = 0.0;   // max element edge in AIR and PML
  double h_body = 0.0;  // max element edge in BODY
  double min_angle_deg = 25.0;

  void validate() const;
};

/// Sizing rules used to derive a DomainSpec from a body and a frequency.
struct MeshOptions {
  double air_ppw = 10.0;   // elements per free-space wavelength in air/PML
  double body_ppw = 3.0;   // elements per in-medium wavelength in the body
  double air_margin = 0.5; // physical air around the body, in wavelengths
  double pml = 0.5;        // PML thickness, in wavelengths
  bool ground = true;
};

DomainSpec make_domain(const BoRProfile& body, double freq, cplx body_eps,
                       const MeshOptions& opts = {});

/// Triangulated (rho, z) half-plane with region/boundary tags and the DOF
/// numbering of 2nd-order mixed elements:
///   edge-element DOFs: 2 per mesh edge + 2 interior per triangle  (Q)
///   nodal DOFs: one per vertex + one per edge midpoint            (Q')
class Mesh2D {
 public:
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<Region> region;
  std::vector<std::array<int, 2>> edges;       // (lo, hi) global vertex ids
  std::vector<std::array<int, 3>> tri_edges;   // local edge k joins v[k], v[(k+1)%3]
  std::vector<std::array<int, 2>> edge_tris;   // adjacent triangles, -1 if none
  std::vector<BoundaryTag> edge_tag;

  // Domain bookkeeping copied from the DomainSpec.
  double rho_max = 0.0, z_min = 0.0, z_max = 0.0, pml_thickness = 0.0;
  bool ground = true;
  std::vector<Vec2> body_polygon;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_edge_dofs() const { return 2 * num_edges() + 2 * num_triangles(); }
  int num_nodal_dofs() const { return num_nodes() + num_edges(); }

  int edge_dof(int e, int k) const { return 2 * e + k; }
  int interior_dof(int t, int k) const { return 2 * num_edges() + 2 * t + k; }
  int vertex_dof(int v) const { return v; }
  int midpoint_dof(int e) const { return num_nodes() + e; }

  /// Global edge-element DOF ids of triangle t, ordered as the element basis.
  std::array<int, 8> element_edge_dofs(int t) const;
  /// Global nodal DOF ids of triangle t: 3 vertices then 3 edge midpoints.
  std::array<int, 6> element_nodal_dofs(int t) const;

  double signed_area(int t) const;
  double max_edge_length(int t) const;
  Vec2 centroid(int t) const;

  bool in_pml(const Vec2& p) const;
  /// Containing triangle of (rho, z) or -1. Requires build_locator().
  int locate(const Vec2& p, double tol = 1e-12) const;
  void build_locator();

  void write(std::ostream& os) const;

 private:
  // Uniform bucket grid over triangle bounding boxes.
  double gx0_ = 0, gz0_ = 0, gdx_ = 1, gdz_ = 1;
  int gnx_ = 0, gnz_ = 0;
  std::vector<std::vector<int>> buckets_;
};

/// Constrained Delaunay triangulation with region-dependent sizing and
/// Ruppert-style quality refinement.
Mesh2D triangulate(const DomainSpec& spec);

/// Barycentric coordinates of p in triangle t.
std::array<double, 3> barycentric(const Mesh2D& mesh, int t, const Vec2& p);

}  // namespace borfem
