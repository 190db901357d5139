#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "borfem/fem.hpp"

namespace borfem {

/// Radiation keeps the far-zone 1/R terms of the current kernels; Full keeps the
/// complete free-space dyadic (exact outside the surface at any distance).
enum class ExteriorKernel { Radiation, Full };

/// Huygens cylinder around the body. Sizes are in free-space wavelengths; zero
/// radius / heights mean "derive from the body outline".
struct SurfaceSpec {
  double margin = 0.15;         // clearance beyond the body outline
  double spacing = 1.0 / 12.0;  // max generatrix panel length
  int gauss = 2;                // Gauss points per panel
  int n_az = 0;                 // azimuthal samples, 0 -> 16 (M + 1)
  double radius = 0.0;          // m
  double z_hi = 0.0;            // m
  double z_lo = 0.0;            // m, free-space meshes only
};

/// Quadrature node on the generatrix with outward (n_rho, n_z) and arc-length weight.
struct GeneratrixNode {
  Vec2 rz;
  Vec2 normal;
  double dl = 0.0;
};

/// Geometry and frozen element bases shared by every excitation on one mesh.
struct SurfaceGeometry {
  const Mesh2D* mesh = nullptr;
  double freq = 0.0;
  int M = 0;
  int n_az = 0;
  double radius = 0.0, z_lo = 0.0, z_hi = 0.0;
  bool ground = true;  // bottom cap replaced by the ground plane
  std::vector<GeneratrixNode> nodes;
  std::vector<PointBasis> basis;

  /// True when a local Cartesian point lies inside (or on) the closed surface.
  bool encloses(const Vec3& r) const;
  /// Distance from a local point to the surface of revolution.
  double distance(const Vec3& r) const;
};

SurfaceGeometry make_surface(const Mesh2D& mesh, double freq, int M, const SurfaceSpec& spec = {});

/// One azimuth x generatrix sample: position, outward normal, area weight,
/// J = n x H (A/m) and M = -n x E (V/m), Cartesian in the body frame.
struct SurfaceSample {
  Vec3 position;
  Vec3 normal;
  double weight = 0.0;
  CVec3 j, m;
};

/// Scattered E and H on the surface stored per generatrix node and harmonic:
///   E = sum_m [e_rho c_m, e_phi s_m, e_z c_m],  H = sum_m [h_rho s_m, h_phi c_m, h_z s_m].
struct EquivalentSurface {
  std::shared_ptr<const SurfaceGeometry> geometry;
  Eigen::MatrixXcd e_rho, e_phi, e_z, h_rho, h_phi, h_z;  // nodes x (M + 1)

  explicit EquivalentSurface(std::shared_ptr<const SurfaceGeometry> g);

  /// Fills harmonic m from the FEM unknowns of that harmonic.
  void set_harmonic(int m, const CVectorX& u_t, const CVectorX& u_phi);
  std::vector<SurfaceSample> samples() const;
  /// Parseval energy of E per harmonic: integral of |E_m|^2 over the surface.
  std::vector<double> harmonic_energy() const;
  /// Same surface with every current scaled (used for linearity checks).
  EquivalentSurface scaled(cplx a) const;
};

EquivalentSurface extract_currents(const HarmonicSolution& sol, const SurfaceSpec& spec = {});
EquivalentSurface extract_currents(const HarmonicSolution& sol,
                                   std::shared_ptr<const SurfaceGeometry> geometry);

/// Field radiated by the surface currents and their ground images
/// (J~ = gamma (-Jx, -Jy, Jz), M~ = gamma (Mx, My, -Mz) at z -> -z).
/// Points are Cartesian in the body frame; throws DomainError inside the surface
/// or below a ground plane.
std::vector<CVec3> exterior_field(const EquivalentSurface& surf, const std::vector<Vec3>& points,
                                  cplx gamma, ExteriorKernel kernel = ExteriorKernel::Full,
                                  int threads = 1);
CVec3 exterior_field(const EquivalentSurface& surf, const Vec3& r, cplx gamma,
                     ExteriorKernel kernel = ExteriorKernel::Full);

/// Far-field pattern F = lim k r exp(j k r) E on a list of directions, phase
/// referenced to `origin`.
struct FarFieldPattern {
  std::vector<double> theta, phi;  // rad
  std::vector<cplx> e_theta, e_phi;
  std::vector<double> directivity_db;  // 20 log10 |F| / max |F|
};

/// Directions (theta_i, phi) for theta_i in `thetas`; a negative theta denotes
/// (-theta, phi + pi), which gives a full great-circle cut.
std::vector<std::pair<double, double>> cut_directions(const std::vector<double>& thetas, double phi);

/// Scattered far field, or total when `incident` is given.
FarFieldPattern far_field(const EquivalentSurface& surf, cplx gamma,
                          const std::vector<std::pair<double, double>>& directions,
                          const DipoleSource* incident = nullptr, const Vec3& origin = Vec3::Zero());

/// Net outward power 1/2 Re of the Poynting flux through the surface; with
/// `incident` the total field is used, so minus the result is the absorbed power.
double surface_power(const EquivalentSurface& surf, const DipoleSource* incident = nullptr);

void write_far_field_csv(std::ostream& os, const FarFieldPattern& p);

struct FieldMapPoint {
  Vec3 r;
  CVec3 e = CVec3::Zero();
  bool masked = false;
};

/// x, y, z, then re/im of Ex, Ey, Ez, then masked (0/1).
void write_field_map_csv(std::ostream& os, const std::vector<FieldMapPoint>& grid);

}  // namespace borfem
