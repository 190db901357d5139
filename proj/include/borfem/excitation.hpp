#pragma once

#include <string>
#include <vector>

#include "borfem/mesh.hpp"

namespace borfem {

/// Radiation: far-zone field only (transverse 1/R term).
/// Full: exact Hertzian-dipole field including the 1/R^2 and 1/R^3 terms.
enum class DipoleModel { Radiation, Full };

/// z-directed Hertzian dipole above a ground plane represented by a co-directed
/// image at (rho_s, phi_s, -z_s) scaled by gamma.
struct DipoleSource {
  CylPoint position;
  double power = 1.0;  // radiated power, W
  cplx gamma = 0.0;
  double freq = 2.43e9;
  DipoleModel model = DipoleModel::Radiation;

  void validate() const;
  double moment() const;  // Il, A m
  Vec3 cartesian() const { return position.cartesian(); }
  Vec3 image() const {
    Vec3 p = cartesian();
    p.z() = -p.z();
    return p;
  }
};

/// Il = sqrt(3 P_r lambda^2 / (pi eta0)).
double dipole_moment(double power, double freq);

/// Electric field of a z-directed current element of moment il located at src,
/// Cartesian components. Reference implementation shared by incident fields.
CVec3 hertzian_field(const Vec3& r, const Vec3& src, cplx il, double k, DipoleModel model);

/// Magnetic field of the same element; the Radiation model keeps the 1/R term only.
CVec3 hertzian_magnetic_field(const Vec3& r, const Vec3& src, cplx il, double k, DipoleModel model);

/// Incident field (dipole plus image) at a Cartesian point, Cartesian components.
CVec3 incident_field(const Vec3& r, const DipoleSource& src);
/// Same in cylindrical components (E_rho, E_phi, E_z) at a cylindrical point.
CVec3 incident_field(const CylPoint& r, const DipoleSource& src);
CVec3 incident_magnetic_field(const Vec3& r, const DipoleSource& src);

/// Default number of azimuthal samples for M harmonics.
int default_azimuth_samples(int M);

/// Harmonic coefficients of the incident field at the quadrature points of
/// BODY triangles. Column m holds harmonic m; e_phi column 0 is identically 0.
struct HarmonicIncidentField {
  int M = 0;
  int n_phi = 0;
  std::vector<int> triangles;  // BODY triangles, in mesh order
  std::vector<Vec2> points;    // 7 quadrature points per triangle
  Eigen::MatrixXcd e_rho, e_z, e_phi;
  double min_distance = 0.0;   // closest source/image distance over the points
  std::vector<std::string> warnings;
};

HarmonicIncidentField azimuthal_decompose(const Mesh2D& mesh, const DipoleSource& src, int M,
                                          int n_phi = 0);

/// Per-harmonic right-hand sides K^(m) of length Q + Q'.
std::vector<CVectorX> assemble_rhs(const HarmonicIncidentField& hinc, const Mesh2D& mesh,
                                   cplx body_eps);

/// Orthonormal azimuthal functions about phi_s = 0.
inline double cos_harmonic(int m, double phi) {
  return std::cos(m * phi) / std::sqrt(kPi * (m == 0 ? 2.0 : 1.0));
}
inline double sin_harmonic(int m, double phi) { return std::sin(m * phi) / std::sqrt(kPi); }

}  // namespace borfem
