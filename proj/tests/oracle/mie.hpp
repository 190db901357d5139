#pragma once

// Reference solutions written independently of the library: closed-form
// Hertzian dipole fields and spherical-wave scattering by a homogeneous sphere.
// Time convention exp(+j w t); outgoing waves use h_n^(2).

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Matrix<cplx, 3, 1>;

inline constexpr double eta = 376.730313668;  // sqrt(mu0/eps0)

/// E and H of a z-directed Hertzian dipole with moment il at `src`, all terms kept.
struct DipoleFields {
  CVec3 e, h;
};
DipoleFields hertzian_dipole(const Vec3& r, const Vec3& src, cplx il, double k);

/// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

/// Associated Legendre P_n^m(cos t) without the Condon-Shortley phase and its t-derivative.
double legendre(int n, int m, double t);
double legendre_dtheta(int n, int m, double t);

/// Field expansion sum_{n,m} a_nm M_nm + b_nm N_nm about `center`, with angular
/// functions P_n^|m|(cos t) exp(j m p), m = -n..n.
struct SphericalExpansion {
  Vec3 center = Vec3::Zero();
  double k = 1.0;
  int N = 0;
  std::vector<cplx> a, b;  // index n*n + n + m - 1 for n >= 1

  static int index(int n, int m) { return n * n + n + m - 1; }
  void resize(int n_max);
};

/// Projects a regular field (known E and H everywhere inside a ball around
/// `center`) onto regular waves using radial components on spheres of radius
/// `radii`.
SphericalExpansion project_regular(const std::function<CVec3(const Vec3&)>& e,
                                   const std::function<CVec3(const Vec3&)>& h, const Vec3& center,
                                   double k, int N, const std::vector<double>& radii);

/// Homogeneous sphere of radius a and relative permittivity eps (mu = mu0).
struct MieCoefficients {
  std::vector<cplx> te, tm;  // outgoing M / N amplitude per unit incident amplitude, n = 1..N
};
MieCoefficients mie_coefficients(double ka, cplx eps, int N);

SphericalExpansion scatter(const SphericalExpansion& incident, double radius, cplx eps);

/// Field of an expansion at r; regular uses j_n, outgoing uses h_n^(2).
CVec3 evaluate_e(const SphericalExpansion& s, const Vec3& r, bool outgoing);

/// Far-field pattern of an outgoing expansion: F = lim k r exp(j k r) E, with the
/// phase referenced to the expansion center. Returns (F_theta, F_phi).
std::pair<cplx, cplx> far_field(const SphericalExpansion& s, double theta, double phi);

/// Plane-wave efficiencies (extinction, scattering) for a sphere, used as a self-check.
std::pair<double, double> efficiencies(double ka, cplx eps, int N);

int truncation(double ka);

}  // namespace oracle
