#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace borfem {

using cplx = std::complex<double>;

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

using Vec2 = Vector2<double>;
using Vec3 = Vector3<double>;
using CVec2 = Vector2<cplx>;
using CVec3 = Vector3<cplx>;
using CVectorX = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kJ{0.0, 1.0};

namespace constants {
inline constexpr double c0 = 299792458.0;
inline constexpr double mu0 = 4.0e-7 * kPi;
inline constexpr double eps0 = 1.0 / (mu0 * c0 * c0);
/// Free-space impedance used for the dipole moment normalisation.
inline constexpr double eta0 = 376.73;
}  // namespace constants

inline double wavelength(double freq) { return constants::c0 / freq; }
inline double wavenumber(double freq) { return 2.0 * kPi * freq / constants::c0; }
inline double angular(double freq) { return 2.0 * kPi * freq; }

// Error hierarchy. Every module throws one of these; the CLI maps them onto
// exit codes (ConfigError/ParameterError -> 2, everything else -> 1).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : Error {
  using Error::Error;
};
struct GeometryError : Error {
  using Error::Error;
};
struct MeshError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ConsistencyError : Error {
  using Error::Error;
};
struct SingularityError : Error {
  using Error::Error;
};
struct SolverError : Error {
  using Error::Error;
};
struct LocationError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct CalibrationError : Error {
  using Error::Error;
};

/// Cylindrical point (rho, phi, z).
struct CylPoint {
  double rho = 0.0;
  double phi = 0.0;
  double z = 0.0;

  Vec3 cartesian() const { return {rho * std::cos(phi), rho * std::sin(phi), z}; }
  static CylPoint from_cartesian(const Vec3& p) {
    return {std::hypot(p.x(), p.y()), std::atan2(p.y(), p.x()), p.z()};
  }
};

/// Cartesian components of a cylindrical vector (a_rho, a_phi, a_z) at azimuth phi.
template <typename Scalar>
Vector3<Scalar> cyl_to_cart(const Vector3<Scalar>& v, double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  return {c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]};
}

/// Cylindrical components (a_rho, a_phi, a_z) of a Cartesian vector at azimuth phi.
template <typename Scalar>
Vector3<Scalar> cart_to_cyl(const Vector3<Scalar>& v, double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  return {c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]};
}

}  // namespace borfem
