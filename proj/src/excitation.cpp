#include "borfem/excitation.hpp"

#include <cmath>
#include <sstream>

#include "borfem/element.hpp"

namespace borfem {

void DipoleSource::validate() const {
  if (!(position.z > 0.0)) throw ParameterError("dipole height must be positive");
  if (!(power > 0.0)) throw ParameterError("radiated power must be positive");
  if (!(std::abs(gamma) <= 1.0 + 1e-12)) throw ParameterError("|gamma| must not exceed 1");
  if (!(freq > 0.0)) throw ParameterError("frequency must be positive");
  if (position.rho < 0.0) throw ParameterError("dipole rho must be non-negative");
}

double DipoleSource::moment() const { return dipole_moment(power, freq); }

double dipole_moment(double power, double freq) {
  if (!(power > 0.0)) throw ParameterError("radiated power must be positive");
  const double lam = wavelength(freq);
  return std::sqrt(3.0 * power * lam * lam / (kPi * constants::eta0));
}

CVec3 hertzian_field(const Vec3& r, const Vec3& src, cplx il, double k, DipoleModel model) {
  const Vec3 d = r - src;
  const double R = d.norm();
  if (R < 1e-9 * 2 * kPi / k) throw SingularityError("field evaluated at the dipole location");
  const Vec3 rh = d / R;
  const double omega_mu = k * constants::c0 * constants::mu0;
  const cplx g = std::exp(cplx(0.0, -k * R)) / (4.0 * kPi * R);
  const Vec3 zhat(0, 0, 1);
  const Vec3 perp = zhat - rh * rh.z();
  if (model == DipoleModel::Radiation) return (-kJ * omega_mu * il * g) * perp.cast<cplx>();
  const cplx u = 1.0 / (kJ * k * R);  // 1/(jkR)
  const cplx a = 1.0 + u + u * u;
  const cplx b = 1.0 + 3.0 * u + 3.0 * u * u;
  CVec3 e = a * zhat.cast<cplx>() - b * rh.z() * rh.cast<cplx>();
  return (-kJ * omega_mu * il * g) * e;
}

CVec3 hertzian_magnetic_field(const Vec3& r, const Vec3& src, cplx il, double k, DipoleModel model) {
  const Vec3 d = r - src;
  const double R = d.norm();
  if (R < 1e-9 * 2 * kPi / k) throw SingularityError("field evaluated at the dipole location");
  const Vec3 rh = d / R;
  const cplx g = std::exp(cplx(0.0, -k * R)) / (4.0 * kPi * R);
  const cplx u = model == DipoleModel::Full ? 1.0 / (kJ * k * R) : cplx(0.0);
  return (kJ * k * il * g * (1.0 + u)) * Vec3(0, 0, 1).cross(rh).cast<cplx>();
}

CVec3 incident_magnetic_field(const Vec3& r, const DipoleSource& src) {
  const double k = wavenumber(src.freq);
  const double il = src.moment();
  CVec3 h = hertzian_magnetic_field(r, src.cartesian(), il, k, src.model);
  if (src.gamma != 0.0) h += src.gamma * hertzian_magnetic_field(r, src.image(), il, k, src.model);
  return h;
}

CVec3 incident_field(const Vec3& r, const DipoleSource& src) {
  const double k = wavenumber(src.freq);
  const double il = src.moment();
  CVec3 e = hertzian_field(r, src.cartesian(), il, k, src.model);
  if (src.gamma != 0.0) e += src.gamma * hertzian_field(r, src.image(), il, k, src.model);
  return e;
}

CVec3 incident_field(const CylPoint& r, const DipoleSource& src) {
  return cart_to_cyl<cplx>(incident_field(r.cartesian(), src), r.phi);
}

int default_azimuth_samples(int M) { return std::max(64, 8 * (M + 1)); }

HarmonicIncidentField azimuthal_decompose(const Mesh2D& mesh, const DipoleSource& src, int M,
                                          int n_phi) {
  src.validate();
  if (M < 0) throw ParameterError("harmonic count must be non-negative");
  if (n_phi == 0) n_phi = default_azimuth_samples(M);
  if (n_phi < 4 * (M + 1)) {
    std::ostringstream os;
    os << "azimuthal samples " << n_phi << " below 4(M+1) = " << 4 * (M + 1);
    throw ConfigError(os.str());
  }
  HarmonicIncidentField h;
  h.M = M;
  h.n_phi = n_phi;
  const auto& quad = TriangleQuadrature::degree5();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.region[t] != Region::Body) continue;
    h.triangles.push_back(t);
    const auto& v = mesh.triangles[t];
    for (int q = 0; q < quad.size; ++q) {
      const auto& l = quad.bary[q];
      h.points.push_back(l[0] * mesh.nodes[v[0]] + l[1] * mesh.nodes[v[1]] + l[2] * mesh.nodes[v[2]]);
    }
  }
  const int np = static_cast<int>(h.points.size());
  h.e_rho = Eigen::MatrixXcd::Zero(np, M + 1);
  h.e_z = Eigen::MatrixXcd::Zero(np, M + 1);
  h.e_phi = Eigen::MatrixXcd::Zero(np, M + 1);

  // The problem is mirror-symmetric about phi_s: E_rho, E_z are even and E_phi
  // odd in (phi - phi_s), so half a period with doubled interior weights suffices.
  const int half = n_phi / 2;
  std::vector<double> alpha, wgt;
  for (int j = 0; j <= half; ++j) {
    alpha.push_back(2.0 * kPi * j / n_phi);
    const bool edge = j == 0 || (2 * j == n_phi);
    wgt.push_back((edge ? 1.0 : 2.0) * 2.0 * kPi / n_phi);
  }
  Eigen::MatrixXd cm(alpha.size(), M + 1), sm(alpha.size(), M + 1);
  for (std::size_t j = 0; j < alpha.size(); ++j)
    for (int m = 0; m <= M; ++m) {
      cm(j, m) = wgt[j] * cos_harmonic(m, alpha[j]);
      sm(j, m) = wgt[j] * sin_harmonic(m, alpha[j]);
    }

  const Vec3 s0 = src.cartesian(), s1 = src.image();
  double dmin = 1e300;
  Eigen::VectorXcd er(alpha.size()), ez(alpha.size()), ep(alpha.size());
  for (int p = 0; p < np; ++p) {
    const double rho = h.points[p].x(), z = h.points[p].y();
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      const double phi = src.position.phi + alpha[j];
      const CVec3 e = incident_field(CylPoint{rho, phi, z}, src);
      er[j] = e[0];
      ep[j] = e[1];
      ez[j] = e[2];
      const Vec3 r = CylPoint{rho, phi, z}.cartesian();
      dmin = std::min({dmin, (r - s0).norm(), src.gamma != 0.0 ? (r - s1).norm() : 1e300});
    }
    h.e_rho.row(p) = er.transpose() * cm;
    h.e_z.row(p) = ez.transpose() * cm;
    h.e_phi.row(p) = ep.transpose() * sm;
  }
  h.e_phi.col(0).setZero();
  h.min_distance = np > 0 ? dmin : 0.0;
  const double lam = wavelength(src.freq);
  if (np > 0 && dmin < 5.0 * lam && src.model == DipoleModel::Radiation) {
    std::ostringstream os;
    os << "body point at " << dmin / lam << " wavelengths from the source: far-zone dipole field "
       << "is inaccurate below 5 wavelengths";
    h.warnings.push_back(os.str());
  }
  return h;
}

std::vector<CVectorX> assemble_rhs(const HarmonicIncidentField& hinc, const Mesh2D& mesh,
                                   cplx body_eps) {
  const auto& quad = TriangleQuadrature::degree5();
  if (static_cast<int>(hinc.points.size()) != quad.size * static_cast<int>(hinc.triangles.size()))
    throw ConsistencyError("incident field sampling does not match its triangle list");
  int nbody = 0;
  for (auto r : mesh.region) nbody += r == Region::Body;
  if (nbody != static_cast<int>(hinc.triangles.size()))
    throw ConsistencyError("incident field was sampled on a different mesh");
  const int Q = mesh.num_edge_dofs();
  const int n = Q + mesh.num_nodal_dofs();
  std::vector<CVectorX> K(hinc.M + 1, CVectorX::Zero(n));
  const cplx contrast = body_eps - 1.0;
  if (contrast == 0.0) return K;
  for (std::size_t i = 0; i < hinc.triangles.size(); ++i) {
    const int t = hinc.triangles[i];
    if (mesh.region[t] != Region::Body) throw ConsistencyError("incident field triangle is not BODY");
    const EdgeElement ee(mesh, t);
    const NodalElement ne(mesh, t);
    const auto ed = mesh.element_edge_dofs(t);
    const auto nd = mesh.element_nodal_dofs(t);
    const double area = mesh.signed_area(t);
    for (int q = 0; q < quad.size; ++q) {
      const int p = static_cast<int>(i) * quad.size + q;
      const Vec2& x = hinc.points[p];
      const auto tau = ee.value(x);
      const auto phi = ne.value(quad.bary[q]);
      const double w = quad.weight[q] * area;
      for (int m = 0; m <= hinc.M; ++m) {
        const cplx er = hinc.e_rho(p, m), ez = hinc.e_z(p, m), ep = hinc.e_phi(p, m);
        for (int a = 0; a < 8; ++a)
          K[m][ed[a]] += w * contrast * (tau[a].x() * er + tau[a].y() * ez) * x.x();
        if (m == 0) continue;
        for (int a = 0; a < 6; ++a) K[m][Q + nd[a]] += w * contrast * phi[a] * ep;
      }
    }
  }
  return K;
}

}  // namespace borfem
