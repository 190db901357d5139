#include "borfem/exterior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "borfem/element.hpp"
#include "borfem/parallel.hpp"

namespace borfem {

namespace {

struct Panel {
  Vec2 a, b, normal;
};

cplx dot(const Vec3& a, const CVec3& b) { return a.x() * b.x() + a.y() * b.y() + a.z() * b.z(); }

// Eigen's cross() conjugates complex operands, so these are spelled out.
template <typename A>
CVec3 cross(const Vector3<A>& a, const CVec3& b) {
  return {a.y() * b.z() - a.z() * b.y(), a.z() * b.x() - a.x() * b.z(), a.x() * b.y() - a.y() * b.x()};
}

// E radiated at r by point currents J, M at rp (weights already applied).
CVec3 radiate(const Vec3& r, const Vec3& rp, const CVec3& J, const CVec3& M, double k,
              double omega_mu, ExteriorKernel kernel) {
  const Vec3 d = r - rp;
  const double R = d.norm();
  const Vec3 rh = d / R;
  const cplx g = std::exp(cplx(0.0, -k * R)) / (4.0 * kPi * R);
  const cplx u = kernel == ExteriorKernel::Full ? 1.0 / (kJ * k * R) : cplx(0.0);
  const cplx a = 1.0 + u + u * u, b = 1.0 + 3.0 * u + 3.0 * u * u;
  const CVec3 ej = (-kJ * omega_mu * g) * (a * J - (b * dot(rh, J)) * rh.cast<cplx>());
  const CVec3 em = (kJ * k * g * (1.0 + u)) * cross(rh, M);
  return ej + em;
}

CVec3 image_j(const CVec3& J, cplx gamma) { return gamma * CVec3(-J.x(), -J.y(), J.z()); }
CVec3 image_m(const CVec3& M, cplx gamma) { return gamma * CVec3(M.x(), M.y(), -M.z()); }

// Per-sample E and H with position/normal/weight, Cartesian.
struct SurfaceFields {
  std::vector<Vec3> position, normal;
  std::vector<double> weight;
  std::vector<CVec3> e, h;
};

SurfaceFields surface_fields(const EquivalentSurface& s) {
  const SurfaceGeometry& g = *s.geometry;
  const int na = g.n_az, M = g.M;
  Eigen::MatrixXd cm(na, M + 1), sm(na, M + 1);
  for (int j = 0; j < na; ++j) {
    const double a = 2.0 * kPi * j / na;
    for (int m = 0; m <= M; ++m) {
      cm(j, m) = cos_harmonic(m, a);
      sm(j, m) = sin_harmonic(m, a);
    }
  }
  SurfaceFields f;
  const std::size_t n = g.nodes.size() * na;
  f.position.reserve(n);
  f.normal.reserve(n);
  f.weight.reserve(n);
  f.e.reserve(n);
  f.h.reserve(n);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& nd = g.nodes[i];
    for (int j = 0; j < na; ++j) {
      const double a = 2.0 * kPi * j / na;
      CVec3 e = CVec3::Zero(), h = CVec3::Zero();
      for (int m = 0; m <= M; ++m) {
        e[0] += s.e_rho(i, m) * cm(j, m);
        e[1] += s.e_phi(i, m) * sm(j, m);
        e[2] += s.e_z(i, m) * cm(j, m);
        h[0] += s.h_rho(i, m) * sm(j, m);
        h[1] += s.h_phi(i, m) * cm(j, m);
        h[2] += s.h_z(i, m) * sm(j, m);
      }
      f.position.emplace_back(nd.rz.x() * std::cos(a), nd.rz.x() * std::sin(a), nd.rz.y());
      f.normal.push_back(cyl_to_cart<double>(Vec3(nd.normal.x(), 0.0, nd.normal.y()), a));
      f.weight.push_back(nd.dl * nd.rz.x() * 2.0 * kPi / na);
      f.e.push_back(cyl_to_cart<cplx>(e, a));
      f.h.push_back(cyl_to_cart<cplx>(h, a));
    }
  }
  return f;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Geometry

bool SurfaceGeometry::encloses(const Vec3& r) const {
  const double rho = std::hypot(r.x(), r.y());
  return rho <= radius && r.z() <= z_hi && (ground || r.z() >= z_lo);
}

double SurfaceGeometry::distance(const Vec3& r) const {
  const Vec2 p(std::hypot(r.x(), r.y()), r.z());
  auto seg = [&](const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
    return (p - a - t * d).norm();
  };
  double d = std::min(seg({radius, ground ? 0.0 : z_lo}, {radius, z_hi}), seg({0.0, z_hi}, {radius, z_hi}));
  if (!ground) d = std::min(d, seg({0.0, z_lo}, {radius, z_lo}));
  return d;
}

SurfaceGeometry make_surface(const Mesh2D& mesh, double freq, int M, const SurfaceSpec& spec) {
  if (!(freq > 0.0)) throw ParameterError("frequency must be positive");
  if (M < 0) throw ParameterError("harmonic count must be non-negative");
  if (spec.gauss < 1 || !(spec.spacing > 0.0) || spec.n_az < 0)
    throw ParameterError("invalid equivalent-surface sampling");
  if (mesh.body_polygon.empty()) throw GeometryError("mesh carries no body outline");
  double max_rho = 0.0, max_z = -1e300, min_z = 1e300;
  for (const auto& p : mesh.body_polygon) {
    max_rho = std::max(max_rho, p.x());
    max_z = std::max(max_z, p.y());
    min_z = std::min(min_z, p.y());
  }
  const double lam = wavelength(freq);
  SurfaceGeometry g;
  g.mesh = &mesh;
  g.freq = freq;
  g.M = M;
  g.n_az = spec.n_az > 0 ? spec.n_az : 16 * (M + 1);
  g.ground = mesh.ground;
  g.radius = spec.radius > 0.0 ? spec.radius : max_rho + spec.margin * lam;
  g.z_hi = spec.z_hi > 0.0 ? spec.z_hi : max_z + spec.margin * lam;
  g.z_lo = g.ground ? 0.0 : (spec.z_lo != 0.0 ? spec.z_lo : min_z - spec.margin * lam);
  if (g.n_az < 2 * M + 1) throw ParameterError("too few azimuthal samples for the harmonic count");
  if (g.radius <= max_rho || g.z_hi <= max_z || (!g.ground && g.z_lo >= min_z))
    throw GeometryError("equivalent surface intersects the body");
  if (g.radius >= mesh.rho_max || g.z_hi >= mesh.z_max || (!g.ground && g.z_lo <= mesh.z_min))
    throw GeometryError("equivalent surface reaches the PML");

  std::vector<Panel> outline;
  if (!g.ground) outline.push_back({{0.0, g.z_lo}, {g.radius, g.z_lo}, {0.0, -1.0}});
  outline.push_back({{g.radius, g.z_lo}, {g.radius, g.z_hi}, {1.0, 0.0}});
  outline.push_back({{g.radius, g.z_hi}, {0.0, g.z_hi}, {0.0, 1.0}});
  const auto quad = LineQuadrature::gauss(spec.gauss);
  const double h = spec.spacing * lam;
  for (const auto& seg : outline) {
    const double len = (seg.b - seg.a).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / h - 1e-9)));
    for (int i = 0; i < n; ++i)
      for (std::size_t q = 0; q < quad.x.size(); ++q) {
        const double s = (i + quad.x[q]) / n;
        g.nodes.push_back({seg.a + s * (seg.b - seg.a), seg.normal, quad.w[q] * len / n});
      }
  }
  g.basis.reserve(g.nodes.size());
  for (const auto& nd : g.nodes) {
    const int t = mesh.locate(nd.rz);
    if (t >= 0 && mesh.region[t] == Region::Body) throw GeometryError("equivalent surface intersects the body");
    try {
      g.basis.push_back(point_basis(mesh, nd.rz));
    } catch (const LocationError& e) {
      throw GeometryError(std::string("equivalent surface leaves the physical region: ") + e.what());
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Currents

EquivalentSurface::EquivalentSurface(std::shared_ptr<const SurfaceGeometry> g) : geometry(std::move(g)) {
  const auto n = static_cast<Eigen::Index>(geometry->nodes.size());
  const int cols = geometry->M + 1;
  for (auto* a : {&e_rho, &e_phi, &e_z, &h_rho, &h_phi, &h_z}) a->setZero(n, cols);
}

void EquivalentSurface::set_harmonic(int m, const CVectorX& u_t, const CVectorX& u_phi) {
  if (m < 0 || m > geometry->M) throw ParameterError("harmonic index out of range");
  const cplx jwm = kJ * angular(geometry->freq) * constants::mu0;
  for (std::size_t i = 0; i < geometry->nodes.size(); ++i) {
    const auto c = harmonic_coefficients(geometry->basis[i], u_t, u_phi, m);
    const auto r = static_cast<Eigen::Index>(i);
    e_rho(r, m) = c[0];
    e_phi(r, m) = c[1];
    e_z(r, m) = c[2];
    h_rho(r, m) = -c[3] / jwm;
    h_phi(r, m) = -c[4] / jwm;
    h_z(r, m) = -c[5] / jwm;
  }
}

std::vector<SurfaceSample> EquivalentSurface::samples() const {
  const SurfaceFields f = surface_fields(*this);
  std::vector<SurfaceSample> out(f.position.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].position = f.position[i];
    out[i].normal = f.normal[i];
    out[i].weight = f.weight[i];
    out[i].j = cross(f.normal[i], f.h[i]);
    out[i].m = -cross(f.normal[i], f.e[i]);
  }
  return out;
}

std::vector<double> EquivalentSurface::harmonic_energy() const {
  std::vector<double> out(geometry->M + 1, 0.0);
  for (int m = 0; m <= geometry->M; ++m)
    for (std::size_t i = 0; i < geometry->nodes.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto& nd = geometry->nodes[i];
      out[m] += nd.dl * nd.rz.x() *
                (std::norm(e_rho(r, m)) + std::norm(e_phi(r, m)) + std::norm(e_z(r, m)));
    }
  return out;
}

EquivalentSurface EquivalentSurface::scaled(cplx a) const {
  EquivalentSurface s = *this;
  for (auto* m : {&s.e_rho, &s.e_phi, &s.e_z, &s.h_rho, &s.h_phi, &s.h_z}) *m *= a;
  return s;
}

EquivalentSurface extract_currents(const HarmonicSolution& sol,
                                   std::shared_ptr<const SurfaceGeometry> geometry) {
  if (geometry->mesh != sol.mesh) throw ConsistencyError("surface built on a different mesh");
  if (geometry->M > sol.M) throw ConsistencyError("surface expects more harmonics than solved");
  EquivalentSurface s(std::move(geometry));
  for (int m = 0; m <= s.geometry->M; ++m) s.set_harmonic(m, sol.u_t[m], sol.u_phi[m]);
  return s;
}

EquivalentSurface extract_currents(const HarmonicSolution& sol, const SurfaceSpec& spec) {
  return extract_currents(sol, std::make_shared<const SurfaceGeometry>(
                                   make_surface(*sol.mesh, sol.freq, sol.M, spec)));
}

// ---------------------------------------------------------------------------
// Radiation

std::vector<CVec3> exterior_field(const EquivalentSurface& surf, const std::vector<Vec3>& points,
                                  cplx gamma, ExteriorKernel kernel, int threads) {
  const SurfaceGeometry& g = *surf.geometry;
  for (const auto& r : points) {
    if (g.ground && r.z() < 0.0) throw DomainError("observation point below the ground plane");
    if (g.encloses(r)) {
      std::ostringstream os;
      os << "observation point (" << r.x() << ", " << r.y() << ", " << r.z()
         << ") lies inside the equivalent surface";
      throw DomainError(os.str());
    }
  }
  const auto s = surf.samples();
  const double k = wavenumber(g.freq);
  const double omega_mu = angular(g.freq) * constants::mu0;
  std::vector<CVec3> out(points.size(), CVec3::Zero());
  parallel_for(static_cast<int>(points.size()), threads, [&](int p) {
    CVec3 e = CVec3::Zero();
    for (const auto& q : s) {
      e += radiate(points[p], q.position, q.weight * q.j, q.weight * q.m, k, omega_mu, kernel);
      if (gamma != 0.0) {
        const Vec3 im(q.position.x(), q.position.y(), -q.position.z());
        e += radiate(points[p], im, q.weight * image_j(q.j, gamma), q.weight * image_m(q.m, gamma), k,
                     omega_mu, kernel);
      }
    }
    out[p] = e;
  });
  return out;
}

CVec3 exterior_field(const EquivalentSurface& surf, const Vec3& r, cplx gamma, ExteriorKernel kernel) {
  return exterior_field(surf, std::vector<Vec3>{r}, gamma, kernel).front();
}

std::vector<std::pair<double, double>> cut_directions(const std::vector<double>& thetas, double phi) {
  std::vector<std::pair<double, double>> d;
  d.reserve(thetas.size());
  for (double t : thetas) d.emplace_back(t < 0.0 ? -t : t, t < 0.0 ? phi + kPi : phi);
  return d;
}

FarFieldPattern far_field(const EquivalentSurface& surf, cplx gamma,
                          const std::vector<std::pair<double, double>>& directions,
                          const DipoleSource* incident, const Vec3& origin) {
  const SurfaceGeometry& g = *surf.geometry;
  const double k = wavenumber(g.freq);
  const double omega_mu = angular(g.freq) * constants::mu0;
  const auto s = surf.samples();
  FarFieldPattern p;
  for (const auto& [t, ph] : directions) {
    if (g.ground && std::cos(t) < -1e-12) throw DomainError("far-field direction below the ground plane");
    const double st = std::sin(t), ct = std::cos(t), sp = std::sin(ph), cp = std::cos(ph);
    const Vec3 rh(st * cp, st * sp, ct), th(ct * cp, ct * sp, -st), fh(-sp, cp, 0.0);
    CVec3 F = CVec3::Zero();
    auto add = [&](const Vec3& pos, const CVec3& J, const CVec3& M) {
      const cplx ph_ = std::exp(cplx(0.0, k * rh.dot(pos - origin)));
      const CVec3 jperp = J - dot(rh, J) * rh.cast<cplx>();
      F += (k / (4.0 * kPi)) * ph_ * (-kJ * omega_mu * jperp + kJ * k * cross(rh, M));
    };
    for (const auto& q : s) {
      add(q.position, q.weight * q.j, q.weight * q.m);
      if (gamma != 0.0)
        add({q.position.x(), q.position.y(), -q.position.z()}, q.weight * image_j(q.j, gamma),
            q.weight * image_m(q.m, gamma));
    }
    if (incident) {
      const CVec3 il(0.0, 0.0, incident->moment());
      add(incident->cartesian(), il, CVec3::Zero());
      if (incident->gamma != 0.0) add(incident->image(), incident->gamma * il, CVec3::Zero());
    }
    p.theta.push_back(t);
    p.phi.push_back(ph);
    p.e_theta.push_back(dot(th, F));
    p.e_phi.push_back(dot(fh, F));
  }
  double peak = 0.0;
  for (std::size_t i = 0; i < p.theta.size(); ++i)
    peak = std::max(peak, std::hypot(std::abs(p.e_theta[i]), std::abs(p.e_phi[i])));
  for (std::size_t i = 0; i < p.theta.size(); ++i) {
    const double a = std::hypot(std::abs(p.e_theta[i]), std::abs(p.e_phi[i]));
    p.directivity_db.push_back(peak > 0.0 && a > 0.0 ? std::max(20.0 * std::log10(a / peak), -300.0) : -300.0);
  }
  return p;
}

double surface_power(const EquivalentSurface& surf, const DipoleSource* incident) {
  SurfaceFields f = surface_fields(surf);
  double p = 0.0;
  for (std::size_t i = 0; i < f.position.size(); ++i) {
    CVec3 e = f.e[i], h = f.h[i];
    if (incident) {
      e += incident_field(f.position[i], *incident);
      h += incident_magnetic_field(f.position[i], *incident);
    }
    const CVec3 s = cross<cplx>(e, h.conjugate());
    p += 0.5 * std::real(dot(f.normal[i], s)) * f.weight[i];
  }
  return p;
}

// ---------------------------------------------------------------------------
// Export

void write_far_field_csv(std::ostream& os, const FarFieldPattern& p) {
  os << "theta_deg,phi_deg,re_e_theta,im_e_theta,re_e_phi,im_e_phi,directivity_db\n";
  for (std::size_t i = 0; i < p.theta.size(); ++i)
    os << fmt(p.theta[i] * 180.0 / kPi) << ',' << fmt(p.phi[i] * 180.0 / kPi) << ','
       << fmt(p.e_theta[i].real()) << ',' << fmt(p.e_theta[i].imag()) << ',' << fmt(p.e_phi[i].real())
       << ',' << fmt(p.e_phi[i].imag()) << ',' << fmt(p.directivity_db[i]) << '\n';
}

void write_field_map_csv(std::ostream& os, const std::vector<FieldMapPoint>& grid) {
  os << "x,y,z,re_ex,im_ex,re_ey,im_ey,re_ez,im_ez,masked\n";
  for (const auto& g : grid) {
    os << fmt(g.r.x()) << ',' << fmt(g.r.y()) << ',' << fmt(g.r.z());
    for (int c = 0; c < 3; ++c) os << ',' << fmt(g.e[c].real()) << ',' << fmt(g.e[c].imag());
    os << ',' << (g.masked ? 1 : 0) << '\n';
  }
}

}  // namespace borfem
