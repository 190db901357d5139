#include "borfem/fem.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/UmfPackSupport>

#include "borfem/element.hpp"
#include "borfem/parallel.hpp"

namespace borfem {

// ---------------------------------------------------------------------------
// PML

PmlMap PmlMap::for_mesh(const Mesh2D& mesh, double freq, double reflection, int order) {
  if (!(reflection > 0.0 && reflection < 1.0)) throw ParameterError("PML reflection must lie in (0, 1)");
  PmlMap p;
  p.rho_start = mesh.rho_max;
  p.z_top = mesh.z_max;
  p.z_bottom = mesh.ground ? -1e300 : mesh.z_min;
  p.thickness = mesh.pml_thickness;
  p.order = order;
  p.beta = -(order + 1) * std::log(reflection) / (2.0 * wavenumber(freq) * mesh.pml_thickness);
  return p;
}

cplx PmlMap::s_rho(double rho) const {
  if (rho <= rho_start) return 1.0;
  return cplx(1.0, -beta * std::pow((rho - rho_start) / thickness, order));
}

cplx PmlMap::s_z(double z) const {
  double xi = 0.0;
  if (z > z_top) xi = z - z_top;
  else if (z < z_bottom) xi = z_bottom - z;
  else return 1.0;
  return cplx(1.0, -beta * std::pow(xi / thickness, order));
}

cplx PmlMap::rho_tilde(double rho) const {
  if (rho <= rho_start) return rho;
  const double u = (rho - rho_start) / thickness;
  return cplx(rho, -beta * thickness * std::pow(u, order + 1) / (order + 1));
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

using Triplets = std::vector<Eigen::Triplet<cplx>>;

SparseMatrixC from_triplets(int rows, int cols, const Triplets& t) {
  SparseMatrixC A(rows, cols);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

}  // namespace

HarmonicSystem assemble(const Mesh2D& mesh, cplx body_eps, const PmlMap& pml, cplx zeta,
                        double freq, int M) {
  if (M < 0) throw ParameterError("harmonic count must be non-negative");
  if (!(freq > 0.0)) throw ParameterError("frequency must be positive");
  HarmonicSystem sys;
  sys.mesh = &mesh;
  sys.freq = freq;
  sys.body_eps = body_eps;
  sys.zeta = zeta;
  sys.M = M;
  const int Q = mesh.num_edge_dofs(), Qp = mesh.num_nodal_dofs();
  const auto& quad = TriangleQuadrature::degree5();

  Triplets att, att1, atp, app, btt, bpp;
  const std::size_t nt = static_cast<std::size_t>(mesh.num_triangles());
  att.reserve(64 * nt);
  att1.reserve(64 * nt);
  btt.reserve(64 * nt);
  atp.reserve(48 * nt);
  app.reserve(36 * nt);
  bpp.reserve(36 * nt);

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const EdgeElement ee(mesh, t);
    const NodalElement ne(mesh, t);
    const auto ed = mesh.element_edge_dofs(t);
    const auto nd = mesh.element_nodal_dofs(t);
    const auto& v = mesh.triangles[t];
    const double area = mesh.signed_area(t);
    const cplx eps = mesh.region[t] == Region::Body ? body_eps : cplx(1.0);

    Eigen::Matrix<cplx, 8, 8> l_att = Eigen::Matrix<cplx, 8, 8>::Zero(), l_att1 = l_att, l_btt = l_att;
    Eigen::Matrix<cplx, 8, 6> l_atp = Eigen::Matrix<cplx, 8, 6>::Zero();
    Eigen::Matrix<cplx, 6, 6> l_app = Eigen::Matrix<cplx, 6, 6>::Zero(), l_bpp = l_app;

    for (int q = 0; q < quad.size; ++q) {
      const auto& l = quad.bary[q];
      const Vec2 x = l[0] * mesh.nodes[v[0]] + l[1] * mesh.nodes[v[1]] + l[2] * mesh.nodes[v[2]];
      const double W = quad.weight[q] * area;
      const cplx sr = pml.s_rho(x.x()), sz = pml.s_z(x.y()), rt = pml.rho_tilde(x.x());
      const cplx wc = rt / (sr * sz);
      const cplx wrr = sz / (rt * sr), wzz = sr / (rt * sz);
      const cplx mr = rt * sz / sr, mz = rt * sr / sz, mp = sr * sz / rt;

      const auto tau = ee.value(x);
      const auto cu = ee.curl(x);
      const auto ph = ne.value(l);
      const auto gp = ne.gradient(l);
      for (int a = 0; a < 8; ++a) {
        for (int b = 0; b < 8; ++b) {
          l_att(a, b) += W * wc * (cu[a] * cu[b]);
          const double rr = tau[a].x() * tau[b].x(), zz = tau[a].y() * tau[b].y();
          l_att1(a, b) += W * (rr * wrr + zz * wzz);
          l_btt(a, b) += W * eps * (rr * mr + zz * mz);
        }
        for (int b = 0; b < 6; ++b)
          l_atp(a, b) -= W * (tau[a].x() * gp[b].x() * wrr + tau[a].y() * gp[b].y() * wzz);
      }
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) {
          l_app(a, b) += W * (gp[a].x() * gp[b].x() * wrr + gp[a].y() * gp[b].y() * wzz);
          l_bpp(a, b) += W * eps * ph[a] * ph[b] * mp;
        }
    }
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        att.emplace_back(ed[a], ed[b], l_att(a, b));
        att1.emplace_back(ed[a], ed[b], l_att1(a, b));
        btt.emplace_back(ed[a], ed[b], l_btt(a, b));
      }
      for (int b = 0; b < 6; ++b) atp.emplace_back(ed[a], nd[b], l_atp(a, b));
    }
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) {
        app.emplace_back(nd[a], nd[b], l_app(a, b));
        bpp.emplace_back(nd[a], nd[b], l_bpp(a, b));
      }
  }
  sys.Att = from_triplets(Q, Q, att);
  sys.Att1 = from_triplets(Q, Q, att1);
  sys.Btt = from_triplets(Q, Q, btt);
  sys.Atp = from_triplets(Q, Qp, atp);
  sys.App = from_triplets(Qp, Qp, app);
  sys.Bpp = from_triplets(Qp, Qp, bpp);

  // Impedance ground: n x E = zeta H_t gives the boundary term (j w mu0 / zeta) int W.E_t dS.
  Triplets ctt, cpp;
  const bool impedance = mesh.ground && zeta != 0.0;
  if (impedance) {
    const auto g = LineQuadrature::gauss(5);
    for (int e = 0; e < mesh.num_edges(); ++e) {
      if (mesh.edge_tag[e] != BoundaryTag::Ground) continue;
      const int t = mesh.edge_tris[e][0];
      const EdgeElement ee(mesh, t);
      const NodalElement ne(mesh, t);
      const auto ed = mesh.element_edge_dofs(t);
      const auto nd = mesh.element_nodal_dofs(t);
      const auto& v = mesh.triangles[t];
      const Vec2 pa = mesh.nodes[mesh.edges[e][0]], pb = mesh.nodes[mesh.edges[e][1]];
      const double len = (pb - pa).norm();
      const Vec2 th = (pb - pa) / len;
      Eigen::Matrix<cplx, 8, 8> l_c = Eigen::Matrix<cplx, 8, 8>::Zero();
      Eigen::Matrix<cplx, 6, 6> l_p = Eigen::Matrix<cplx, 6, 6>::Zero();
      for (std::size_t q = 0; q < g.x.size(); ++q) {
        const Vec2 x = pa + g.x[q] * (pb - pa);
        std::array<double, 3> l{};
        for (int k = 0; k < 3; ++k) {
          if (v[k] == mesh.edges[e][0]) l[k] = 1.0 - g.x[q];
          if (v[k] == mesh.edges[e][1]) l[k] = g.x[q];
        }
        const double W = g.w[q] * len;
        const cplx sr = pml.s_rho(x.x()), rt = pml.rho_tilde(x.x());
        const auto tau = ee.value(x);
        const auto ph = ne.value(l);
        for (int a = 0; a < 8; ++a)
          for (int b = 0; b < 8; ++b) l_c(a, b) += W * tau[a].dot(th) * tau[b].dot(th) * rt / sr;
        for (int a = 0; a < 6; ++a)
          for (int b = 0; b < 6; ++b) l_p(a, b) += W * ph[a] * ph[b] * sr / rt;
      }
      for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) ctt.emplace_back(ed[a], ed[b], l_c(a, b) / zeta);
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) cpp.emplace_back(nd[a], nd[b], l_p(a, b) / zeta);
    }
  }
  sys.Ctt = from_triplets(Q, Q, ctt);
  sys.Cpp = from_triplets(Qp, Qp, cpp);

  // Essential conditions.
  sys.fixed.assign(Q + Qp, 0);
  sys.axis_edge.assign(Q, 0);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const BoundaryTag tag = mesh.edge_tag[e];
    if (tag == BoundaryTag::None) continue;
    const bool pec = tag == BoundaryTag::PmlOuter || (tag == BoundaryTag::Ground && !impedance);
    const bool axis = tag == BoundaryTag::Axis;
    if (!pec && !axis) continue;
    if (pec) sys.fixed[mesh.edge_dof(e, 0)] = sys.fixed[mesh.edge_dof(e, 1)] = 1;
    if (axis) sys.axis_edge[mesh.edge_dof(e, 0)] = sys.axis_edge[mesh.edge_dof(e, 1)] = 1;
    // Tangential E_phi (pec) and rho E_phi on the axis both vanish.
    for (int vtx : mesh.edges[e]) sys.fixed[Q + mesh.vertex_dof(vtx)] = 1;
    sys.fixed[Q + mesh.midpoint_dof(e)] = 1;
  }
  return sys;
}

SparseMatrixC HarmonicSystem::matrix(int m, std::vector<int>& free_dofs) const {
  const int nq = Q(), np = Qp();
  const double k2 = k0() * k0();
  const cplx jwm = kJ * angular(freq) * constants::mu0;
  std::vector<int> map(nq + np, -1);
  free_dofs.clear();
  for (int i = 0; i < nq; ++i)
    if (!fixed[i] && (m == 0 || !axis_edge[i])) {
      map[i] = static_cast<int>(free_dofs.size());
      free_dofs.push_back(i);
    }
  if (m > 0)
    for (int i = nq; i < nq + np; ++i)
      if (!fixed[i]) {
        map[i] = static_cast<int>(free_dofs.size());
        free_dofs.push_back(i);
      }
  const double mm = static_cast<double>(m);
  Triplets t;
  t.reserve(Att.nonZeros() * 3 + (m > 0 ? Atp.nonZeros() * 2 + App.nonZeros() * 2 : 0));
  auto add = [&](const SparseMatrixC& A, int r0, int c0, cplx scale, bool transpose) {
    for (int k = 0; k < A.outerSize(); ++k)
      for (SparseMatrixC::InnerIterator it(A, k); it; ++it) {
        int r = static_cast<int>(it.row()) + r0, c = static_cast<int>(it.col()) + c0;
        if (transpose) {
          r = static_cast<int>(it.col()) + r0;
          c = static_cast<int>(it.row()) + c0;
        }
        if (map[r] >= 0 && map[c] >= 0) t.emplace_back(map[r], map[c], scale * it.value());
      }
  };
  add(Att, 0, 0, 1.0, false);
  if (m != 0) add(Att1, 0, 0, mm * mm, false);
  add(Btt, 0, 0, -k2, false);
  if (Ctt.nonZeros()) add(Ctt, 0, 0, jwm, false);
  if (m > 0) {
    add(Atp, 0, nq, -mm, false);
    add(Atp, nq, 0, -mm, true);
    add(App, nq, nq, 1.0, false);
    add(Bpp, nq, nq, -k2, false);
    if (Cpp.nonZeros()) add(Cpp, nq, nq, jwm, false);
  }
  const int n = static_cast<int>(free_dofs.size());
  return from_triplets(n, n, t);
}

// ---------------------------------------------------------------------------
// Solve

struct HarmonicSolver::Impl {
  SparseMatrixC A;
  std::vector<int> free;
  Eigen::UmfPackLU<SparseMatrixC> lu;
};

HarmonicSolver::HarmonicSolver(const HarmonicSystem& sys, int m)
    : impl_(std::make_unique<Impl>()), sys_(&sys), m_(m) {
  if (m < 0) throw ParameterError("harmonic index must be non-negative");
  impl_->A = sys.matrix(m, impl_->free);
  // Refinement is done here only when the residual asks for it.
  impl_->lu.umfpackControl()(UMFPACK_IRSTEP) = 0;
  impl_->lu.compute(impl_->A);
  if (impl_->lu.info() != Eigen::Success) {
    std::ostringstream os;
    os << "factorization failed for harmonic m = " << m << " (" << impl_->A.rows()
       << " unknowns, UMFPACK status " << impl_->lu.info() << ")";
    throw SolverError(os.str());
  }
}

HarmonicSolver::~HarmonicSolver() = default;
HarmonicSolver::HarmonicSolver(HarmonicSolver&&) noexcept = default;
HarmonicSolver& HarmonicSolver::operator=(HarmonicSolver&&) noexcept = default;

HarmonicCoefficients HarmonicSolver::solve(const CVectorX& K) const {
  const int nq = sys_->Q(), np = sys_->Qp();
  if (K.size() != nq + np) throw ConsistencyError("right-hand side length does not match the system");
  const double k2 = sys_->k0() * sys_->k0();
  const auto& free = impl_->free;
  CVectorX b(free.size());
  for (std::size_t i = 0; i < free.size(); ++i) b[i] = k2 * K[free[i]];
  HarmonicCoefficients out;
  out.u_t = CVectorX::Zero(nq);
  out.u_phi = CVectorX::Zero(np);
  const double bn = b.norm();
  if (bn == 0.0) return out;
  CVectorX x = impl_->lu.solve(b);
  CVectorX r = b - impl_->A * x;
  out.residual = r.norm() / bn;
  if (out.residual > 1e-10) {  // one step of iterative refinement
    x += impl_->lu.solve(r);
    out.residual = (b - impl_->A * x).norm() / bn;
  }
  if (!std::isfinite(out.residual) || out.residual > 1e-8) {
    std::ostringstream os;
    os << "harmonic m = " << m_ << ": relative residual " << out.residual << " exceeds 1e-8";
    throw SolverError(os.str());
  }
  for (std::size_t i = 0; i < free.size(); ++i) {
    const int g = free[i];
    if (g < nq) out.u_t[g] = x[i];
    else out.u_phi[g - nq] = x[i];
  }
  return out;
}

HarmonicCoefficients solve_harmonic(const HarmonicSystem& sys, const CVectorX& K, int m) {
  return HarmonicSolver(sys, m).solve(K);
}

HarmonicSolution solve_all(const HarmonicSystem& sys, const std::vector<CVectorX>& rhs, int M,
                           int threads) {
  if (static_cast<int>(rhs.size()) < M + 1) throw ConsistencyError("fewer right-hand sides than harmonics");
  HarmonicSolution sol;
  sol.mesh = sys.mesh;
  sol.freq = sys.freq;
  sol.M = M;
  sol.u_t.resize(M + 1);
  sol.u_phi.resize(M + 1);
  sol.residual.resize(M + 1);
  parallel_for(M + 1, threads, [&](int m) {
    auto c = solve_harmonic(sys, rhs[m], m);
    sol.u_t[m] = std::move(c.u_t);
    sol.u_phi[m] = std::move(c.u_phi);
    sol.residual[m] = c.residual;
  });
  return sol;
}

void solve_jobs(const HarmonicSystem& sys, int M, int n_jobs, const RhsBuilder& rhs,
                const SolutionSink& consume, const JobSolveOptions& opts) {
  if (n_jobs <= 0) return;
  using SparseVec = Eigen::SparseVector<cplx>;
  const int n = sys.Q() + sys.Qp();
  // Right-hand sides live on BODY DOFs only, so they are kept sparse.
  auto compress = [&](std::vector<CVectorX>&& dense) {
    if (static_cast<int>(dense.size()) < M + 1)
      throw ConsistencyError("fewer right-hand sides than harmonics");
    std::vector<SparseVec> out(M + 1);
    for (int m = 0; m <= M; ++m) {
      if (dense[m].size() != n) throw ConsistencyError("right-hand side length does not match the system");
      out[m].resize(n);
      for (int i = 0; i < n; ++i)
        if (dense[m][i] != cplx(0.0)) out[m].insertBack(i) = dense[m][i];
    }
    return out;
  };
  auto bytes = [](const std::vector<SparseVec>& k) {
    double b = 0.0;
    for (const auto& v : k) b += 24.0 * v.nonZeros();
    return b;
  };
  const int threads = std::max(1, opts.threads);
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a) { return std::chrono::duration<double>(clock::now() - a).count(); };
  if (opts.timing) {
    opts.timing->factorize.resize(M + 1, 0.0);
    opts.timing->solve.resize(M + 1, 0.0);
  }
  int j0 = 0;
  while (j0 < n_jobs) {
    std::vector<std::vector<SparseVec>> K;
    double used = 0.0;
    const int cap = opts.batch > 0 ? opts.batch : n_jobs;
    while (j0 + static_cast<int>(K.size()) < n_jobs && static_cast<int>(K.size()) < cap &&
           (K.empty() || used < opts.memory_budget)) {
      const int first = j0 + static_cast<int>(K.size());
      const int nb = std::min({threads, n_jobs - first, cap - static_cast<int>(K.size())});
      std::vector<std::vector<SparseVec>> part(nb);
      const auto t0 = clock::now();
      parallel_for(nb, threads, [&](int i) { part[i] = compress(rhs(first + i)); });
      if (opts.timing) opts.timing->rhs += seconds(t0);
      for (auto& p : part) {
        used += bytes(p);
        K.push_back(std::move(p));
      }
    }
    const int nb = static_cast<int>(K.size());
    for (int m = 0; m <= M; ++m) {
      auto t0 = clock::now();
      const HarmonicSolver solver(sys, m);
      if (opts.timing) opts.timing->factorize[m] += seconds(t0);
      for (int i = 0; i < nb; ++i) {
        t0 = clock::now();
        const auto c = solver.solve(CVectorX(K[i][m]));
        if (opts.timing) opts.timing->solve[m] += seconds(t0);
        K[i][m] = SparseVec();
        consume(j0 + i, m, c);
      }
    }
    if (opts.timing) ++opts.timing->batches;
    j0 += nb;
  }
}

// ---------------------------------------------------------------------------
// Field reconstruction

std::pair<CVec3, CVec3> HarmonicPointField::at(double phi, double freq) const {
  CVec3 e = CVec3::Zero(), c = CVec3::Zero();
  for (std::size_t m = 0; m < e_rho.size(); ++m) {
    const double cm = cos_harmonic(static_cast<int>(m), phi), sm = sin_harmonic(static_cast<int>(m), phi);
    e[0] += e_rho[m] * cm;
    e[1] += e_phi[m] * sm;
    e[2] += e_z[m] * cm;
    c[0] += c_rho[m] * sm;
    c[1] += c_phi[m] * cm;
    c[2] += c_z[m] * sm;
  }
  const cplx jwm = kJ * angular(freq) * constants::mu0;
  return {e, -c / jwm};
}

PointBasis point_basis(const Mesh2D& mesh, const Vec2& rz) {
  const int t = mesh.locate(rz);
  if (t < 0 || mesh.in_pml(rz)) {
    std::ostringstream os;
    os << "point (rho = " << rz.x() << ", z = " << rz.y() << ") is outside the physical FEM region";
    throw LocationError(os.str());
  }
  const EdgeElement ee(mesh, t);
  const NodalElement ne(mesh, t);
  const auto l = barycentric(mesh, t, rz);
  PointBasis b;
  b.rz = rz;
  b.edge_dofs = mesh.element_edge_dofs(t);
  b.nodal_dofs = mesh.element_nodal_dofs(t);
  b.tau = ee.value(rz);
  b.curl = ee.curl(rz);
  b.phi = ne.value(l);
  b.grad = ne.gradient(l);
  return b;
}

std::array<cplx, 6> harmonic_coefficients(const PointBasis& b, const CVectorX& u_t,
                                          const CVectorX& u_phi, int m) {
  const double rho = std::max(b.rz.x(), 1e-12);
  cplx er = 0.0, ez = 0.0, cphi = 0.0, w = 0.0, wr = 0.0, wz = 0.0;
  for (int a = 0; a < 8; ++a) {
    const cplx u = u_t[b.edge_dofs[a]];
    er += u * b.tau[a].x();
    ez += u * b.tau[a].y();
    cphi += u * b.curl[a];
  }
  if (u_phi.size() > 0)
    for (int a = 0; a < 6; ++a) {
      const cplx u = u_phi[b.nodal_dofs[a]];
      w += u * b.phi[a];
      wr += u * b.grad[a].x();
      wz += u * b.grad[a].y();
    }
  const double mm = m;
  return {er, w / rho, ez, -(mm * ez + wz) / rho, cphi, (mm * er + wr) / rho};
}

HarmonicPointField harmonic_point_field(const HarmonicSolution& sol, const Vec2& rz) {
  const PointBasis b = point_basis(*sol.mesh, rz);
  HarmonicPointField f;
  for (int m = 0; m <= sol.M; ++m) {
    const auto c = harmonic_coefficients(b, sol.u_t[m], sol.u_phi[m], m);
    f.e_rho.push_back(c[0]);
    f.e_phi.push_back(c[1]);
    f.e_z.push_back(c[2]);
    f.c_rho.push_back(c[3]);
    f.c_phi.push_back(c[4]);
    f.c_z.push_back(c[5]);
  }
  return f;
}

std::vector<FieldSample> reconstruct_fields(const HarmonicSolution& sol,
                                            const std::vector<CylPoint>& points) {
  std::vector<FieldSample> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const auto f = harmonic_point_field(sol, {p.rho, p.z});
    auto [e, h] = f.at(p.phi, sol.freq);
    out.push_back({e, h});
  }
  return out;
}

void write_triplets(std::ostream& os, const SparseMatrixC& A) {
  os.precision(17);
  os << "% " << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrixC::InnerIterator it(A, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
}

void write_vector(std::ostream& os, const CVectorX& v) {
  os.precision(17);
  os << "% " << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << v[i].real() << ' ' << v[i].imag() << '\n';
}

}  // namespace borfem
