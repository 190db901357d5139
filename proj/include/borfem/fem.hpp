#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "borfem/excitation.hpp"
#include "borfem/mesh.hpp"

namespace borfem {

using SparseMatrixC = Eigen::SparseMatrix<cplx>;

/// Complex coordinate stretching s(xi) = 1 - j beta (xi/d)^n inside the PML,
/// xi being the depth into the layer. beta = sigma_max / (omega eps0).
struct PmlMap {
  double rho_start = 1e300;  // PML for rho > rho_start
  double z_top = 1e300;      // PML for z > z_top
  double z_bottom = -1e300;  // PML for z < z_bottom
  double thickness = 1.0;
  double beta = 0.0;
  int order = 2;

  /// Graded PML sized for theoretical normal-incidence reflection `reflection`.
  static PmlMap for_mesh(const Mesh2D& mesh, double freq, double reflection = 1e-3, int order = 2);

  cplx s_rho(double rho) const;
  cplx s_z(double z) const;
  /// Stretched radius: integral of s_rho from 0 to rho.
  cplx rho_tilde(double rho) const;
  double sigma_max(double freq) const { return beta * angular(freq) * constants::eps0; }
};

/// Per-harmonic block system (A^(m) - k0^2 B' + j w mu0 C') U = k0^2 K.
/// Blocks follow the integral definitions:
///   A_tt  = int curl_phi(tau_p) curl_phi(tau_q) rho,   A'_tt = int tau_p . tau_q / rho,
///   A_tphi = -int tau_p . grad(phi_q) / rho,           A_phiphi = int grad(phi_p) . grad(phi_q) / rho,
///   B_tt  = int eps tau_p . tau_q rho,                 B_phiphi = int eps phi_p phi_q / rho,
/// and A^(m) = [[A_tt + m^2 A'_tt, -m A_tphi], [-m A_phit, A_phiphi]].
struct HarmonicSystem {
  const Mesh2D* mesh = nullptr;
  double freq = 0.0;
  cplx body_eps = 1.0;
  cplx zeta = 0.0;
  int M = 0;

  SparseMatrixC Att, Att1, Atp, App, Btt, Bpp, Ctt, Cpp;

  // Dirichlet flags (full numbering, edge DOFs then nodal DOFs).
  std::vector<char> fixed;       // PEC walls and axis nodal DOFs, every m
  std::vector<char> axis_edge;   // edge DOFs tangent to the axis, fixed for m >= 1

  int Q() const { return mesh->num_edge_dofs(); }
  int Qp() const { return mesh->num_nodal_dofs(); }
  double k0() const { return wavenumber(freq); }

  /// Reduced-to-free-DOF operator and its index map for harmonic m.
  SparseMatrixC matrix(int m, std::vector<int>& free_dofs) const;
};

HarmonicSystem assemble(const Mesh2D& mesh, cplx body_eps, const PmlMap& pml, cplx zeta,
                        double freq, int M);

struct HarmonicCoefficients {
  CVectorX u_t;    // length Q
  CVectorX u_phi;  // length Q' (zero for m = 0)
  double residual = 0.0;
};

/// Factorization of one harmonic operator, reusable for any number of right-hand sides.
class HarmonicSolver {
 public:
  HarmonicSolver(const HarmonicSystem& sys, int m);
  ~HarmonicSolver();
  HarmonicSolver(HarmonicSolver&&) noexcept;
  HarmonicSolver& operator=(HarmonicSolver&&) noexcept;

  int m() const { return m_; }
  HarmonicCoefficients solve(const CVectorX& K) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  const HarmonicSystem* sys_;
  int m_;
};

HarmonicCoefficients solve_harmonic(const HarmonicSystem& sys, const CVectorX& K, int m);

/// Many excitations against one system. Only one harmonic factorization is alive
/// at a time. Right-hand sides are built and stored sparse until `batch` jobs
/// (0 = no cap) or `memory_budget` bytes are held, then every harmonic is
/// factorized once for the batch and each solution is handed to `consume`.
struct JobTiming {
  std::vector<double> factorize, solve;  // seconds per harmonic, summed over batches
  double rhs = 0.0;
  int batches = 0;
};

struct JobSolveOptions {
  int batch = 0;
  double memory_budget = 1.5e9;
  int threads = 1;
  JobTiming* timing = nullptr;
};

using RhsBuilder = std::function<std::vector<CVectorX>(int job)>;
using SolutionSink = std::function<void(int job, int m, const HarmonicCoefficients&)>;

void solve_jobs(const HarmonicSystem& sys, int M, int n_jobs, const RhsBuilder& rhs,
                const SolutionSink& consume, const JobSolveOptions& opts = {});

struct HarmonicSolution {
  const Mesh2D* mesh = nullptr;
  double freq = 0.0;
  int M = 0;
  std::vector<CVectorX> u_t, u_phi;
  std::vector<double> residual;
};

HarmonicSolution solve_all(const HarmonicSystem& sys, const std::vector<CVectorX>& rhs, int M,
                           int threads = 1);

/// Harmonic coefficients of the scattered field at one (rho, z) point.
/// E = sum_m [e_rho c_m, e_phi s_m, e_z c_m], curl E = sum_m [c_rho s_m, c_phi c_m, c_z s_m].
struct HarmonicPointField {
  std::vector<cplx> e_rho, e_phi, e_z;
  std::vector<cplx> c_rho, c_phi, c_z;

  /// Cylindrical components of (E, H) at azimuth phi (measured from the source).
  std::pair<CVec3, CVec3> at(double phi, double freq) const;
};

HarmonicPointField harmonic_point_field(const HarmonicSolution& sol, const Vec2& rz);

/// Element basis values frozen at one (rho, z) point of the physical region, so
/// single-harmonic coefficients can be pulled from solution vectors cheaply.
struct PointBasis {
  Vec2 rz;
  std::array<int, 8> edge_dofs;
  std::array<int, 6> nodal_dofs;
  std::array<Vec2, 8> tau;
  std::array<double, 8> curl;
  std::array<double, 6> phi;
  std::array<Vec2, 6> grad;
};

PointBasis point_basis(const Mesh2D& mesh, const Vec2& rz);

/// Harmonic-m coefficients (e_rho, e_phi, e_z, c_rho, c_phi, c_z) at a frozen point.
std::array<cplx, 6> harmonic_coefficients(const PointBasis& b, const CVectorX& u_t,
                                          const CVectorX& u_phi, int m);

struct FieldSample {
  CVec3 e;  // (rho, phi, z) components
  CVec3 h;
};

/// E and H at points of the physical FEM region, azimuth measured from phi_s.
std::vector<FieldSample> reconstruct_fields(const HarmonicSolution& sol,
                                            const std::vector<CylPoint>& points);

/// Sparse triplet text dump: header "% rows cols nnz", then "i j re im" (0-based).
void write_triplets(std::ostream& os, const SparseMatrixC& A);
void write_vector(std::ostream& os, const CVectorX& v);

}  // namespace borfem
