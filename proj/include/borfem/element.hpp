#pragma once

#include <array>

#include "borfem/mesh.hpp"

namespace borfem {

/// Degree-5 seven-point rule on a triangle, barycentric points, weights sum to 1.
struct TriangleQuadrature {
  static constexpr int size = 7;
  std::array<std::array<double, 3>, size> bary;
  std::array<double, size> weight;

  static const TriangleQuadrature& degree5();
};

/// Gauss-Legendre nodes/weights on [0, 1].
struct LineQuadrature {
  std::vector<double> x, w;
  static LineQuadrature gauss(int n);
};

/// Second-order curl-conforming (first-kind Nedelec) basis on one triangle.
/// DOF order: edge k moments (against 1 and 2s-1, s running from the lower to
/// the higher global vertex id) for k = 0, 1, 2, then the two interior means.
class EdgeElement {
 public:
  EdgeElement(const Mesh2D& mesh, int t);

  /// Values (rho, z components) of the 8 basis functions at p.
  std::array<Vec2, 8> value(const Vec2& p) const;
  /// In-plane scalar curl d(tau_rho)/dz - d(tau_z)/d(rho) of the 8 functions.
  std::array<double, 8> curl(const Vec2& p) const;

 private:
  Vec2 center_;
  double scale_;
  Eigen::Matrix<double, 8, 8> coef_;  // column k: monomial coefficients of function k
};

/// Second-order Lagrange basis; order: 3 vertices, then midpoints of local edges 0, 1, 2.
class NodalElement {
 public:
  NodalElement(const Mesh2D& mesh, int t);

  std::array<double, 6> value(const std::array<double, 3>& l) const;
  std::array<Vec2, 6> gradient(const std::array<double, 3>& l) const;

 private:
  std::array<Vec2, 3> grad_l_;  // gradients of the barycentric coordinates
};

}  // namespace borfem
