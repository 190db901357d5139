#include "borfem/element.hpp"

#include <cmath>

namespace borfem {

const TriangleQuadrature& TriangleQuadrature::degree5() {
  static const TriangleQuadrature q = [] {
    TriangleQuadrature r;
    const double s15 = std::sqrt(15.0);
    const double a = (6.0 - s15) / 21.0, b = (9.0 + 2.0 * s15) / 21.0;
    const double c = (6.0 + s15) / 21.0, d = (9.0 - 2.0 * s15) / 21.0;
    const double wa = (155.0 - s15) / 1200.0, wc = (155.0 + s15) / 1200.0;
    r.bary = {{{1.0 / 3, 1.0 / 3, 1.0 / 3}, {b, a, a}, {a, b, a}, {a, a, b}, {d, c, c}, {c, d, c}, {c, c, d}}};
    r.weight = {0.225, wa, wa, wa, wc, wc, wc};
    return r;
  }();
  return q;
}

LineQuadrature LineQuadrature::gauss(int n) {
  // Newton iteration on Legendre polynomials.
  LineQuadrature q;
  q.x.resize(n);
  q.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    q.x[n - 1 - i] = 0.5 * (1.0 + x);
    q.w[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return q;
}

namespace {

// Monomial vector fields spanning the second-order first-kind Nedelec space
// in local coordinates (X, Y) = (p - center) / scale.
std::array<Vec2, 8> monomials(double X, double Y) {
  return {Vec2(1, 0), Vec2(X, 0), Vec2(Y, 0), Vec2(0, 1),
          Vec2(0, X), Vec2(0, Y), Vec2(-X * Y, X * X), Vec2(-Y * Y, X * Y)};
}

// d(m_x)/dY - d(m_y)/dX in local coordinates.
std::array<double, 8> monomial_curls(double X, double Y) {
  return {0, 0, 1, 0, -1, 0, -X - 2 * X, -2 * Y - Y};
}

}  // namespace

EdgeElement::EdgeElement(const Mesh2D& mesh, int t) {
  const auto& v = mesh.triangles[t];
  const Vec2& p0 = mesh.nodes[v[0]];
  const Vec2& p1 = mesh.nodes[v[1]];
  const Vec2& p2 = mesh.nodes[v[2]];
  center_ = (p0 + p1 + p2) / 3.0;
  scale_ = mesh.max_edge_length(t);
  const auto local = [&](const Vec2& p) { return Vec2((p - center_) / scale_); };

  Eigen::Matrix<double, 8, 8> V = Eigen::Matrix<double, 8, 8>::Zero();
  static const LineQuadrature g = LineQuadrature::gauss(3);
  for (int k = 0; k < 3; ++k) {
    int a = v[k], b = v[(k + 1) % 3];
    if (a > b) std::swap(a, b);
    const Vec2 pa = mesh.nodes[a], pb = mesh.nodes[b];
    const Vec2 tvec = pb - pa;  // |t| ds = dl, so moments are line integrals
    for (std::size_t q = 0; q < g.x.size(); ++q) {
      const double s = g.x[q];
      const Vec2 X = local(pa + s * tvec);
      const auto m = monomials(X.x(), X.y());
      for (int j = 0; j < 8; ++j) {
        const double ut = m[j].dot(tvec) * g.w[q];
        V(2 * k, j) += ut;
        V(2 * k + 1, j) += ut * (2.0 * s - 1.0);
      }
    }
  }
  // Interior: means of each component over the triangle.
  const auto& quad = TriangleQuadrature::degree5();
  for (int q = 0; q < quad.size; ++q) {
    const auto& l = quad.bary[q];
    const Vec2 X = local(l[0] * p0 + l[1] * p1 + l[2] * p2);
    const auto m = monomials(X.x(), X.y());
    for (int j = 0; j < 8; ++j) {
      V(6, j) += quad.weight[q] * m[j].x();
      V(7, j) += quad.weight[q] * m[j].y();
    }
  }
  coef_ = V.inverse();
}

std::array<Vec2, 8> EdgeElement::value(const Vec2& p) const {
  const Vec2 X = (p - center_) / scale_;
  const auto m = monomials(X.x(), X.y());
  std::array<Vec2, 8> out;
  for (int k = 0; k < 8; ++k) {
    Vec2 u = Vec2::Zero();
    for (int j = 0; j < 8; ++j) u += coef_(j, k) * m[j];
    out[k] = u;
  }
  return out;
}

std::array<double, 8> EdgeElement::curl(const Vec2& p) const {
  const Vec2 X = (p - center_) / scale_;
  const auto c = monomial_curls(X.x(), X.y());
  std::array<double, 8> out;
  for (int k = 0; k < 8; ++k) {
    double s = 0.0;
    for (int j = 0; j < 8; ++j) s += coef_(j, k) * c[j];
    out[k] = s / scale_;
  }
  return out;
}

NodalElement::NodalElement(const Mesh2D& mesh, int t) {
  const auto& v = mesh.triangles[t];
  const Vec2& p0 = mesh.nodes[v[0]];
  const Vec2& p1 = mesh.nodes[v[1]];
  const Vec2& p2 = mesh.nodes[v[2]];
  const double det = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p1.y() - p0.y()) * (p2.x() - p0.x());
  grad_l_[0] = Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / det;
  grad_l_[1] = Vec2(p2.y() - p0.y(), p0.x() - p2.x()) / det;
  grad_l_[2] = Vec2(p0.y() - p1.y(), p1.x() - p0.x()) / det;
}

std::array<double, 6> NodalElement::value(const std::array<double, 3>& l) const {
  return {l[0] * (2 * l[0] - 1), l[1] * (2 * l[1] - 1), l[2] * (2 * l[2] - 1),
          4 * l[0] * l[1],       4 * l[1] * l[2],       4 * l[2] * l[0]};
}

std::array<Vec2, 6> NodalElement::gradient(const std::array<double, 3>& l) const {
  const auto& g = grad_l_;
  return {(4 * l[0] - 1) * g[0], (4 * l[1] - 1) * g[1], (4 * l[2] - 1) * g[2],
          4 * (l[0] * g[1] + l[1] * g[0]), 4 * (l[1] * g[2] + l[2] * g[1]),
          4 * (l[2] * g[0] + l[0] * g[2])};
}

}  // namespace borfem
