#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracle/mie.hpp"

using namespace oracle;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST(Oracle, TabulatedSphereEfficiencies) {
  // Lossless sphere, refractive index 1.55, size parameter 5.213.
  const double x = 2 * pi * 0.525 / 0.6328;
  const auto [ext, sca] = efficiencies(x, 1.55 * 1.55, truncation(x) + 5);
  EXPECT_NEAR(ext, 3.10543, 2e-5);
  EXPECT_NEAR(sca, 3.10543, 2e-5);
}

TEST(Oracle, LossySphereExtinctionExceedsScattering) {
  const auto [ext, sca] = efficiencies(3.0, cplx(4.0, -0.5), 20);
  EXPECT_GT(ext, sca);
  EXPECT_GT(sca, 0.0);
}

TEST(Oracle, LegendreDerivative) {
  for (int n = 1; n <= 8; ++n)
    for (int m = 0; m <= n; ++m)
      for (double t : {0.3, 1.1, 2.5}) {
        const double h = 1e-6;
        const double fd = (legendre(n, m, t + h) - legendre(n, m, t - h)) / (2 * h);
        EXPECT_NEAR(legendre_dtheta(n, m, t), fd, 1e-6 * std::max(1.0, std::abs(fd))) << n << ' ' << m;
      }
}

TEST(Oracle, DipoleFieldSatisfiesFaraday) {
  const double k = 2 * pi;
  const Vec3 src(0.3, -0.2, 0.5), r(1.1, 0.4, 0.9);
  const double d = 1e-5;
  auto E = [&](const Vec3& x) { return hertzian_dipole(x, src, 1.0, k).e; };
  CVec3 curl;
  auto diff = [&](int axis) {
    Vec3 dp = r, dm = r;
    dp[axis] += d;
    dm[axis] -= d;
    return CVec3((E(dp) - E(dm)) / (2 * d));
  };
  const CVec3 dx = diff(0), dy = diff(1), dz = diff(2);
  curl << dy[2] - dz[1], dz[0] - dx[2], dx[1] - dy[0];
  const CVec3 h = hertzian_dipole(r, src, 1.0, k).h;
  const cplx jwm(0.0, k * eta);
  EXPECT_LT((-curl / jwm - h).norm() / h.norm(), 1e-6);
}

TEST(Oracle, ProjectionReproducesDipoleField) {
  const double k = 2 * pi / 0.12;
  const Vec3 c(0, 0, 1), src(2.4, 0, 1.05);
  auto e = [&](const Vec3& x) { return hertzian_dipole(x, src, 1.0, k).e; };
  auto h = [&](const Vec3& x) { return hertzian_dipole(x, src, 1.0, k).h; };
  const auto s = project_regular(e, h, c, k, 24, {0.06, 0.08, 0.1});
  for (const Vec3& p : {Vec3(0.05, 0.02, 1.03), Vec3(-0.07, 0.03, 0.95), Vec3(0.0, -0.09, 1.01)}) {
    const CVec3 ref = e(p);
    EXPECT_LT((evaluate_e(s, p, false) - ref).norm() / ref.norm(), 1e-7);
  }
}

TEST(Oracle, RayleighLimit) {
  const double k = 2 * pi, a = 0.01 / (2 * pi) * 5.0;  // ka = 0.05
  const cplx eps(4.0, -0.5);
  const Vec3 c(0, 0, 0), src(400.0, 0, 0);
  auto e = [&](const Vec3& x) { return hertzian_dipole(x, src, 1.0, k).e; };
  auto h = [&](const Vec3& x) { return hertzian_dipole(x, src, 1.0, k).h; };
  const auto inc = project_regular(e, h, c, k, 4, {a});
  const auto sc = scatter(inc, a, eps);
  const double e0 = std::abs(e(c)[2]);
  for (double t : {0.4, 1.0, pi / 2, 2.6}) {
    const auto [ft, fp] = far_field(sc, t, 0.7);
    const double ref = std::pow(k * a, 3) * std::abs((eps - 1.0) / (eps + 2.0)) * e0 * std::sin(t);
    EXPECT_NEAR(std::abs(ft), ref, 0.01 * ref);
    EXPECT_LT(std::abs(fp), 5e-3 * ref);
  }
}

TEST(Oracle, OutgoingFarFieldMatchesLargeRadius) {
  const double k = 2 * pi;
  const Vec3 c(0, 0, 0), src(30.0, 0, 0.3);
  auto e = [&](const Vec3& x) { return hertzian_dipole(x, src, 1.0, k).e; };
  auto h = [&](const Vec3& x) { return hertzian_dipole(x, src, 1.0, k).h; };
  const double a = 0.4;
  const int N = truncation(k * a) + 4;
  const auto sc = scatter(project_regular(e, h, c, k, N, {0.5 * a, a}), a, cplx(3.0, -0.2));
  const double t = 1.2, p = 0.4, R = 1500.0;
  const Vec3 r = R * Vec3(std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t));
  const CVec3 es = evaluate_e(sc, r, true) * k * R * std::exp(cplx(0, k * R));
  const Vec3 et(std::cos(t) * std::cos(p), std::cos(t) * std::sin(p), -std::sin(t));
  const auto [ft, fp] = far_field(sc, t, p);
  EXPECT_LT(std::abs(et.cast<cplx>().dot(es) - ft), 1e-3 * std::abs(ft));
}
