#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "msop/dynamics.hpp"
#include "oracles.hpp"

using namespace msop;

namespace {

const FixedPointRecord* find_at(const FixedPointSet& fs, double x, double y) {
  for (const auto& r : fs.points) {
    if (std::abs(Surface::wrap_half(r.point.coords.x - x)) < 1e-10 &&
        std::abs(Surface::wrap_half(r.point.coords.y - y)) < 1e-10) {
      return &r;
    }
  }
  return nullptr;
}

std::shared_ptr<ClosedFormDiffeo> identity_map() {
  return make_torus_closed_form({"x1", "x2"}, std::array<std::string, 2>{"x1", "x2"},
                                std::array<std::string, 4>{"1", "0", "0", "1"}, "identity");
}

}  // namespace

TEST(Dynamics, TorusSineApply) {
  const auto g = make_torus_sine(0.5, 0.25);
  const SurfacePoint o = g->apply({0, {0.0, 0.0}});
  EXPECT_DOUBLE_EQ(o.coords.x, 0.0);
  EXPECT_DOUBLE_EQ(o.coords.y, 0.0);
  const SurfacePoint p = g->apply({0, {0.25, 0.0}});
  EXPECT_NEAR(p.coords.x, 0.25 + 0.5 / (2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(p.coords.x, 0.329577, 1e-6);
  const oracle::TorusSine ref{0.5, 0.25};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const SurfacePoint x{0, {u(rng), u(rng)}};
    const SurfacePoint y = g->apply(x);
    const auto want = ref.map(x.coords.x, x.coords.y);
    EXPECT_NEAR(Surface::wrap_half(y.coords.x - want[0]), 0.0, 1e-14);
    EXPECT_NEAR(Surface::wrap_half(y.coords.y - want[1]), 0.0, 1e-14);
    const SurfacePoint back = g->apply(y, -1);
    EXPECT_LT(g->surface().distance(back, x), 1e-9);
  }
}

TEST(Dynamics, TorusSineJacobian) {
  const auto g = make_torus_sine(0.5, 0.25);
  const Mat2 j0 = g->jacobian({0, {0.0, 0.0}});
  EXPECT_DOUBLE_EQ(j0.a, 1.5);
  EXPECT_DOUBLE_EQ(j0.d, 1.25);
  EXPECT_EQ(j0.b, 0.0);
  EXPECT_EQ(j0.c, 0.0);
  const Mat2 j1 = g->jacobian({0, {0.5, 0.5}});
  EXPECT_DOUBLE_EQ(j1.a, 0.5);
  EXPECT_DOUBLE_EQ(j1.d, 0.75);
  const Mat2 fd = g->finite_difference_jacobian({0, {0.31, 0.77}});
  const Mat2 an = g->jacobian({0, {0.31, 0.77}});
  EXPECT_LT((fd - an).max_abs(), 1e-8);
  // The inverse step's Jacobian is the inverse matrix at the image.
  const MapStep back = g->step(g->apply({0, {0.31, 0.77}}), -1, true);
  EXPECT_LT((back.jacobian * an - Mat2::identity()).max_abs(), 1e-9);
}

TEST(Dynamics, IdentityJacobian) {
  const auto id = identity_map();
  const Mat2 j = id->jacobian({0, {0.4, 0.9}});
  EXPECT_EQ(j.a, 1.0);
  EXPECT_EQ(j.d, 1.0);
  const Mat2 c = id->codifferential({0, {0.4, 0.9}});
  EXPECT_EQ(c.a, 1.0);
  EXPECT_EQ(c.b, 0.0);
}

TEST(Dynamics, Codifferential) {
  const auto g = make_torus_sine(0.5, 0.25);
  const Mat2 c1 = g->codifferential({0, {0.5, 0.5}});
  EXPECT_DOUBLE_EQ(c1.a, 2.0);
  EXPECT_DOUBLE_EQ(c1.d, 4.0 / 3.0);
  const Mat2 c0 = g->codifferential({0, {0.0, 0.0}});
  EXPECT_DOUBLE_EQ(c0.a, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(c0.d, 0.8);
}

TEST(Dynamics, ClosedFormWithoutJacobianUsesDifferences) {
  const auto g = make_torus_closed_form({"x1 + 0.3*sin(2*pi*x1)/(2*pi)", "x2 + 0.1*sin(2*pi*x2)/(2*pi)"});
  const Mat2 j = g->jacobian({0, {0.2, 0.4}});
  EXPECT_NEAR(j.a, 1.0 + 0.3 * std::cos(2.0 * std::numbers::pi * 0.2), 1e-7);
  EXPECT_NEAR(j.d, 1.0 + 0.1 * std::cos(2.0 * std::numbers::pi * 0.4), 1e-7);
  const SurfacePoint y = g->apply({0, {0.2, 0.4}});
  const SurfacePoint x = g->apply(y, -1);
  EXPECT_NEAR(x.coords.x, 0.2, 1e-10);
  EXPECT_NEAR(x.coords.y, 0.4, 1e-10);
}

TEST(Dynamics, TorusSineRejectsNonInvertibleParameters) {
  EXPECT_THROW(make_torus_sine(1.0, 0.25), Error);
}

TEST(Dynamics, FixedPointsOfTorusSine) {
  const auto g = make_torus_sine(0.5, 0.25);
  const FixedPointSet fs = find_fixed_points(*g);
  ASSERT_EQ(fs.points.size(), 4u);
  EXPECT_TRUE(fs.appears_finite);
  EXPECT_TRUE(fs.satisfies_definition());
  struct Want {
    double x, y, a1, a2;
    FixedPointType type;
  };
  for (const auto& w : {Want{0, 0, 1.25, 1.5, FixedPointType::source}, Want{0.5, 0.5, 0.5, 0.75, FixedPointType::sink},
                        Want{0, 0.5, 0.75, 1.5, FixedPointType::saddle},
                        Want{0.5, 0, 0.5, 1.25, FixedPointType::saddle}}) {
    const auto* r = find_at(fs, w.x, w.y);
    ASSERT_NE(r, nullptr) << w.x << "," << w.y;
    EXPECT_EQ(r->type, w.type);
    EXPECT_NEAR(r->alpha1, w.a1, 1e-10);
    EXPECT_NEAR(r->alpha2, w.a2, 1e-10);
    EXPECT_NEAR(r->det_codifferential, 1.0 / (w.a1 * w.a2), 1e-10);
    EXPECT_NEAR(r->lambda_min, 1.0 / w.a2, 1e-10);
    EXPECT_NEAR(r->lambda_max, 1.0 / w.a1, 1e-10);
  }
}

TEST(Dynamics, RepeatedEigenvaluesViolateDefinition) {
  const auto g = make_torus_sine(0.5, 0.5);
  const FixedPointSet fs = find_fixed_points(*g);
  EXPECT_FALSE(fs.satisfies_definition());
  int repeated = 0;
  for (const auto& r : fs.points) {
    const bool rep = std::abs(r.dg.a - r.dg.d) < 1e-9;
    repeated += rep;
    const bool flagged =
        std::find(r.violations.begin(), r.violations.end(), "repeated eigenvalues") != r.violations.end();
    EXPECT_EQ(flagged, rep);
  }
  EXPECT_EQ(repeated, 2);
}

TEST(Dynamics, ClassificationViolations) {
  EXPECT_FALSE(classify_fixed_point({0, {}}, Mat2{0.0, -2.0, 2.0, 0.0}).satisfies_definition());
  EXPECT_FALSE(classify_fixed_point({0, {}}, Mat2::diag(-0.5, 2.0)).satisfies_definition());
  EXPECT_FALSE(classify_fixed_point({0, {}}, Mat2::diag(1.0, 2.0)).satisfies_definition());
  const FixedPointRecord ok = classify_fixed_point({0, {}}, Mat2{0.5, 0.2, 0.0, 2.0});
  EXPECT_TRUE(ok.satisfies_definition());
  EXPECT_EQ(ok.type, FixedPointType::saddle);
  // Eigendirections are eigenvectors of dg.
  const Vec2 v = ok.dg * ok.direction2;
  EXPECT_NEAR(v.x, 2.0 * ok.direction2.x, 1e-14);
  EXPECT_NEAR(v.y, 2.0 * ok.direction2.y, 1e-14);
}

TEST(Dynamics, PeriodicScanClean) {
  const auto g = make_torus_sine(0.5, 0.25);
  const FixedPointSet fs = find_fixed_points(*g);
  const PeriodicScanReport rep = scan_periodic(*g, fs, 6);
  EXPECT_TRUE(rep.clean());
}

TEST(Dynamics, PeriodicScanFindsRotationOrbits) {
  const auto rot = make_torus_closed_form({"x1 + 0.5", "x2"}, std::array<std::string, 2>{"x1 - 0.5", "x2"},
                                          std::array<std::string, 4>{"1", "0", "0", "1"}, "rotation");
  const FixedPointSet fs = find_fixed_points(*rot);
  EXPECT_TRUE(fs.points.empty());
  const PeriodicScanReport rep = scan_periodic(*rot, fs, 2, 8);
  EXPECT_FALSE(rep.violations.empty());
  for (const auto& v : rep.violations) EXPECT_EQ(v.period, 2);
}

TEST(Dynamics, IdentityHasNoFiniteFixedSet) {
  const auto id = identity_map();
  const FixedPointSet fs = find_fixed_points(*id, 8);
  EXPECT_FALSE(fs.appears_finite);
  EXPECT_FALSE(fs.satisfies_definition());
  const PeriodicScanReport rep = scan_periodic(*id, fs, 2, 8);
  EXPECT_FALSE(rep.fixed_set_finite);
  EXPECT_FALSE(rep.notes.empty());
  EXPECT_FALSE(rep.clean());
}

TEST(Dynamics, LimitPoints) {
  const auto g = make_torus_sine(0.5, 0.25);
  const FixedPointSet fs = find_fixed_points(*g);
  const auto at = [&](std::size_t i) { return fs.points[i].point.coords; };
  const OrbitLimit a = limit_points(*g, fs, {0, {0.3, 0.2}});
  EXPECT_NEAR(at(a.plus).x, 0.5, 1e-10);
  EXPECT_NEAR(at(a.plus).y, 0.5, 1e-10);
  EXPECT_NEAR(at(a.minus).x, 0.0, 1e-10);
  EXPECT_NEAR(at(a.minus).y, 0.0, 1e-10);
  const OrbitLimit b = limit_points(*g, fs, {0, {0.3, 0.0}});
  EXPECT_NEAR(at(b.plus).x, 0.5, 1e-10);
  EXPECT_NEAR(at(b.plus).y, 0.0, 1e-10);
  const OrbitLimit c = limit_points(*g, fs, {0, {0.0, 0.0}});
  EXPECT_EQ(c.plus, c.minus);
  EXPECT_EQ(c.plus_iterations, 0);
}

TEST(Dynamics, CocycleIdentities) {
  const auto g = make_torus_sine(0.5, 0.25);
  const SurfacePoint x{0, {0.3, 0.2}};
  const Mat2 id = cocycle(*g, x, 0, CocycleKind::differential);
  EXPECT_EQ(id.a, 1.0);
  EXPECT_EQ(id.b, 0.0);
  const Mat2 c1 = cocycle(*g, {0, {0.5, 0.5}}, 1, CocycleKind::codifferential);
  EXPECT_DOUBLE_EQ(c1.a, 2.0);
  EXPECT_DOUBLE_EQ(c1.d, 4.0 / 3.0);
  // Chain rule: D(n+m)(x) = D(m)(g^n x) D(n)(x), also for negative steps.
  const SurfacePoint x5 = [&] {
    SurfacePoint p = x;
    for (int i = 0; i < 5; ++i) p = g->apply(p);
    return p;
  }();
  const Mat2 lhs = cocycle(*g, x, 12, CocycleKind::differential);
  const Mat2 rhs = cocycle(*g, x5, 7, CocycleKind::differential) * cocycle(*g, x, 5, CocycleKind::differential);
  EXPECT_LT((lhs - rhs).max_abs() / lhs.max_abs(), 1e-12);
  const Mat2 fwd = cocycle(*g, x, 6, CocycleKind::differential);
  SurfacePoint x6 = x;
  for (int i = 0; i < 6; ++i) x6 = g->apply(x6);
  const Mat2 bwd = cocycle(*g, x6, -6, CocycleKind::differential);
  EXPECT_LT((bwd * fwd - Mat2::identity()).max_abs(), 1e-9);
  const Mat2 co = cocycle(*g, x, 6, CocycleKind::codifferential);
  EXPECT_LT((co - fwd.inverse().transpose()).max_abs(), 1e-9 * co.max_abs());
  // Diagonal map: the cocycle is the product of the 1-D derivatives.
  const oracle::TorusSine ref{0.5, 0.25};
  double px = 1.0, py = 1.0, ax = 0.3, ay = 0.2;
  for (int i = 0; i < 12; ++i) {
    const auto d = ref.dg(ax, ay);
    px *= d[0];
    py *= d[1];
    const auto m = ref.map(ax, ay);
    ax = m[0];
    ay = m[1];
  }
  EXPECT_NEAR(lhs.a / px, 1.0, 1e-12);
  EXPECT_NEAR(lhs.d / py, 1.0, 1e-12);
  EXPECT_THROW(cocycle(*g, x, 10001, CocycleKind::differential), Error);
}

TEST(Dynamics, OrbitStoresStepJacobians) {
  const auto g = make_torus_sine(0.5, 0.25);
  const Orbit orb(*g, {0, {0.3, 0.2}}, -20, 20);
  for (int n = -20; n < 20; ++n) {
    EXPECT_LT(g->surface().distance(g->apply(orb.point(n)), orb.point(n + 1)), 1e-9);
    EXPECT_LT((orb.dg(n) - g->jacobian(orb.point(n))).max_abs(), 1e-8);
    EXPECT_LT((orb.dg(n) * orb.dg_inverse(n) - Mat2::identity()).max_abs(), 1e-12);
  }
}

TEST(Dynamics, SphereGradientFlowFixedPoints) {
  // f = x3 + 0.2 x1^2: near the south pole F = -1 + 2|v|^2 + 0.8 v1^2 + O(|v|^4) and the
  // metric is 4 I, so the linearized flow is diag(1.4, 1); near the north pole diag(-0.6, -1).
  const auto g = make_sphere_gradient_flow("x3 + 0.2*x1*x1");
  const FixedPointSet fs = find_fixed_points(*g, 8);
  ASSERT_EQ(fs.points.size(), 2u);
  EXPECT_TRUE(fs.satisfies_definition());
  for (const auto& r : fs.points) {
    const auto amb = g->surface().to_ambient(r.point);
    if (amb[2] < 0) {
      EXPECT_EQ(r.type, FixedPointType::source);
      EXPECT_NEAR(r.alpha1, std::exp(1.0), 1e-6);
      EXPECT_NEAR(r.alpha2, std::exp(1.4), 1e-6);
    } else {
      EXPECT_EQ(r.type, FixedPointType::sink);
      EXPECT_NEAR(r.alpha1, std::exp(-1.0), 1e-6);
      EXPECT_NEAR(r.alpha2, std::exp(-0.6), 1e-6);
    }
    EXPECT_NEAR(std::abs(amb[2]), 1.0, 1e-10);
  }
}

TEST(Dynamics, SphereFlowJacobianAndInverse) {
  const auto g = make_sphere_gradient_flow("x3 + 0.2*x1*x1");
  const SurfacePoint x{0, {0.6, -0.3}};
  const Mat2 var = g->jacobian(x);
  const Mat2 fd = g->finite_difference_jacobian(x);
  EXPECT_LT((var - fd).max_abs() / var.max_abs(), 1e-5);
  const SurfacePoint y = g->apply(x);
  // The inverse integrates backward with finite-difference gradients; the round trip is not exact.
  EXPECT_LT(g->surface().distance(g->apply(y, -1), x), 1e-7);
  // Orbits cross between the charts and stay on the sphere.
  SurfacePoint p = x;
  for (int i = 0; i < 8; ++i) p = g->apply(p);
  EXPECT_LE(norm(p.coords), Surface::kRechartRadius);
}
