#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "msop/symbol.hpp"

using namespace msop;

namespace {

struct TorusFixture : ::testing::Test {
  std::shared_ptr<ClosedFormDiffeo> g = make_torus_sine(0.5, 0.25);
  FixedPointSet fs = find_fixed_points(*g);

  std::size_t index_of(double x, double y) const {
    for (std::size_t i = 0; i < fs.points.size(); ++i) {
      if (g->surface().distance(fs.points[i].point, {0, {x, y}}) < 1e-9) return i;
    }
    throw std::runtime_error("no fixed point there");
  }
};

}  // namespace

TEST(Symbol, OperatorSpec) {
  const OperatorSpec op({{0, "2 + sin(2*pi*x1)"}, {1, "0.25"}, {-2, "xi1*xi1/(xi1*xi1+xi2*xi2)"}});
  EXPECT_EQ(op.k_min(), -2);
  EXPECT_EQ(op.k_max(), 1);
  EXPECT_NO_THROW(op.check_homogeneity());
  EXPECT_FALSE(op.constant_polynomial().has_value());
  const OperatorSpec c({{0, "1"}, {1, "-1/4"}});
  const auto p = c.constant_polynomial();
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->coefficient(1), Complex(-0.25, 0.0));
  EXPECT_THROW(OperatorSpec({{0, "xi1"}}).check_homogeneity(), ConfigError);
  EXPECT_THROW(OperatorSpec({{0, "1"}}, 1), ConfigError);
  EXPECT_THROW(OperatorSpec({{0, "x3"}}), UnknownIdentifierError);
}

TEST_F(TorusFixture, ConstantSymbolsGiveConstantCoefficients) {
  const OperatorSpec op({{0, "1"}, {1, "-0.25"}});
  const auto c = symbol_coefficients(op, *g, {0, {0.3, 0.2}}, {0.6, 0.8}, -50, 50);
  ASSERT_EQ(c.size(), 101u);
  for (const auto& row : c) {
    EXPECT_EQ(row[0], 1.0);
    EXPECT_EQ(row[1], -0.25);
  }
}

TEST_F(TorusFixture, CoefficientsConvergeAtTheEnds) {
  const OperatorSpec op({{0, "2 + sin(2*pi*x1)"}, {1, "xi1^2/(xi1^2+xi2^2)"}});
  const SymbolTrajectory tr = trace_symbol(op, *g, {0, {0.3, 0.2}}, {0.6, 0.8}, -200, 200);
  EXPECT_NEAR(tr.coefficients(200)[0], 2.0, 1e-9);
  EXPECT_NEAR(tr.coefficients(-200)[0], 2.0, 1e-9);
  // Near the sink dg^{-T} = diag(2, 4/3), so the transported covector lines up with xi1.
  EXPECT_NEAR(tr.coefficients(200)[1], 1.0, 1e-9);
  EXPECT_NEAR(tr.coefficients(200)[1], tr.coefficients(199)[1], 1e-9);
  for (int n = -200; n <= 200; n += 37) {
    EXPECT_NEAR(g->surface().cometric_norm2({tr.orbit.point(n), tr.covector(n), Variance::covector}), 1.0, 1e-12);
  }
}

TEST_F(TorusFixture, IdentitySectionIsIdentity) {
  const OperatorSpec op({{0, "1"}});
  const FiniteSection fs1 = build_finite_section(op, *g, {0, {0.3, 0.2}}, {0.6, 0.8}, 2.0, 20);
  for (std::size_t i = 0; i < 41; ++i) EXPECT_EQ(fs1.matrix(i, i), 1.0);
  EXPECT_EQ(min_singular_value(fs1.matrix).value, 1.0);
}

TEST_F(TorusFixture, ToeplitzAtFixedPoint) {
  // At the sink the weight is exactly geometric with ratio theta, so the
  // section of 1 - cT is Toeplitz with superdiagonal -c sqrt(theta).
  const OperatorSpec op({{0, "1"}, {1, "-0.25"}});
  const std::size_t sink = index_of(0.5, 0.5);
  const auto& fp = fs.points[sink];
  for (double s : {-1.0, 0.0, 1.0, 2.5}) {
    const FiniteSection generic = build_finite_section(op, *g, fp.point, {0.6, 0.8}, s, 30);
    const FiniteSection slow = build_finite_section(op, *g, fp.point, {0.0, 1.0}, s, 30);
    const double theta_generic = rate_value(fp.det_codifferential, fp.lambda_min, s);
    const double theta_fast = rate_value(fp.det_codifferential, fp.lambda_max, s);
    for (std::size_t i = 0; i + 1 < 61; ++i) {
      EXPECT_EQ(generic.matrix(i, i), 1.0);
      EXPECT_NEAR(slow.matrix(i, i + 1), -0.25 * std::sqrt(theta_generic), 1e-12);
    }
    // Covector (1,0) is dual to the strongly contracted eigendirection: exceptional rate.
    const FiniteSection exc = build_finite_section(op, *g, fp.point, {1.0, 0.0}, s, 30);
    EXPECT_NEAR(exc.matrix(10, 11), -0.25 * std::sqrt(theta_fast), 1e-12);
  }
}

TEST_F(TorusFixture, SectionIsInvariantUnderWeightRescaling) {
  const OperatorSpec op({{-1, "0.3"}, {0, "2 + sin(2*pi*x1)"}, {2, "xi1^2/(xi1^2+xi2^2)"}});
  SymbolTrajectory tr = trace_symbol(op, *g, {0, {0.3, 0.2}}, {0.6, 0.8}, -40, 40);
  const FiniteSection before = build_finite_section(tr, 1.5, 40);
  tr.weights.rescale(std::log(2.0));
  const FiniteSection after = build_finite_section(tr, 1.5, 40);
  EXPECT_TRUE(before.matrix == after.matrix);
}

TEST_F(TorusFixture, SigmaBoundedByCoefficients) {
  const OperatorSpec op({{-1, "0.3*cos(2*pi*x2)"}, {0, "2 + sin(2*pi*x1)"}, {1, "0.25"}});
  for (double s : {-2.0, 0.0, 1.0, 3.0}) {
    const SymbolTrajectory tr = trace_symbol(op, *g, {0, {0.3, 0.2}}, {0.6, 0.8}, -64, 64);
    const FiniteSection sec = build_finite_section(tr, s, 64);
    const double bound = sec.matrix.max_abs() * (1.0 + 2.0);
    EXPECT_LE(min_singular_value(sec.matrix).value, bound + 1e-9);
  }
}

TEST(Symbol, CircleMinimum) {
  const double R = std::sqrt(8.0 / 3.0);
  EXPECT_NEAR(circle_minimum({0, 1}, {1.0, -0.25}, R), 1.0 - R / 4.0, 1e-9);
  EXPECT_NEAR(circle_minimum({0, 1}, {1.0, -0.25}, R), 0.59175, 1e-5);
  EXPECT_NEAR(circle_minimum({0, 1}, {-1.0, 1.0}, R), R - 1.0, 1e-9);
  EXPECT_NEAR(circle_minimum({0, 1}, {0.0, 1.0}, 0.3), 0.3, 1e-15);
}

TEST_F(TorusFixture, LimitChecks) {
  const OperatorSpec op({{0, "1"}, {1, "-0.25"}});
  const LimitCheck c = limit_operator_check(op, *g, fs, {0, {0.3, 0.2}}, {0.6, 0.8}, 0.0, OrbitEnd::plus);
  EXPECT_EQ(c.fixed_point, index_of(0.5, 0.5));
  ASSERT_EQ(c.branches.size(), 2u);
  EXPECT_NEAR(c.branches[0].radius, std::sqrt(8.0 / 3.0), 1e-12);
  EXPECT_NEAR(c.branches[0].min_modulus, 0.59175, 1e-5);
  EXPECT_TRUE(c.pass());
  const OperatorSpec shift({{0, "0"}, {1, "1"}});
  for (double s : {-3.0, 0.0, 4.0}) {
    EXPECT_TRUE(limit_operator_check(shift, *g, fs, {0, {0.3, 0.2}}, {0.6, 0.8}, s, OrbitEnd::minus).pass());
  }
  // 1 - T/4 fails at the sink when a branch radius reaches 4: theta = 16.
  const LimitCheck far = limit_operator_check(op, *g, fs, {0, {0.3, 0.2}}, {0.6, 0.8},
                                              (std::log(8.0 / 3.0) - std::log(16.0)) / (2.0 * std::log(4.0 / 3.0)),
                                              OrbitEnd::plus);
  EXPECT_FALSE(far.branches[0].pass);
}

TEST(Symbol, Classification) {
  const auto e = [](double v) { return SingularValueEstimate{v, true, 1, "inverse_iteration"}; };
  EXPECT_EQ(classify({e(0.5), e(0.5), e(0.5)}, true), Verdict::likely_invertible);
  EXPECT_EQ(classify({e(0.5), e(0.5), e(0.5)}, false), Verdict::inconclusive);
  EXPECT_EQ(classify({e(1e-3), e(1e-5), e(1e-7)}, true), Verdict::likely_not_invertible);
  EXPECT_EQ(classify({e(1e-8), e(1e-7), e(5e-7)}, true), Verdict::inconclusive);
  EXPECT_EQ(classify({e(1e-3), e(1e-4), e(1e-5)}, true), Verdict::inconclusive);
}

TEST_F(TorusFixture, ProbeOfIdentityIsEverywhereInvertible) {
  const OperatorSpec op({{0, "1"}});
  ProbeOptions opt;
  opt.s_grid = {-2.0, 0.0, 3.0};
  opt.sample_count = 3;
  opt.sizes = {32, 64};
  const ProbeResult r = ellipticity_probe(op, *g, fs, opt);
  EXPECT_EQ(r.samples.size(), 3u * 3u + 4u * 3u);
  for (const auto& cell : r.cells) EXPECT_EQ(cell.result.verdict, Verdict::likely_invertible);
  ASSERT_EQ(r.estimate.size(), 1u);
  EXPECT_DOUBLE_EQ(r.estimate.intervals()[0].lo, -3.0);
  EXPECT_DOUBLE_EQ(r.estimate.intervals()[0].hi, 4.5);
  EXPECT_TRUE(r.findings.empty());
}

TEST_F(TorusFixture, ProbeIsDeterministic) {
  const OperatorSpec op({{0, "2 + sin(2*pi*x1)"}, {1, "0.25"}});
  ProbeOptions opt;
  opt.s_grid = {0.0, 5.5};
  opt.sample_count = 2;
  opt.sizes = {16, 32};
  opt.seed = 42;
  const ProbeResult a = ellipticity_probe(op, *g, fs, opt);
  const ProbeResult b = ellipticity_probe(op, *g, fs, opt);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    for (std::size_t j = 0; j < a.cells[i].result.sigma_min.size(); ++j) {
      const double x = a.cells[i].result.sigma_min[j].value, y = b.cells[i].result.sigma_min[j].value;
      EXPECT_EQ(std::memcmp(&x, &y, sizeof x), 0);
    }
  }
  opt.seed = 43;
  const ProbeResult c = ellipticity_probe(op, *g, fs, opt);
  EXPECT_NE(c.samples[0].x.coords.x, a.samples[0].x.coords.x);
}

TEST(Symbol, EstimatedSetAndViolations) {
  using V = Verdict;
  const std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0, 2.5};
  const std::vector<V> per_s{V::likely_invertible, V::likely_invertible, V::likely_not_invertible,
                             V::inconclusive,     V::likely_invertible, V::likely_not_invertible};
  const SIntervalSet est = estimate_elliptic_set(grid, per_s);
  ASSERT_EQ(est.size(), 2u);
  EXPECT_DOUBLE_EQ(est.intervals()[0].lo, -0.25);
  EXPECT_DOUBLE_EQ(est.intervals()[0].hi, 0.75);
  EXPECT_DOUBLE_EQ(est.intervals()[1].lo, 1.75);
  EXPECT_DOUBLE_EQ(est.intervals()[1].hi, 2.25);
  const auto f = interval_violations(grid, per_s);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].s_left, 0.5);
  EXPECT_EQ(f[0].s_middle, 1.0);
  EXPECT_EQ(f[0].s_right, 2.0);
  EXPECT_TRUE(interval_violations(grid, std::vector<V>(6, V::likely_not_invertible)).empty());
}

TEST_F(TorusFixture, ProbeRejectsUnsortedGrid) {
  ProbeOptions opt;
  opt.s_grid = {0.0, 2.0, 1.0};
  EXPECT_THROW(ellipticity_probe(OperatorSpec({{0, "1"}}), *g, fs, opt), Error);
}
