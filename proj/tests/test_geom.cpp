#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "icurv/geom.hpp"
#include "icurv/rng.hpp"

using namespace icurv;
using namespace icurv::geom;

namespace {

std::vector<std::string> sphere_vars(int k) {
  std::vector<std::string> v;
  for (int i = 1; i <= k; ++i) v.push_back("y" + std::to_string(i));
  return v;
}

std::string stereo_factor(int k, const std::string& prefix = "y") {
  std::string q = "1";
  for (int i = 1; i <= k; ++i) q += "+" + prefix + std::to_string(i) + "^2";
  return "4/(" + q + ")^2";
}

// Unit round sphere S^k in the stereographic chart h = 4/(1+|y|^2)^2 delta.
ChartMetric unit_sphere(int k, double scale2 = 1.0) {
  auto vars = sphere_vars(k);
  std::vector<std::array<double, 2>> box(static_cast<size_t>(k), {-3.0, 3.0});
  Chart chart = make_chart(vars, std::vector<bool>(static_cast<size_t>(k), false), box);
  std::vector<expr::ExprAst> coeff;
  const std::string diag = "(" + expr::fmt_num(scale2) + ")*" + stereo_factor(k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      coeff.push_back(expr::parse(i == j ? diag : "0", vars));
  return ChartMetric(chart, std::move(coeff), RoundBlock{0, k, 3.0});
}

ChartMetric euclidean(int n) {
  std::vector<std::string> vars;
  for (int i = 1; i <= n; ++i) vars.push_back("x" + std::to_string(i));
  std::vector<std::array<double, 2>> box(static_cast<size_t>(n), {-5.0, 5.0});
  Chart chart = make_chart(vars, std::vector<bool>(static_cast<size_t>(n), false), box);
  std::vector<expr::ExprAst> coeff;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) coeff.push_back(expr::parse(i == j ? "1" : "0", vars));
  return ChartMetric(chart, std::move(coeff));
}

// Product of two unit 2-spheres, each in its own stereographic chart.
ChartMetric sphere_product() {
  std::vector<std::string> vars{"y1", "y2", "z1", "z2"};
  std::vector<std::array<double, 2>> box(4, {-3.0, 3.0});
  Chart chart = make_chart(vars, std::vector<bool>(4, false), box);
  const std::string d1 = "4/(1+y1^2+y2^2)^2";
  const std::string d2 = "4/(1+z1^2+z2^2)^2";
  std::vector<expr::ExprAst> coeff;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      std::string s = "0";
      if (i == j) s = (i < 2) ? d1 : d2;
      coeff.push_back(expr::parse(s, vars));
    }
  return ChartMetric(chart, std::move(coeff));
}

// Euclidean space in polar coordinates dr^2 + r^2 h, sphere factor dim k.
ChartMetric euclidean_polar(int k) {
  std::vector<std::string> vars{"r"};
  for (int i = 1; i <= k; ++i) vars.push_back("y" + std::to_string(i));
  std::vector<std::array<double, 2>> box(static_cast<size_t>(k + 1), {-3.0, 3.0});
  box[0] = {0.1, 10.0};
  Chart chart = make_chart(vars, std::vector<bool>(static_cast<size_t>(k + 1), false), box);
  std::vector<expr::ExprAst> coeff;
  const std::string diag = "r^2*" + stereo_factor(k);
  for (int i = 0; i <= k; ++i)
    for (int j = 0; j <= k; ++j) {
      std::string s = "0";
      if (i == j) s = (i == 0) ? "1" : diag;
      coeff.push_back(expr::parse(s, vars));
    }
  return ChartMetric(chart, std::move(coeff), RoundBlock{1, k, 3.0});
}

Eigen::VectorXd random_ball_point(RandomStream& rng, int k, double radius) {
  for (;;) {
    Eigen::VectorXd y(k);
    for (int i = 0; i < k; ++i) y[i] = rng.next_uniform(-radius, radius);
    if (y.norm() <= radius) return y;
  }
}

Eigen::MatrixXd random_orthonormal(RandomStream& rng, const Eigen::MatrixXd& g, int m) {
  const int n = static_cast<int>(g.rows());
  Eigen::MatrixXd raw(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) raw(i, j) = rng.next_gaussian();
  Eigen::MatrixXd full = gram_schmidt(g, raw);
  REQUIRE(full.cols() == n);
  return full.leftCols(m);
}

}  // namespace

TEST_CASE("flat space: all curvature quantities vanish") {
  auto metric = euclidean(3);
  RandomStream rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> p{rng.next_uniform(-2, 2), rng.next_uniform(-2, 2),
                          rng.next_uniform(-2, 2)};
    auto cp = curvature_at(metric, p);
    for (double v : cp.gamma) CHECK(v == 0.0);
    for (double v : cp.riem) CHECK(v == 0.0);
    CHECK(cp.ricci.cwiseAbs().maxCoeff() == 0.0);
    CHECK(cp.scalar == 0.0);
  }
}

TEST_CASE("unit sphere: sectional curvature is 1 at random points and planes") {
  auto metric = unit_sphere(4);
  RandomStream rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd y = random_ball_point(rng, 4, 3.0);
    std::vector<double> p(y.data(), y.data() + 4);
    auto cp = curvature_at(metric, p);
    Eigen::VectorXd X(4), Y(4);
    for (int i = 0; i < 4; ++i) {
      X[i] = rng.next_gaussian();
      Y[i] = rng.next_gaussian();
    }
    CHECK(sectional(cp, X, Y) == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("unit sphere: Einstein constants") {
  auto metric = unit_sphere(4);
  std::vector<double> p{0.3, -0.4, 1.0, 0.2};
  auto cp = curvature_at(metric, p);
  CHECK(cp.scalar == Catch::Approx(12.0).epsilon(1e-11));
  auto r0 = r0_at(cp);
  CHECK(r0.value == Catch::Approx(3.0).epsilon(1e-11));
}

TEST_CASE("product of spheres: mixed planes are flat") {
  auto metric = sphere_product();
  std::vector<double> p{0.2, -0.5, 0.9, 0.1};
  auto cp = curvature_at(metric, p);
  Eigen::VectorXd X = Eigen::VectorXd::Zero(4), Y = Eigen::VectorXd::Zero(4);
  X[0] = 1.0;  // first factor
  Y[2] = 1.0;  // second factor
  CHECK(sectional(cp, X, Y) == Catch::Approx(0.0).margin(1e-9));
  X[1] = 0.7;
  CHECK(sectional(cp, X, Y) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("constant rescale divides sectional curvature") {
  auto metric = unit_sphere(3, 4.0);  // radius-2 sphere
  std::vector<double> p{0.4, 0.1, -0.8};
  auto cp = curvature_at(metric, p);
  Eigen::VectorXd X(3), Y(3);
  X << 1, 0.3, -0.2;
  Y << 0.1, -1, 0.5;
  CHECK(sectional(cp, X, Y) == Catch::Approx(0.25).margin(1e-10));
}

TEST_CASE("degenerate plane is rejected") {
  auto metric = unit_sphere(3);
  std::vector<double> p{0.0, 0.0, 0.0};
  auto cp = curvature_at(metric, p);
  Eigen::VectorXd X(3), Y(3);
  X << 1, 0, 0;
  Y = 2.0 * X;
  CHECK_THROWS_AS(sectional(cp, X, Y), std::invalid_argument);
}

TEST_CASE("tensor symmetries and first Bianchi hold on a curved metric") {
  auto metric = euclidean_polar(2);
  RandomStream rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> p{rng.next_uniform(0.5, 3.0), rng.next_uniform(-1, 1),
                          rng.next_uniform(-1, 1)};
    auto cp = curvature_at(metric, p);
    auto checks = tensor_symmetry_checks(cp);
    CHECK(checks.symmetry < 1e-9);
    CHECK(checks.bianchi < 1e-9);
  }
}

TEST_CASE("c_m on the unit 3-sphere") {
  auto metric = unit_sphere(3);
  RandomStream rng(31);
  std::vector<double> p{0.5, -0.2, 0.7};
  auto cp = curvature_at(metric, p);

  SECTION("m=2 gives 3 for any frame") {
    for (int trial = 0; trial < 10; ++trial) {
      Frame f{cp.point, random_orthonormal(rng, cp.g, 2)};
      CHECK(c_m(cp, f) == Catch::Approx(3.0).margin(1e-9));
    }
  }
  SECTION("m=1 equals the Ricci quadratic form") {
    for (int trial = 0; trial < 10; ++trial) {
      Frame f{cp.point, random_orthonormal(rng, cp.g, 1)};
      const double ric = cp.ric(f.vectors.col(0), f.vectors.col(0));
      CHECK(c_m(cp, f) == Catch::Approx(ric).margin(1e-10));
    }
  }
  SECTION("m=n-1 equals half the scalar curvature") {
    Frame f{cp.point, random_orthonormal(rng, cp.g, 2)};
    CHECK(c_m(cp, f) == Catch::Approx(0.5 * cp.scalar).margin(1e-9));
  }
}

TEST_CASE("c_m is invariant under rotations inside the span and permutations") {
  auto metric = euclidean_polar(3);  // flat but in a curved-looking chart
  std::vector<double> p{1.7, 0.3, -0.4, 0.8};
  auto cp = curvature_at(metric, p);
  RandomStream rng(87);
  const Eigen::MatrixXd V = random_orthonormal(rng, cp.g, 2);
  const double base = c_m(cp, Frame{cp.point, V});

  // rotation within the span
  for (int trial = 0; trial < 10; ++trial) {
    const double th = rng.next_uniform(0, 6.28);
    Eigen::MatrixXd W(4, 2);
    W.col(0) = std::cos(th) * V.col(0) + std::sin(th) * V.col(1);
    W.col(1) = -std::sin(th) * V.col(0) + std::cos(th) * V.col(1);
    CHECK(c_m(cp, Frame{cp.point, W}) == Catch::Approx(base).margin(1e-9));
  }
  // permutation
  Eigen::MatrixXd Pm(4, 2);
  Pm.col(0) = V.col(1);
  Pm.col(1) = V.col(0);
  CHECK(c_m(cp, Frame{cp.point, Pm}) == Catch::Approx(base).margin(1e-10));
}

TEST_CASE("c_m rejects non-orthonormal frames") {
  auto metric = unit_sphere(3);
  std::vector<double> p{0.1, 0.2, 0.3};
  auto cp = curvature_at(metric, p);
  Eigen::MatrixXd V(3, 2);
  V << 1, 0, 0, 1, 0, 0;  // not g-orthonormal in this chart
  CHECK_THROWS_AS(c_m(cp, Frame{cp.point, V}), std::invalid_argument);
}

TEST_CASE("r0 minimality against random unit directions") {
  auto metric = euclidean_polar(3);
  std::vector<double> p{2.0, 0.2, -0.1, 0.5};
  auto cp = curvature_at(metric, p);
  auto r0 = r0_at(cp);
  CHECK(r0.value == Catch::Approx(0.0).margin(1e-10));  // flat space
  RandomStream rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd e(4);
    for (int i = 0; i < 4; ++i) e[i] = rng.next_gaussian();
    e /= std::sqrt(e.dot(cp.g * e));
    CHECK(r0.value <= cp.ric(e, e) + 1e-10);
  }
}

TEST_CASE("slice geometry of round spheres in flat space") {
  auto metric = euclidean_polar(2);  // R^3 in polar coordinates
  std::vector<double> p{2.0, 0.4, -0.3};
  auto sg = slice_geometry(metric, p, 0);
  CHECK(sg.H == Catch::Approx(1.0).epsilon(1e-12));  // (n-1)/r = 2/2
  CHECK(sg.N[0] == Catch::Approx(1.0));

  // flat torus slice: vanishing second fundamental form
  std::vector<std::string> vars{"x1", "x2", "x3"};
  Chart chart = make_chart(vars, {true, true, true}, {{{0, 1}}, {{0, 1}}, {{0, 1}}});
  std::vector<expr::ExprAst> coeff;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) coeff.push_back(expr::parse(i == j ? "1" : "0", vars));
  ChartMetric torus(chart, std::move(coeff));
  std::vector<double> q{0.3, 0.6, 0.9};
  auto sgt = slice_geometry(torus, q, 2);
  CHECK(sgt.A.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sgt.H == 0.0);
}

TEST_CASE("slice geometry requires a block diagonal metric") {
  std::vector<std::string> vars{"x1", "x2"};
  Chart chart = make_chart(vars, {false, false}, {{{-1, 1}}, {{-1, 1}}});
  std::vector<expr::ExprAst> coeff;
  coeff.push_back(expr::parse("2", vars));
  coeff.push_back(expr::parse("0.5", vars));
  coeff.push_back(expr::parse("0.5", vars));
  coeff.push_back(expr::parse("2", vars));
  ChartMetric metric(chart, std::move(coeff));
  std::vector<double> p{0.0, 0.0};
  CHECK_THROWS_AS(slice_geometry(metric, p, 0), NonBlockDiagonal);
}

TEST_CASE("Gauss equation residual vanishes on classical examples") {
  SECTION("flat slice of flat space") {
    auto metric = euclidean(3);
    std::vector<double> p{0.5, -0.5, 1.0};
    Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
    e[0] = 1.0;
    CHECK(gauss_residual(metric, p, 2, e) < 1e-12);
  }
  SECTION("unit sphere slice of Euclidean space") {
    auto metric = euclidean_polar(2);
    std::vector<double> p{1.0, 0.4, -0.2};
    auto cp = curvature_at(metric, p);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
    e[1] = 1.0;
    e /= std::sqrt(e.dot(cp.g * e));
    CHECK(gauss_residual(metric, p, 0, e) < 1e-9);
  }
}

TEST_CASE("non positive definite metrics are rejected") {
  std::vector<std::string> vars{"x1", "x2"};
  Chart chart = make_chart(vars, {false, false}, {{{-1, 1}}, {{-1, 1}}});
  std::vector<expr::ExprAst> coeff;
  coeff.push_back(expr::parse("1", vars));
  coeff.push_back(expr::parse("0", vars));
  coeff.push_back(expr::parse("0", vars));
  coeff.push_back(expr::parse("x1", vars));  // indefinite for x1 <= 0
  ChartMetric metric(chart, std::move(coeff));
  std::vector<double> p{-1.0, 0.0};
  CHECK_THROWS_AS(curvature_at(metric, p), NonPositiveDefinite);
}

TEST_CASE("restrict_slice produces the induced metric") {
  auto metric = euclidean_polar(2);
  auto induced = metric.restrict_slice(0, 2.0);  // sphere of radius 2
  REQUIRE(induced.dim() == 2);
  std::vector<double> p{0.3, 0.1};
  auto cp = curvature_at(induced, p);
  Eigen::VectorXd X(2), Y(2);
  X << 1, 0.2;
  Y << -0.3, 1;
  CHECK(sectional(cp, X, Y) == Catch::Approx(0.25).margin(1e-10));
}
