#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "icurv/expr.hpp"
#include "icurv/rng.hpp"

using namespace icurv;
namespace ex = icurv::expr;

namespace {

double fd_grad(const ex::ExprAst& ast, std::vector<double> x, int i, double h) {
  x[i] += h;
  const double fp = ex::eval_value(ast, x);
  x[i] -= 2 * h;
  const double fm = ex::eval_value(ast, x);
  return (fp - fm) / (2 * h);
}

double fd_hess(const ex::ExprAst& ast, std::vector<double> x, int i, int j, double h) {
  if (i == j) {
    const double f0 = ex::eval_value(ast, x);
    x[i] += h;
    const double fp = ex::eval_value(ast, x);
    x[i] -= 2 * h;
    const double fm = ex::eval_value(ast, x);
    return (fp - 2 * f0 + fm) / (h * h);
  }
  auto at = [&](double di, double dj) {
    std::vector<double> y = x;
    y[i] += di;
    y[j] += dj;
    return ex::eval_value(ast, y);
  };
  return (at(h, h) + at(-h, -h) - at(h, -h) - at(-h, h)) / (4 * h * h);
}

// Random expression source over the grammar, kept inside safe domains by
// construction (log/sqrt arguments offset to be positive).
std::string random_expr(RandomStream& rng, const std::vector<std::string>& vars, int depth) {
  if (depth == 0 || rng.next_uniform() < 0.25) {
    if (rng.next_uniform() < 0.5) return vars[rng.next_below(vars.size())];
    return ex::fmt_num(rng.next_uniform(0.3, 2.0));
  }
  const double pick = rng.next_uniform();
  if (pick < 0.45) {
    static const char* ops[] = {"+", "-", "*"};
    const char* op = ops[rng.next_below(3)];
    return "(" + random_expr(rng, vars, depth - 1) + op + random_expr(rng, vars, depth - 1) +
           ")";
  }
  if (pick < 0.55) {
    return "(" + random_expr(rng, vars, depth - 1) + "/(1.5+sin(" +
           random_expr(rng, vars, depth - 1) + ")))";
  }
  if (pick < 0.70) {
    static const char* fns[] = {"sin", "cos", "tanh"};
    return std::string(fns[rng.next_below(3)]) + "(" + random_expr(rng, vars, depth - 1) + ")";
  }
  if (pick < 0.80)
    return "exp(0.3*sin(" + random_expr(rng, vars, depth - 1) + "))";
  if (pick < 0.90)
    return "log(1.5+cos(" + random_expr(rng, vars, depth - 1) + "))";
  return "sqrt(1.2+sin(" + random_expr(rng, vars, depth - 1) + "))";
}

}  // namespace

TEST_CASE("parse and evaluate basic expressions") {
  auto ast = ex::parse("2 + 0.5*sin(2*pi*x1)*cos(2*pi*x2)", {"x1", "x2"});
  std::vector<double> p{0.0, 0.0};
  CHECK(ex::eval_value(ast, p) == Catch::Approx(2.0).margin(1e-15));

  auto hyp = ex::parse("cosh(r)^2 - sinh(r)^2", {"r"});
  std::vector<double> q{1.7};
  CHECK(ex::eval_value(hyp, q) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("precedence: ^ binds tighter than * and /") {
  auto ast = ex::parse("2*x^3", {"x"});
  std::vector<double> p{2.0};
  CHECK(ex::eval_value(ast, p) == Catch::Approx(16.0));

  auto neg = ex::parse("-x^2", {"x"});
  CHECK(ex::eval_value(neg, p) == Catch::Approx(-4.0));

  auto rassoc = ex::parse("2^3^2", {"x"});
  CHECK(ex::eval_value(rassoc, p) == Catch::Approx(512.0));

  auto signed_exp = ex::parse("2^-2", {"x"});
  CHECK(ex::eval_value(signed_exp, p) == Catch::Approx(0.25));
}

TEST_CASE("undeclared identifiers are rejected") {
  CHECK_THROWS_AS(ex::parse("x1^2 + x2", {"x1"}), ex::ParseError);
  CHECK_THROWS_AS(ex::parse("foo(x1)", {"x1"}), ex::ParseError);
  CHECK_THROWS_AS(ex::parse("sin(x1, x1)", {"x1"}), ex::ParseError);
  CHECK_THROWS_AS(ex::parse("", {"x1"}), ex::ParseError);
  CHECK_THROWS_AS(ex::parse("1 + ", {"x1"}), ex::ParseError);

  try {
    ex::parse("1 + bogus", {"x1"});
    FAIL("expected ParseError");
  } catch (const ex::ParseError& e) {
    CHECK(e.position == 4);
  }
}

TEST_CASE("jet of sin at zero") {
  auto ast = ex::parse("sin(x1)", {"x1"});
  std::vector<double> p{0.0};
  Jet2 j = ex::eval_jet2(ast, p);
  CHECK(j.value() == Catch::Approx(0.0).margin(1e-16));
  CHECK(j.grad(0) == Catch::Approx(1.0));
  CHECK(j.hess(0, 0) == Catch::Approx(0.0).margin(1e-16));
}

TEST_CASE("jet of bilinear product") {
  auto ast = ex::parse("x1*x2", {"x1", "x2"});
  std::vector<double> p{3.0, 5.0};
  Jet2 j = ex::eval_jet2(ast, p);
  CHECK(j.value() == Catch::Approx(15.0));
  CHECK(j.grad(0) == Catch::Approx(5.0));
  CHECK(j.grad(1) == Catch::Approx(3.0));
  CHECK(j.hess(0, 1) == Catch::Approx(1.0));
  CHECK(j.hess(0, 0) == Catch::Approx(0.0).margin(1e-16));
}

TEST_CASE("jet of exp(r^2/2) at r=1 against finite differences") {
  auto ast = ex::parse("exp(r^2/2)", {"r"});
  std::vector<double> p{1.0};
  Jet2 j = ex::eval_jet2(ast, p);
  const double e_half = std::exp(0.5);
  CHECK(j.value() == Catch::Approx(e_half).epsilon(1e-14));
  CHECK(j.grad(0) == Catch::Approx(e_half).epsilon(1e-14));
  CHECK(j.hess(0, 0) == Catch::Approx(2.0 * e_half).epsilon(1e-14));

  // independent oracle: central differences
  CHECK(fd_grad(ast, p, 0, 1e-5) == Catch::Approx(j.grad(0)).epsilon(1e-7));
  CHECK(fd_hess(ast, p, 0, 0, 1e-4) == Catch::Approx(j.hess(0, 0)).epsilon(1e-6));
}

TEST_CASE("domain errors carry positions") {
  auto div = ex::parse("1/(x1-1)", {"x1"});
  std::vector<double> p{1.0};
  CHECK_THROWS_AS(ex::eval_jet2(div, p), ex::EvalError);

  auto lg = ex::parse("log(x1)", {"x1"});
  std::vector<double> q{-2.0};
  CHECK_THROWS_AS(ex::eval_jet2(lg, q), ex::EvalError);

  auto ct = ex::parse("coth(x1)", {"x1"});
  std::vector<double> z{0.0};
  CHECK_THROWS_AS(ex::eval_jet2(ct, z), ex::EvalError);
}

TEST_CASE("pow with constant exponent handles negative bases") {
  auto ast = ex::parse("x1^3", {"x1"});
  std::vector<double> p{-2.0};
  Jet2 j = ex::eval_jet2(ast, p);
  CHECK(j.value() == Catch::Approx(-8.0));
  CHECK(j.grad(0) == Catch::Approx(12.0));
  CHECK(j.hess(0, 0) == Catch::Approx(-12.0));

  // non-integer exponent on a negative base is a domain error
  auto frac = ex::parse("x1^(1/3)", {"x1"});
  CHECK_THROWS_AS(ex::eval_jet2(frac, p), ex::EvalError);
}

TEST_CASE("jets agree with central finite differences on random expressions") {
  RandomStream rng(0xA5F00Dull);
  const std::vector<std::string> vars{"x1", "x2"};
  int tested = 0;
  while (tested < 1000) {
    const std::string src = random_expr(rng, vars, 3);
    ex::ExprAst ast;
    try {
      ast = ex::parse(src, vars);
    } catch (const ex::ParseError&) {
      FAIL("generator produced unparseable source: " << src);
    }
    std::vector<double> p{rng.next_uniform(0.3, 2.0), rng.next_uniform(0.3, 2.0)};
    Jet2 j;
    try {
      j = ex::eval_jet2(ast, p);
    } catch (const ex::EvalError&) {
      continue;  // generator may still step outside a domain; skip
    }
    if (std::abs(j.value()) > 1e3) continue;
    bool big = false;
    for (int i = 0; i < 2; ++i)
      for (int k = i; k < 2; ++k)
        if (std::abs(j.hess(i, k)) > 1e4 || std::abs(j.grad(i)) > 1e4) big = true;
    if (big) continue;

    ++tested;
    for (int i = 0; i < 2; ++i) {
      const double fd = fd_grad(ast, p, i, 1e-5);
      const double err = std::abs(fd - j.grad(i));
      if (err > 1e-6 * std::max(1e-2, std::abs(fd)) + 1e-8)
        FAIL("gradient mismatch for " << src << " var " << i << ": jet=" << j.grad(i)
                                      << " fd=" << fd);
    }
    // second derivatives: step 1e-4 balances truncation against cancellation
    for (int i = 0; i < 2; ++i) {
      for (int k = i; k < 2; ++k) {
        const double fd = fd_hess(ast, p, i, k, 1e-4);
        const double err = std::abs(fd - j.hess(i, k));
        const double scale = std::max({1.0, std::abs(fd), std::abs(j.value())});
        if (err > 2e-5 * scale)
          FAIL("hessian mismatch for " << src << " (" << i << "," << k
                                       << "): jet=" << j.hess(i, k) << " fd=" << fd);
      }
    }
  }
  SUCCEED();
}

TEST_CASE("jet algebra equals evaluation of combined expressions") {
  RandomStream rng(77);
  const std::vector<std::string> vars{"x1", "x2"};
  for (int trial = 0; trial < 50; ++trial) {
    const std::string sa = random_expr(rng, vars, 3);
    const std::string sb = random_expr(rng, vars, 3);
    std::vector<double> p{rng.next_uniform(0.4, 1.6), rng.next_uniform(0.4, 1.6)};
    ex::ExprAst a, b, sum, prod;
    Jet2 ja, jb, js, jp;
    try {
      a = ex::parse(sa, vars);
      b = ex::parse(sb, vars);
      sum = ex::parse("(" + sa + ")+(" + sb + ")", vars);
      prod = ex::parse("(" + sa + ")*(" + sb + ")", vars);
      ja = ex::eval_jet2(a, p);
      jb = ex::eval_jet2(b, p);
      js = ex::eval_jet2(sum, p);
      jp = ex::eval_jet2(prod, p);
    } catch (const ex::EvalError&) {
      continue;
    }
    const Jet2 manual_sum = ja + jb;
    const Jet2 manual_prod = ja * jb;
    CHECK(js.value() == manual_sum.value());
    CHECK(jp.value() == manual_prod.value());
    for (int i = 0; i < 2; ++i) {
      CHECK(js.grad(i) == manual_sum.grad(i));
      CHECK(jp.grad(i) == manual_prod.grad(i));
      for (int k = i; k < 2; ++k) {
        CHECK(js.hess(i, k) == manual_sum.hess(i, k));
        CHECK(jp.hess(i, k) == manual_prod.hess(i, k));
      }
    }
  }
}

TEST_CASE("pin_variable freezes a coordinate") {
  auto ast = ex::parse("x1^2 + x2*x3", {"x1", "x2", "x3"});
  auto pinned = ex::pin_variable(ast, 1, 4.0);  // x2 := 4
  REQUIRE(pinned.nvars() == 2);
  std::vector<double> p{3.0, 5.0};  // x1=3, x3=5
  CHECK(ex::eval_value(pinned, p) == Catch::Approx(29.0));
  Jet2 j = ex::eval_jet2(pinned, p);
  CHECK(j.grad(1) == Catch::Approx(4.0));
}

TEST_CASE("variables_used reports expression dependence") {
  auto ast = ex::parse("2 + sin(2*pi*x1)", {"y1", "x1", "x2"});
  auto used = ex::variables_used(ast);
  CHECK_FALSE(used[0]);
  CHECK(used[1]);
  CHECK_FALSE(used[2]);
}

TEST_CASE("fmt_num round-trips through the parser") {
  RandomStream rng(5);
  for (int i = 0; i < 200; ++i) {
    const double v = (rng.next_uniform() - 0.5) * std::pow(10.0, rng.next_uniform(-8, 8));
    auto ast = ex::parse("(" + ex::fmt_num(v) + ")", {});
    std::vector<double> p;
    CHECK(ex::eval_value(ast, p) == v);
  }
}
