#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icurv/chart.hpp"
#include "icurv/expr.hpp"
#include "icurv/geom.hpp"

// Explicit metric families with closed-form curvature and profile oracles:
//  - doubly warped products sphere x torus driven by a positive torus
//    function F, with curvature concentrated against the torus directions;
//  - warped cylinders R x S^{n-1} whose warp/weight profiles solve a first
//    order system making every r-slice a weighted bubble;
//  - the plane-times-sphere family R^2 x S^d with uniformly positive
//    bi-Ricci curvature.
namespace icurv::catalog {

inline bool nonneg_gate(int m, int n) { return n * (m - 2) >= m * m - 2; }
inline bool strict_gate(int m, int n) { return n * (m - 2) > m * m - 2; }

// Second gate used for the dimension-six argument: 2m/((n-m)(m-1)) >= 1.
inline bool bubble_gate(int m, int n) { return n * (m - 1) <= m * m + m; }

namespace detail {

inline std::string wrap(const std::string& s) { return "(" + s + ")"; }
inline std::string num(double v) { return wrap(expr::fmt_num(v)); }

inline std::vector<std::string> torus_vars(int m) {
  std::vector<std::string> v;
  for (int i = 1; i <= m; ++i) v.push_back("x" + std::to_string(i));
  return v;
}

inline std::vector<std::string> sphere_vars(int k) {
  std::vector<std::string> v;
  for (int i = 1; i <= k; ++i) v.push_back("y" + std::to_string(i));
  return v;
}

inline std::string sphere_norm2(int k) {
  std::string q = "y1^2";
  for (int i = 2; i <= k; ++i) q += "+y" + std::to_string(i) + "^2";
  return q;
}

// Chart components of the unit round sphere in stereographic coordinates.
inline std::string stereo_factor(int k) {
  return "4/(1+" + sphere_norm2(k) + ")^2";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// sphere x torus family
// ---------------------------------------------------------------------------

struct TorusSphereParams {
  int m = 3;          // torus dimension (>= 2)
  int k = 5;          // sphere dimension (>= 2); total dimension n = m + k
  double eps = 0.1;   // sphere scale
  std::string F_src;  // positive function of x1..xm

  int n() const { return m + k; }
  double s() const { return 2.0 * static_cast<double>(k) / (m - 1); }
  double cm_coefficient() const {
    const double kk = k;
    return kk * kk * (m - 2) / (2.0 * (m - 1)) - kk;
  }
};

// Parses F over the torus variables and verifies positivity on a dense
// sample grid of its active variables. Throws std::invalid_argument.
inline expr::ExprAst validate_torus_function(const TorusSphereParams& p) {
  if (p.m < 2) throw std::invalid_argument("torus dimension m must be >= 2");
  if (p.k < 2) throw std::invalid_argument("sphere dimension k must be >= 2");
  if (!(p.eps > 0)) throw std::invalid_argument("eps must be positive");
  expr::ExprAst F = expr::parse(p.F_src, detail::torus_vars(p.m));
  const auto used = expr::variables_used(F);
  std::vector<int> active;
  for (size_t i = 0; i < used.size(); ++i)
    if (used[i]) active.push_back(static_cast<int>(i));
  const int a = static_cast<int>(active.size());
  const int per_dim = a <= 1 ? 512 : (a == 2 ? 64 : (a == 3 ? 24 : 8));
  std::vector<double> x(static_cast<size_t>(p.m), 0.0);
  long long total = 1;
  for (int i = 0; i < a; ++i) total *= per_dim;
  for (long long idx = 0; idx < std::max<long long>(total, 1); ++idx) {
    long long rest = idx;
    for (int i = 0; i < a; ++i) {
      x[static_cast<size_t>(active[static_cast<size_t>(i)])] =
          static_cast<double>(rest % per_dim) / per_dim;
      rest /= per_dim;
    }
    if (!(expr::eval_value(F, x) > 0.0))
      throw std::invalid_argument("warp function F must be positive on the torus (F <= 0 found)");
  }
  return F;
}

// g = eps^2 F^2 h + F^{-s} sum dx_i^2 on S^k x T^m, chart order (y..., x...).
inline geom::ChartMetric build_torus_sphere(const TorusSphereParams& p) {
  validate_torus_function(p);
  const int m = p.m, k = p.k, n = p.n();

  std::vector<std::string> vars = detail::sphere_vars(k);
  for (const auto& v : detail::torus_vars(m)) vars.push_back(v);

  std::vector<bool> periodic(static_cast<size_t>(n), false);
  std::vector<std::array<double, 2>> box(static_cast<size_t>(n), {-3.0, 3.0});
  for (int i = k; i < n; ++i) {
    periodic[static_cast<size_t>(i)] = true;
    box[static_cast<size_t>(i)] = {0.0, 1.0};
  }
  geom::Chart chart = geom::make_chart(vars, periodic, box);

  const std::string F = detail::wrap(p.F_src);
  const std::string sphere_diag =
      detail::num(p.eps * p.eps) + "*" + F + "^2*" + detail::stereo_factor(k);
  // torus exponent -s = -2k/(m-1), spliced as an exact rational
  const std::string sexp =
      "(-(" + std::to_string(2 * k) + ")/(" + std::to_string(m - 1) + "))";
  const std::string torus_diag = F + "^" + sexp;

  std::vector<expr::ExprAst> coeff;
  coeff.reserve(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      std::string src = "0";
      if (i == j) src = (i < k) ? sphere_diag : torus_diag;
      coeff.push_back(expr::parse(src, vars));
    }
  return geom::ChartMetric(chart, std::move(coeff), geom::RoundBlock{0, k, 3.0});
}

// F parsed over the full chart variable list of build_torus_sphere (partials
// indexed by chart variable).
inline expr::ExprAst full_chart_warp(const TorusSphereParams& p) {
  std::vector<std::string> vars = detail::sphere_vars(p.k);
  for (const auto& v : detail::torus_vars(p.m)) vars.push_back(v);
  return expr::parse(p.F_src, vars);
}

// Closed-form Christoffel table of the sphere x torus metric in chart
// coordinates, same layout as the engine: gamma[(r*n+p)*n+q].
//   Gamma^i_{ab}   = -eps^2 F^{s+1} F_i h_ab          (i torus; a,b sphere)
//   Gamma^b_{a i}  = F^{-1} F_i delta_a^b
//   Gamma^i_{ij}   = -(s/2) F^{-1} F_j                (any i,j torus)
//   Gamma^j_{ii}   = +(s/2) F^{-1} F_j                (i != j torus)
//   pure sphere   = conformal chart symbols of the round metric
// with all other mixed components vanishing.
inline std::vector<double> closed_form_christoffel(const TorusSphereParams& p,
                                                   std::span<const double> point) {
  const int m = p.m, k = p.k, n = p.n();
  const double s = p.s();
  const expr::ExprAst F = full_chart_warp(p);
  const Jet2 jF = expr::eval_jet2(F, point);
  const double Fv = jF.value();

  double y2 = 0.0;
  for (int a = 0; a < k; ++a) y2 += point[static_cast<size_t>(a)] * point[static_cast<size_t>(a)];
  const double phi2 = 4.0 / ((1.0 + y2) * (1.0 + y2));  // h_ab = phi2 * delta_ab

  std::vector<double> gamma(static_cast<size_t>(n) * n * n, 0.0);
  auto at = [&](int r, int pp, int q) -> double& {
    return gamma[static_cast<size_t>((r * n + pp) * n + q)];
  };

  // pure sphere block: conformal symbols of h = phi^2 delta with
  // w_a = d_a log phi = -2 y_a / (1+|y|^2)
  std::vector<double> w(static_cast<size_t>(k));
  for (int a = 0; a < k; ++a)
    w[static_cast<size_t>(a)] = -2.0 * point[static_cast<size_t>(a)] / (1.0 + y2);
  for (int c = 0; c < k; ++c)
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        double v = 0.0;
        if (c == a) v += w[static_cast<size_t>(b)];
        if (c == b) v += w[static_cast<size_t>(a)];
        if (a == b) v -= w[static_cast<size_t>(c)];
        at(c, a, b) = v;
      }

  for (int i = 0; i < m; ++i) {
    const int xi = k + i;
    const double Fi = jF.grad(xi);
    // Gamma^i_{ab}
    for (int a = 0; a < k; ++a)
      at(xi, a, a) += -p.eps * p.eps * std::pow(Fv, s + 1.0) * Fi * phi2;
    // Gamma^b_{a i}
    for (int a = 0; a < k; ++a) {
      at(a, a, xi) += Fi / Fv;
      at(a, xi, a) += Fi / Fv;
    }
    // torus block
    for (int j = 0; j < m; ++j) {
      const int xj = k + j;
      const double Fj = jF.grad(xj);
      at(xi, xi, xj) += -(s / 2.0) * Fj / Fv;
      if (xj != xi) at(xi, xj, xi) += -(s / 2.0) * Fj / Fv;
      if (i != j) at(xj, xi, xi) += (s / 2.0) * Fj / Fv;
    }
  }
  return gamma;
}

// The closed-form curvature components of the sphere x torus family,
// reported as the scaled quantities g^{qq} R^p_{pqq} etc. that enter the
// coordinate-frame intermediate curvature. Keys identify the component.
inline std::map<std::string, double> closed_form_curvature_components(
    const TorusSphereParams& p, std::span<const double> point) {
  const int m = p.m, k = p.k;
  const double s = p.s();
  const expr::ExprAst F = full_chart_warp(p);
  const Jet2 jF = expr::eval_jet2(F, point);
  const double Fv = jF.value();

  double dF2 = 0.0;
  for (int i = 0; i < m; ++i) dF2 += jF.grad(k + i) * jF.grad(k + i);

  std::map<std::string, double> out;
  for (int i = 0; i < m; ++i) {
    const double Fi = jF.grad(k + i);
    const double Fii = jF.hess(k + i, k + i);
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const double Fj = jF.grad(k + j);
      const double Fjj = jF.hess(k + j, k + j);
      double tail = 0.0;
      for (int l = 0; l < m; ++l)
        if (l != i && l != j) tail += jF.grad(k + l) * jF.grad(k + l);
      out["torus_pair_" + std::to_string(i) + "_" + std::to_string(j)] =
          (s / 2.0) * std::pow(Fv, s - 1.0) * (Fii + Fjj) -
          (s / 2.0) * std::pow(Fv, s - 2.0) * (Fi * Fi + Fj * Fj) -
          (s * s / 4.0) * std::pow(Fv, s - 2.0) * tail;
      const double Fij = jF.hess(k + i, k + j);
      out["mixed_offdiag_" + std::to_string(i) + "_" + std::to_string(j)] =
          -std::pow(Fv, s - 1.0) * Fij - s * std::pow(Fv, s - 2.0) * Fi * Fj;
    }
    double others = 0.0;
    for (int j = 0; j < m; ++j)
      if (j != i) others += jF.grad(k + j) * jF.grad(k + j);
    out["torus_sphere_" + std::to_string(i)] =
        -std::pow(Fv, s - 1.0) * Fii +
        (s / 2.0) * std::pow(Fv, s - 2.0) * (-Fi * Fi + others);
  }
  out["sphere_sectional_factor"] =
      1.0 / (p.eps * p.eps * Fv * Fv) - std::pow(Fv, s - 2.0) * dF2;
  return out;
}

// Intermediate curvature of the normalized coordinate torus frame:
//   [k^2 (m-2) / (2(m-1)) - k] F^{s-2} |dF|^2.
inline double closed_form_cm_coordinate(const TorusSphereParams& p,
                                        std::span<const double> point) {
  const expr::ExprAst F = full_chart_warp(p);
  const Jet2 jF = expr::eval_jet2(F, point);
  double dF2 = 0.0;
  for (int i = 0; i < p.m; ++i) dF2 += jF.grad(p.k + i) * jF.grad(p.k + i);
  return p.cm_coefficient() * std::pow(jF.value(), p.s() - 2.0) * dF2;
}

// Critical points of F on the torus, located by grid seeding plus Newton on
// the gradient over the active variables (at most three). Inactive
// coordinates are reported as zero.
inline std::vector<Eigen::VectorXd> locate_critical_points(const TorusSphereParams& p) {
  expr::ExprAst F = expr::parse(p.F_src, detail::torus_vars(p.m));
  const auto used = expr::variables_used(F);
  std::vector<int> active;
  for (size_t i = 0; i < used.size(); ++i)
    if (used[i]) active.push_back(static_cast<int>(i));
  const int a = static_cast<int>(active.size());
  if (a == 0) return {};  // constant F: every point is critical
  if (a > 3)
    throw std::invalid_argument("critical point location supports at most 3 active variables");

  const int per_dim = (a == 1) ? 96 : (a == 2 ? 32 : 16);
  long long total = 1;
  for (int i = 0; i < a; ++i) total *= per_dim;

  std::vector<Eigen::VectorXd> found;
  std::vector<double> x(static_cast<size_t>(p.m), 0.0);
  for (long long idx = 0; idx < total; ++idx) {
    long long rest = idx;
    for (int i = 0; i < a; ++i) {
      x[static_cast<size_t>(active[static_cast<size_t>(i)])] =
          (static_cast<double>(rest % per_dim) + 0.5) / per_dim;
      rest /= per_dim;
    }
    // Newton on the active gradient
    std::vector<double> z = x;
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
      const Jet2 j = expr::eval_jet2(F, z);
      Eigen::VectorXd grad(a);
      Eigen::MatrixXd hess(a, a);
      for (int i = 0; i < a; ++i) {
        grad[i] = j.grad(active[static_cast<size_t>(i)]);
        for (int l = 0; l < a; ++l)
          hess(i, l) = j.hess(active[static_cast<size_t>(i)], active[static_cast<size_t>(l)]);
      }
      if (grad.norm() < 1e-13) {
        ok = true;
        break;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(hess);
      if (!lu.isInvertible()) break;
      Eigen::VectorXd step = lu.solve(grad);
      if (step.norm() > 0.5) step *= 0.5 / step.norm();
      for (int i = 0; i < a; ++i) {
        double& c = z[static_cast<size_t>(active[static_cast<size_t>(i)])];
        c -= step[i];
        c -= std::floor(c);  // wrap to [0,1)
      }
    }
    if (!ok) continue;
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(p.m);
    for (int i = 0; i < p.m; ++i) cand[i] = z[static_cast<size_t>(i)];
    bool duplicate = false;
    for (const auto& q : found) {
      double d = 0.0;
      for (int i = 0; i < p.m; ++i) {
        double diff = std::abs(cand[i] - q[i]);
        diff = std::min(diff, 1.0 - diff);
        d += diff * diff;
      }
      if (std::sqrt(d) < 1e-7) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) found.push_back(cand);
  }
  return found;
}

// ---------------------------------------------------------------------------
// warped cylinder family
// ---------------------------------------------------------------------------

enum class CylinderBranch { C2Zero, C2Negative, N3Special };

inline std::string branch_name(CylinderBranch b) {
  switch (b) {
    case CylinderBranch::C2Zero: return "c2_zero";
    case CylinderBranch::C2Negative: return "c2_negative";
    case CylinderBranch::N3Special: return "n3_special";
  }
  return "?";
}

struct WarpedCylinderParams {
  int n = 5;  // cylinder dimension: R x S^{n-1}
  double beta = 1.0;
  double lambda = 1.0;
  double eps = 1e-3;
  CylinderBranch branch = CylinderBranch::C2Zero;
};

// h' = -C2 h^2 - lambda/beta with
//   C2 = 1/(n-1) - ((n-3)/(n-1))^2 / (4 (1/(n-1) + beta - 1))
//   C3 = (n-3)/(n-1) / (2 (1/(n-1) + beta - 1)).
inline double cylinder_c2(int n, double beta) {
  const double inv = 1.0 / (n - 1);
  const double denom = inv + beta - 1.0;
  const double q = static_cast<double>(n - 3) / (n - 1);
  return inv - 0.25 * q * q / denom;
}

inline double cylinder_c3(int n, double beta) {
  const double inv = 1.0 / (n - 1);
  const double denom = inv + beta - 1.0;
  return 0.5 * (static_cast<double>(n - 3) / (n - 1)) / denom;
}

// beta value with C2 = 0; algebraically equal to (n-1)/4.
inline double beta_threshold(int n) { return (n - 1) / 4.0; }

struct CylinderProfiles {
  expr::ExprAst h, u, f, v;  // functions of the single variable r
  double C2 = 0.0, C3 = 0.0;
  double beta = 0.0, lambda = 0.0;
  int n = 0;
  CylinderBranch branch = CylinderBranch::C2Zero;
};

// Closed-form solutions of the profile system
//   h' = -C2 h^2 - lambda/beta,   v' = -C3 h v,   (n-1) f'/f = h - v'/v,
// with u = v^beta solving  u'' + (n-1)(f'/f) u' = -beta (n-1) (f''/f) u - lambda u.
// The C2 < 0 branch uses the regular (hyperbolic tangent) solution of the
// Riccati equation; its weight cosh(..)^{-C3 beta/C2} stays >= 1 and the
// warp decays, which is what the construction needs on the whole line.
inline CylinderProfiles cylinder_profiles(const WarpedCylinderParams& p) {
  if (!(p.lambda > 0)) throw std::invalid_argument("lambda must be positive");
  if (!(p.beta > 0)) throw std::invalid_argument("beta must be positive");
  CylinderProfiles out;
  out.beta = p.beta;
  out.lambda = p.lambda;
  out.n = p.n;
  out.branch = p.branch;
  const std::vector<std::string> rv{"r"};
  const double lb = p.lambda / p.beta;

  switch (p.branch) {
    case CylinderBranch::C2Zero: {
      if (p.n < 4) throw std::invalid_argument("c2_zero branch requires n >= 4");
      if (std::abs(p.beta - beta_threshold(p.n)) > 1e-12)
        throw std::invalid_argument("c2_zero branch requires beta = (n-1)/4");
      out.C2 = 0.0;
      out.C3 = cylinder_c3(p.n, p.beta);
      const std::string h = "-" + detail::num(lb) + "*r";
      const std::string u = "exp(" + detail::num(0.5 * out.C3 * p.lambda) + "*r^2)";
      const std::string f =
          "exp(-" + detail::num((1.0 + out.C3) * lb / (2.0 * (p.n - 1))) + "*r^2)";
      out.h = expr::parse(h, rv);
      out.u = expr::parse(u, rv);
      out.f = expr::parse(f, rv);
      out.v = expr::parse("(" + u + ")^" + detail::num(1.0 / p.beta), rv);
      break;
    }
    case CylinderBranch::C2Negative: {
      if (p.n < 4) throw std::invalid_argument("c2_negative branch requires n >= 4");
      const double lo = 1.0 - 1.0 / (p.n - 1);
      if (!(p.beta > lo && p.beta < beta_threshold(p.n)))
        throw std::invalid_argument(
            "c2_negative branch requires 1 - 1/(n-1) < beta < (n-1)/4");
      out.C2 = cylinder_c2(p.n, p.beta);
      out.C3 = cylinder_c3(p.n, p.beta);
      const double b = std::sqrt(-out.C2 * lb);
      const double a = std::sqrt(lb / (-out.C2));
      const double eu = -out.C3 * p.beta / out.C2;
      const double ef = (1.0 + out.C3) / (out.C2 * (p.n - 1));
      const std::string ch = "cosh(" + detail::num(b) + "*r)";
      out.h = expr::parse("-" + detail::num(a) + "*tanh(" + detail::num(b) + "*r)", rv);
      out.u = expr::parse(ch + "^" + detail::num(eu), rv);
      out.f = expr::parse(ch + "^" + detail::num(ef), rv);
      out.v = expr::parse(ch + "^" + detail::num(eu / p.beta), rv);
      break;
    }
    case CylinderBranch::N3Special: {
      if (p.n != 3) throw std::invalid_argument("n3_special branch requires n = 3");
      if (!(p.beta < 0.5)) throw std::invalid_argument("n3_special branch requires beta < 1/2");
      out.C2 = cylinder_c2(p.n, p.beta);  // = 1/2, recorded but unused here
      out.C3 = 0.0;
      const double sq = std::sqrt(1.0 - 2.0 * p.beta);
      const std::string u = "exp(" + detail::num(p.lambda / (2.0 * sq)) + "*r^2)";
      out.h = expr::parse("-" + detail::num(lb) + "*r", rv);
      out.u = expr::parse(u, rv);
      out.f = expr::parse(
          "exp(-" + detail::num(0.25 * (1.0 / sq + 1.0) * lb) + "*r^2)", rv);
      out.v = expr::parse("(" + u + ")^" + detail::num(1.0 / p.beta), rv);
      break;
    }
  }
  if (p.n >= 4 && !(out.C3 > 0))
    throw std::logic_error("C3 must be positive for n >= 4 in admissible branches");
  return out;
}

// Closed-form Ricci values of dr^2 + eps^2 f^2 h:
//   Ric(d_r, d_r) = -(n-1) f''/f
//   Ric(e, e)     = (n-2)/(eps f)^2 - ((n-2) f'^2 + f f'') / f^2  (e unit, tangent)
struct CylinderRicci {
  double radial = 0.0;
  double spherical = 0.0;
};

inline CylinderRicci cylinder_ricci_closed_form(const CylinderProfiles& prof, double eps,
                                                double r) {
  const std::vector<double> pt{r};
  const Jet2 jf = expr::eval_jet2(prof.f, pt);
  const double f = jf.value(), fp = jf.grad(0), fpp = jf.hess(0, 0);
  const int n = prof.n;
  CylinderRicci out;
  out.radial = -(n - 1) * fpp / f;
  out.spherical = (n - 2) / (eps * eps * f * f) - ((n - 2) * fp * fp + f * fpp) / (f * f);
  return out;
}

// Profile system residuals at one radius, each scaled by the largest
// constituent term so huge weights keep them meaningful.
inline std::map<std::string, double> ode_residuals_at(const CylinderProfiles& prof,
                                                      double r) {
  const std::vector<double> pt{r};
  const Jet2 jh = expr::eval_jet2(prof.h, pt);
  const Jet2 ju = expr::eval_jet2(prof.u, pt);
  const Jet2 jf = expr::eval_jet2(prof.f, pt);
  const Jet2 jv = expr::eval_jet2(prof.v, pt);
  const double lb = prof.lambda / prof.beta;
  const int n = prof.n;

  auto scaled = [](double resid, std::initializer_list<double> terms) {
    double scale = 1.0;
    for (double t : terms) scale = std::max(scale, std::abs(t));
    return std::abs(resid) / scale;
  };

  std::map<std::string, double> out;
  const double fp_over_f = jf.grad(0) / jf.value();
  const double vp_over_v = jv.grad(0) / jv.value();

  if (prof.branch != CylinderBranch::N3Special) {
    const double t1 = jh.grad(0), t2 = prof.C2 * jh.value() * jh.value(), t3 = lb;
    out["h_equation"] = scaled(t1 + t2 + t3, {t1, t2, t3});
    const double w1 = jv.grad(0), w2 = prof.C3 * jh.value() * jv.value();
    out["v_equation"] = scaled(w1 + w2, {w1, w2});
  } else {
    // (1/2 - beta) v^{-3} v'^2 = (h^2/2 + lambda/beta - |h'|) v^{-1}
    const double lhs = (0.5 - prof.beta) * std::pow(jv.value(), -3.0) * jv.grad(0) * jv.grad(0);
    const double rhs =
        (0.5 * jh.value() * jh.value() + lb - std::abs(jh.grad(0))) / jv.value();
    out["special_equation"] = scaled(lhs - rhs, {lhs, rhs});
  }

  {
    const double t1 = (n - 1) * fp_over_f, t2 = jh.value(), t3 = vp_over_v;
    out["slice_equation"] = scaled(t1 - (t2 - t3), {t1, t2, t3});
  }
  {
    const double ric_rr = -(n - 1) * jf.hess(0, 0) / jf.value();
    const double t1 = ju.hess(0, 0);
    const double t2 = (n - 1) * fp_over_f * ju.grad(0);
    const double t3 = prof.beta * ric_rr * ju.value();
    const double t4 = prof.lambda * ju.value();
    out["u_equation"] = scaled(t1 + t2 - t3 + t4, {t1, t2, t3, t4});
  }
  return out;
}

// Monotone transfer to a smaller coefficient: for 0 < beta' < beta the
// transformed weight w = u^{beta'/beta} must satisfy
//   Delta w <= beta' R0 w - lambda (beta'/beta) w
// pointwise. Returns the positive part of the violation, term-scaled.
inline double beta_transfer_residual(const CylinderProfiles& prof, double beta_prime,
                                     double eps, double r) {
  if (!(beta_prime > 0 && beta_prime < prof.beta))
    throw std::invalid_argument("beta_transfer requires 0 < beta' < beta");
  const double gamma = beta_prime / prof.beta;
  const std::vector<std::string> rv{"r"};
  const expr::ExprAst w =
      expr::parse("(" + prof.u.source() + ")^" + detail::num(gamma), rv);
  const std::vector<double> pt{r};
  const Jet2 jw = expr::eval_jet2(w, pt);
  const Jet2 jf = expr::eval_jet2(prof.f, pt);
  const CylinderRicci ric = cylinder_ricci_closed_form(prof, eps, r);
  const double r0 = std::min(ric.radial, ric.spherical);
  const double lap = jw.hess(0, 0) + (prof.n - 1) * (jf.grad(0) / jf.value()) * jw.grad(0);
  const double rhs = beta_prime * r0 * jw.value() - prof.lambda * gamma * jw.value();
  const double scale = std::max({1.0, std::abs(lap), std::abs(rhs)});
  return std::max(0.0, lap - rhs) / scale;
}

// g = dr^2 + eps^2 f(r)^2 h on R x S^{n-1}, chart order (r, y...).
inline geom::ChartMetric build_warped_cylinder(const WarpedCylinderParams& p,
                                               const CylinderProfiles& prof) {
  if (!(p.eps > 0)) throw std::invalid_argument("eps must be positive");
  const int k = p.n - 1;
  std::vector<std::string> vars{"r"};
  for (const auto& v : detail::sphere_vars(k)) vars.push_back(v);
  std::vector<bool> periodic(static_cast<size_t>(p.n), false);
  std::vector<std::array<double, 2>> box(static_cast<size_t>(p.n), {-3.0, 3.0});
  box[0] = {-10.0, 10.0};
  geom::Chart chart = geom::make_chart(vars, periodic, box);

  const std::string sphere_diag = detail::num(p.eps * p.eps) + "*(" + prof.f.source() +
                                  ")^2*" + detail::stereo_factor(k);
  std::vector<expr::ExprAst> coeff;
  for (int i = 0; i < p.n; ++i)
    for (int j = 0; j < p.n; ++j) {
      std::string src = "0";
      if (i == j) src = (i == 0) ? "1" : sphere_diag;
      coeff.push_back(expr::parse(src, vars));
    }
  return geom::ChartMetric(chart, std::move(coeff), geom::RoundBlock{1, k, 3.0});
}

inline geom::ChartMetric build_warped_cylinder(const WarpedCylinderParams& p) {
  return build_warped_cylinder(p, cylinder_profiles(p));
}

// ---------------------------------------------------------------------------
// plane x sphere family (uniformly positive bi-Ricci curvature)
// ---------------------------------------------------------------------------

struct BiRicciPlaneParams {
  int sphere_dim = 5;  // d: the metric lives on R^2 x S^d, total dim d + 2
  double lambda = 1.0;
  double eps = 1e-2;
  std::optional<CylinderBranch> branch;  // default: resolved from sphere_dim
};

// Profiles are those of the weight-1 cylinder R x S^d (dimension d+1). At
// beta = 1 the zero branch exists only when d = 4; for d >= 5 beta = 1 falls
// inside the negative branch window; d <= 3 admits neither.
inline WarpedCylinderParams biricci_cylinder_params(const BiRicciPlaneParams& p) {
  WarpedCylinderParams cp;
  cp.n = p.sphere_dim + 1;
  cp.beta = 1.0;
  cp.lambda = p.lambda;
  cp.eps = p.eps;
  if (p.branch) {
    cp.branch = *p.branch;
  } else if (p.sphere_dim == 4) {
    cp.branch = CylinderBranch::C2Zero;
  } else if (p.sphere_dim >= 5) {
    cp.branch = CylinderBranch::C2Negative;
  } else {
    throw std::invalid_argument(
        "biricci plane family needs sphere_dim >= 4 (no admissible branch at beta = 1)");
  }
  return cp;
}

// g = u(r)^2 dt^2 + dr^2 + eps^2 f(r)^2 h on R^2 x S^d, chart (t, r, y...).
inline geom::ChartMetric build_biricci_plane(const BiRicciPlaneParams& p) {
  const WarpedCylinderParams cyl = biricci_cylinder_params(p);
  const CylinderProfiles prof = cylinder_profiles(cyl);
  const int d = p.sphere_dim;
  const int n = d + 2;

  std::vector<std::string> vars{"t", "r"};
  for (const auto& v : detail::sphere_vars(d)) vars.push_back(v);
  std::vector<bool> periodic(static_cast<size_t>(n), false);
  std::vector<std::array<double, 2>> box(static_cast<size_t>(n), {-3.0, 3.0});
  box[0] = {0.0, 10.0};
  box[1] = {-10.0, 10.0};
  geom::Chart chart = geom::make_chart(vars, periodic, box);

  const std::string t_diag = "(" + prof.u.source() + ")^2";
  const std::string sphere_diag = detail::num(p.eps * p.eps) + "*(" + prof.f.source() +
                                  ")^2*" + detail::stereo_factor(d);
  std::vector<expr::ExprAst> coeff;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      std::string src = "0";
      if (i == j) src = (i == 0) ? t_diag : (i == 1 ? "1" : sphere_diag);
      coeff.push_back(expr::parse(src, vars));
    }
  return geom::ChartMetric(chart, std::move(coeff), geom::RoundBlock{2, d, 3.0});
}

// Closed-form sectional curvatures of the plane x sphere family in the
// orthonormal axes (u^{-1} d_t, d_r, sphere directions).
struct BiRicciCurvatureList {
  double sec_t_r;       // -u''/u
  double sec_sphere;    // 1/(eps f)^2 - (f'/f)^2
  double sec_r_sphere;  // -f''/f
  double sec_t_sphere;  // -f'u'/(f u)
};

inline BiRicciCurvatureList biricci_curvature_closed_form(const CylinderProfiles& prof,
                                                          double eps, double r) {
  const std::vector<double> pt{r};
  const Jet2 ju = expr::eval_jet2(prof.u, pt);
  const Jet2 jf = expr::eval_jet2(prof.f, pt);
  BiRicciCurvatureList out;
  out.sec_t_r = -ju.hess(0, 0) / ju.value();
  const double fof = jf.grad(0) / jf.value();
  out.sec_sphere = 1.0 / (eps * eps * jf.value() * jf.value()) - fof * fof;
  out.sec_r_sphere = -jf.hess(0, 0) / jf.value();
  out.sec_t_sphere = -fof * ju.grad(0) / ju.value();
  return out;
}

// ---------------------------------------------------------------------------
// cot-shaped prescribed mean curvature barrier
// ---------------------------------------------------------------------------

// Constant from the shape-operator bound H A(e,e) - A^2(e,e) + |A|^2 >= C(n) H^2,
// as produced by the Young-inequality argument. Positive only for n <= 5.
inline double shape_operator_constant(int n) {
  return std::min(0.2, 1.0 - 5.0 * (n - 2) / 16.0);
}

struct CotBarrier {
  int n = 0;
  double lambda = 0.0;
  double cn = 0.0;
  double width = 0.0;       // distance from the seed set at which h reaches -inf
  expr::ExprAst profile;    // function of the distance d, valid on (0, width)
};

// h(d) = sqrt(lambda/(2 C(n))) cot(sqrt(C(n) lambda / 8) d(x)) evaluated
// with the conservative smoothing d(x) = dist/2 (admissible since the
// smoothed distance may shrink by a factor 2), so the pole-to-pole width in
// true distance is pi sqrt(32/(C(n) lambda)).
inline CotBarrier cot_barrier_profile(int n, double lambda) {
  if (n >= 6)
    throw std::invalid_argument("cot barrier undefined for n >= 6 (C(n) <= 0)");
  if (n < 3) throw std::invalid_argument("cot barrier requires n >= 3");
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");
  CotBarrier out;
  out.n = n;
  out.lambda = lambda;
  out.cn = shape_operator_constant(n);
  out.width = 3.14159265358979323846 * std::sqrt(32.0 / (out.cn * lambda));
  const double amp = std::sqrt(lambda / (2.0 * out.cn));
  const double arg = std::sqrt(out.cn * lambda / 32.0);
  out.profile = expr::parse(detail::num(amp) + "*cos(" + detail::num(arg) + "*d)/sin(" +
                                detail::num(arg) + "*d)",
                            {"d"});
  return out;
}

// Positive part of |h'| |grad d| - (C(n) h^2 + lambda/2) with |grad d| <= 2.
inline double cot_barrier_admissibility_residual(const CotBarrier& b, double d) {
  const std::vector<double> pt{d};
  const Jet2 j = expr::eval_jet2(b.profile, pt);
  const double lhs = 2.0 * std::abs(j.grad(0));
  const double rhs = b.cn * j.value() * j.value() + 0.5 * b.lambda;
  const double scale = std::max({1.0, lhs, rhs});
  return std::max(0.0, lhs - rhs) / scale;
}

}  // namespace icurv::catalog
