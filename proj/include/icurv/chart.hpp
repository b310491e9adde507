#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "icurv/expr.hpp"

namespace icurv::geom {

// Coordinate chart: variable names, periodicity flags (period 1 for torus
// coordinates) and a closed box for the non-periodic ones.
struct Chart {
  int dim = 0;
  std::vector<std::string> var_names;
  std::vector<bool> periodic;
  std::vector<std::array<double, 2>> box;  // per variable; {0,1} for periodic
};

inline Chart make_chart(std::vector<std::string> names, std::vector<bool> periodic,
                        std::vector<std::array<double, 2>> box) {
  Chart c;
  c.dim = static_cast<int>(names.size());
  if (c.dim < 2) throw std::invalid_argument("chart dimension must be >= 2");
  for (size_t i = 0; i < names.size(); ++i)
    for (size_t j = i + 1; j < names.size(); ++j)
      if (names[i] == names[j])
        throw std::invalid_argument("duplicate chart variable '" + names[i] + "'");
  if (periodic.size() != names.size() || box.size() != names.size())
    throw std::invalid_argument("chart field sizes disagree");
  c.var_names = std::move(names);
  c.periodic = std::move(periodic);
  c.box = std::move(box);
  return c;
}

// A contiguous variable range carrying a round sphere factor: rotations of
// that factor are isometries of the metric, so scans may collapse it to a
// representative point (verified by spot checks in the scanner).
struct RoundBlock {
  int begin = 0;
  int count = 0;
  double radius = 3.0;  // chart ball |y| <= radius used for sampling
};

class NonPositiveDefinite : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Metric in a chart: a symmetric matrix of coefficient expressions, each
// evaluable to a second-order jet. Coefficients are immutable after build.
class ChartMetric {
public:
  ChartMetric() = default;
  ChartMetric(Chart chart, std::vector<expr::ExprAst> coeff,
              std::optional<RoundBlock> sphere = std::nullopt)
      : chart_(std::move(chart)), coeff_(std::move(coeff)), sphere_block_(sphere) {
    const size_t n = static_cast<size_t>(chart_.dim);
    if (coeff_.size() != n * n)
      throw std::invalid_argument("coefficient matrix size mismatch");
  }

  const Chart& chart() const { return chart_; }
  int dim() const { return chart_.dim; }
  const expr::ExprAst& coeff(int i, int j) const {
    return coeff_[static_cast<size_t>(i) * static_cast<size_t>(chart_.dim) +
                  static_cast<size_t>(j)];
  }
  const std::optional<RoundBlock>& sphere_block() const { return sphere_block_; }

  // Union of variables any coefficient actually depends on. Variables absent
  // from every coefficient generate translation isometries.
  std::vector<bool> variables_used() const {
    std::vector<bool> used(static_cast<size_t>(chart_.dim), false);
    for (const auto& c : coeff_) {
      auto u = expr::variables_used(c);
      for (size_t i = 0; i < u.size(); ++i) used[i] = used[i] || u[i];
    }
    return used;
  }

  // Metric induced on the coordinate slice {var[index] = value}.
  ChartMetric restrict_slice(int index, double value) const {
    const int n = chart_.dim;
    Chart sub;
    sub.dim = n - 1;
    for (int i = 0; i < n; ++i) {
      if (i == index) continue;
      sub.var_names.push_back(chart_.var_names[static_cast<size_t>(i)]);
      sub.periodic.push_back(chart_.periodic[static_cast<size_t>(i)]);
      sub.box.push_back(chart_.box[static_cast<size_t>(i)]);
    }
    std::vector<expr::ExprAst> sub_coeff;
    sub_coeff.reserve(static_cast<size_t>(sub.dim) * static_cast<size_t>(sub.dim));
    for (int i = 0; i < n; ++i) {
      if (i == index) continue;
      for (int j = 0; j < n; ++j) {
        if (j == index) continue;
        sub_coeff.push_back(expr::pin_variable(coeff(i, j), index, value));
      }
    }
    std::optional<RoundBlock> sphere;
    if (sphere_block_ &&
        (index < sphere_block_->begin || index >= sphere_block_->begin + sphere_block_->count)) {
      sphere = *sphere_block_;
      if (index < sphere->begin) sphere->begin -= 1;
    }
    return ChartMetric(std::move(sub), std::move(sub_coeff), sphere);
  }

  // Conformal rescale: every coefficient multiplied by the given factor
  // expression (over the same chart variables).
  ChartMetric scale_conformal(const std::string& factor_src) const {
    std::vector<expr::ExprAst> scaled;
    scaled.reserve(coeff_.size());
    for (const auto& c : coeff_) {
      if (c.source() == "0")
        scaled.push_back(c);
      else
        scaled.push_back(
            expr::parse("(" + factor_src + ")*(" + c.source() + ")", chart_.var_names));
    }
    return ChartMetric(chart_, std::move(scaled), sphere_block_);
  }

private:
  Chart chart_;
  std::vector<expr::ExprAst> coeff_;
  std::optional<RoundBlock> sphere_block_;
};

// Dense symmetric tensors of coefficient jets at one point.
struct MetricJets {
  Eigen::MatrixXd g;            // g_pq
  std::vector<double> dg;       // dg[(p*n+q)*n+r]       = d_r g_pq
  std::vector<double> d2g;      // d2g[((p*n+q)*n+r)*n+s] = d^2_{rs} g_pq
  int n = 0;

  double d1(int p, int q, int r) const {
    return dg[static_cast<size_t>((p * n + q) * n + r)];
  }
  double d2(int p, int q, int r, int s) const {
    return d2g[static_cast<size_t>(((p * n + q) * n + r) * n + s)];
  }
};

inline MetricJets eval_metric_jets(const ChartMetric& metric,
                                   std::span<const double> point) {
  const int n = metric.dim();
  MetricJets mj;
  mj.n = n;
  mj.g = Eigen::MatrixXd::Zero(n, n);
  mj.dg.assign(static_cast<size_t>(n) * n * n, 0.0);
  mj.d2g.assign(static_cast<size_t>(n) * n * n * n, 0.0);
  for (int p = 0; p < n; ++p) {
    for (int q = p; q < n; ++q) {
      const Jet2 j = expr::eval_jet2(metric.coeff(p, q), point);
      mj.g(p, q) = j.value();
      mj.g(q, p) = j.value();
      for (int r = 0; r < n; ++r) {
        mj.dg[static_cast<size_t>((p * n + q) * n + r)] = j.grad(r);
        mj.dg[static_cast<size_t>((q * n + p) * n + r)] = j.grad(r);
        for (int s = 0; s < n; ++s) {
          const double h = j.hess(r, s);
          mj.d2g[static_cast<size_t>(((p * n + q) * n + r) * n + s)] = h;
          mj.d2g[static_cast<size_t>(((q * n + p) * n + r) * n + s)] = h;
        }
      }
    }
  }
  return mj;
}

}  // namespace icurv::geom
