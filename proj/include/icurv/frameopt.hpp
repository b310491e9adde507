#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "icurv/catalog.hpp"
#include "icurv/geom.hpp"
#include "icurv/rng.hpp"

// Minimization of the intermediate curvature over the Grassmannian of
// m-planes at a point, grid scans over the chart, and bundle Hessians.
namespace icurv::frameopt {

// Fast span-invariant evaluation: with P = sum_l v_l v_l^T the projector
// coefficients of a g-orthonormal frame,
//   C_m(span) = <Ric, P> - 1/2 R_pqrs P^{ps} P^{qr},
// which agrees with the completed double sum over frames.
class CmEvaluator {
public:
  CmEvaluator(const geom::CurvaturePoint& cp, int m) : n_(cp.dim), m_(m), g_(cp.g), ric_(cp.ricci) {
    if (m < 1 || m >= n_) throw std::invalid_argument("CmEvaluator: need 1 <= m <= n-1");
    rhat_.resize(n_ * n_, n_ * n_);
    for (int p = 0; p < n_; ++p)
      for (int s = 0; s < n_; ++s)
        for (int q = 0; q < n_; ++q)
          for (int r = 0; r < n_; ++r)
            rhat_(p * n_ + s, q * n_ + r) = cp.riemann(p, q, r, s);
    P_.resize(n_, n_);
    vecp_.resize(n_ * n_);
    tmp_.resize(n_ * n_);
  }

  int n() const { return n_; }
  int m() const { return m_; }
  const Eigen::MatrixXd& g() const { return g_; }

  double value(const Eigen::MatrixXd& V) {
    P_.noalias() = V * V.transpose();
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b) vecp_[a * n_ + b] = P_(a, b);
    tmp_.noalias() = rhat_ * vecp_;
    return (ric_.array() * P_.array()).sum() - 0.5 * vecp_.dot(tmp_);
  }

private:
  int n_, m_;
  Eigen::MatrixXd g_, ric_, rhat_;
  Eigen::MatrixXd P_;
  Eigen::VectorXd vecp_, tmp_;
};

struct MinCmOptions {
  int starts = 32;
  int max_sweeps = 80;
  double step_tol = 1e-7;   // sweep convergence: largest accepted rotation angle
  double angle_tol = 1e-8;  // golden-section resolution on each rotation angle
  std::uint64_t seed = 0x1CEB00DAull;
};

// Distance between m-planes through the g-orthogonal projectors:
// |P_V - P_W|_F / sqrt(2), zero iff the spans agree.
inline double plane_distance(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W,
                             const Eigen::MatrixXd& g) {
  const Eigen::MatrixXd pv = V * V.transpose() * g;
  const Eigen::MatrixXd pw = W * W.transpose() * g;
  return (pv - pw).norm() / std::sqrt(2.0);
}

struct MinCmResult {
  double value = 0.0;
  geom::Frame frame;
  bool converged = false;
  int sweeps = 0;
};

namespace detail {

// Golden-section refinement of f on [lo, hi] down to the given resolution.
template <class F>
double golden_min(F&& f, double lo, double hi, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

inline Eigen::MatrixXd random_gaussian(RandomStream& rng, int rows, int cols) {
  Eigen::MatrixXd M(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) M(i, j) = rng.next_gaussian();
  return M;
}

// One multistart descent: Givens-style rotations mixing each span vector
// with each complement vector, derivative-free golden search on the angle.
// The rotation keeps the joint frame g-orthonormal, and C_m only depends on
// the span, so the parametrization cannot leave the Grassmannian.
inline MinCmResult descend(CmEvaluator& ev, Eigen::MatrixXd V, Eigen::MatrixXd C,
                           const MinCmOptions& opts) {
  const int m = ev.m(), nc = static_cast<int>(C.cols());
  double current = ev.value(V);
  MinCmResult out;
  Eigen::VectorXd vi, ca;
  const double pi = 3.14159265358979323846;

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double max_angle = 0.0;
    for (int i = 0; i < m; ++i) {
      for (int a = 0; a < nc; ++a) {
        vi = V.col(i);
        ca = C.col(a);
        auto fline = [&](double th) {
          V.col(i) = std::cos(th) * vi + std::sin(th) * ca;
          const double val = ev.value(V);
          return val;
        };
        // coarse bracket over one period, then golden refinement
        double best_th = 0.0, best_f = current;
        for (int s = 0; s < 8; ++s) {
          const double th = -pi / 2 + pi * (s + 0.5) / 8.0;
          const double f = fline(th);
          if (f < best_f) {
            best_f = f;
            best_th = th;
          }
        }
        const double th =
            golden_min(fline, best_th - pi / 8, best_th + pi / 8, opts.angle_tol);
        const double f = fline(th);
        if (f < current) {
          current = f;
          V.col(i) = std::cos(th) * vi + std::sin(th) * ca;
          C.col(a) = -std::sin(th) * vi + std::cos(th) * ca;
          max_angle = std::max(max_angle, std::abs(th));
        } else {
          V.col(i) = vi;
        }
      }
    }
    // kill orthonormality drift accumulated over the sweep
    Eigen::MatrixXd full(V.rows(), m + nc);
    full.leftCols(m) = V;
    full.rightCols(nc) = C;
    full = geom::gram_schmidt(ev.g(), full);
    if (full.cols() == m + nc) {
      V = full.leftCols(m);
      C = full.rightCols(nc);
      current = ev.value(V);
    }
    out.sweeps = sweep + 1;
    if (max_angle < opts.step_tol) {
      out.converged = true;
      break;
    }
  }
  out.value = current;
  out.frame.vectors = V;
  return out;
}

}  // namespace detail

// Best value over `starts` random starts, each refined by coordinate descent
// on the fiber Grassmannian. The returned value is the minimum over every
// start, and the frame realizes it.
inline MinCmResult min_cm_at(const geom::ChartMetric& metric, std::span<const double> point,
                             int m, const MinCmOptions& opts = {}) {
  const geom::CurvaturePoint cp = curvature_at(metric, point);
  CmEvaluator ev(cp, m);
  const int n = cp.dim;

  MinCmResult best;
  bool have = false;
  for (int start = 0; start < opts.starts; ++start) {
    RandomStream rng(derive_seed(opts.seed, "min_cm_start", static_cast<std::uint64_t>(start)));
    Eigen::MatrixXd full = geom::gram_schmidt(cp.g, detail::random_gaussian(rng, n, n));
    if (full.cols() != n) continue;  // essentially impossible for PD g
    MinCmResult r = detail::descend(ev, full.leftCols(m), full.rightCols(n - m), opts);
    if (!have || r.value < best.value) {
      best = r;
      have = true;
    }
  }
  if (!have) throw std::runtime_error("min_cm_at: no usable start");
  best.frame.point = cp.point;
  if (!best.converged)
    best.sweeps = -best.sweeps;  // non-convergence flag preserved in sweeps sign
  return best;
}

// ---------------------------------------------------------------------------
// grid scans
// ---------------------------------------------------------------------------

struct GridSpec {
  std::vector<int> counts;  // samples per chart variable
  std::map<int, std::array<double, 2>> range_override;   // optional axis ranges
  std::map<int, std::vector<double>> extra_values;       // appended axis samples
};

struct ScanOptions {
  MinCmOptions min_opts{.starts = 32, .max_sweeps = 80, .step_tol = 1e-6,
                        .angle_tol = 1e-7, .seed = 0x1CEB00DAull};
  int spot_checks = 4;        // random full-grid points re-checked against their class
  bool use_symmetry = true;   // collapse isometry orbits of the grid
  double spot_tol = 1e-6;
};

struct ScanSample {
  Eigen::VectorXd point;
  double min_cm = 0.0;
  Eigen::MatrixXd frame;
};

struct ScanResult {
  double global_min = 0.0;
  int argmin_index = -1;
  std::vector<ScanSample> samples;    // one per evaluated representative
  std::vector<int> grid_counts;
  long long full_grid_points = 0;     // size of the represented grid (ball-filtered)
  int evaluated_points = 0;
  double spot_max_dev = 0.0;
  int spot_checked = 0;
  std::uint64_t seed = 0;
  int starts = 0;

  const ScanSample& argmin() const { return samples[static_cast<size_t>(argmin_index)]; }
};

namespace detail {

struct ScanAxes {
  std::vector<std::vector<double>> values;  // per axis
  std::vector<bool> active;                 // axis varies across evaluated points
  std::vector<int> rep_index;               // representative index for inactive axes
  int sphere_begin = -1, sphere_count = 0;
  double sphere_radius2 = 0.0;
};

inline ScanAxes build_axes(const geom::ChartMetric& metric, const GridSpec& grid,
                           bool use_symmetry) {
  const auto& chart = metric.chart();
  const int n = chart.dim;
  if (static_cast<int>(grid.counts.size()) != n)
    throw std::invalid_argument("grid counts must match the chart dimension");

  ScanAxes ax;
  ax.values.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = grid.counts[static_cast<size_t>(i)];
    if (c < 1) throw std::invalid_argument("grid counts must be positive");
    auto& vals = ax.values[static_cast<size_t>(i)];
    if (chart.periodic[static_cast<size_t>(i)]) {
      for (int j = 0; j < c; ++j) vals.push_back(static_cast<double>(j) / c);
    } else {
      auto box = chart.box[static_cast<size_t>(i)];
      if (auto it = grid.range_override.find(i); it != grid.range_override.end())
        box = it->second;
      if (c == 1)
        vals.push_back(0.5 * (box[0] + box[1]));
      else
        for (int j = 0; j < c; ++j)
          vals.push_back(box[0] + (box[1] - box[0]) * j / (c - 1));
    }
    if (auto it = grid.extra_values.find(i); it != grid.extra_values.end()) {
      for (double v : it->second) {
        bool dup = false;
        for (double w : vals)
          if (std::abs(w - v) < 1e-12) dup = true;
        if (!dup) vals.push_back(v);
      }
      std::sort(vals.begin(), vals.end());
    }
  }

  if (metric.sphere_block()) {
    ax.sphere_begin = metric.sphere_block()->begin;
    ax.sphere_count = metric.sphere_block()->count;
    ax.sphere_radius2 = metric.sphere_block()->radius * metric.sphere_block()->radius;
  }

  const auto used = metric.variables_used();
  ax.active.assign(static_cast<size_t>(n), true);
  ax.rep_index.assign(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const bool in_sphere =
        ax.sphere_begin >= 0 && i >= ax.sphere_begin && i < ax.sphere_begin + ax.sphere_count;
    bool active = true;
    if (use_symmetry && in_sphere) active = false;       // round factor: rotations
    if (use_symmetry && !used[static_cast<size_t>(i)]) active = false;  // translations
    ax.active[static_cast<size_t>(i)] = active;
    // representative: value closest to zero for sphere axes, first value else
    if (in_sphere) {
      const auto& vals = ax.values[static_cast<size_t>(i)];
      int best = 0;
      for (size_t j = 1; j < vals.size(); ++j)
        if (std::abs(vals[j]) < std::abs(vals[static_cast<size_t>(best)]))
          best = static_cast<int>(j);
      ax.rep_index[static_cast<size_t>(i)] = best;
    }
  }
  return ax;
}

inline bool in_sphere_ball(const ScanAxes& ax, const std::vector<int>& idx) {
  if (ax.sphere_begin < 0) return true;
  double y2 = 0.0;
  for (int a = ax.sphere_begin; a < ax.sphere_begin + ax.sphere_count; ++a) {
    const double v = ax.values[static_cast<size_t>(a)][static_cast<size_t>(idx[static_cast<size_t>(a)])];
    y2 += v * v;
  }
  return y2 <= ax.sphere_radius2 + 1e-12;
}

}  // namespace detail

// Scans min_cm_at over the product grid. Exact isometries of the catalog
// metrics (rotations of a round sphere block, translations in coordinates
// the coefficients do not involve) are used to evaluate one representative
// per orbit; randomly drawn grid points are then re-solved and compared
// against their representative, so an incorrectly declared symmetry fails
// the scan instead of corrupting it.
inline ScanResult scan_min_cm(const geom::ChartMetric& metric, const GridSpec& grid, int m,
                              const ScanOptions& opts = {}) {
  const int n = metric.dim();
  const detail::ScanAxes ax = detail::build_axes(metric, grid, opts.use_symmetry);

  // enumerate evaluated representatives (product over active axes)
  std::vector<int> active_axes;
  for (int i = 0; i < n; ++i)
    if (ax.active[static_cast<size_t>(i)]) active_axes.push_back(i);

  long long reduced_total = 1;
  for (int i : active_axes) reduced_total *= static_cast<long long>(ax.values[static_cast<size_t>(i)].size());
  if (reduced_total > 2'000'000)
    throw std::invalid_argument("scan grid too large after symmetry reduction");

  // size of the full (ball-filtered) grid this scan represents
  long long outside = 1;
  for (int i = 0; i < n; ++i) {
    const bool in_sphere =
        ax.sphere_begin >= 0 && i >= ax.sphere_begin && i < ax.sphere_begin + ax.sphere_count;
    if (!in_sphere) outside *= static_cast<long long>(ax.values[static_cast<size_t>(i)].size());
  }
  long long ball = 1;
  if (ax.sphere_begin >= 0) {
    ball = 0;
    std::vector<int> idx(static_cast<size_t>(n), 0);
    std::function<void(int)> rec = [&](int a) {
      if (a == ax.sphere_count) {
        ball += detail::in_sphere_ball(ax, idx) ? 1 : 0;
        return;
      }
      const int axis = ax.sphere_begin + a;
      for (size_t j = 0; j < ax.values[static_cast<size_t>(axis)].size(); ++j) {
        idx[static_cast<size_t>(axis)] = static_cast<int>(j);
        rec(a + 1);
      }
    };
    rec(0);
  }

  ScanResult out;
  out.grid_counts = grid.counts;
  out.full_grid_points = outside * ball;
  out.seed = opts.min_opts.seed;
  out.starts = opts.min_opts.starts;

  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = ax.rep_index[static_cast<size_t>(i)];

  for (long long flat = 0; flat < reduced_total; ++flat) {
    long long rest = flat;
    for (int i : active_axes) {
      const long long c = static_cast<long long>(ax.values[static_cast<size_t>(i)].size());
      idx[static_cast<size_t>(i)] = static_cast<int>(rest % c);
      rest /= c;
    }
    if (!detail::in_sphere_ball(ax, idx)) continue;

    std::vector<double> pt(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      pt[static_cast<size_t>(i)] = ax.values[static_cast<size_t>(i)][static_cast<size_t>(idx[static_cast<size_t>(i)])];

    MinCmOptions mo = opts.min_opts;
    mo.seed = derive_seed(opts.min_opts.seed, "scan_point", static_cast<std::uint64_t>(flat));
    MinCmResult r = min_cm_at(metric, pt, m, mo);

    ScanSample sample;
    sample.point = Eigen::Map<const Eigen::VectorXd>(pt.data(), n);
    sample.min_cm = r.value;
    sample.frame = r.frame.vectors;
    out.samples.push_back(std::move(sample));
    if (out.argmin_index < 0 || r.value < out.global_min) {
      out.global_min = r.value;
      out.argmin_index = static_cast<int>(out.samples.size()) - 1;
    }
  }
  out.evaluated_points = static_cast<int>(out.samples.size());
  if (out.samples.empty()) throw std::runtime_error("scan_min_cm: empty grid");

  // spot checks validate the orbit collapse empirically
  const bool reduced = static_cast<int>(active_axes.size()) < n;
  if (reduced && opts.spot_checks > 0) {
    RandomStream rng(derive_seed(opts.min_opts.seed, "scan_spot"));
    for (int t = 0; t < opts.spot_checks; ++t) {
      std::vector<int> full_idx(static_cast<size_t>(n));
      do {
        for (int i = 0; i < n; ++i)
          full_idx[static_cast<size_t>(i)] = static_cast<int>(
              rng.next_below(ax.values[static_cast<size_t>(i)].size()));
      } while (!detail::in_sphere_ball(ax, full_idx));

      std::vector<double> pt(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i)
        pt[static_cast<size_t>(i)] =
            ax.values[static_cast<size_t>(i)][static_cast<size_t>(full_idx[static_cast<size_t>(i)])];

      // locate the representative sample of this orbit
      long long flat = 0, stride = 1;
      for (int i : active_axes) {
        flat += stride * full_idx[static_cast<size_t>(i)];
        stride *= static_cast<long long>(ax.values[static_cast<size_t>(i)].size());
      }
      // count preceding in-ball representatives to map flat -> sample index
      // (samples were appended in flat order, skipping out-of-ball points)
      int sample_index = -1, seen = 0;
      {
        std::vector<int> idx2(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) idx2[static_cast<size_t>(i)] = ax.rep_index[static_cast<size_t>(i)];
        for (long long f = 0; f <= flat; ++f) {
          long long rest = f;
          for (int i : active_axes) {
            const long long c = static_cast<long long>(ax.values[static_cast<size_t>(i)].size());
            idx2[static_cast<size_t>(i)] = static_cast<int>(rest % c);
            rest /= c;
          }
          if (detail::in_sphere_ball(ax, idx2)) {
            if (f == flat) sample_index = seen;
            ++seen;
          }
        }
      }
      if (sample_index < 0) continue;  // orbit representative was out of ball

      MinCmOptions mo = opts.min_opts;
      mo.seed = derive_seed(opts.min_opts.seed, "scan_spot_point", static_cast<std::uint64_t>(t));
      const MinCmResult r = min_cm_at(metric, pt, m, mo);
      const double ref = out.samples[static_cast<size_t>(sample_index)].min_cm;
      const double dev = std::abs(r.value - ref);
      out.spot_max_dev = std::max(out.spot_max_dev, dev);
      ++out.spot_checked;
      if (dev > opts.spot_tol * std::max(1.0, std::abs(ref)))
        throw std::runtime_error(
            "scan_min_cm: symmetry spot check failed (deviation " + std::to_string(dev) + ")");
    }
  }
  return out;
}

// Largest eps in the halving schedule {eps0 * 2^-j} whose scan clears the
// threshold. Returns the eps, the passing scan and the attempted trace.
struct EpsSearchResult {
  double eps = 0.0;
  int halvings = 0;
  ScanResult scan;
  std::vector<std::pair<double, double>> trace;  // (eps, global_min)
};

inline EpsSearchResult find_admissible_eps(
    const std::function<geom::ChartMetric(double)>& build_at, int m, const GridSpec& grid,
    double threshold, const ScanOptions& opts = {}, double eps0 = 0.1, int max_halvings = 20) {
  EpsSearchResult out;
  for (int j = 0; j <= max_halvings; ++j) {
    const double eps = eps0 * std::pow(2.0, -j);
    ScanResult scan = scan_min_cm(build_at(eps), grid, m, opts);
    out.trace.emplace_back(eps, scan.global_min);
    if (scan.global_min >= threshold) {
      out.eps = eps;
      out.halvings = j;
      out.scan = std::move(scan);
      return out;
    }
  }
  std::string diag = "no admissible eps found; trace:";
  for (auto& [e, v] : out.trace) diag += " (" + std::to_string(e) + ", " + std::to_string(v) + ")";
  throw std::runtime_error(diag);
}

// Sphere x torus wrapper: requires the dimension gate n(m-2) >= m^2 - 2
// before searching (the construction cannot work below it). The grid is
// augmented with the critical points of F, where admissibility binds.
inline EpsSearchResult find_admissible_eps_torus_sphere(const catalog::TorusSphereParams& params,
                                                        GridSpec grid,
                                                        const ScanOptions& opts = {},
                                                        double tol = 1e-8) {
  if (!catalog::nonneg_gate(params.m, params.n()))
    throw std::invalid_argument("dimension gate n(m-2) >= m^2-2 fails for (m=" +
                                std::to_string(params.m) + ", n=" + std::to_string(params.n()) +
                                ")");
  try {
    for (const auto& q : catalog::locate_critical_points(params))
      for (int i = 0; i < params.m; ++i)
        grid.extra_values[params.k + i].push_back(q[i]);
  } catch (const std::invalid_argument&) {
    // more active variables than the locator supports: scan the plain grid
  }
  auto build_at = [&params](double eps) {
    catalog::TorusSphereParams p = params;
    p.eps = eps;
    return catalog::build_torus_sphere(p);
  };
  return find_admissible_eps(build_at, params.m, grid, -tol, opts);
}

// ---------------------------------------------------------------------------
// local fiber chart and bundle Hessian
// ---------------------------------------------------------------------------

// Local chart around a base plane: plane(z) spanned by e_i + sum_a z_ia c_a,
// re-orthonormalized. z = 0 reproduces the base plane.
struct GrassCoords {
  geom::Frame base;           // m g-orthonormal vectors
  Eigen::MatrixXd complement; // n-m g-orthonormal vectors completing the frame

  Eigen::MatrixXd plane(const Eigen::MatrixXd& z, const Eigen::MatrixXd& g) const {
    Eigen::MatrixXd W = base.vectors + complement * z.transpose();
    Eigen::MatrixXd out = geom::gram_schmidt(g, W);
    if (out.cols() != base.vectors.cols())
      throw std::invalid_argument("GrassCoords: chart left its injectivity region");
    return out;
  }
};

struct GrassHessian {
  Eigen::MatrixXd hess;     // ordered (y..., x..., z...)
  int ny = 0, nx = 0, nz = 0;

  Eigen::MatrixXd y_block() const { return hess.block(0, 0, ny, ny); }
  Eigen::MatrixXd x_block() const { return hess.block(ny, ny, nx, nx); }
  Eigen::MatrixXd z_block() const { return hess.block(ny + nx, ny + nx, nz, nz); }
  double cross_max() const {
    double v = 0.0;
    v = std::max(v, hess.block(0, ny, ny, nx).cwiseAbs().maxCoeff());
    v = std::max(v, hess.block(0, ny + nx, ny, nz).cwiseAbs().maxCoeff());
    v = std::max(v, hess.block(ny, ny + nx, nx, nz).cwiseAbs().maxCoeff());
    return v;
  }
  double diag_max() const { return hess.diagonal().cwiseAbs().maxCoeff(); }
};

namespace detail {

// C_m as a function of (base shift, fiber coordinates) in the trivialization
// induced by the chart coordinates: the plane at (y+dy, x+dx, z) is spanned
// by the normalized coordinate vectors of x_indices mixed into the
// y-directions by z.
inline double bundle_value(const geom::ChartMetric& metric, const Eigen::VectorXd& base_point,
                           const std::vector<int>& x_indices, const std::vector<int>& y_indices,
                           const Eigen::VectorXd& dp, const Eigen::MatrixXd& z) {
  const int n = metric.dim();
  std::vector<double> pt(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) pt[static_cast<size_t>(i)] = base_point[i];
  for (size_t a = 0; a < y_indices.size(); ++a)
    pt[static_cast<size_t>(y_indices[a])] += dp[static_cast<int>(a)];
  for (size_t i = 0; i < x_indices.size(); ++i)
    pt[static_cast<size_t>(x_indices[i])] += dp[static_cast<int>(y_indices.size() + i)];

  const geom::CurvaturePoint cp = geom::curvature_at(metric, pt);
  GrassCoords chart;
  chart.base.point = cp.point;
  chart.base.vectors = geom::normalized_coordinate_frame(cp, x_indices);
  chart.complement = geom::normalized_coordinate_frame(cp, y_indices);
  const Eigen::MatrixXd V = chart.plane(z, cp.g);
  CmEvaluator ev(cp, static_cast<int>(x_indices.size()));
  return ev.value(V);
}

}  // namespace detail

// Central finite-difference Hessian (one Richardson refinement) of C_m over
// base coordinates and fiber coordinates at a zero of the fiber gradient.
// Variables are ordered (y..., x..., z_11, z_12, ..., z_m{n-m}).
inline GrassHessian grass_hessian_cm(const geom::ChartMetric& metric,
                                     std::span<const double> point,
                                     const std::vector<int>& x_indices, double step = 1e-4) {
  const int n = metric.dim();
  const int m = static_cast<int>(x_indices.size());
  std::vector<int> y_indices;
  for (int i = 0; i < n; ++i)
    if (std::find(x_indices.begin(), x_indices.end(), i) == x_indices.end())
      y_indices.push_back(i);
  const int ny = static_cast<int>(y_indices.size());
  const int nz = m * ny;
  const int dim = ny + m + nz;

  const Eigen::VectorXd base = Eigen::Map<const Eigen::VectorXd>(point.data(), n);
  auto phi = [&](const Eigen::VectorXd& q) {
    Eigen::MatrixXd z(m, ny);
    for (int i = 0; i < m; ++i)
      for (int a = 0; a < ny; ++a) z(i, a) = q[ny + m + i * ny + a];
    return detail::bundle_value(metric, base, x_indices, y_indices, q.head(ny + m), z);
  };

  // precondition: the point is a critical point of the bundle function
  {
    const double f0 = phi(Eigen::VectorXd::Zero(dim));
    double gmax = 0.0;
    for (int a = 0; a < dim; ++a) {
      Eigen::VectorXd q = Eigen::VectorXd::Zero(dim);
      q[a] = 1e-5;
      const double fp = phi(q);
      q[a] = -1e-5;
      const double fm = phi(q);
      gmax = std::max(gmax, std::abs((fp - fm) / 2e-5));
    }
    if (gmax > 1e-4 * (1.0 + std::abs(f0)))
      throw std::invalid_argument("grass_hessian_cm: point is not on the zero set (gradient " +
                                  std::to_string(gmax) + ")");
  }

  auto fd_hessian = [&](double h) {
    Eigen::MatrixXd H(dim, dim);
    const double f0 = phi(Eigen::VectorXd::Zero(dim));
    for (int a = 0; a < dim; ++a) {
      Eigen::VectorXd q = Eigen::VectorXd::Zero(dim);
      q[a] = h;
      const double fp = phi(q);
      q[a] = -h;
      const double fm = phi(q);
      H(a, a) = (fp - 2 * f0 + fm) / (h * h);
      for (int b = a + 1; b < dim; ++b) {
        auto at = [&](double da, double db) {
          Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
          w[a] = da;
          w[b] = db;
          return phi(w);
        };
        const double v = (at(h, h) + at(-h, -h) - at(h, -h) - at(-h, h)) / (4 * h * h);
        H(a, b) = v;
        H(b, a) = v;
      }
    }
    return H;
  };

  const Eigen::MatrixXd H1 = fd_hessian(step);
  const Eigen::MatrixXd H2 = fd_hessian(step / 2);
  GrassHessian out;
  out.hess = (4.0 * H2 - H1) / 3.0;
  out.ny = ny;
  out.nx = m;
  out.nz = nz;
  return out;
}

// ---------------------------------------------------------------------------
// conformal metric variation
// ---------------------------------------------------------------------------

struct VariationResult {
  double derivative = 0.0;   // finer-step central difference
  double coarse = 0.0;       // 1e-4 step value
  double consistency = 0.0;  // relative disagreement between the two steps
};

// d/dt of C_m((1+t psi) g) at t = 0 on the fixed coordinate plane, with the
// frame re-normalized in the perturbed metric. psi must vanish to first
// order at the point.
inline VariationResult metric_variation_derivative(const geom::ChartMetric& metric,
                                                   const std::string& psi_src,
                                                   std::span<const double> point,
                                                   const std::vector<int>& x_indices) {
  const expr::ExprAst psi = expr::parse(psi_src, metric.chart().var_names);
  const Jet2 jp = expr::eval_jet2(psi, point);
  if (std::abs(jp.value()) > 1e-10)
    throw std::invalid_argument("metric variation: psi does not vanish at the point");
  double gnorm = 0.0;
  for (int i = 0; i < metric.dim(); ++i) gnorm = std::max(gnorm, std::abs(jp.grad(i)));
  if (gnorm > 1e-8)
    throw std::invalid_argument("metric variation: d psi does not vanish at the point");

  auto value_at = [&](double t) {
    const geom::ChartMetric scaled =
        metric.scale_conformal("1+" + expr::fmt_num(t) + "*(" + psi_src + ")");
    const geom::CurvaturePoint cp = geom::curvature_at(scaled, point);
    geom::Frame f{cp.point, geom::normalized_coordinate_frame(cp, x_indices)};
    return geom::c_m(cp, f);
  };

  auto central = [&](double h) { return (value_at(h) - value_at(-h)) / (2 * h); };
  VariationResult out;
  out.coarse = central(1e-4);
  out.derivative = central(1e-5);
  out.consistency =
      std::abs(out.coarse - out.derivative) / std::max(1.0, std::abs(out.derivative));
  if (out.consistency > 1e-4)
    throw std::runtime_error("metric variation: finite-difference steps disagree");
  return out;
}

// ---------------------------------------------------------------------------
// strict positivity through conformal perturbation
// ---------------------------------------------------------------------------

struct PerturbedPositivityResult {
  bool found = false;
  double t = 0.0;
  double delta = 0.0;                             // scan minimum at the found t
  std::vector<std::pair<double, double>> trace;   // (t, scan minimum)
  std::vector<Eigen::VectorXd> critical_points;
};

// Searches the schedule for a perturbation size t with
// scan_min((1+t psi) g) >= delta > 0. psi must vanish to second order with
// negative definite Hessian (over the active torus variables) at every
// critical point of F. The scan grid is augmented with the critical
// coordinates so the t = 0 zero set is actually sampled.
inline PerturbedPositivityResult perturbed_positivity_check(
    const catalog::TorusSphereParams& params, const std::string& psi_src,
    std::span<const double> t_schedule, GridSpec grid, const ScanOptions& opts = {}) {
  if (!catalog::strict_gate(params.m, params.n()))
    throw std::invalid_argument("perturbed positivity requires the strict dimension gate");

  const auto crits = catalog::locate_critical_points(params);
  if (crits.empty())
    throw std::invalid_argument("perturbed positivity: F has no isolated critical points");

  const geom::ChartMetric metric = catalog::build_torus_sphere(params);
  const auto& vars = metric.chart().var_names;
  const expr::ExprAst psi = expr::parse(psi_src, vars);
  const expr::ExprAst F = catalog::full_chart_warp(params);

  // active torus variables of F and psi, as chart indices
  std::vector<int> active;
  {
    const auto uf = expr::variables_used(F);
    const auto up = expr::variables_used(psi);
    for (int i = params.k; i < params.n(); ++i)
      if (uf[static_cast<size_t>(i)] || up[static_cast<size_t>(i)]) active.push_back(i);
  }
  if (active.empty()) throw std::invalid_argument("perturbed positivity: psi and F constant");

  for (const auto& q : crits) {
    std::vector<double> pt(static_cast<size_t>(params.n()), 0.0);
    for (int i = 0; i < params.m; ++i) pt[static_cast<size_t>(params.k + i)] = q[i];
    const Jet2 j = expr::eval_jet2(psi, pt);
    if (std::abs(j.value()) > 1e-10 )
      throw std::invalid_argument("psi does not vanish at a critical point of F");
    for (int i : active)
      if (std::abs(j.grad(i)) > 1e-8)
        throw std::invalid_argument("d psi does not vanish at a critical point of F");
    Eigen::MatrixXd H(active.size(), active.size());
    for (size_t a = 0; a < active.size(); ++a)
      for (size_t b = 0; b < active.size(); ++b)
        H(static_cast<int>(a), static_cast<int>(b)) =
            j.hess(active[a], active[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.eigenvalues().maxCoeff() > -1e-8)
      throw std::invalid_argument(
          "psi Hessian is not negative definite at a critical point of F");
  }

  // make sure the zero set is on the grid
  for (int i : active) {
    auto& extra = grid.extra_values[i];
    for (const auto& q : crits) extra.push_back(q[i - params.k]);
  }

  PerturbedPositivityResult out;
  out.critical_points = crits;
  for (double t : t_schedule) {
    const geom::ChartMetric perturbed =
        metric.scale_conformal("1+" + expr::fmt_num(t) + "*(" + psi_src + ")");
    const ScanResult scan = scan_min_cm(perturbed, grid, params.m, opts);
    out.trace.emplace_back(t, scan.global_min);
    if (scan.global_min >= 1e-10) {
      out.found = true;
      out.t = t;
      out.delta = scan.global_min;
      return out;
    }
  }
  return out;
}

}  // namespace icurv::frameopt
