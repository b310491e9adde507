#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "icurv/chart.hpp"
#include "icurv/tolerances.hpp"

namespace icurv::geom {

// All curvature data of a chart metric at one point, computed from the
// coefficient jets alone. Index conventions:
//   gamma(r,p,q)    Christoffel symbols Gamma^r_pq (symmetric in p,q)
//   riem(p,q,r,s)   R_pqrs = <R(e_p,e_q) e_r, e_s>,  R(X,Y) = [nabla_X,nabla_Y]
// so the sectional numerator of a plane (X,Y) is R(X,Y,Y,X) and the round
// sphere has positive sectional curvature.
struct CurvaturePoint {
  int dim = 0;
  Eigen::VectorXd point;
  Eigen::MatrixXd g, g_inv, ricci;
  std::vector<double> gamma;  // [r*n*n + p*n + q]
  std::vector<double> riem;   // [((p*n+q)*n+r)*n+s]
  double scalar = 0.0;

  double christoffel(int r, int p, int q) const {
    return gamma[static_cast<size_t>((r * dim + p) * dim + q)];
  }
  double riemann(int p, int q, int r, int s) const {
    return riem[static_cast<size_t>(((p * dim + q) * dim + r) * dim + s)];
  }

  double riemann(const Eigen::VectorXd& X, const Eigen::VectorXd& Y,
                 const Eigen::VectorXd& Z, const Eigen::VectorXd& W) const {
    double acc = 0.0;
    for (int p = 0; p < dim; ++p) {
      if (X[p] == 0.0) continue;
      for (int q = 0; q < dim; ++q) {
        if (Y[q] == 0.0) continue;
        for (int r = 0; r < dim; ++r) {
          if (Z[r] == 0.0) continue;
          double inner = 0.0;
          for (int s = 0; s < dim; ++s) inner += riemann(p, q, r, s) * W[s];
          acc += X[p] * Y[q] * Z[r] * inner;
        }
      }
    }
    return acc;
  }

  double ric(const Eigen::VectorXd& X, const Eigen::VectorXd& Y) const {
    return X.dot(ricci * Y);
  }
  double inner(const Eigen::VectorXd& X, const Eigen::VectorXd& Y) const {
    return X.dot(g * Y);
  }
};

// g-orthonormal list of tangent vectors at a point (columns).
struct Frame {
  Eigen::VectorXd point;
  Eigen::MatrixXd vectors;  // n x m
};

inline double frame_orthonormality_defect(const Eigen::MatrixXd& V,
                                          const Eigen::MatrixXd& g) {
  const Eigen::MatrixXd gram = V.transpose() * g * V;
  return (gram - Eigen::MatrixXd::Identity(V.cols(), V.cols())).cwiseAbs().maxCoeff();
}

// Modified Gram-Schmidt in the inner product g, with one reorthogonalization
// pass. Columns whose residual norm falls below `pivot` are dropped.
inline Eigen::MatrixXd gram_schmidt(const Eigen::MatrixXd& g, const Eigen::MatrixXd& cols,
                                    double pivot = 1e-8) {
  const int n = static_cast<int>(g.rows());
  Eigen::MatrixXd out(n, cols.cols());
  int kept = 0;
  for (int c = 0; c < cols.cols(); ++c) {
    Eigen::VectorXd v = cols.col(c);
    for (int pass = 0; pass < 2; ++pass)
      for (int k = 0; k < kept; ++k) v -= (out.col(k).dot(g * v)) * out.col(k);
    const double nrm2 = v.dot(g * v);
    if (nrm2 > pivot * pivot) out.col(kept++) = v / std::sqrt(nrm2);
  }
  out.conservativeResize(n, kept);
  return out;
}

// Extends m g-orthonormal vectors to a full g-orthonormal basis using the
// coordinate directions as candidates.
inline Eigen::MatrixXd complete_frame(const Eigen::MatrixXd& g, const Eigen::MatrixXd& V,
                                      double pivot = 1e-8) {
  const int n = static_cast<int>(g.rows());
  Eigen::MatrixXd cols(n, V.cols() + n);
  cols.leftCols(V.cols()) = V;
  cols.rightCols(n) = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd full = gram_schmidt(g, cols, pivot);
  if (full.cols() != n)
    throw std::runtime_error("frame completion failed: degenerate candidate set");
  return full;
}

inline CurvaturePoint curvature_at(const ChartMetric& metric,
                                   std::span<const double> point) {
  const int n = metric.dim();
  const MetricJets mj = eval_metric_jets(metric, point);

  CurvaturePoint cp;
  cp.dim = n;
  cp.point = Eigen::Map<const Eigen::VectorXd>(point.data(), n);
  cp.g = mj.g;

  Eigen::LLT<Eigen::MatrixXd> llt(mj.g);
  if (llt.info() != Eigen::Success)
    throw NonPositiveDefinite("metric is not positive definite at the sampled point");
  cp.g_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));

  // Christoffel symbols of the first kind: Gamma_{s,pq} = (d_p g_qs + d_q g_ps - d_s g_pq)/2
  std::vector<double> g1(static_cast<size_t>(n) * n * n);
  auto G1 = [&](int s, int p, int q) -> double& {
    return g1[static_cast<size_t>((s * n + p) * n + q)];
  };
  for (int s = 0; s < n; ++s)
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        G1(s, p, q) = 0.5 * (mj.d1(q, s, p) + mj.d1(p, s, q) - mj.d1(p, q, s));

  cp.gamma.assign(static_cast<size_t>(n) * n * n, 0.0);
  for (int r = 0; r < n; ++r)
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) {
        double acc = 0.0;
        for (int s = 0; s < n; ++s) acc += cp.g_inv(r, s) * G1(s, p, q);
        cp.gamma[static_cast<size_t>((r * n + p) * n + q)] = acc;
      }

  // Lowered curvature from second derivatives of g plus GammaGamma terms:
  // R_pqrs = (d2_pr g_qs + d2_qs g_pr - d2_ps g_qr - d2_qr g_ps)/2
  //          + g^{ab} (Gamma_{a,qs} Gamma_{b,pr} - Gamma_{a,ps} Gamma_{b,qr})
  cp.riem.assign(static_cast<size_t>(n) * n * n * n, 0.0);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) {
          double val = 0.5 * (mj.d2(q, s, p, r) + mj.d2(p, r, q, s) -
                              mj.d2(q, r, p, s) - mj.d2(p, s, q, r));
          double gg = 0.0;
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
              gg += cp.g_inv(a, b) * (G1(a, q, s) * G1(b, p, r) - G1(a, p, s) * G1(b, q, r));
          cp.riem[static_cast<size_t>(((p * n + q) * n + r) * n + s)] = val + gg;
        }

  cp.ricci = Eigen::MatrixXd::Zero(n, n);
  for (int q = 0; q < n; ++q)
    for (int r = 0; r < n; ++r) {
      double acc = 0.0;
      for (int p = 0; p < n; ++p)
        for (int s = 0; s < n; ++s) acc += cp.g_inv(p, s) * cp.riemann(p, q, r, s);
      cp.ricci(q, r) = acc;
    }
  cp.scalar = (cp.g_inv * cp.ricci).trace();
  return cp;
}

// Sectional curvature of the plane spanned by X, Y.
inline double sectional(const CurvaturePoint& cp, const Eigen::VectorXd& X,
                        const Eigen::VectorXd& Y, double degenerate_tol = 1e-14) {
  const double num = cp.riemann(X, Y, Y, X);
  const double den =
      cp.inner(X, X) * cp.inner(Y, Y) - cp.inner(X, Y) * cp.inner(X, Y);
  if (den < degenerate_tol)
    throw std::invalid_argument("sectional: degenerate plane");
  return num / den;
}

// Intermediate curvature of an m-frame: sum of R(e_p, e_q, e_q, e_p) over
// 1 <= p <= m < n, p < q <= n, with the frame completed internally to a full
// g-orthonormal basis. The value depends only on span{e_1..e_m}.
inline double c_m(const CurvaturePoint& cp, const Frame& frame,
                  double orthonormal_tol = 1e-8, double pivot = 1e-8) {
  const int n = cp.dim;
  const int m = static_cast<int>(frame.vectors.cols());
  if (m < 1 || m >= n) throw std::invalid_argument("c_m: need 1 <= m <= n-1");
  if (frame_orthonormality_defect(frame.vectors, cp.g) > orthonormal_tol)
    throw std::invalid_argument("c_m: frame is not g-orthonormal");
  const Eigen::MatrixXd full = complete_frame(cp.g, frame.vectors, pivot);
  double acc = 0.0;
  for (int p = 0; p < m; ++p)
    for (int q = p + 1; q < n; ++q)
      acc += cp.riemann(full.col(p), full.col(q), full.col(q), full.col(p));
  return acc;
}

// Minimum of Ric(e,e) over g-unit vectors: the smallest eigenvalue of the
// pencil (Ric, g), reduced to an ordinary symmetric problem through the
// inverse square root of g. Returns the value and a minimizing unit vector.
struct MinRicci {
  double value = 0.0;
  Eigen::VectorXd direction;
};

inline MinRicci r0_at(const CurvaturePoint& cp) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gs(cp.g);
  if (gs.eigenvalues().minCoeff() <= 0.0)
    throw NonPositiveDefinite("r0_at: metric not positive definite");
  const Eigen::MatrixXd g_mhalf =
      gs.eigenvectors() * gs.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      gs.eigenvectors().transpose();
  const Eigen::MatrixXd B = g_mhalf * cp.ricci * g_mhalf;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (B + B.transpose()));
  MinRicci out;
  out.value = es.eigenvalues()(0);
  out.direction = g_mhalf * es.eigenvectors().col(0);
  out.direction /= std::sqrt(out.direction.dot(cp.g * out.direction));
  return out;
}

class NonBlockDiagonal : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Second fundamental form and mean curvature of the coordinate slice
// {x_normal = const} with respect to N = d_normal/|d_normal|, with the sign
// convention A(X,Y) = <nabla_X N, Y>, H = tr_slice A. Requires the metric to
// be block diagonal between the normal coordinate and the rest.
struct SliceGeometry {
  Eigen::MatrixXd A;        // (n-1)x(n-1), slice coordinates (normal removed)
  double H = 0.0;
  Eigen::VectorXd N;        // ambient components
  Eigen::MatrixXd g_slice;  // induced metric
  std::vector<int> tangent_index;  // ambient index of each slice coordinate
};

inline SliceGeometry slice_geometry(const ChartMetric& metric,
                                    std::span<const double> point, int normal,
                                    double block_tol = 1e-12) {
  const int n = metric.dim();
  const MetricJets mj = eval_metric_jets(metric, point);
  const double scale = mj.g.cwiseAbs().maxCoeff();
  for (int j = 0; j < n; ++j) {
    if (j == normal) continue;
    double offblock = std::abs(mj.g(normal, j));
    for (int r = 0; r < n; ++r) offblock = std::max(offblock, std::abs(mj.d1(normal, j, r)));
    if (offblock > block_tol * std::max(1.0, scale))
      throw NonBlockDiagonal("slice_geometry: metric not block diagonal in the normal");
  }

  SliceGeometry out;
  const double gnn = mj.g(normal, normal);
  const double lambda = 1.0 / std::sqrt(gnn);
  out.N = Eigen::VectorXd::Zero(n);
  out.N[normal] = lambda;

  out.tangent_index.reserve(static_cast<size_t>(n - 1));
  for (int i = 0; i < n; ++i)
    if (i != normal) out.tangent_index.push_back(i);

  out.A.resize(n - 1, n - 1);
  out.g_slice.resize(n - 1, n - 1);
  for (int a = 0; a < n - 1; ++a) {
    for (int b = 0; b < n - 1; ++b) {
      const int i = out.tangent_index[static_cast<size_t>(a)];
      const int j = out.tangent_index[static_cast<size_t>(b)];
      // A_ij = <nabla_i N, j> = lambda * Gamma_{j,i n} = lambda/2 * d_n g_ij
      out.A(a, b) = 0.5 * lambda * mj.d1(i, j, normal);
      out.g_slice(a, b) = mj.g(i, j);
    }
  }
  out.H = (out.g_slice.ldlt().solve(out.A)).trace();
  return out;
}

// Residual of the traced Gauss equation on a coordinate slice:
//   Ric_slice(e,e) = Ric_M(e,e) - R_M(N,e,e,N) + H A(e,e) - A^2(e,e),
// with the left side computed independently by running the curvature engine
// on the induced slice metric. `e` is given in ambient components, tangent
// to the slice and g-unit.
inline double gauss_residual(const ChartMetric& metric, std::span<const double> point,
                             int normal, const Eigen::VectorXd& e,
                             double block_tol = 1e-12) {
  const int n = metric.dim();
  if (std::abs(e[normal]) > 1e-12)
    throw std::invalid_argument("gauss_residual: e must be tangent to the slice");

  const SliceGeometry sg = slice_geometry(metric, point, normal, block_tol);
  const CurvaturePoint cp = curvature_at(metric, point);

  Eigen::VectorXd e_slice(n - 1);
  std::vector<double> sub_point;
  sub_point.reserve(static_cast<size_t>(n - 1));
  for (int a = 0; a < n - 1; ++a) {
    e_slice[a] = e[sg.tangent_index[static_cast<size_t>(a)]];
    sub_point.push_back(point[static_cast<size_t>(sg.tangent_index[static_cast<size_t>(a)])]);
  }

  const ChartMetric induced = metric.restrict_slice(normal, point[static_cast<size_t>(normal)]);
  const CurvaturePoint cps = curvature_at(induced, sub_point);
  const double lhs = cps.ric(e_slice, e_slice);

  const double a_ee = e_slice.dot(sg.A * e_slice);
  const Eigen::MatrixXd a_sq = sg.A * sg.g_slice.ldlt().solve(sg.A);
  const double a2_ee = e_slice.dot(a_sq * e_slice);
  const double rhs = cp.ric(e, e) - cp.riemann(sg.N, e, e, sg.N) + sg.H * a_ee - a2_ee;
  return std::abs(lhs - rhs);
}

// Coordinate vectors of the given indices normalized to g-unit length.
// Orthonormal whenever the metric is diagonal across those coordinates.
inline Eigen::MatrixXd normalized_coordinate_frame(const CurvaturePoint& cp,
                                                   const std::vector<int>& indices) {
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(cp.dim, static_cast<int>(indices.size()));
  for (size_t l = 0; l < indices.size(); ++l)
    V(indices[l], static_cast<int>(l)) = 1.0 / std::sqrt(cp.g(indices[l], indices[l]));
  return V;
}

// Diagnostics used by self tests: worst violation of the index symmetries
// and of the first Bianchi identity, relative to the largest component.
struct TensorChecks {
  double symmetry = 0.0;
  double bianchi = 0.0;
};

inline TensorChecks tensor_symmetry_checks(const CurvaturePoint& cp) {
  const int n = cp.dim;
  double scale = 1e-300;
  for (double v : cp.riem) scale = std::max(scale, std::abs(v));
  scale = std::max(scale, 1.0);
  TensorChecks out;
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) {
          const double v = cp.riemann(p, q, r, s);
          out.symmetry = std::max(out.symmetry, std::abs(v + cp.riemann(q, p, r, s)));
          out.symmetry = std::max(out.symmetry, std::abs(v + cp.riemann(p, q, s, r)));
          out.symmetry = std::max(out.symmetry, std::abs(v - cp.riemann(r, s, p, q)));
          const double bianchi =
              v + cp.riemann(p, r, s, q) + cp.riemann(p, s, q, r);
          out.bianchi = std::max(out.bianchi, std::abs(bianchi));
        }
  out.symmetry /= scale;
  out.bianchi /= scale;
  return out;
}

}  // namespace icurv::geom
