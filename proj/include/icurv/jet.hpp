#pragma once

#include <cassert>
#include <cmath>
#include <utility>
#include <vector>

namespace icurv {

// Second-order forward jet: value, gradient and Hessian of a scalar quantity
// with respect to a fixed list of variables. The Hessian is stored as a
// packed upper triangle, so symmetry is exact by construction.
//
// The arithmetic here is pure (no domain checks, no throwing); callers that
// evaluate user expressions validate operands and the finiteness of results.
class Jet2 {
public:
  Jet2() = default;
  explicit Jet2(int nvars)
      : n_(nvars), grad_(nvars, 0.0), hess_(packed_size(nvars), 0.0) {}

  static Jet2 constant(double value, int nvars) {
    Jet2 j(nvars);
    j.val_ = value;
    return j;
  }

  static Jet2 variable(double value, int index, int nvars) {
    Jet2 j(nvars);
    j.val_ = value;
    j.grad_[static_cast<size_t>(index)] = 1.0;
    return j;
  }

  int nvars() const { return n_; }
  double value() const { return val_; }
  double grad(int i) const { return grad_[static_cast<size_t>(i)]; }
  double hess(int i, int j) const { return hess_[pidx(i, j)]; }

  double& value() { return val_; }
  double& grad(int i) { return grad_[static_cast<size_t>(i)]; }
  double& hess(int i, int j) { return hess_[pidx(i, j)]; }

  const std::vector<double>& grad_data() const { return grad_; }
  const std::vector<double>& hess_data() const { return hess_; }

  bool all_finite() const {
    if (!std::isfinite(val_)) return false;
    for (double g : grad_)
      if (!std::isfinite(g)) return false;
    for (double h : hess_)
      if (!std::isfinite(h)) return false;
    return true;
  }

  static size_t packed_size(int n) {
    return static_cast<size_t>(n) * static_cast<size_t>(n + 1) / 2;
  }

private:
  size_t pidx(int i, int j) const {
    if (i > j) std::swap(i, j);
    return static_cast<size_t>(i) * static_cast<size_t>(n_) -
           static_cast<size_t>(i) * static_cast<size_t>(i + 1) / 2 +
           static_cast<size_t>(j);
  }

  int n_ = 0;
  double val_ = 0.0;
  std::vector<double> grad_;
  std::vector<double> hess_;
};

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
  assert(a.nvars() == b.nvars());
  Jet2 r(a.nvars());
  r.value() = a.value() + b.value();
  for (int i = 0; i < a.nvars(); ++i) r.grad(i) = a.grad(i) + b.grad(i);
  for (int i = 0; i < a.nvars(); ++i)
    for (int j = i; j < a.nvars(); ++j) r.hess(i, j) = a.hess(i, j) + b.hess(i, j);
  return r;
}

inline Jet2 operator-(const Jet2& a, const Jet2& b) {
  assert(a.nvars() == b.nvars());
  Jet2 r(a.nvars());
  r.value() = a.value() - b.value();
  for (int i = 0; i < a.nvars(); ++i) r.grad(i) = a.grad(i) - b.grad(i);
  for (int i = 0; i < a.nvars(); ++i)
    for (int j = i; j < a.nvars(); ++j) r.hess(i, j) = a.hess(i, j) - b.hess(i, j);
  return r;
}

inline Jet2 operator-(const Jet2& a) {
  Jet2 r(a.nvars());
  r.value() = -a.value();
  for (int i = 0; i < a.nvars(); ++i) r.grad(i) = -a.grad(i);
  for (int i = 0; i < a.nvars(); ++i)
    for (int j = i; j < a.nvars(); ++j) r.hess(i, j) = -a.hess(i, j);
  return r;
}

// Leibniz rule to second order:
//   (fg)'' = f g'' + g f'' + f' (x) g' + g' (x) f'.
inline Jet2 operator*(const Jet2& a, const Jet2& b) {
  assert(a.nvars() == b.nvars());
  Jet2 r(a.nvars());
  r.value() = a.value() * b.value();
  for (int i = 0; i < a.nvars(); ++i)
    r.grad(i) = a.value() * b.grad(i) + b.value() * a.grad(i);
  for (int i = 0; i < a.nvars(); ++i)
    for (int j = i; j < a.nvars(); ++j)
      r.hess(i, j) = a.value() * b.hess(i, j) + b.value() * a.hess(i, j) +
                     a.grad(i) * b.grad(j) + a.grad(j) * b.grad(i);
  return r;
}

inline Jet2 operator*(double c, const Jet2& a) {
  Jet2 r(a.nvars());
  r.value() = c * a.value();
  for (int i = 0; i < a.nvars(); ++i) r.grad(i) = c * a.grad(i);
  for (int i = 0; i < a.nvars(); ++i)
    for (int j = i; j < a.nvars(); ++j) r.hess(i, j) = c * a.hess(i, j);
  return r;
}

inline Jet2 operator*(const Jet2& a, double c) { return c * a; }

inline Jet2 operator+(const Jet2& a, double c) {
  Jet2 r = a;
  r.value() += c;
  return r;
}

inline Jet2 operator+(double c, const Jet2& a) { return a + c; }
inline Jet2 operator-(const Jet2& a, double c) { return a + (-c); }
inline Jet2 operator-(double c, const Jet2& a) { return (-a) + c; }

// Chain rule for a scalar function applied to a jet:
//   h = phi(u):  dh = phi' du,  d2h = phi' d2u + phi'' du (x) du.
inline Jet2 jet_chain(const Jet2& u, double f0, double f1, double f2) {
  Jet2 r(u.nvars());
  r.value() = f0;
  for (int i = 0; i < u.nvars(); ++i) r.grad(i) = f1 * u.grad(i);
  for (int i = 0; i < u.nvars(); ++i)
    for (int j = i; j < u.nvars(); ++j)
      r.hess(i, j) = f1 * u.hess(i, j) + f2 * u.grad(i) * u.grad(j);
  return r;
}

inline Jet2 jet_reciprocal(const Jet2& u) {
  const double iv = 1.0 / u.value();
  return jet_chain(u, iv, -iv * iv, 2.0 * iv * iv * iv);
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) { return a * jet_reciprocal(b); }
inline Jet2 operator/(const Jet2& a, double c) { return a * (1.0 / c); }
inline Jet2 operator/(double c, const Jet2& b) { return c * jet_reciprocal(b); }

// u^c for a constant exponent. std::pow handles negative bases with integer
// exponents; the 0*inf cases at u = 0 are avoided by dropping terms whose
// coefficient is exactly zero.
inline Jet2 jet_pow_const(const Jet2& u, double c) {
  const double f0 = std::pow(u.value(), c);
  const double c1 = c;
  const double c2 = c * (c - 1.0);
  const double f1 = (c1 == 0.0) ? 0.0 : c1 * std::pow(u.value(), c - 1.0);
  const double f2 = (c2 == 0.0) ? 0.0 : c2 * std::pow(u.value(), c - 2.0);
  return jet_chain(u, f0, f1, f2);
}

inline Jet2 jet_sin(const Jet2& u) {
  const double s = std::sin(u.value()), c = std::cos(u.value());
  return jet_chain(u, s, c, -s);
}
inline Jet2 jet_cos(const Jet2& u) {
  const double s = std::sin(u.value()), c = std::cos(u.value());
  return jet_chain(u, c, -s, -c);
}
inline Jet2 jet_exp(const Jet2& u) {
  const double e = std::exp(u.value());
  return jet_chain(u, e, e, e);
}
inline Jet2 jet_log(const Jet2& u) {
  const double iv = 1.0 / u.value();
  return jet_chain(u, std::log(u.value()), iv, -iv * iv);
}
inline Jet2 jet_sqrt(const Jet2& u) {
  const double s = std::sqrt(u.value());
  return jet_chain(u, s, 0.5 / s, -0.25 / (s * u.value()));
}
inline Jet2 jet_sinh(const Jet2& u) {
  const double s = std::sinh(u.value()), c = std::cosh(u.value());
  return jet_chain(u, s, c, s);
}
inline Jet2 jet_cosh(const Jet2& u) {
  const double s = std::sinh(u.value()), c = std::cosh(u.value());
  return jet_chain(u, c, s, c);
}
inline Jet2 jet_tanh(const Jet2& u) {
  const double t = std::tanh(u.value());
  const double d = 1.0 - t * t;
  return jet_chain(u, t, d, -2.0 * t * d);
}
inline Jet2 jet_coth(const Jet2& u) {
  const double t = 1.0 / std::tanh(u.value());
  const double d = 1.0 - t * t;  // -csch^2
  return jet_chain(u, t, d, -2.0 * t * d);
}

}  // namespace icurv
