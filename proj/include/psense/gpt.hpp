#pragma once

// Contracted polarization tensors built from the harmonic family
// P_m(x) = (x_1 + i x_2)^m taken about the curve centroid: the 2x2 blocks
//   M_{m,n} = [ cc cs ; sc ss ],
//   M^{cc}_{m,n} = int Re{P_n} (lambda I - K*)^{-1}[d Re{P_m}/dnu] ds, etc.,
// plus the closed-form ellipse tensor and harmonic block combinations.

#include <Eigen/Dense>
#include <map>
#include <utility>

#include "psense/bem.hpp"

namespace psense {

// d(Re P_m)/dnu and d(Im P_m)/dnu on the curve, polynomials taken about
// `origin`; grad P_m = m z^{m-1} (1, i).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> harmonic_flux(const BoundaryCurve& curve,
                                                                 const Eigen::Vector2d& origin,
                                                                 int m) {
  if (m < 1) throw std::invalid_argument("harmonic order must be at least 1");
  const int n = curve.n();
  Eigen::VectorXd re(n), im(n);
  for (int i = 0; i < n; ++i) {
    const Complex z(curve.nodes(0, i) - origin[0], curve.nodes(1, i) - origin[1]);
    const Complex nu(curve.normals(0, i), curve.normals(1, i));
    const Complex g = double(m) * std::pow(z, m - 1) * nu;
    re[i] = g.real();
    im[i] = g.imag();
  }
  return {re, im};
}

inline std::pair<Eigen::VectorXd, Eigen::VectorXd> harmonic_trace(const BoundaryCurve& curve,
                                                                  const Eigen::Vector2d& origin,
                                                                  int m) {
  if (m < 1) throw std::invalid_argument("harmonic order must be at least 1");
  const int n = curve.n();
  Eigen::VectorXd re(n), im(n);
  for (int i = 0; i < n; ++i) {
    const Complex z(curve.nodes(0, i) - origin[0], curve.nodes(1, i) - origin[1]);
    const Complex p = std::pow(z, m);
    re[i] = p.real();
    im[i] = p.imag();
  }
  return {re, im};
}

struct CgptSet {
  int order = 0;                     // blocks for all m,n >= 1 with m+n <= order
  Complex contrast{1.0, 0.0};        // lambda the blocks were computed at
  Eigen::Vector2d center{0.0, 0.0};  // polynomials are taken about this point
  std::map<std::pair<int, int>, Eigen::Matrix2cd> blocks;

  bool has(int m, int n) const { return blocks.count({m, n}) > 0; }
  const Eigen::Matrix2cd& block(int m, int n) const {
    auto it = blocks.find({m, n});
    if (it == blocks.end())
      throw std::invalid_argument("tensor block (" + std::to_string(m) + "," +
                                  std::to_string(n) + ") is not present");
    return it->second;
  }
};

namespace detail {

inline Eigen::Matrix2cd cgpt_block_impl(const NpWorkspace& ws, const Resolvent& rv, int m, int n) {
  const auto [fre, fim] = harmonic_flux(ws.curve, ws.curve.center, m);
  const auto [tre, tim] = harmonic_trace(ws.curve, ws.curve.center, n);
  const Eigen::VectorXcd pre = rv.solve(fre);
  const Eigen::VectorXcd pim = rv.solve(fim);
  const Eigen::VectorXd wre_t = ws.weights.cwiseProduct(tre);
  const Eigen::VectorXd wim_t = ws.weights.cwiseProduct(tim);
  Eigen::Matrix2cd block;
  block(0, 0) = wre_t.cast<Complex>().dot(pre);  // cc
  block(0, 1) = wim_t.cast<Complex>().dot(pre);  // cs
  block(1, 0) = wre_t.cast<Complex>().dot(pim);  // sc
  block(1, 1) = wim_t.cast<Complex>().dot(pim);  // ss
  return block;
}

}  // namespace detail

// Single tensor block; the row index refers to the Re/Im part of P_m driving
// the solve, the column index to the part of P_n tested against.
inline Eigen::Matrix2cd cgpt_block(const NpWorkspace& ws, Complex lambda, int m, int n) {
  if (m < 1 || n < 1) throw std::invalid_argument("tensor indices must be at least 1");
  const Resolvent rv = make_resolvent(ws, lambda, true);
  return detail::cgpt_block_impl(ws, rv, m, n);
}

// All blocks with m+n <= order using one factorization of (lambda I - K*).
inline CgptSet cgpt_set(const NpWorkspace& ws, Complex lambda, int order) {
  if (order < 2) throw std::invalid_argument("tensor order must be at least 2");
  const Resolvent rv = make_resolvent(ws, lambda, true);
  CgptSet set;
  set.order = order;
  set.contrast = lambda;
  set.center = ws.curve.center;

  // one pair of solves per m, reused across all n
  std::map<int, std::pair<Eigen::VectorXcd, Eigen::VectorXcd>> solved;
  for (int m = 1; m <= order - 1; ++m) {
    const auto [fre, fim] = harmonic_flux(ws.curve, ws.curve.center, m);
    solved[m] = {rv.solve(fre), rv.solve(fim)};
  }
  for (int m = 1; m <= order - 1; ++m) {
    for (int n = 1; m + n <= order; ++n) {
      const auto [tre, tim] = harmonic_trace(ws.curve, ws.curve.center, n);
      const Eigen::VectorXd wre_t = ws.weights.cwiseProduct(tre);
      const Eigen::VectorXd wim_t = ws.weights.cwiseProduct(tim);
      Eigen::Matrix2cd block;
      block(0, 0) = wre_t.cast<Complex>().dot(solved[m].first);
      block(0, 1) = wim_t.cast<Complex>().dot(solved[m].first);
      block(1, 0) = wre_t.cast<Complex>().dot(solved[m].second);
      block(1, 1) = wim_t.cast<Complex>().dot(solved[m].second);
      set.blocks[{m, n}] = block;
    }
  }
  return set;
}

// First-order polarization tensor of the ellipse with semi-axes a (x) and b
// (y): diag(pi a b/(lambda - q), pi a b/(lambda + q)) with q = (a-b)/(2(a+b)).
inline Eigen::Matrix2cd ellipse_pt_analytic(Complex lambda, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("ellipse semi-axes must be positive");
  const double q = 0.5 * (a - b) / (a + b);
  if (std::abs(lambda - q) < 1e-12 || std::abs(lambda + q) < 1e-12)
    throw resonance_proximity_error(lambda, std::min(std::abs(lambda - q), std::abs(lambda + q)));
  const double pab = std::numbers::pi * a * b;
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  m(0, 0) = pab / (lambda - q);
  m(1, 1) = pab / (lambda + q);
  return m;
}

// Harmonic block combination (Mcc - Mss) + i (Mcs - Msc).
inline Complex harmonic_sum_n1(const CgptSet& set, int m, int n) {
  const Eigen::Matrix2cd& b = set.block(m, n);
  return (b(0, 0) - b(1, 1)) + Complex(0.0, 1.0) * (b(0, 1) - b(1, 0));
}

}  // namespace psense
