#pragma once

// Nystrom discretization of the logarithmic layer potentials on a smooth
// closed curve: single layer with spectrally accurate log-splitting product
// quadrature, the adjoint double-layer (Neumann-Poincare) operator with its
// curvature diagonal, the energy inner product induced by -S, and the
// symmetrized eigensolve of the Neumann-Poincare operator on mean-zero
// densities.

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <numeric>
#include <vector>

#include "psense/errors.hpp"
#include "psense/geometry.hpp"

namespace psense {

using Complex = std::complex<double>;

namespace detail {

inline Eigen::VectorXcd apply_real(const Eigen::MatrixXd& m, const Eigen::VectorXcd& v) {
  Eigen::VectorXcd out(m.rows());
  out.real() = m * v.real();
  out.imag() = m * v.imag();
  return out;
}

}  // namespace detail

// Values-to-values matrix of S[phi](x) = (1/2pi) \int log|x-y| phi(y) ds(y).
// The kernel is split as log|x(t)-x(s)| = 1/2 log(4 sin^2((t-s)/2)) + smooth,
// and the singular factor is integrated with the exact product rule for
// trigonometric interpolants, so the rule converges spectrally on analytic
// curves.
inline Eigen::MatrixXd single_layer_matrix(const BoundaryCurve& curve) {
  const int n = curve.n();
  check_node_count(n);
  const int half = n / 2;
  const double h = curve.param_step();

  // product-quadrature weights for log(4 sin^2((t_i - t_j)/2))
  Eigen::VectorXd logw(n);
  for (int k = 0; k < n; ++k) {
    double r = 0.0;
    for (int m = 1; m < half; ++m) r += std::cos(m * k * h) / m;
    logw[k] = -two_pi / half * r - std::numbers::pi / (half * half) * (k % 2 == 0 ? 1.0 : -1.0);
  }

  const double inv4pi = 1.0 / (4.0 * std::numbers::pi);
  Eigen::MatrixXd s(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double val;
      if (i == j) {
        val = inv4pi * logw[0] + h * 2.0 * inv4pi * std::log(curve.speed[i]);
      } else {
        const double d2 = (curve.nodes.col(i) - curve.nodes.col(j)).squaredNorm();
        const double sn = std::sin(0.5 * h * (i - j));
        val = inv4pi * logw[std::abs(i - j)] + h * inv4pi * std::log(d2 / (4.0 * sn * sn));
      }
      s(i, j) = val * curve.speed[j];
    }
  }
  return s;
}

// Adjoint double-layer operator K*[phi](x) = (1/2pi) \int <x-y, nu_x>/|x-y|^2
// phi(y) ds(y). The kernel extends continuously to the diagonal with value
// kappa(x)/(4pi), so the plain trapezoid rule applies.
inline Eigen::MatrixXd np_matrix(const BoundaryCurve& curve) {
  const int n = curve.n();
  check_node_count(n);
  const double h = curve.param_step();
  const double inv2pi = 1.0 / two_pi;
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double kernel;
      if (i == j) {
        kernel = 0.5 * curve.curvature[i] * inv2pi;
      } else {
        const Eigen::Vector2d d = curve.nodes.col(i) - curve.nodes.col(j);
        kernel = inv2pi * d.dot(curve.normals.col(i)) / d.squaredNorm();
      }
      k(i, j) = h * kernel * curve.speed[j];
    }
  }
  return k;
}

// Gram matrix of the energy product (phi,psi) = -(phi, S[psi])_{L^2}; it is
// symmetric by construction and positive definite on mean-zero densities.
inline Eigen::MatrixXd hstar_gram(const BoundaryCurve& curve, const Eigen::MatrixXd& s) {
  Eigen::MatrixXd g = -(curve.arclength_weights().asDiagonal() * s);
  return 0.5 * (g + g.transpose());
}

inline Eigen::MatrixXd hstar_gram(const BoundaryCurve& curve) {
  return hstar_gram(curve, single_layer_matrix(curve));
}

// Spectral differentiation in the curve parameter, mapped to arclength:
// (Dt phi)_i approximates d(phi)/ds at node i.
inline Eigen::MatrixXd tangent_derivative_matrix(const BoundaryCurve& curve) {
  const int n = curve.n();
  const double h = curve.param_step();
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        d(i, j) = 0.0;
      } else {
        const double sign = ((i - j) % 2 == 0) ? 1.0 : -1.0;
        d(i, j) = 0.5 * sign / std::tan(0.5 * h * (i - j));
      }
    }
  }
  return curve.speed.cwiseInverse().asDiagonal() * d;
}

// Eigenvalues (descending modulus) and energy-orthonormal eigendensities of
// K* restricted to mean-zero densities.
struct NPSpectrum {
  Eigen::VectorXd eigenvalues;  // J entries, |lambda| descending
  Eigen::MatrixXd densities;    // n x J, energy-orthonormal, mean-zero
  Eigen::MatrixXd gram;         // energy Gram matrix on the curve
  Eigen::VectorXd weights;      // arclength weights
  BoundaryCurve curve;

  int count() const { return static_cast<int>(eigenvalues.size()); }
};

// Precomputed operator set for one curve. Immutable after construction and
// safe to share between threads.
struct NpWorkspace {
  BoundaryCurve curve;
  Eigen::VectorXd weights;
  Eigen::MatrixXd single_layer;
  Eigen::MatrixXd np;             // K*
  Eigen::MatrixXd np_transpose;   // K = W^{-1} K*^T W, transpose in the arclength pairing
  Eigen::MatrixXd gram;
  Eigen::MatrixXd dt;             // tangential derivative
  Eigen::MatrixXd meanzero_basis; // n x (n-1), orthonormal, weights^T Q = 0
  Eigen::VectorXd meanzero_eigs;  // all n-1 mean-zero eigenvalues, ascending
  Eigen::MatrixXd meanzero_densities;  // n x (n-1), energy-orthonormal

  int n() const { return curve.n(); }

  // distance from lambda to the discrete spectrum (mean-zero part plus the
  // exterior-equilibrium eigenvalue 1/2)
  double spectral_distance(Complex lambda) const {
    double d = std::abs(lambda - Complex(0.5, 0.0));
    for (int i = 0; i < meanzero_eigs.size(); ++i)
      d = std::min(d, std::abs(lambda - Complex(meanzero_eigs[i], 0.0)));
    return d;
  }
};

inline NpWorkspace make_workspace(const BoundaryCurve& curve) {
  NpWorkspace ws;
  ws.curve = curve;
  ws.weights = curve.arclength_weights();
  ws.single_layer = single_layer_matrix(curve);
  ws.np = np_matrix(curve);
  ws.np_transpose = ws.weights.cwiseInverse().asDiagonal() *
                    ws.np.transpose() * ws.weights.asDiagonal();
  ws.gram = hstar_gram(curve, ws.single_layer);
  ws.dt = tangent_derivative_matrix(curve);

  const int n = curve.n();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(ws.weights);
  Eigen::MatrixXd qfull = qr.householderQ();
  ws.meanzero_basis = qfull.rightCols(n - 1);

  Eigen::MatrixXd gk = ws.gram * ws.np;
  Eigen::MatrixXd a = ws.meanzero_basis.transpose() * gk * ws.meanzero_basis;
  a = 0.5 * (a + a.transpose()).eval();
  Eigen::MatrixXd b = ws.meanzero_basis.transpose() * ws.gram * ws.meanzero_basis;
  b = 0.5 * (b + b.transpose()).eval();

  Eigen::LLT<Eigen::MatrixXd> llt(b);
  if (llt.info() != Eigen::Success)
    throw conditioning_error(
        "energy Gram matrix is not positive definite on mean-zero densities; "
        "the curve is likely ill-scaled, rescale it closer to unit size");

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, b);
  if (es.info() != Eigen::Success)
    throw numerical_error("symmetric eigensolver failed on the projected operator");
  ws.meanzero_eigs = es.eigenvalues();
  ws.meanzero_densities = ws.meanzero_basis * es.eigenvectors();
  return ws;
}

// Top-J part of the mean-zero spectrum, |lambda| descending; between the two
// members of a +/- pair the negative eigenvalue comes first.
inline NPSpectrum np_spectrum(const NpWorkspace& ws, int j_count) {
  const int n = ws.n();
  if (j_count < 1 || j_count > n / 2)
    throw std::invalid_argument("requested mode count must lie in [1, n/2]");

  const int total = static_cast<int>(ws.meanzero_eigs.size());
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd& ev = ws.meanzero_eigs;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(ev[a]), mb = std::abs(ev[b]);
    if (std::abs(ma - mb) > 1e-12 * std::max(1.0, std::max(ma, mb))) return ma > mb;
    return ev[a] < ev[b];
  });

  NPSpectrum sp;
  sp.curve = ws.curve;
  sp.gram = ws.gram;
  sp.weights = ws.weights;
  sp.eigenvalues.resize(j_count);
  sp.densities.resize(n, j_count);
  for (int k = 0; k < j_count; ++k) {
    const int idx = order[k];
    sp.eigenvalues[k] = ev[idx];
    Eigen::VectorXd phi = ws.meanzero_densities.col(idx);
    // deterministic sign: largest-magnitude node value is positive
    int imax = 0;
    phi.cwiseAbs().maxCoeff(&imax);
    if (phi[imax] < 0.0) phi = -phi;
    sp.densities.col(k) = phi;
  }
  return sp;
}

inline NPSpectrum np_spectrum(const BoundaryCurve& curve, int j_count) {
  return np_spectrum(make_workspace(curve), j_count);
}

// Cached factorization of (lambda I - K*) or (lambda I - K) for one contrast
// value; reuse it when solving against many right-hand sides.
struct Resolvent {
  Complex lambda;
  bool adjoint = true;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu;

  Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const { return lu.solve(rhs); }
  Eigen::VectorXcd solve(const Eigen::VectorXd& rhs) const {
    return lu.solve(rhs.cast<Complex>().eval());
  }
};

inline Resolvent make_resolvent(const NpWorkspace& ws, Complex lambda, bool adjoint = true) {
  const double dist = ws.spectral_distance(lambda);
  if (dist < 1e-12) throw resonance_proximity_error(lambda, dist);
  const Eigen::MatrixXd& op = adjoint ? ws.np : ws.np_transpose;
  Eigen::MatrixXcd m = (-op).cast<Complex>();
  m.diagonal().array() += lambda;
  Resolvent r;
  r.lambda = lambda;
  r.adjoint = adjoint;
  r.lu.compute(m);
  return r;
}

// phi = (lambda I - K*)^{-1} rhs
inline Eigen::VectorXcd solve_second_kind(const NpWorkspace& ws, Complex lambda,
                                          const Eigen::VectorXcd& rhs) {
  if (rhs.size() != ws.n()) throw std::invalid_argument("rhs length does not match curve");
  return make_resolvent(ws, lambda, true).solve(rhs);
}

// psi = (lambda I - K)^{-1} rhs, K the transpose of K* in the arclength pairing
inline Eigen::VectorXcd solve_nonadjoint(const NpWorkspace& ws, Complex lambda,
                                         const Eigen::VectorXcd& rhs) {
  if (rhs.size() != ws.n()) throw std::invalid_argument("rhs length does not match curve");
  return make_resolvent(ws, lambda, false).solve(rhs);
}

// Off-boundary potential S[phi](x) by the trapezoid rule; targets closer to
// the curve than the local node spacing are refused since the quadrature
// loses accuracy there.
inline Eigen::VectorXcd eval_single_layer(const BoundaryCurve& curve,
                                          const Eigen::VectorXcd& density,
                                          const Eigen::Matrix2Xd& targets) {
  if (density.size() != curve.n())
    throw std::invalid_argument("density length does not match curve");
  const Eigen::VectorXd w = curve.arclength_weights();
  const double inv2pi = 1.0 / two_pi;
  Eigen::VectorXcd out(targets.cols());
  for (int t = 0; t < targets.cols(); ++t) {
    double dmin = std::numeric_limits<double>::infinity();
    int jmin = 0;
    for (int j = 0; j < curve.n(); ++j) {
      const double d = (targets.col(t) - curve.nodes.col(j)).norm();
      if (d < dmin) {
        dmin = d;
        jmin = j;
      }
    }
    if (dmin < curve.speed[jmin] * curve.param_step())
      throw regime_error("evaluation target is closer to the boundary than the local "
                         "node spacing; refine the curve or move the target");
    Complex acc(0.0, 0.0);
    for (int j = 0; j < curve.n(); ++j) {
      const double d = (targets.col(t) - curve.nodes.col(j)).norm();
      acc += inv2pi * std::log(d) * w[j] * density[j];
    }
    out[t] = acc;
  }
  return out;
}

// Normal derivative of the double layer via the tangential form
// dnu D[psi] = d/ds S[d psi/ds]; spectrally accurate together with S.
inline Eigen::VectorXcd dn_double_layer(const NpWorkspace& ws, const Eigen::VectorXcd& psi) {
  Eigen::VectorXcd t1 = detail::apply_real(ws.dt, psi);
  Eigen::VectorXcd t2 = detail::apply_real(ws.single_layer, t1);
  return detail::apply_real(ws.dt, t2);
}

}  // namespace psense
