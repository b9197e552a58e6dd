#pragma once

// Independent numerical oracles for the test suite. Everything here avoids
// the library's quadrature machinery on purpose: plain adaptive Simpson,
// closed forms, and finite differences.

#include <cmath>
#include <functional>
#include <random>

#include "psense/geometry.hpp"

namespace oracles {

inline double simpson(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double whole, double tol, int depth) {
  const double c = 0.5 * (a + b);
  const double left = simpson(f, a, c);
  const double right = simpson(f, c, b);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, c, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, c, b, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-12) {
  return adaptive_simpson_rec(f, a, b, simpson(f, a, b), tol, 40);
}

// rebuild full curve data from node positions alone, using the exact
// differentiation matrix for trigonometric interpolants; independent of the
// library's analytic jet construction
inline psense::BoundaryCurve curve_from_samples(const Eigen::Matrix2Xd& nodes,
                                                const Eigen::Vector2d& center) {
  const int n = static_cast<int>(nodes.cols());
  const double h = psense::two_pi / n;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const int k = i - j;
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      d(i, j) = 0.5 * sign / std::tan(0.5 * h * k);
    }
  const Eigen::Matrix2Xd dx = (d * nodes.transpose()).transpose();
  const Eigen::Matrix2Xd ddx = (d * dx.transpose()).transpose();

  psense::BoundaryCurve curve;
  curve.nodes = nodes;
  curve.center = center;
  curve.tangents.resize(2, n);
  curve.normals.resize(2, n);
  curve.speed.resize(n);
  curve.curvature.resize(n);
  for (int i = 0; i < n; ++i) {
    const double sp = dx.col(i).norm();
    curve.speed[i] = sp;
    curve.tangents.col(i) = dx.col(i) / sp;
    curve.normals.col(i) << curve.tangents(1, i), -curve.tangents(0, i);
    curve.curvature[i] =
        (dx(0, i) * ddx(1, i) - dx(1, i) * ddx(0, i)) / (sp * sp * sp);
  }
  return curve;
}

// random star-shaped profile with margin away from r = 0
inline psense::FourierRadius random_profile(std::mt19937& rng, int modes, double amplitude) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  psense::FourierRadius profile;
  profile.r0 = 1.0;
  profile.cos_coeffs.resize(modes);
  profile.sin_coeffs.resize(modes);
  double total = 0.0;
  for (int k = 0; k < modes; ++k) {
    profile.cos_coeffs[k] = unit(rng);
    profile.sin_coeffs[k] = unit(rng);
    total += std::abs(profile.cos_coeffs[k]) + std::abs(profile.sin_coeffs[k]);
  }
  if (total > 0.0) {
    profile.cos_coeffs *= amplitude / total;
    profile.sin_coeffs *= amplitude / total;
  }
  return profile;
}

}  // namespace oracles
