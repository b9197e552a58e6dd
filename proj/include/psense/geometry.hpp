#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace psense {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Closed C^1 curve sampled at n equispaced parameter values t_i = 2*pi*i/n.
// All fields are evaluated analytically from the generating parametrization;
// normals point outward and the parametrization is counterclockwise, so the
// signed curvature of a convex curve is positive.
struct BoundaryCurve {
  Eigen::Matrix2Xd nodes;     // x(t_i), 2 x n
  Eigen::Matrix2Xd tangents;  // unit tangent
  Eigen::Matrix2Xd normals;   // outward unit normal
  Eigen::VectorXd speed;      // |x'(t_i)|
  Eigen::VectorXd curvature;  // signed curvature
  Eigen::Vector2d center{0.0, 0.0};

  int n() const { return static_cast<int>(nodes.cols()); }

  double param_step() const { return two_pi / n(); }

  Eigen::VectorXd params() const {
    Eigen::VectorXd t(n());
    for (int i = 0; i < n(); ++i) t[i] = param_step() * i;
    return t;
  }

  // Trapezoid arclength weights w_i = |x'(t_i)| * 2*pi/n.
  Eigen::VectorXd arclength_weights() const { return speed * param_step(); }

  double perimeter() const { return speed.sum() * param_step(); }

  // Enclosed area via the divergence theorem, area = 1/2 * \oint <x,nu> ds.
  double area() const {
    double a = 0.0;
    for (int i = 0; i < n(); ++i)
      a += 0.5 * nodes.col(i).dot(normals.col(i)) * speed[i];
    return a * param_step();
  }

  Eigen::Vector2d area_centroid() const {
    const double a = area();
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (int i = 0; i < n(); ++i) {
      // int_D x_k dA = \oint (x_k^2/2) nu_k ds, k = 1,2
      c[0] += 0.5 * nodes(0, i) * nodes(0, i) * normals(0, i) * speed[i];
      c[1] += 0.5 * nodes(1, i) * nodes(1, i) * normals(1, i) * speed[i];
    }
    return c * param_step() / a;
  }

  double diameter() const {
    // max pairwise node distance; adequate for regime checks
    double d = 0.0;
    for (int i = 0; i < n(); ++i)
      for (int j = i + 1; j < n(); ++j)
        d = std::max(d, (nodes.col(i) - nodes.col(j)).norm());
    return d;
  }
};

inline void check_node_count(int n) {
  if (n < 32 || n % 2 != 0)
    throw std::invalid_argument("node count must be even and at least 32, got " +
                                std::to_string(n));
}

// Radial profile r(t) = r0 + sum_k (a_k cos kt + b_k sin kt).
struct FourierRadius {
  double r0 = 1.0;
  Eigen::VectorXd cos_coeffs;  // a_1..a_K
  Eigen::VectorXd sin_coeffs;  // b_1..b_K

  int modes() const {
    return static_cast<int>(std::max(cos_coeffs.size(), sin_coeffs.size()));
  }
  double a(int k) const { return k <= cos_coeffs.size() ? cos_coeffs[k - 1] : 0.0; }
  double b(int k) const { return k <= sin_coeffs.size() ? sin_coeffs[k - 1] : 0.0; }

  double radius(double t) const {
    double r = r0;
    for (int k = 1; k <= modes(); ++k)
      r += a(k) * std::cos(k * t) + b(k) * std::sin(k * t);
    return r;
  }
  double dradius(double t) const {
    double r = 0.0;
    for (int k = 1; k <= modes(); ++k)
      r += k * (-a(k) * std::sin(k * t) + b(k) * std::cos(k * t));
    return r;
  }
  double ddradius(double t) const {
    double r = 0.0;
    for (int k = 1; k <= modes(); ++k)
      r -= k * k * (a(k) * std::cos(k * t) + b(k) * std::sin(k * t));
    return r;
  }
};

namespace detail {

// Assemble curve fields from x(t), x'(t), x''(t) at the nodes.
inline BoundaryCurve curve_from_jets(const Eigen::Matrix2Xd& x, const Eigen::Matrix2Xd& dx,
                                     const Eigen::Matrix2Xd& ddx, const Eigen::Vector2d& center) {
  const int n = static_cast<int>(x.cols());
  BoundaryCurve c;
  c.nodes = x;
  c.tangents.resize(2, n);
  c.normals.resize(2, n);
  c.speed.resize(n);
  c.curvature.resize(n);
  c.center = center;
  for (int i = 0; i < n; ++i) {
    const double sp = dx.col(i).norm();
    if (!(sp > 0.0))
      throw std::invalid_argument("degenerate parametrization: |x'(t)| = 0 at node " +
                                  std::to_string(i));
    c.speed[i] = sp;
    c.tangents.col(i) = dx.col(i) / sp;
    // outward normal of a counterclockwise curve: rotate tangent by -pi/2
    c.normals(0, i) = c.tangents(1, i);
    c.normals(1, i) = -c.tangents(0, i);
    c.curvature[i] =
        (dx(0, i) * ddx(1, i) - dx(1, i) * ddx(0, i)) / (sp * sp * sp);
  }
  return c;
}

}  // namespace detail

inline BoundaryCurve make_ellipse(double a, double b, const Eigen::Vector2d& center, int n) {
  check_node_count(n);
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("ellipse semi-axes must be positive");
  Eigen::Matrix2Xd x(2, n), dx(2, n), ddx(2, n);
  for (int i = 0; i < n; ++i) {
    const double t = two_pi * i / n;
    x.col(i) << center[0] + a * std::cos(t), center[1] + b * std::sin(t);
    dx.col(i) << -a * std::sin(t), b * std::cos(t);
    ddx.col(i) << -a * std::cos(t), -b * std::sin(t);
  }
  return detail::curve_from_jets(x, dx, ddx, center);
}

inline BoundaryCurve make_fourier_shape(const FourierRadius& profile,
                                        const Eigen::Vector2d& center, int n) {
  check_node_count(n);
  // positivity of the radial profile, probed well below the node spacing
  const int probes = 8 * std::max(n, 64 * (profile.modes() + 1));
  for (int i = 0; i < probes; ++i) {
    const double t = two_pi * i / probes;
    if (!(profile.radius(t) > 0.0))
      throw std::invalid_argument("radial profile is non-positive at t = " + std::to_string(t));
  }
  Eigen::Matrix2Xd x(2, n), dx(2, n), ddx(2, n);
  for (int i = 0; i < n; ++i) {
    const double t = two_pi * i / n;
    const double r = profile.radius(t), r1 = profile.dradius(t), r2 = profile.ddradius(t);
    const double ct = std::cos(t), st = std::sin(t);
    x.col(i) << center[0] + r * ct, center[1] + r * st;
    dx.col(i) << r1 * ct - r * st, r1 * st + r * ct;
    ddx.col(i) << (r2 - r) * ct - 2.0 * r1 * st, (r2 - r) * st + 2.0 * r1 * ct;
  }
  return detail::curve_from_jets(x, dx, ddx, center);
}

// Convex polygon with every corner replaced by a tangent circular arc of
// radius rho. The result is C^1 (curvature jumps between 0 and 1/rho) and is
// parametrized by scaled arclength, so speed is constant.
inline BoundaryCurve make_rounded_polygon(const std::vector<Eigen::Vector2d>& vertices,
                                          double rho, int n) {
  check_node_count(n);
  const int m = static_cast<int>(vertices.size());
  if (m < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
  if (!(rho > 0.0)) throw std::invalid_argument("rounding radius must be positive");

  // enforce counterclockwise orientation
  std::vector<Eigen::Vector2d> v = vertices;
  double twice_area = 0.0;
  for (int i = 0; i < m; ++i) {
    const auto& p = v[i];
    const auto& q = v[(i + 1) % m];
    twice_area += p[0] * q[1] - q[0] * p[1];
  }
  if (twice_area < 0.0) std::reverse(v.begin(), v.end());

  std::vector<Eigen::Vector2d> dir(m);   // unit edge directions v_i -> v_{i+1}
  std::vector<double> elen(m);
  for (int i = 0; i < m; ++i) {
    Eigen::Vector2d e = v[(i + 1) % m] - v[i];
    elen[i] = e.norm();
    if (!(elen[i] > 0.0)) throw std::invalid_argument("repeated polygon vertex");
    dir[i] = e / elen[i];
  }
  std::vector<double> turn(m), tang(m);  // exterior turning angle, tangent offset
  for (int i = 0; i < m; ++i) {
    const Eigen::Vector2d& a = dir[(i + m - 1) % m];
    const Eigen::Vector2d& b = dir[i];
    const double cross = a[0] * b[1] - a[1] * b[0];
    const double ang = std::atan2(cross, a.dot(b));
    if (!(ang > 0.0))
      throw std::invalid_argument("polygon is not strictly convex at vertex " + std::to_string(i));
    turn[i] = ang;
    tang[i] = rho * std::tan(0.5 * ang);
  }
  for (int i = 0; i < m; ++i) {
    if (tang[i] + tang[(i + 1) % m] >= elen[i])
      throw std::invalid_argument("rounding radius " + std::to_string(rho) +
                                  " makes adjacent arcs overlap on edge " + std::to_string(i));
  }

  // pieces in order: straight along edge i, then arc around vertex i+1
  struct Piece {
    bool arc;
    double len;
    Eigen::Vector2d p0, d;      // straight: start point and direction
    Eigen::Vector2d c;          // arc: center
    double phi0, dphi;          // arc: start angle and (positive) sweep
  };
  std::vector<Piece> pieces;
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const int j = (i + 1) % m;
    Piece s{};
    s.arc = false;
    s.p0 = v[i] + tang[i] * dir[i];
    s.d = dir[i];
    s.len = elen[i] - tang[i] - tang[j];
    pieces.push_back(s);
    total += s.len;

    Piece a{};
    a.arc = true;
    const Eigen::Vector2d tp = v[j] - tang[j] * dir[i];       // tangent point on edge i
    const Eigen::Vector2d inward(-dir[i][1], dir[i][0]);      // interior is to the left
    a.c = tp + rho * inward;
    a.phi0 = std::atan2(tp[1] - a.c[1], tp[0] - a.c[0]);
    a.dphi = turn[j];
    a.len = rho * turn[j];
    pieces.push_back(a);
    total += a.len;
  }

  Eigen::Matrix2Xd x(2, n), tan_(2, n), nor(2, n);
  Eigen::VectorXd speed(n), curv(n);
  const double sp = total / two_pi;
  for (int i = 0; i < n; ++i) {
    double s = total * i / n;
    std::size_t k = 0;
    while (k + 1 < pieces.size() && s > pieces[k].len) {
      s -= pieces[k].len;
      ++k;
    }
    const Piece& pc = pieces[k];
    if (!pc.arc) {
      x.col(i) = pc.p0 + s * pc.d;
      tan_.col(i) = pc.d;
      curv[i] = 0.0;
    } else {
      const double phi = pc.phi0 + s / rho;
      x.col(i) << pc.c[0] + rho * std::cos(phi), pc.c[1] + rho * std::sin(phi);
      tan_.col(i) << -std::sin(phi), std::cos(phi);
      curv[i] = 1.0 / rho;
    }
    nor.col(i) << tan_(1, i), -tan_(0, i);
    speed[i] = sp;
  }
  BoundaryCurve c;
  c.nodes = x;
  c.tangents = tan_;
  c.normals = nor;
  c.speed = speed;
  c.curvature = curv;
  c.center = Eigen::Vector2d::Zero();
  c.center = c.area_centroid();
  return c;
}

// x -> delta*x + shift; normals and tangents are unchanged, curvature scales
// by 1/delta.
inline BoundaryCurve scale_translate(const BoundaryCurve& c, double delta,
                                     const Eigen::Vector2d& shift) {
  if (!(delta > 0.0)) throw std::invalid_argument("scale factor must be positive");
  BoundaryCurve out = c;
  out.nodes = (c.nodes * delta).colwise() + shift;
  out.speed = c.speed * delta;
  out.curvature = c.curvature / delta;
  out.center = delta * c.center + shift;
  return out;
}

inline BoundaryCurve rotate(const BoundaryCurve& c, double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  BoundaryCurve out = c;
  out.nodes = r * c.nodes;
  out.tangents = r * c.tangents;
  out.normals = r * c.normals;
  out.center = r * c.center;
  return out;
}

}  // namespace psense
