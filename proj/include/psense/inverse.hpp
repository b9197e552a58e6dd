#pragma once

// Inverse machinery: staged least-squares recovery of the polarization
// tensors of the hidden particle from measured resonance shifts, followed by
// shape reconstruction through gradient descent on the harmonic-sum misfit.

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <vector>

#include "psense/forward.hpp"
#include "psense/gpt.hpp"

namespace psense {

// independent unknowns in the symmetric block family {M_{m,n} : m+n <= k}
inline int stage_unknowns(int k) {
  if (k < 2) throw std::invalid_argument("stage order must be at least 2");
  return k * (k - 1) + (k % 2 == 0 ? k / 2 : (k - 1) / 2);
}

struct MeasurementRecord {
  Eigen::Vector2d z{0.0, 0.0};
  double orientation = 0.0;
  int tracked = 0;
  double shift = 0.0;
};

struct StageReport {
  int order = 0;
  int rows = 0;
  int rank = 0;
  double residual = 0.0;
};

struct RecoveryResult {
  std::vector<CgptSet> stages;      // stage k set at index k-2
  std::vector<StageReport> reports;
  const CgptSet& final_set() const { return stages.back(); }
};

namespace detail {

// ordered unknown layout for one stage: (m,n) pairs with m <= n and the
// number of free entries in each block (3 symmetric, 4 general)
inline std::vector<std::pair<int, int>> stage_pairs(int k) {
  std::vector<std::pair<int, int>> pairs;
  for (int m = 1; 2 * m <= k; ++m)
    for (int n = m; m + n <= k; ++n) pairs.emplace_back(m, n);
  return pairs;
}

inline CgptSet set_from_solution(const std::vector<std::pair<int, int>>& pairs,
                                 const Eigen::VectorXd& x, int order, Complex contrast) {
  CgptSet set;
  set.order = order;
  set.contrast = contrast;
  int at = 0;
  for (const auto& [m, n] : pairs) {
    Eigen::Matrix2cd block;
    if (m == n) {
      block << x[at], x[at + 1], x[at + 1], x[at + 2];
      at += 3;
    } else {
      block << x[at], x[at + 1], x[at + 2], x[at + 3];
      at += 4;
    }
    set.blocks[{m, n}] = block;
    if (m != n) set.blocks[{n, m}] = block.transpose();
  }
  return set;
}

}  // namespace detail

// Staged recovery of the tensors of the hidden particle from resonance
// shifts measured at several placements of the probe. Stage k fits all
// blocks with m+n <= k to the shift data corrected by the interaction
// chains predicted from stage k-1.
inline RecoveryResult recover_cgpt(const std::vector<MeasurementRecord>& records,
                                   const NPSpectrum& spectrum, int max_order,
                                   Complex contrast_label = Complex(1.0, 0.0),
                                   double gap_tol = 1e-3,
                                   std::optional<double> min_distance = {}) {
  if (max_order < 2 || max_order > 9)
    throw std::invalid_argument("recovery order must be between 2 and 9");
  const int needed = stage_unknowns(max_order);
  const int rows = static_cast<int>(records.size());
  if (rows < needed)
    throw std::invalid_argument("stage " + std::to_string(max_order) + " needs at least " +
                                std::to_string(needed) + " measurements, got " +
                                std::to_string(rows));
  const int jn = spectrum.count();
  for (const auto& rec : records)
    if (rec.tracked < 0 || rec.tracked >= jn)
      throw std::invalid_argument("tracked mode index out of range");

  std::vector<CouplingCoefficients> moments;
  moments.reserve(rows);
  for (const auto& rec : records)
    moments.push_back(coupling_coefficients(spectrum, rec.z, rec.orientation, max_order - 1,
                                            min_distance));

  RecoveryResult result;
  for (int k = 2; k <= max_order; ++k) {
    const auto pairs = detail::stage_pairs(k);
    const int cols = stage_unknowns(k);

    Eigen::MatrixXd a(rows, cols);
    Eigen::VectorXd b(rows);
    for (int i = 0; i < rows; ++i) {
      const auto& rec = records[i];
      const double front = 0.5 - spectrum.eigenvalues[rec.tracked];

      double corrected = rec.shift;
      if (k >= 3) {
        const Eigen::MatrixXcd prior =
            r_jl_series(moments[i], result.stages.back(), spectrum.eigenvalues, k - 1);
        const Eigen::VectorXcd chains =
            detail::chain_terms(prior, spectrum.eigenvalues, rec.tracked, k - 1, gap_tol);
        corrected -= (chains.sum() - chains[0]).real();
      }
      b[i] = corrected;

      int at = 0;
      for (const auto& [m, n] : pairs) {
        const Eigen::RowVector2d am = moments[i].coeff(rec.tracked, m);
        const Eigen::RowVector2d an = moments[i].coeff(rec.tracked, n);
        if (m == n) {
          a(i, at++) = front * am[0] * am[0];
          a(i, at++) = front * 2.0 * am[0] * am[1];
          a(i, at++) = front * am[1] * am[1];
        } else {
          a(i, at++) = front * 2.0 * am[0] * an[0];
          a(i, at++) = front * 2.0 * am[0] * an[1];
          a(i, at++) = front * 2.0 * am[1] * an[0];
          a(i, at++) = front * 2.0 * am[1] * an[1];
        }
      }
    }

    Eigen::VectorXd scale(cols);
    for (int c = 0; c < cols; ++c) {
      scale[c] = a.col(c).norm();
      if (scale[c] < 1e-300)
        throw rank_deficiency_error("measurement positions leave tensor components unseen; "
                                    "spread the placements");
      a.col(c) /= scale[c];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < cols)
      throw rank_deficiency_error(
          "positions do not determine all stage-" + std::to_string(k) +
          " tensor components; need " + std::to_string(cols) + " well-spread placements");
    const Eigen::VectorXd y = qr.solve(b);
    const Eigen::VectorXd x = y.cwiseQuotient(scale);

    StageReport report;
    report.order = k;
    report.rows = rows;
    report.rank = static_cast<int>(qr.rank());
    report.residual = (a * y - b).norm();
    result.reports.push_back(report);
    result.stages.push_back(detail::set_from_solution(pairs, x, k, contrast_label));
  }
  return result;
}

// ---------------------------------------------------------------------------
// transmission traces for the shape derivative

inline Complex contrast_ratio(Complex lambda) {
  const Complex denom = 2.0 * lambda - 1.0;
  if (std::abs(denom) < 1e-12)
    throw std::invalid_argument("contrast ratio undefined at lambda = 1/2");
  return (2.0 * lambda + 1.0) / denom;
}

struct BoundaryTraces {
  Eigen::VectorXcd dn;  // normal derivative from inside
  Eigen::VectorXcd dt;  // tangential derivative from inside
};

// u = P_m + S[phi]: continuous flux problem, phi from the adjoint resolvent
inline BoundaryTraces transmission_traces_u(const NpWorkspace& ws, Complex lambda, int m) {
  const auto [fre, fim] = harmonic_flux(ws.curve, ws.curve.center, m);
  const Eigen::VectorXcd flux = fre + Complex(0, 1) * fim;
  const Eigen::VectorXcd phi = make_resolvent(ws, lambda, true).solve(flux);

  BoundaryTraces out;
  out.dn = flux - 0.5 * phi + detail::apply_real(ws.np, phi);
  const auto [tre, tim] = harmonic_trace(ws.curve, ws.curve.center, m);
  const Eigen::VectorXcd value =
      tre + Complex(0, 1) * tim + detail::apply_real(ws.single_layer, phi);
  out.dt = detail::apply_real(ws.dt, value);
  return out;
}

// v = P_n + D[psi]: continuous value problem, psi from the plain resolvent
inline BoundaryTraces transmission_traces_v(const NpWorkspace& ws, Complex lambda, int n) {
  const auto [tre, tim] = harmonic_trace(ws.curve, ws.curve.center, n);
  const Eigen::VectorXcd value = tre + Complex(0, 1) * tim;
  const Eigen::VectorXcd psi = make_resolvent(ws, lambda, false).solve(value);

  BoundaryTraces out;
  const Eigen::VectorXcd inner = value + 0.5 * psi + detail::apply_real(ws.np_transpose, psi);
  out.dt = detail::apply_real(ws.dt, inner);
  const auto [fre, fim] = harmonic_flux(ws.curve, ws.curve.center, n);
  out.dn = fre + Complex(0, 1) * fim + dn_double_layer(ws, psi);
  return out;
}

// Derivative kernel of the harmonic sum under a normal boundary perturbation:
// combines the bilinear product rule for the real part with the sesquilinear
// one for the antisymmetric imaginary part.
inline Eigen::VectorXcd shape_gradient(const BoundaryTraces& u, const BoundaryTraces& v,
                                       Complex lambda) {
  const Complex k = contrast_ratio(lambda);
  const Complex front = k - 1.0;
  const int n = static_cast<int>(u.dn.size());
  Eigen::VectorXcd w(n);
  for (int i = 0; i < n; ++i) {
    const Complex p = front * (u.dn[i] * v.dn[i] + u.dt[i] * v.dt[i] / k);
    const Complex q =
        front * (u.dn[i] * std::conj(v.dn[i]) + u.dt[i] * std::conj(v.dt[i]) / k);
    w[i] = Complex(p.real(), -q.imag());
  }
  return w;
}

inline Eigen::VectorXcd shape_gradient(const NpWorkspace& ws, Complex lambda, int m, int n) {
  return shape_gradient(transmission_traces_u(ws, lambda, m),
                        transmission_traces_v(ws, lambda, n), lambda);
}

// ---------------------------------------------------------------------------
// harmonic-sum misfit and gradient descent

using HarmonicSums = std::map<std::pair<int, int>, Complex>;

inline HarmonicSums harmonic_sums(const CgptSet& set, int order) {
  if (set.order < order) throw std::invalid_argument("tensor order below requested sum order");
  HarmonicSums sums;
  for (int m = 1; m < order; ++m)
    for (int n = 1; m + n <= order; ++n) sums[{m, n}] = harmonic_sum_n1(set, m, n);
  return sums;
}

inline double objective_jc(const HarmonicSums& target, const HarmonicSums& candidate) {
  if (target.size() != candidate.size())
    throw std::invalid_argument("mismatched harmonic sum families");
  double j = 0.0;
  for (const auto& [key, value] : candidate) {
    const auto it = target.find(key);
    if (it == target.end()) throw std::invalid_argument("mismatched harmonic sum families");
    j += 0.5 * std::norm(value - it->second);
  }
  return j;
}

struct ShapeIterate {
  FourierRadius profile;
  Eigen::Vector2d center{0.0, 0.0};
};

struct DescentOptions {
  int nodes = 128;
  int max_iters = 30;
  double step0 = 0.1;          // initial step, scaled by 1/|gradient|
  double armijo = 1e-4;
  double rel_tol = 1e-8;
  int max_halvings = 30;
  int extra_modes = 2;         // radial modes beyond the tensor order
  // called with the initial iterate (0) and after every accepted step
  std::function<void(int, const ShapeIterate&, double)> observer;
};

struct DescentResult {
  ShapeIterate shape;
  std::vector<double> jc_history;    // objective per accepted iterate, in initial-radius units
  std::vector<double> step_history;  // accepted step sizes
  int iterations = 0;
  bool stalled = false;  // line search exhausted; shape holds the last good iterate
};

namespace detail {

// gradient of the misfit with respect to the radial Fourier coefficients;
// mode 1 is excluded to pin the centroid
inline Eigen::VectorXd radial_gradient(const BoundaryCurve& curve, const Eigen::VectorXd& field,
                                       int modes) {
  const Eigen::VectorXd params = curve.params();
  const Eigen::VectorXd w = curve.arclength_weights();
  Eigen::VectorXd rhat_nu(curve.n());
  for (int i = 0; i < curve.n(); ++i) {
    const Eigen::Vector2d rhat(std::cos(params[i]), std::sin(params[i]));
    rhat_nu[i] = rhat.dot(curve.normals.col(i));
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(1 + 2 * std::max(0, modes - 1));
  for (int i = 0; i < curve.n(); ++i) {
    const double base = field[i] * rhat_nu[i] * w[i];
    g[0] += base;
    for (int k = 2; k <= modes; ++k) {
      g[1 + 2 * (k - 2)] += base * std::cos(k * params[i]);
      g[2 + 2 * (k - 2)] += base * std::sin(k * params[i]);
    }
  }
  return g;
}

inline FourierRadius apply_step(const FourierRadius& profile, const Eigen::VectorXd& g,
                                double step, int modes) {
  FourierRadius next = profile;
  if (next.cos_coeffs.size() < modes) {
    Eigen::VectorXd grown = Eigen::VectorXd::Zero(modes);
    grown.head(next.cos_coeffs.size()) = next.cos_coeffs;
    next.cos_coeffs = grown;
    grown.setZero();
    grown.head(next.sin_coeffs.size()) = next.sin_coeffs;
    next.sin_coeffs = grown;
  }
  next.r0 -= step * g[0];
  for (int k = 2; k <= modes; ++k) {
    next.cos_coeffs[k - 1] -= step * g[1 + 2 * (k - 2)];
    next.sin_coeffs[k - 1] -= step * g[2 + 2 * (k - 2)];
  }
  return next;
}

}  // namespace detail

// Gradient descent on the harmonic-sum misfit over radial Fourier shapes.
// Backtracking line search; a step whose trial curve cannot be evaluated
// (nonpositive radius, degenerate conditioning) counts as a rejected step.
//
// Block (m,n) of the sums varies like size^{m+n} under dilation, so for a
// target far from unit size the misfit curvatures across blocks spread by
// size^{2(m+n)} and plain descent creeps. The iteration therefore runs in
// units of the initial mean radius and the result is mapped back at the end;
// jc_history (and the objective passed to the observer) is in those units.
inline DescentResult descend_shape(const HarmonicSums& target, const ShapeIterate& init,
                                   Complex lambda, int order, const DescentOptions& opts = {}) {
  if (order < 2) throw std::invalid_argument("sum order must be at least 2");
  if (!(init.profile.r0 > 0.0))
    throw std::invalid_argument("initial mean radius must be positive");
  const int modes = order + opts.extra_modes;

  const double unit = init.profile.r0;
  HarmonicSums scaled_target;
  for (const auto& [key, value] : target)
    scaled_target[key] = value / std::pow(unit, key.first + key.second);

  DescentResult result;
  result.shape = init;
  result.shape.profile.r0 = 1.0;
  result.shape.profile.cos_coeffs /= unit;
  result.shape.profile.sin_coeffs /= unit;

  auto rescaled = [&](const ShapeIterate& iterate) {
    ShapeIterate out = iterate;
    out.profile.r0 *= unit;
    out.profile.cos_coeffs *= unit;
    out.profile.sin_coeffs *= unit;
    return out;
  };

  auto evaluate = [&](const FourierRadius& profile) {
    const BoundaryCurve curve = make_fourier_shape(profile, init.center, opts.nodes);
    const NpWorkspace ws = make_workspace(curve);
    const CgptSet set = cgpt_set(ws, lambda, order);
    return std::make_tuple(objective_jc(scaled_target, harmonic_sums(set, order)), curve, ws, set);
  };

  auto [jc, curve, ws, set] = evaluate(result.shape.profile);
  result.jc_history.push_back(jc);
  if (opts.observer) opts.observer(0, rescaled(result.shape), jc);
  double step_carry = -1.0;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (jc == 0.0) break;

    // misfit gradient field on the current boundary
    const HarmonicSums sums = harmonic_sums(set, order);
    std::vector<BoundaryTraces> us, vs;
    us.reserve(order - 1);
    vs.reserve(order - 1);
    for (int m = 1; m < order; ++m) {
      us.push_back(transmission_traces_u(ws, lambda, m));
      vs.push_back(transmission_traces_v(ws, lambda, m));
    }
    Eigen::VectorXd field = Eigen::VectorXd::Zero(curve.n());
    for (int m = 1; m < order; ++m)
      for (int n = 1; m + n <= order; ++n) {
        const Complex delta = sums.at({m, n}) - scaled_target.at({m, n});
        const Eigen::VectorXcd w = shape_gradient(us[m - 1], vs[n - 1], lambda);
        for (int i = 0; i < curve.n(); ++i)
          field[i] += (std::conj(delta) * w[i]).real();
      }
    const Eigen::VectorXd g = detail::radial_gradient(curve, field, modes);
    const double gnorm2 = g.squaredNorm();
    if (gnorm2 == 0.0) break;

    double step = step_carry > 0.0 ? step_carry : opts.step0 / std::sqrt(gnorm2);
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h, step *= 0.5) {
      const FourierRadius trial = detail::apply_step(result.shape.profile, g, step, modes);
      try {
        auto [jc_new, curve_new, ws_new, set_new] = evaluate(trial);
        if (jc_new <= jc - opts.armijo * step * gnorm2) {
          result.shape.profile = trial;
          jc = jc_new;
          curve = std::move(curve_new);
          ws = std::move(ws_new);
          set = std::move(set_new);
          result.jc_history.push_back(jc);
          result.step_history.push_back(step);
          step_carry = 1.5 * step;
          accepted = true;
          break;
        }
      } catch (const std::invalid_argument&) {
        // radius went nonpositive: treat as a rejected step
      } catch (const numerical_error&) {
        // trial curve too distorted to evaluate: likewise rejected
      }
    }
    if (!accepted) {
      result.stalled = true;
      break;
    }
    ++result.iterations;
    if (opts.observer) opts.observer(result.iterations, rescaled(result.shape), jc);

    const int hist = static_cast<int>(result.jc_history.size());
    const double prev = result.jc_history[hist - 2];
    if (prev - jc < opts.rel_tol * std::max(prev, 1e-300)) break;
  }
  result.shape = rescaled(result.shape);
  return result;
}

// ---------------------------------------------------------------------------
// equivalent ellipse from the first-order tensor

struct EquivalentEllipse {
  double a = 0.0;
  double b = 0.0;
  double angle = 0.0;
};

inline EquivalentEllipse equivalent_ellipse(const Eigen::Matrix2d& m11, double lambda) {
  if ((m11 - m11.transpose()).cwiseAbs().maxCoeff() > 1e-8 * m11.cwiseAbs().maxCoeff())
    throw std::invalid_argument("first-order tensor must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m11);
  const double mu_small = es.eigenvalues()[0];
  const double mu_large = es.eigenvalues()[1];
  if (!(mu_small > 0.0))
    throw numerical_error("no equivalent ellipse: tensor is not positive definite");

  const double q = lambda * (mu_small - mu_large) / (mu_small + mu_large);
  if (!(std::abs(q) < 0.5))
    throw numerical_error("no equivalent ellipse: eigenvalue ratio out of range");
  const double p = mu_small * (lambda - q);
  if (!(p > 0.0)) throw numerical_error("no equivalent ellipse: inconsistent tensor");

  const double s = 2.0 * std::sqrt(p / (M_PI * (1.0 - 4.0 * q * q)));
  EquivalentEllipse out;
  out.a = 0.5 * s * (1.0 + 2.0 * q);
  out.b = 0.5 * s * (1.0 - 2.0 * q);
  const Eigen::Vector2d axis = es.eigenvectors().col(0);
  out.angle = std::atan2(axis[1], axis[0]);
  if (out.angle > M_PI / 2.0) out.angle -= M_PI;
  if (out.angle <= -M_PI / 2.0) out.angle += M_PI;
  return out;
}

// radial Fourier projection of a centered ellipse, for descent initialization
inline FourierRadius ellipse_radial_fourier(double a, double b, double angle, int modes,
                                            int samples = 2048) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("ellipse axes must be positive");
  FourierRadius profile;
  profile.cos_coeffs = Eigen::VectorXd::Zero(modes);
  profile.sin_coeffs = Eigen::VectorXd::Zero(modes);
  const double h = two_pi / samples;
  double r0 = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = i * h;
    const double c = std::cos(t - angle), s = std::sin(t - angle);
    const double r = a * b / std::sqrt(b * b * c * c + a * a * s * s);
    r0 += r;
    for (int k = 1; k <= modes; ++k) {
      profile.cos_coeffs[k - 1] += r * std::cos(k * t);
      profile.sin_coeffs[k - 1] += r * std::sin(k * t);
    }
  }
  profile.r0 = r0 / samples;
  profile.cos_coeffs *= 2.0 / samples;
  profile.sin_coeffs *= 2.0 / samples;
  return profile;
}

}  // namespace psense
