#pragma once

// Two-particle forward model: an ordinary particle D1 near a plasmonic
// particle D2 perturbs the resonances of D2. The interaction is compressed
// into the matrix R_jl = (A[phi_l], phi_j)_E built from the exact layer
// potentials, or approximated through the polarization tensor series in the
// coupling moments a^j_m. Eigenvalue shifts P_j follow from a perturbation
// series in R, and the shifted spectral representation of the polarization
// tensor produces the measurable resonance sweep.

#include <Eigen/Dense>
#include <optional>

#include "psense/bem.hpp"
#include "psense/gpt.hpp"

namespace psense {

namespace detail {

// nodes and normals of the reference curve rigidly moved so its center sits
// at z, rotated by `orientation`
inline std::pair<Eigen::Matrix2Xd, Eigen::Matrix2Xd> placed_nodes(const BoundaryCurve& curve,
                                                                  const Eigen::Vector2d& z,
                                                                  double orientation) {
  Eigen::Matrix2d rot;
  rot << std::cos(orientation), -std::sin(orientation), std::sin(orientation),
      std::cos(orientation);
  Eigen::Matrix2Xd nodes = (rot * (curve.nodes.colwise() - curve.center)).colwise() + z;
  Eigen::Matrix2Xd normals = rot * curve.normals;
  return {nodes, normals};
}

}  // namespace detail

// Moments of the resonant eigendensities against the decaying circular
// harmonics about the origin:
//   a^j_{m,c} = -1/(2 pi m) \int cos(m theta_y)/r_y^m phi_j ds,
//   a^j_{m,s} = -1/(2 pi m) \int sin(m theta_y)/r_y^m phi_j ds.
struct CouplingCoefficients {
  Eigen::Vector2d z{0.0, 0.0};
  double orientation = 0.0;
  int max_order = 0;     // moments for m = 1..max_order
  Eigen::MatrixXd ac;    // J x max_order
  Eigen::MatrixXd as;    // J x max_order

  Eigen::RowVector2d coeff(int j, int m) const {
    return Eigen::RowVector2d(ac(j, m - 1), as(j, m - 1));
  }
};

inline CouplingCoefficients coupling_coefficients(const NPSpectrum& spectrum,
                                                  const Eigen::Vector2d& z, double orientation,
                                                  int max_order,
                                                  std::optional<double> min_distance = {}) {
  if (max_order < 1) throw std::invalid_argument("moment order must be at least 1");
  const auto [nodes, normals] = detail::placed_nodes(spectrum.curve, z, orientation);
  (void)normals;

  const double c1 = min_distance.value_or(0.5 * spectrum.curve.diameter());
  double rmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < nodes.cols(); ++i) rmin = std::min(rmin, nodes.col(i).norm());
  if (rmin < c1)
    throw regime_error("resonant particle reaches within " + std::to_string(rmin) +
                       " of the origin, below the separation floor " + std::to_string(c1));

  const int jn = spectrum.count();
  CouplingCoefficients cc;
  cc.z = z;
  cc.orientation = orientation;
  cc.max_order = max_order;
  cc.ac.resize(jn, max_order);
  cc.as.resize(jn, max_order);
  for (int m = 1; m <= max_order; ++m) {
    Eigen::VectorXcd kernel(nodes.cols());
    for (int i = 0; i < nodes.cols(); ++i) {
      const Complex w(nodes(0, i), nodes(1, i));
      kernel[i] = std::pow(w, -m);  // Re = cos(m theta)/r^m, Im = -sin(m theta)/r^m
    }
    for (int j = 0; j < jn; ++j) {
      Complex acc(0.0, 0.0);
      for (int i = 0; i < nodes.cols(); ++i)
        acc += kernel[i] * spectrum.densities(i, j) * spectrum.weights[i];
      cc.ac(j, m - 1) = -acc.real() / (two_pi * m);
      cc.as(j, m - 1) = acc.imag() / (two_pi * m);
    }
  }
  return cc;
}

// Largest C such that |a^j_m| <= C^{-m}/m over the computed moments; C > 1
// inside the intermediate regime.
inline double fit_decay_constant(const CouplingCoefficients& cc) {
  double c = std::numeric_limits<double>::infinity();
  for (int j = 0; j < cc.ac.rows(); ++j)
    for (int m = 1; m <= cc.max_order; ++m) {
      const double mag = cc.coeff(j, m).norm();
      if (mag > 0.0) c = std::min(c, std::pow(m * mag, -1.0 / m));
    }
  return c;
}

// Tensor-series approximation of the interaction matrix,
//   R_jl ~ (1/2 - lambda_j) sum_{m+n <= total_order} a^j_m M_{m,n} (a^l_n)^t.
inline Eigen::MatrixXcd r_jl_series(const CouplingCoefficients& cc, const CgptSet& cgpt,
                                    const Eigen::VectorXd& eigenvalues, int total_order) {
  if (total_order < 2) throw std::invalid_argument("series order must be at least 2");
  if (total_order > cgpt.order)
    throw std::invalid_argument("series order exceeds available tensor order");
  if (cc.max_order < total_order - 1)
    throw std::invalid_argument("coupling moments truncated below the requested series order");
  const int jn = static_cast<int>(eigenvalues.size());
  if (cc.ac.rows() < jn) throw std::invalid_argument("moment table has fewer modes than requested");

  Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(jn, jn);
  for (int m = 1; m <= total_order - 1; ++m) {
    for (int n = 1; m + n <= total_order; ++n) {
      const Eigen::Matrix2cd& block = cgpt.block(m, n);
      for (int j = 0; j < jn; ++j) {
        const Eigen::RowVector2d aj = cc.coeff(j, m);
        for (int l = 0; l < jn; ++l) {
          const Eigen::RowVector2d al = cc.coeff(l, n);
          r(j, l) += (0.5 - eigenvalues[j]) *
                     (aj.cast<Complex>() * block * al.transpose().cast<Complex>())(0, 0);
        }
      }
    }
  }
  return r;
}

// Interaction matrix from the exact layer potentials: the eigendensity phi_l
// radiates from D2, scatters once off D1 at contrast lambda1, and its normal
// derivative back on D2 is paired with phi_j in the energy product.
inline Eigen::MatrixXcd r_jl_direct(const NpWorkspace& ordinary, Complex lambda1,
                                    const NPSpectrum& spectrum, const Eigen::Vector2d& z,
                                    double orientation) {
  const auto [nodes2, normals2] = detail::placed_nodes(spectrum.curve, z, orientation);
  const Eigen::Matrix2Xd& nodes1 = ordinary.curve.nodes;
  const int n1 = static_cast<int>(nodes1.cols());
  const int n2 = static_cast<int>(nodes2.cols());

  double dmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n1; ++i)
    for (int q = 0; q < n2; ++q)
      dmin = std::min(dmin, (nodes1.col(i) - nodes2.col(q)).norm());
  const double h1 = ordinary.curve.speed.maxCoeff() * ordinary.curve.param_step();
  const double h2 = spectrum.curve.speed.maxCoeff() * spectrum.curve.param_step();
  if (dmin < 2.0 * std::max(h1, h2))
    throw regime_error("particle boundaries are separated by " + std::to_string(dmin) +
                       ", too close for the far-field quadrature");

  const double inv2pi = 1.0 / two_pi;
  // flux on D1 of the single layer radiated from D2
  Eigen::MatrixXd t1(n1, n2);
  for (int i = 0; i < n1; ++i)
    for (int q = 0; q < n2; ++q) {
      const Eigen::Vector2d d = nodes1.col(i) - nodes2.col(q);
      t1(i, q) = inv2pi * d.dot(ordinary.curve.normals.col(i)) / d.squaredNorm() *
                 spectrum.weights[q];
    }
  // flux back on D2 of the single layer radiated from D1
  Eigen::MatrixXd t2(n2, n1);
  for (int q = 0; q < n2; ++q)
    for (int i = 0; i < n1; ++i) {
      const Eigen::Vector2d d = nodes2.col(q) - nodes1.col(i);
      t2(q, i) = inv2pi * d.dot(normals2.col(q)) / d.squaredNorm() * ordinary.weights[i];
    }

  const Resolvent rv = make_resolvent(ordinary, lambda1, true);
  const int jn = spectrum.count();
  Eigen::MatrixXcd scattered(n2, jn);
  for (int l = 0; l < jn; ++l) {
    const Eigen::VectorXd incident = t1 * spectrum.densities.col(l);
    const Eigen::VectorXcd solved = rv.solve(incident);
    scattered.col(l) = detail::apply_real(t2, solved);
  }

  // R_jl = phi_j^T G (A phi_l)
  Eigen::MatrixXd gphil = spectrum.gram * spectrum.densities;
  return gphil.transpose().cast<Complex>() * scattered;
}

namespace detail {

// sum of the perturbation chains with exactly q factors of R:
//   q = 1: R_jj
//   q = 2: sum_{l != j} R_jl R_lj/(lambda_j - lambda_l), ...
inline Eigen::VectorXcd chain_terms(const Eigen::MatrixXcd& r, const Eigen::VectorXd& eigenvalues,
                                    int j, int max_factors, double gap_tol) {
  const int jn = static_cast<int>(eigenvalues.size());
  Eigen::VectorXcd chains = Eigen::VectorXcd::Zero(max_factors);
  chains[0] = r(j, j);
  if (max_factors == 1) return chains;

  std::vector<int> others;
  for (int l = 0; l < jn; ++l)
    if (l != j) others.push_back(l);
  const int no = static_cast<int>(others.size());
  Eigen::VectorXcd rout(no), rin(no);
  Eigen::VectorXd d(no);
  for (int t = 0; t < no; ++t) {
    rout[t] = r(j, others[t]);
    rin[t] = r(others[t], j);
    d[t] = eigenvalues[j] - eigenvalues[others[t]];
    if (std::abs(d[t]) < gap_tol)
      throw degenerate_eigenvalue_error(j, std::abs(d[t]), gap_tol);
  }
  Eigen::MatrixXcd b(no, no);
  for (int s = 0; s < no; ++s)
    for (int t = 0; t < no; ++t) b(s, t) = r(others[s], others[t]);

  Eigen::VectorXcd v = rin.cwiseQuotient(d.cast<Complex>().eval());
  for (int q = 2; q <= max_factors; ++q) {
    chains[q - 1] = (rout.transpose() * v)(0, 0);
    if (q < max_factors) v = (b * v).cwiseQuotient(d.cast<Complex>().eval());
  }
  return chains;
}

}  // namespace detail

// Resonance shift of mode j from the perturbation series truncated after
// `series_order` factors of R; the shifted pole sits at lambda_j - P_j.
inline Complex shift_p(const Eigen::MatrixXcd& r, const Eigen::VectorXd& eigenvalues, int j,
                       int series_order, double gap_tol = 1e-3) {
  if (j < 0 || j >= eigenvalues.size()) throw std::invalid_argument("mode index out of range");
  if (series_order < 1) throw std::invalid_argument("series order must be at least 1");
  return detail::chain_terms(r, eigenvalues, j, series_order, gap_tol).sum();
}

inline Eigen::VectorXcd all_shifts(const Eigen::MatrixXcd& r, const Eigen::VectorXd& eigenvalues,
                                   int series_order, double gap_tol = 1e-3) {
  Eigen::VectorXcd p(eigenvalues.size());
  for (int j = 0; j < eigenvalues.size(); ++j)
    p[j] = shift_p(r, eigenvalues, j, series_order, gap_tol);
  return p;
}

// Numerators of the spectral representation of the polarization tensor,
// M_lm(lambda) = sum_j (nu_l, phi_j)_E (phi_j, x_m)_{L^2} / (lambda - lambda_j + P_j).
struct PtNumerators {
  Eigen::MatrixXd nu_proj;  // 2 x J, (nu_l, phi_j)_E
  Eigen::MatrixXd x_proj;   // 2 x J, (phi_j, x_m)_{L^2}
};

inline PtNumerators pt_numerators(const NPSpectrum& spectrum) {
  const int jn = spectrum.count();
  const int n = spectrum.curve.n();
  Eigen::Matrix2Xd centered = spectrum.curve.nodes.colwise() - spectrum.curve.center;
  PtNumerators out;
  out.nu_proj.resize(2, jn);
  out.x_proj.resize(2, jn);
  for (int j = 0; j < jn; ++j) {
    const Eigen::VectorXd gphi = spectrum.gram * spectrum.densities.col(j);
    for (int l = 0; l < 2; ++l) {
      double nu = 0.0, x = 0.0;
      for (int i = 0; i < n; ++i) {
        nu += spectrum.curve.normals(l, i) * gphi[i];
        x += centered(l, i) * spectrum.densities(i, j) * spectrum.weights[i];
      }
      out.nu_proj(l, j) = nu;
      out.x_proj(l, j) = x;
    }
  }
  return out;
}

inline Eigen::Matrix2cd coupled_pt(const PtNumerators& nums, const Eigen::VectorXd& eigenvalues,
                                   const Eigen::VectorXcd& shifts, Complex lambda) {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  for (int j = 0; j < eigenvalues.size(); ++j) {
    const Complex denom = lambda - eigenvalues[j] + shifts[j];
    for (int l = 0; l < 2; ++l)
      for (int k = 0; k < 2; ++k)
        m(l, k) += nums.nu_proj(l, j) * nums.x_proj(k, j) / denom;
  }
  return m;
}

struct SweepGrid {
  double re_min = -0.5;
  double re_max = 0.5;
  int count = 2001;
  double im = 1e-4;
};

struct ResonanceSweep {
  Eigen::VectorXd grid;        // Re(lambda) samples
  Eigen::VectorXd magnitude;   // |entry| of the coupled tensor
  double lambda_r = 0.0;       // refined peak location
  double shift = 0.0;          // lambda_j - lambda_r for the tracked mode
  int tracked = 0;
  int peak_index = 0;
};

// Scan Re(lambda_{D2}) at fixed Im, locate the resonance peak of the chosen
// tensor entry, refine it with a parabola through the inverse-square
// magnitude (exact for an isolated Lorentzian), and report the measured
// shift of the tracked mode.
inline ResonanceSweep sweep_and_peak(const PtNumerators& nums, const Eigen::VectorXd& eigenvalues,
                                     const Eigen::VectorXcd& shifts, const SweepGrid& grid,
                                     int tracked, int entry_row = 0, int entry_col = 0,
                                     double ambiguity_ratio = 0.5) {
  if (grid.count < 5) throw std::invalid_argument("sweep grid needs at least 5 samples");
  if (!(grid.re_max > grid.re_min)) throw std::invalid_argument("empty sweep window");
  if (tracked < 0 || tracked >= eigenvalues.size())
    throw std::invalid_argument("tracked mode index out of range");

  ResonanceSweep sweep;
  sweep.tracked = tracked;
  sweep.grid.resize(grid.count);
  sweep.magnitude.resize(grid.count);
  const double h = (grid.re_max - grid.re_min) / (grid.count - 1);
  for (int i = 0; i < grid.count; ++i) {
    sweep.grid[i] = grid.re_min + h * i;
    const Complex lambda(sweep.grid[i], grid.im);
    sweep.magnitude[i] = std::abs(coupled_pt(nums, eigenvalues, shifts, lambda)(entry_row, entry_col));
  }

  int best = 0;
  sweep.magnitude.maxCoeff(&best);
  if (best == 0 || best == grid.count - 1)
    throw grid_coverage_error("resonance peak sits on the sweep window edge; widen the window");

  // competing local maxima make the peak assignment ambiguous
  for (int i = 1; i + 1 < grid.count; ++i) {
    if (i == best) continue;
    const bool local_max = sweep.magnitude[i] > sweep.magnitude[i - 1] &&
                           sweep.magnitude[i] > sweep.magnitude[i + 1];
    if (local_max && sweep.magnitude[i] >= ambiguity_ratio * sweep.magnitude[best] &&
        std::abs(i - best) > 2)
      throw ambiguous_peak_error("two comparable peaks inside the sweep window");
  }

  const double f0 = 1.0 / (sweep.magnitude[best - 1] * sweep.magnitude[best - 1]);
  const double f1 = 1.0 / (sweep.magnitude[best] * sweep.magnitude[best]);
  const double f2 = 1.0 / (sweep.magnitude[best + 1] * sweep.magnitude[best + 1]);
  const double denom = f0 - 2.0 * f1 + f2;
  double offset = 0.0;
  if (std::abs(denom) > 0.0) offset = 0.5 * h * (f0 - f2) / denom;
  offset = std::clamp(offset, -h, h);

  sweep.peak_index = best;
  sweep.lambda_r = sweep.grid[best] + offset;
  sweep.shift = eigenvalues[tracked] - sweep.lambda_r;
  return sweep;
}

struct MeasurementOptions {
  int series_order = 3;       // factors of R kept in the shift series
  int sweep_count = 2001;
  double sweep_im = 1e-4;
  double window_factor = 10.0;  // window halfwidth >= factor * |predicted shift|
  double gap_tol = 1e-3;
  double ambiguity_ratio = 0.5;
  bool refine_by_sweep = true;  // false: report the series shift directly
};

struct Measurement {
  Eigen::Vector2d z{0.0, 0.0};
  double orientation = 0.0;
  int tracked = 0;
  double shift = 0.0;          // measured P_j
  double lambda_r = 0.0;       // resonant value of Re(lambda_{D2})
  Complex predicted{0.0, 0.0}; // series shift used to center the window
};

// Measurement from a precomputed shift vector: the sweep window is centered
// on the predicted pole of the tracked mode and the refined peak gives the
// measured shift.
inline Measurement measure_with_shifts(const NPSpectrum& spectrum, const PtNumerators& nums,
                                       const Eigen::VectorXcd& shifts, const Eigen::Vector2d& z,
                                       double orientation, int tracked,
                                       const MeasurementOptions& opts = {}) {
  Measurement out;
  out.z = z;
  out.orientation = orientation;
  out.tracked = tracked;
  out.predicted = shifts[tracked];

  if (!opts.refine_by_sweep) {
    out.shift = shifts[tracked].real();
    out.lambda_r = spectrum.eigenvalues[tracked] - out.shift;
    return out;
  }

  const double center = spectrum.eigenvalues[tracked] - out.predicted.real();
  const double halfwidth =
      std::max({opts.window_factor * std::abs(out.predicted), 50.0 * opts.sweep_im, 1e-8});
  SweepGrid grid;
  grid.re_min = center - halfwidth;
  grid.re_max = center + halfwidth;
  grid.count = opts.sweep_count;
  grid.im = opts.sweep_im;
  const ResonanceSweep sweep = sweep_and_peak(nums, spectrum.eigenvalues, shifts, grid, tracked,
                                              0, 0, opts.ambiguity_ratio);
  out.shift = sweep.shift;
  out.lambda_r = sweep.lambda_r;
  return out;
}

// Full simulated measurement at one placement of the resonant particle:
// exact interaction matrix, perturbation-series shifts, then a sweep of the
// coupled polarization tensor whose refined peak yields the measured shift.
inline Measurement measure_at_position(const NpWorkspace& ordinary, Complex lambda1,
                                       const NPSpectrum& spectrum, const PtNumerators& nums,
                                       const Eigen::Vector2d& z, double orientation, int tracked,
                                       const MeasurementOptions& opts = {}) {
  const Eigen::MatrixXcd r = r_jl_direct(ordinary, lambda1, spectrum, z, orientation);
  const Eigen::VectorXcd shifts =
      all_shifts(r, spectrum.eigenvalues, opts.series_order, opts.gap_tol);
  return measure_with_shifts(spectrum, nums, shifts, z, orientation, tracked, opts);
}

// Map a metal permittivity on the Drude model to the spectral parameter:
// eps(omega) = 1 - omega_p^2/(omega(omega + i gamma)),
// lambda = (eps + eps_m)/(2(eps - eps_m)).
inline Complex drude_lambda(double omega, double plasma_frequency, double damping,
                            double eps_medium = 1.0) {
  if (!(omega > 0.0)) throw std::invalid_argument("frequency must be positive");
  const Complex eps = 1.0 - plasma_frequency * plasma_frequency /
                                (omega * Complex(omega, damping));
  const Complex denom = 2.0 * (eps - eps_medium);
  if (std::abs(denom) < 1e-300) throw std::invalid_argument("zero permittivity contrast");
  return (eps + eps_medium) / denom;
}

}  // namespace psense
