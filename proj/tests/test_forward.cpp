#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "psense/forward.hpp"

using namespace psense;
using Catch::Approx;

namespace {

double binomial(int n, int k) {
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out *= static_cast<double>(n - k + i) / i;
  return out;
}

// circle of radius rho with prescribed trigonometric densities, standing in
// for an NP eigenbasis with known harmonic moments
NPSpectrum circle_spectrum(double rho, int n) {
  NPSpectrum spectrum;
  spectrum.curve = make_ellipse(rho, rho, {0, 0}, n);
  spectrum.weights = spectrum.curve.arclength_weights();
  spectrum.gram = hstar_gram(spectrum.curve);
  spectrum.eigenvalues = Eigen::Vector4d::Zero();
  spectrum.densities.resize(n, 4);
  const Eigen::VectorXd t = spectrum.curve.params();
  for (int i = 0; i < n; ++i) {
    spectrum.densities(i, 0) = std::cos(t[i]);
    spectrum.densities(i, 1) = std::sin(t[i]);
    spectrum.densities(i, 2) = std::cos(2 * t[i]);
    spectrum.densities(i, 3) = std::sin(2 * t[i]);
  }
  return spectrum;
}

}  // namespace

TEST_CASE("coupling moments of trigonometric densities on a circle") {
  const double rho = 0.6, d = 3.0;
  const NPSpectrum spectrum = circle_spectrum(rho, 128);
  const CouplingCoefficients cc =
      coupling_coefficients(spectrum, {d, 0.0}, 0.0, 4, 0.2);

  // density cos(p a): a_{m,c} = -(-1)^p C(m+p-1,p) rho^{p+1}/(2 m d^{m+p}), a_{m,s} = 0
  // density sin(p a): a_{m,c} = 0, a_{m,s} = +(-1)^p C(m+p-1,p) rho^{p+1}/(2 m d^{m+p})
  for (int m = 1; m <= 4; ++m) {
    for (int p = 1; p <= 2; ++p) {
      const double mag =
          binomial(m + p - 1, p) * std::pow(rho, p + 1) / (2.0 * m * std::pow(d, m + p));
      const int jc = 2 * (p - 1), js = 2 * (p - 1) + 1;
      const double sign = (p % 2 == 0) ? 1.0 : -1.0;
      CHECK(cc.ac(jc, m - 1) == Approx(-sign * mag).margin(1e-12));
      CHECK(std::abs(cc.as(jc, m - 1)) < 1e-12);
      CHECK(std::abs(cc.ac(js, m - 1)) < 1e-12);
      CHECK(cc.as(js, m - 1) == Approx(sign * mag).margin(1e-12));
    }
  }

  CHECK(fit_decay_constant(cc) > 1.0);
}

TEST_CASE("moments rotate by a phase with the particle orientation") {
  const NPSpectrum spectrum = circle_spectrum(0.5, 96);
  const double beta = 0.37;
  const CouplingCoefficients base = coupling_coefficients(spectrum, {2.5, 0.0}, 0.0, 3, 0.2);
  const CouplingCoefficients turned =
      coupling_coefficients(spectrum, {2.5, 0.0}, beta, 3, 0.2);
  // density frequency p: zeta_m := a_{m,c} - i a_{m,s} picks up e^{i p beta}
  for (int m = 1; m <= 3; ++m) {
    for (int j = 0; j < 4; ++j) {
      const int p = j / 2 + 1;
      const Complex z0(base.ac(j, m - 1), -base.as(j, m - 1));
      const Complex z1(turned.ac(j, m - 1), -turned.as(j, m - 1));
      CHECK(std::abs(z1 - std::polar(1.0, p * beta) * z0) < 1e-12);
    }
  }
}

TEST_CASE("placement inside the separation floor is refused") {
  const BoundaryCurve ellipse = make_ellipse(1.0, 2.0, {0, 0}, 64);
  const NPSpectrum spectrum = np_spectrum(ellipse, 2);
  CHECK_THROWS_AS(coupling_coefficients(spectrum, {1.5, 0.0}, 0.0, 2),
                  regime_error);
  CHECK_NOTHROW(coupling_coefficients(spectrum, {3.5, 0.0}, 0.0, 2));
}

TEST_CASE("tensor series approximates the direct interaction matrix") {
  std::mt19937 rng(41);
  const FourierRadius profile = oracles::random_profile(rng, 3, 0.3);
  const BoundaryCurve unit = make_fourier_shape(profile, {0, 0}, 128);
  const BoundaryCurve ellipse = make_ellipse(1.0, 2.0, {0, 0}, 160);
  const NPSpectrum spectrum = np_spectrum(ellipse, 4);
  const Eigen::Vector2d z(3.3, 0.7);
  const double beta = 0.25;
  const Complex lambda1(1.0, 0.0);
  const CouplingCoefficients cc = coupling_coefficients(spectrum, z, beta, 3);

  std::vector<double> errors, relative;
  for (const double delta : {0.2, 0.1}) {
    const BoundaryCurve d1 = scale_translate(unit, delta, {0, 0});
    const NpWorkspace ws1 = make_workspace(d1);
    const Eigen::MatrixXcd direct = r_jl_direct(ws1, lambda1, spectrum, z, beta);
    const CgptSet set = cgpt_set(ws1, lambda1, 2);
    const Eigen::MatrixXcd series = r_jl_series(cc, set, spectrum.eigenvalues, 2);
    errors.push_back((series - direct).norm());
    relative.push_back((series - direct).norm() / direct.norm());
  }
  // truncation after m+n <= 2 leaves an absolute remainder O(delta^3)
  const double slope = std::log(errors[0] / errors[1]) / std::log(2.0);
  CHECK(slope > 2.7);
  CHECK(relative[1] < 1e-2);
}

TEST_CASE("overlapping particles are refused by the direct assembly") {
  const BoundaryCurve d1 = make_ellipse(0.4, 0.4, {0, 0}, 64);
  const NpWorkspace ws1 = make_workspace(d1);
  const BoundaryCurve ellipse = make_ellipse(1.0, 2.0, {0, 0}, 64);
  const NPSpectrum spectrum = np_spectrum(ellipse, 2);
  CHECK_THROWS_AS(r_jl_direct(ws1, Complex(1.0, 0.0), spectrum, {1.35, 0.0}, 0.0),
                  regime_error);
}

TEST_CASE("perturbation chains match the explicit index sums") {
  std::mt19937 rng(43);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int jn = 4;
  Eigen::MatrixXcd r(jn, jn);
  for (int a = 0; a < jn; ++a)
    for (int b = 0; b < jn; ++b) r(a, b) = 0.05 * Complex(unit(rng), unit(rng));
  Eigen::VectorXd eigs(jn);
  eigs << 0.4, 0.1, -0.2, -0.35;
  const int j = 1;

  Complex chain1 = r(j, j);
  Complex chain2(0, 0), chain3(0, 0);
  for (int l = 0; l < jn; ++l) {
    if (l == j) continue;
    chain2 += r(j, l) * r(l, j) / (eigs[j] - eigs[l]);
    for (int l2 = 0; l2 < jn; ++l2) {
      if (l2 == j) continue;
      chain3 += r(j, l2) * r(l2, l) * r(l, j) / ((eigs[j] - eigs[l]) * (eigs[j] - eigs[l2]));
    }
  }
  CHECK(std::abs(shift_p(r, eigs, j, 1) - chain1) < 1e-15);
  CHECK(std::abs(shift_p(r, eigs, j, 2) - (chain1 + chain2)) < 1e-15);
  CHECK(std::abs(shift_p(r, eigs, j, 3) - (chain1 + chain2 + chain3)) < 1e-15);
}

TEST_CASE("near-degenerate spectrum stops the shift series") {
  Eigen::MatrixXcd r = Eigen::MatrixXcd::Identity(3, 3) * 0.01;
  Eigen::VectorXd eigs(3);
  eigs << 0.4, 0.4 + 1e-5, -0.2;
  CHECK_THROWS_AS(shift_p(r, eigs, 0, 2), degenerate_eigenvalue_error);
  CHECK_NOTHROW(shift_p(r, eigs, 0, 1));
  CHECK_NOTHROW(shift_p(r, eigs, 0, 2, 1e-6));
}

TEST_CASE("coupled tensor reduces to the static blocks without shifts") {
  const BoundaryCurve ellipse = make_ellipse(1.0, 2.0, {0, 0}, 192);
  const NPSpectrum spectrum = np_spectrum(ellipse, 8);
  const PtNumerators nums = pt_numerators(spectrum);
  const Complex lambda(0.8, 0.0);
  const Eigen::Matrix2cd viaspec =
      coupled_pt(nums, spectrum.eigenvalues, Eigen::VectorXcd::Zero(8), lambda);
  const Eigen::Matrix2cd analytic = ellipse_pt_analytic(lambda, 1.0, 2.0);
  CHECK((viaspec - analytic).cwiseAbs().maxCoeff() < 1e-7 * analytic.cwiseAbs().maxCoeff());
}

TEST_CASE("sweep recovers the pole of a lone resonance") {
  PtNumerators nums;
  nums.nu_proj.resize(2, 1);
  nums.x_proj.resize(2, 1);
  nums.nu_proj << 1.0, 0.0;
  nums.x_proj << 1.0, 0.0;
  Eigen::VectorXd eigs(1);
  eigs << -1.0 / 6.0;
  Eigen::VectorXcd shifts(1);
  shifts << Complex(3e-3, 2e-5);

  SweepGrid grid;
  grid.re_min = eigs[0] - shifts[0].real() - 0.02;
  grid.re_max = eigs[0] - shifts[0].real() + 0.02;
  grid.count = 801;
  grid.im = 1e-4;
  const ResonanceSweep sweep = sweep_and_peak(nums, eigs, shifts, grid, 0);
  CHECK(std::abs(sweep.lambda_r - (eigs[0] - shifts[0].real())) < 1e-10);
  CHECK(sweep.shift == Approx(shifts[0].real()).epsilon(1e-6));

  // peak outside the window
  grid.re_min = eigs[0] + 0.01;
  grid.re_max = eigs[0] + 0.05;
  CHECK_THROWS_AS(sweep_and_peak(nums, eigs, shifts, grid, 0), grid_coverage_error);
}

TEST_CASE("twin resonances in one window are flagged") {
  PtNumerators nums;
  nums.nu_proj.resize(2, 2);
  nums.x_proj.resize(2, 2);
  nums.nu_proj << 1.0, 0.9, 0.0, 0.0;
  nums.x_proj << 1.0, 0.9, 0.0, 0.0;
  Eigen::VectorXd eigs(2);
  eigs << -0.1, 0.1;
  const Eigen::VectorXcd shifts = Eigen::VectorXcd::Zero(2);
  SweepGrid grid;
  grid.re_min = -0.3;
  grid.re_max = 0.3;
  grid.count = 2001;
  grid.im = 1e-3;
  CHECK_THROWS_AS(sweep_and_peak(nums, eigs, shifts, grid, 0), ambiguous_peak_error);
}

TEST_CASE("sweep measurement agrees with the series shift") {
  std::mt19937 rng(47);
  const FourierRadius profile = oracles::random_profile(rng, 3, 0.3);
  const BoundaryCurve unit = make_fourier_shape(profile, {0, 0}, 96);
  const BoundaryCurve d1 = scale_translate(unit, 0.15, {0, 0});
  const NpWorkspace ws1 = make_workspace(d1);
  const BoundaryCurve ellipse = make_ellipse(1.0, 2.0, {0, 0}, 128);
  const NPSpectrum spectrum = np_spectrum(ellipse, 6);
  const PtNumerators nums = pt_numerators(spectrum);

  const double theta = 0.4;
  const Eigen::Vector2d z(3.5 * std::cos(theta), 3.5 * std::sin(theta));
  const Measurement m =
      measure_at_position(ws1, Complex(1.0, 0.0), spectrum, nums, z, theta, 0);
  CHECK(m.predicted.real() != 0.0);
  CHECK(std::abs(m.shift - m.predicted.real()) <
        std::max(1e-7, 1e-2 * std::abs(m.predicted.real())));
  CHECK(m.lambda_r == Approx(spectrum.eigenvalues[0] - m.shift).margin(1e-12));
}

TEST_CASE("drude map and its inverse") {
  const double omega = 0.5, wp = 1.2, gamma = 0.02, epsm = 1.5;
  const Complex lambda = drude_lambda(omega, wp, gamma, epsm);
  const Complex eps = epsm * (2.0 * lambda + 1.0) / (2.0 * lambda - 1.0);
  const Complex expected = 1.0 - wp * wp / (omega * Complex(omega, gamma));
  CHECK(std::abs(eps - expected) < 1e-12 * std::abs(expected));

  // transparent limit: lambda -> (1 + eps_m)/(2(1 - eps_m))
  const Complex far = drude_lambda(1e6, wp, gamma, epsm);
  CHECK(std::abs(far - Complex((1.0 + epsm) / (2.0 * (1.0 - epsm)), 0.0)) < 1e-3);
  CHECK_THROWS_AS(drude_lambda(-1.0, wp, gamma), std::invalid_argument);
}
