#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "psense/bem.hpp"

using namespace psense;
using Catch::Approx;

namespace {

Eigen::VectorXd sample(const BoundaryCurve& curve, const std::function<double(double)>& f) {
  Eigen::VectorXd out(curve.n());
  const Eigen::VectorXd t = curve.params();
  for (int i = 0; i < curve.n(); ++i) out[i] = f(t[i]);
  return out;
}

}  // namespace

TEST_CASE("single layer on a circle reproduces the Fourier symbol") {
  const double radius = 1.5;
  const BoundaryCurve circle = make_ellipse(radius, radius, {0, 0}, 128);
  const Eigen::MatrixXd s = single_layer_matrix(circle);

  // S[1] = R log R, S[cos k t] = -R/(2k) cos k t, same for sin
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(circle.n());
  CHECK(((s * ones).array() - radius * std::log(radius)).abs().maxCoeff() < 1e-12);
  for (int k = 1; k <= 5; ++k) {
    const Eigen::VectorXd ck = sample(circle, [&](double t) { return std::cos(k * t); });
    const Eigen::VectorXd sk = sample(circle, [&](double t) { return std::sin(k * t); });
    CHECK((s * ck + radius / (2.0 * k) * ck).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s * sk + radius / (2.0 * k) * sk).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("neumann-poincare operator on a circle") {
  const double radius = 0.8;
  const BoundaryCurve circle = make_ellipse(radius, radius, {0, 0}, 64);
  const Eigen::MatrixXd k = np_matrix(circle);

  // kernel is constant 1/(4 pi R): K*[1] = 1/2, K* kills mean-zero data
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(circle.n());
  CHECK(((k * ones).array() - 0.5).abs().maxCoeff() < 1e-13);
  const Eigen::VectorXd c2 = sample(circle, [](double t) { return std::cos(2 * t); });
  CHECK((k * c2).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("spectrum of the ellipse") {
  const BoundaryCurve ellipse = make_ellipse(1.0, 2.0, {0, 0}, 256);
  const NPSpectrum spectrum = np_spectrum(ellipse, 6);

  // eigenvalues +-(1/2) r^j with r = (b-a)/(b+a) = 1/3, ordered by decreasing
  // magnitude and ascending value within a +- pair
  const double r = 1.0 / 3.0;
  Eigen::VectorXd expected(6);
  expected << -0.5 * r, 0.5 * r, -0.5 * r * r, 0.5 * r * r, -0.5 * r * r * r, 0.5 * r * r * r;
  for (int j = 0; j < 6; ++j)
    CHECK(spectrum.eigenvalues[j] == Approx(expected[j]).margin(1e-10));

  // densities are mean-free and normalized in the energy product
  for (int j = 0; j < 6; ++j) {
    const Eigen::VectorXd phi = spectrum.densities.col(j);
    CHECK(std::abs(phi.dot(spectrum.weights)) < 1e-10);
    CHECK(phi.dot(spectrum.gram * phi) == Approx(1.0).epsilon(1e-10));
  }
  // orthogonality in the energy product
  const Eigen::MatrixXd overlap =
      spectrum.densities.transpose() * spectrum.gram * spectrum.densities;
  CHECK((overlap - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("spectrum is scale invariant") {
  const BoundaryCurve big = make_ellipse(1.0, 2.0, {0, 0}, 128);
  const BoundaryCurve small = scale_translate(big, 0.35, {1.0, 2.0});
  const NPSpectrum a = np_spectrum(big, 4);
  const NPSpectrum b = np_spectrum(small, 4);
  CHECK((a.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("energy gram matrix is positive on mean-free densities") {
  std::mt19937 rng(7);
  const FourierRadius profile = oracles::random_profile(rng, 5, 0.4);
  const BoundaryCurve curve = make_fourier_shape(profile, {0.4, -0.1}, 128);
  const NpWorkspace ws = make_workspace(curve);

  CHECK((ws.gram - ws.gram.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  const Eigen::MatrixXd projected =
      ws.meanzero_basis.transpose() * ws.gram * ws.meanzero_basis;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(projected);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("adjoint pair through the arclength weights") {
  std::mt19937 rng(11);
  const FourierRadius profile = oracles::random_profile(rng, 4, 0.3);
  const BoundaryCurve curve = make_fourier_shape(profile, {0, 0}, 96);
  const NpWorkspace ws = make_workspace(curve);

  const Eigen::MatrixXd w = ws.weights.asDiagonal();
  const Eigen::MatrixXd lhs = w * ws.np_transpose;
  const Eigen::MatrixXd rhs = ws.np.transpose() * w;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-13 * ws.np.cwiseAbs().maxCoeff());
}

TEST_CASE("resolvent solves the second-kind system") {
  const BoundaryCurve circle = make_ellipse(1.1, 1.1, {0, 0}, 64);
  const NpWorkspace ws = make_workspace(circle);

  // on the circle K* annihilates mean-zero data, so (lambda - K*)^{-1} f = f/lambda
  const Eigen::VectorXd f = sample(circle, [](double t) { return std::cos(3 * t); });
  const Eigen::VectorXcd phi = solve_second_kind(ws, Complex(0.8, 0.0), f.cast<Complex>());
  CHECK((phi - f.cast<Complex>() / 0.8).cwiseAbs().maxCoeff() < 1e-12);

  // solving at a spectral value must be refused
  const BoundaryCurve ellipse = make_ellipse(1.0, 2.0, {0, 0}, 128);
  const NpWorkspace wse = make_workspace(ellipse);
  const double lambda1 = wse.meanzero_eigs[0];
  CHECK_THROWS_AS(make_resolvent(wse, Complex(lambda1, 0.0)), resonance_proximity_error);
  CHECK_NOTHROW(make_resolvent(wse, Complex(lambda1, 1e-4)));
}

TEST_CASE("tangential derivative is spectrally accurate") {
  const double radius = 2.0;
  const BoundaryCurve circle = make_ellipse(radius, radius, {0, 0}, 128);
  const Eigen::MatrixXd dt = tangent_derivative_matrix(circle);
  for (int k = 1; k <= 4; ++k) {
    const Eigen::VectorXd ck = sample(circle, [&](double t) { return std::cos(k * t); });
    const Eigen::VectorXd dk =
        sample(circle, [&](double t) { return -k * std::sin(k * t) / radius; });
    CHECK((dt * ck - dk).cwiseAbs().maxCoeff() < 1e-11);
  }

  std::mt19937 rng(3);
  const FourierRadius profile = oracles::random_profile(rng, 3, 0.3);
  const BoundaryCurve curve = make_fourier_shape(profile, {0, 0}, 256);
  const Eigen::MatrixXd dts = tangent_derivative_matrix(curve);
  const Eigen::VectorXd g = sample(curve, [](double t) { return std::exp(std::cos(t)); });
  Eigen::VectorXd dg_ds(curve.n());
  const Eigen::VectorXd params = curve.params();
  for (int i = 0; i < curve.n(); ++i)
    dg_ds[i] = -std::sin(params[i]) * std::exp(std::cos(params[i])) / curve.speed[i];
  CHECK((dts * g - dg_ds).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("normal derivative of the double layer via the surface slash product") {
  const double radius = 1.3;
  const BoundaryCurve circle = make_ellipse(radius, radius, {0, 0}, 128);
  const NpWorkspace ws = make_workspace(circle);
  // on the circle d_nu D[cos k t] = k/(2R) cos k t
  for (int k = 1; k <= 4; ++k) {
    const Eigen::VectorXcd ck =
        sample(circle, [&](double t) { return std::cos(k * t); }).cast<Complex>();
    const Eigen::VectorXcd flux = dn_double_layer(ws, ck);
    CHECK((flux - (k / (2.0 * radius)) * ck).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("single layer field of a circle density") {
  const double radius = 1.0;
  const BoundaryCurve circle = make_ellipse(radius, radius, {0, 0}, 96);
  const Eigen::VectorXcd density =
      sample(circle, [](double t) { return std::cos(t); }).cast<Complex>();

  // exterior field of cos theta is -R^2 cos theta_x/(2 |x|)
  Eigen::Matrix2Xd targets(2, 3);
  targets.col(0) << 3.0, 0.0;
  targets.col(1) << 0.0, -2.5;
  targets.col(2) << 1.8, 1.8;
  const Eigen::VectorXcd vals = eval_single_layer(circle, density, targets);
  for (int i = 0; i < 3; ++i) {
    const double r = targets.col(i).norm();
    const double expected = -radius * radius * targets(0, i) / r / (2.0 * r);
    CHECK(std::abs(vals[i] - expected) < 1e-12);
  }

  Eigen::Matrix2Xd close(2, 1);
  close.col(0) << radius + 1e-4, 0.0;
  CHECK_THROWS_AS(eval_single_layer(circle, density, close), regime_error);
}

TEST_CASE("energy norm of the dipole density on the unit circle") {
  const BoundaryCurve circle = make_ellipse(1.0, 1.0, {0, 0}, 64);
  const Eigen::MatrixXd gram = hstar_gram(circle);
  const Eigen::VectorXd phi = sample(circle, [](double t) { return std::cos(t); });
  CHECK(phi.dot(gram * phi) == Approx(M_PI / 2.0).epsilon(1e-12));
}
