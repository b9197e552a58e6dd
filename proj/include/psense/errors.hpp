#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace psense {

// Error taxonomy. Argument/config mistakes throw std::invalid_argument;
// numerical failures (singular or near-singular systems, degenerate spectra,
// failed peak extraction, stalled descent) derive from numerical_error; inputs
// that fall outside the validity regime of the model (particles too close,
// evaluation too near a boundary) derive from regime_error. The CLI maps the
// three families to distinct exit codes.

class numerical_error : public std::runtime_error {
public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

class regime_error : public std::runtime_error {
public:
  explicit regime_error(const std::string& what) : std::runtime_error(what) {}
};

class resonance_proximity_error : public numerical_error {
public:
  resonance_proximity_error(std::complex<double> lambda, double distance)
      : numerical_error("contrast parameter (" + std::to_string(lambda.real()) + "," +
                        std::to_string(lambda.imag()) + "i) is within " +
                        std::to_string(distance) + " of the discrete spectrum"),
        lambda(lambda),
        distance(distance) {}
  std::complex<double> lambda;
  double distance;
};

class conditioning_error : public numerical_error {
public:
  using numerical_error::numerical_error;
};

class degenerate_eigenvalue_error : public numerical_error {
public:
  degenerate_eigenvalue_error(int j, double gap, double tol)
      : numerical_error("eigenvalue " + std::to_string(j) + " has spectral gap " +
                        std::to_string(gap) + " below tolerance " + std::to_string(tol)),
        j(j),
        gap(gap) {}
  int j;
  double gap;
};

class grid_coverage_error : public numerical_error {
public:
  using numerical_error::numerical_error;
};

class ambiguous_peak_error : public numerical_error {
public:
  using numerical_error::numerical_error;
};

class rank_deficiency_error : public numerical_error {
public:
  using numerical_error::numerical_error;
};

class descent_stall_error : public numerical_error {
public:
  using numerical_error::numerical_error;
};

}  // namespace psense
