#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nqs/hilbert.hpp"

namespace nqs {

/// Shape of the autoregressive amplitude network and the phase head.
///
/// Conditional network: input is the +-1 encoded prefix (zeros past the
/// current position) concatenated with a one-hot position indicator
/// (2M inputs), one tanh hidden layer of width `hidden`, two logits.
/// Phase head: +-1 encoded full configuration (M inputs), tanh hidden layer
/// of width `phase_hidden`, one scalar output.
struct Architecture {
  Sector sector;
  int hidden = 8;
  int phase_hidden = 8;

  int n_spin_orbitals() const { return sector.n_spin_orbitals; }
  Eigen::Index n_params() const;
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Offsets of each parameter block inside the flat theta vector.
struct ParameterLayout {
  explicit ParameterLayout(const Architecture& arch);

  Eigen::Index w1, b1, w2, b2;  // conditional network
  Eigen::Index wp, bp, wo, bo;  // phase head
  Eigen::Index total;
};

struct AnsatzParameters {
  Architecture arch;
  Eigen::VectorXd theta;

  /// Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] weights from `seed`; the phase
  /// output layer starts at zero.
  static AnsatzParameters initialize(const Architecture& arch, std::uint64_t seed);
};

struct LogAmplitude {
  double log_prob_half = 0.0;  ///< 0.5 * ln p(n)
  double phase = 0.0;          ///< radians

  bool is_zero() const { return log_prob_half == -std::numeric_limits<double>::infinity(); }
  std::complex<double> value() const { return {log_prob_half, phase}; }
  static LogAmplitude zero() { return {-std::numeric_limits<double>::infinity(), 0.0}; }
};

struct ConditionalProbabilities {
  double p0 = 0.0;
  double p1 = 0.0;
};

/// Masked conditional p(n_i | n_<i). `prefix` holds occupations of
/// positions [0, i) in its low bits.
ConditionalProbabilities conditional(const AnsatzParameters& params, std::uint64_t prefix, int i);

/// Raw (unmasked) logits at position i; exposed for tests.
Eigen::Vector2d conditional_logits(const AnsatzParameters& params, std::uint64_t prefix, int i);

std::vector<OccupationVector> sample(const AnsatzParameters& params, std::size_t count,
                                     std::uint64_t seed);

LogAmplitude log_amplitude(const AnsatzParameters& params, const OccupationVector& x);

/// O_k(x) = d ln psi(x) / d theta_k = 0.5 d ln p / d theta_k + i d phi / d theta_k.
Eigen::VectorXcd log_derivative(const AnsatzParameters& params, const OccupationVector& x);

/// Both at once; `grad` is resized to n_params.
LogAmplitude log_amplitude_and_derivative(const AnsatzParameters& params,
                                          const OccupationVector& x, Eigen::VectorXcd& grad);

void save_checkpoint(std::ostream& out, const AnsatzParameters& params);
AnsatzParameters load_checkpoint(std::istream& in);

}  // namespace nqs
