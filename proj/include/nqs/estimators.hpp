#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "nqs/ansatz.hpp"
#include "nqs/hamiltonian.hpp"

namespace nqs {

struct ExactMode {};
struct StochasticMode {
  std::size_t n_samples = 10'000;
  std::uint64_t seed = 0;
};
using BatchMode = std::variant<ExactMode, StochasticMode>;

/// Configurations with weights and per-configuration caches.
///
/// In stochastic mode repeated samples are merged: each distinct
/// configuration carries weight multiplicity / N_s.
struct SampleBatch {
  std::vector<OccupationVector> configs;
  Eigen::VectorXd weights;
  Eigen::VectorXcd local_energies;
  Eigen::MatrixXcd log_derivs;  ///< n_configs x p
  bool exact = true;
  std::size_t n_samples = 0;  ///< N_s (stochastic) or sector size (exact)

  Eigen::Index n_params() const { return log_derivs.cols(); }
  Eigen::Index size() const { return static_cast<Eigen::Index>(configs.size()); }
};

struct EnergyEstimate {
  double mean = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  double imag_mean = 0.0;  ///< Im of the weighted E_loc average; diagnostic only
};

SampleBatch build_batch(const AnsatzParameters& params, const MolecularIntegrals& ham,
                        const BatchMode& mode, std::uint64_t enumeration_cap = kDefaultEnumerationCap);

/// Energy only; skips log-derivatives. Used by line searches.
EnergyEstimate evaluate_energy(const AnsatzParameters& params, const MolecularIntegrals& ham,
                               const BatchMode& mode,
                               std::uint64_t enumeration_cap = kDefaultEnumerationCap);

EnergyEstimate estimate_energy(const SampleBatch& batch);

/// F_k = 2 Re( <O_k^* E_loc> - <O_k^*> E ).
Eigen::VectorXd energy_gradient(const SampleBatch& batch, const EnergyEstimate& energy);

/// Matrix-free H_eff v in O(N_s p), with centered O and centered E_loc.
///
/// Uses Re(E_loc - E) so the operator is exactly the symmetric part of
/// Re <dO^* (E_loc - E) dO>; this is what dense_heff returns.
Eigen::VectorXd heff_matvec(const SampleBatch& batch, const EnergyEstimate& energy,
                            const Eigen::VectorXd& v);

inline constexpr Eigen::Index kDefaultDenseParamCap = 200;

struct DenseHeff {
  Eigen::MatrixXd matrix;     ///< symmetrized
  double asymmetry = 0.0;     ///< max |A - A^T| before symmetrization
};

DenseHeff dense_heff(const SampleBatch& batch, const EnergyEstimate& energy,
                     Eigen::Index cap = kDefaultDenseParamCap);

/// Centered quantum geometric tensor Re( <O^* O> - <O^*><O> ).
Eigen::MatrixXd dense_qgt(const SampleBatch& batch, Eigen::Index cap = kDefaultDenseParamCap);

}  // namespace nqs
