#include "nqs/estimators.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "nqs/diagnostics.hpp"

namespace nqs {

namespace {

using AmplitudeTable = std::unordered_map<std::uint64_t, std::complex<double>>;

struct Evaluated {
  std::vector<OccupationVector> configs;
  Eigen::VectorXd weights;
  std::size_t n_samples = 0;
  bool exact = true;
};

// Chooses configurations and their weights.
Evaluated select_configs(const AnsatzParameters& params, const BatchMode& mode, std::uint64_t cap) {
  Evaluated out;
  if (std::holds_alternative<ExactMode>(mode)) {
    out.configs = enumerate_sector(params.arch.sector, cap);
    out.n_samples = out.configs.size();
    out.exact = true;
    return out;
  }
  const auto& sm = std::get<StochasticMode>(mode);
  if (sm.n_samples == 0) throw std::invalid_argument("build_batch: stochastic mode needs N_s >= 1");
  std::map<std::uint64_t, std::size_t> counts;
  for (const OccupationVector& x : sample(params, sm.n_samples, sm.seed)) ++counts[x.bits()];
  out.configs.reserve(counts.size());
  out.weights.resize(static_cast<Eigen::Index>(counts.size()));
  Eigen::Index k = 0;
  for (const auto& [bits, c] : counts) {
    out.configs.emplace_back(bits, params.arch.n_spin_orbitals());
    out.weights(k++) = static_cast<double>(c) / static_cast<double>(sm.n_samples);
  }
  out.n_samples = sm.n_samples;
  out.exact = false;
  return out;
}

// log psi for every configuration in `configs`, in parallel.
std::vector<LogAmplitude> amplitudes_of(const AnsatzParameters& params,
                                        const std::vector<OccupationVector>& configs) {
  std::vector<LogAmplitude> out(configs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(configs.size()); ++k) {
    out[k] = log_amplitude(params, configs[k]);
  }
  return out;
}

// Local energies for `configs` given their connected lists.
Eigen::VectorXcd local_energies_of(const AnsatzParameters& params, const MolecularIntegrals& ham,
                                   const std::vector<OccupationVector>& configs,
                                   const std::vector<LogAmplitude>& own, bool table_is_complete) {
  std::vector<std::vector<ConnectedEntry>> connected(configs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(configs.size()); ++k) {
    connected[k] = connected_configurations(ham, configs[k]);
  }

  AmplitudeTable table;
  for (std::size_t k = 0; k < configs.size(); ++k) table.emplace(configs[k].bits(), own[k].value());
  if (!table_is_complete) {
    std::vector<OccupationVector> missing;
    for (const auto& list : connected) {
      for (const ConnectedEntry& e : list) {
        if (table.emplace(e.config.bits(), std::complex<double>{}).second) missing.push_back(e.config);
      }
    }
    const auto amps = amplitudes_of(params, missing);
    for (std::size_t k = 0; k < missing.size(); ++k) table[missing[k].bits()] = amps[k].value();
  }

  const LogPsiFn lookup = [&table](const OccupationVector& x) { return table.at(x.bits()); };
  Eigen::VectorXcd eloc(static_cast<Eigen::Index>(configs.size()));
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(configs.size()); ++k) {
    eloc(k) = local_energy(connected[k], own[k].value(), lookup);
  }
  return eloc;
}

Eigen::VectorXd exact_weights(const std::vector<LogAmplitude>& amps) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(amps.size()));
  for (std::size_t k = 0; k < amps.size(); ++k) w(k) = std::exp(2.0 * amps[k].log_prob_half);
  const double z = w.sum();
  if (!(z > 0.0)) throw std::runtime_error("build_batch: wavefunction has zero norm on the sector");
  return w / z;
}

void require_nonempty(const SampleBatch& batch, const char* op) {
  if (batch.size() == 0) throw std::invalid_argument(std::string(op) + ": empty batch");
}

}  // namespace

SampleBatch build_batch(const AnsatzParameters& params, const MolecularIntegrals& ham,
                        const BatchMode& mode, std::uint64_t enumeration_cap) {
  if (params.arch.n_spin_orbitals() != ham.n_spin_orbitals()) {
    throw std::invalid_argument("build_batch: ansatz and Hamiltonian widths differ");
  }
  Evaluated sel = select_configs(params, mode, enumeration_cap);
  const Eigen::Index n = static_cast<Eigen::Index>(sel.configs.size());
  const Eigen::Index p = params.arch.n_params();

  SampleBatch batch;
  batch.exact = sel.exact;
  batch.n_samples = sel.n_samples;
  batch.log_derivs.resize(n, p);
  std::vector<LogAmplitude> own(sel.configs.size());
#pragma omp parallel
  {
    Eigen::VectorXcd g;
#pragma omp for schedule(dynamic, 8)
    for (Eigen::Index k = 0; k < n; ++k) {
      own[k] = log_amplitude_and_derivative(params, sel.configs[k], g);
      batch.log_derivs.row(k) = g.transpose();
    }
  }
  batch.weights = sel.exact ? exact_weights(own) : sel.weights;
  batch.local_energies = local_energies_of(params, ham, sel.configs, own, sel.exact);
  batch.configs = std::move(sel.configs);
  return batch;
}

EnergyEstimate evaluate_energy(const AnsatzParameters& params, const MolecularIntegrals& ham,
                               const BatchMode& mode, std::uint64_t enumeration_cap) {
  Evaluated sel = select_configs(params, mode, enumeration_cap);
  const auto own = amplitudes_of(params, sel.configs);
  SampleBatch batch;
  batch.exact = sel.exact;
  batch.n_samples = sel.n_samples;
  batch.weights = sel.exact ? exact_weights(own) : sel.weights;
  batch.local_energies = local_energies_of(params, ham, sel.configs, own, sel.exact);
  batch.configs = std::move(sel.configs);
  return estimate_energy(batch);
}

EnergyEstimate estimate_energy(const SampleBatch& batch) {
  require_nonempty(batch, "estimate_energy");
  const std::complex<double> mean_c = batch.weights.cast<std::complex<double>>().dot(batch.local_energies);
  EnergyEstimate e;
  e.mean = mean_c.real();
  e.imag_mean = mean_c.imag();
  e.variance = batch.weights.dot((batch.local_energies.array() - e.mean).abs2().matrix());
  e.std_error = batch.exact ? 0.0 : std::sqrt(e.variance / static_cast<double>(batch.n_samples));
  if (batch.exact && std::abs(e.imag_mean) > 1e-8) {
    warn("estimate_energy: imaginary part of the exact energy is " + std::to_string(e.imag_mean));
  }
  return e;
}

Eigen::VectorXd energy_gradient(const SampleBatch& batch, const EnergyEstimate& energy) {
  require_nonempty(batch, "energy_gradient");
  // centered first, so constant E_loc gives exactly zero
  const Eigen::VectorXcd y =
      batch.weights.cast<std::complex<double>>().cwiseProduct((batch.local_energies.array() - energy.mean).matrix());
  return 2.0 * (batch.log_derivs.adjoint() * y).real();
}

Eigen::VectorXd heff_matvec(const SampleBatch& batch, const EnergyEstimate& energy,
                            const Eigen::VectorXd& v) {
  require_nonempty(batch, "heff_matvec");
  if (v.size() != batch.n_params()) {
    throw std::invalid_argument("heff_matvec: vector length " + std::to_string(v.size()) +
                                " does not match parameter count " +
                                std::to_string(batch.n_params()));
  }
  const Eigen::VectorXcd w = batch.weights.cast<std::complex<double>>();
  const Eigen::VectorXcd o_mean = batch.log_derivs.transpose() * w;  // <O>
  const Eigen::VectorXcd vc = v.cast<std::complex<double>>();
  // c_n = sum_j dO_nj v_j
  const std::complex<double> mean_proj = o_mean.cwiseProduct(vc).sum();
  const Eigen::VectorXcd c = (batch.log_derivs * vc).array() - mean_proj;
  const Eigen::VectorXd scale =
      batch.weights.cwiseProduct((batch.local_energies.real().array() - energy.mean).matrix());
  const Eigen::VectorXcd y = scale.cast<std::complex<double>>().cwiseProduct(c);
  // dO^H y = O^H y - conj(<O>) sum(y)
  const Eigen::VectorXcd r = batch.log_derivs.adjoint() * y - o_mean.conjugate() * y.sum();
  return r.real();
}

DenseHeff dense_heff(const SampleBatch& batch, const EnergyEstimate& energy, Eigen::Index cap) {
  require_nonempty(batch, "dense_heff");
  if (batch.n_params() > cap) {
    throw CapExceeded("dense_heff: " + std::to_string(batch.n_params()) +
                      " parameters exceed the dense cap of " + std::to_string(cap));
  }
  const Eigen::VectorXcd w = batch.weights.cast<std::complex<double>>();
  const Eigen::RowVectorXcd o_mean = (batch.log_derivs.transpose() * w).transpose();
  const Eigen::MatrixXcd d_o = batch.log_derivs.rowwise() - o_mean;
  const Eigen::VectorXcd scale = w.cwiseProduct((batch.local_energies.array() - energy.mean).matrix());
  const Eigen::MatrixXd a = (d_o.adjoint() * scale.asDiagonal() * d_o).real();
  DenseHeff out;
  out.asymmetry = (a - a.transpose()).cwiseAbs().maxCoeff();
  out.matrix = 0.5 * (a + a.transpose());
  return out;
}

Eigen::MatrixXd dense_qgt(const SampleBatch& batch, Eigen::Index cap) {
  require_nonempty(batch, "dense_qgt");
  if (batch.n_params() > cap) {
    throw CapExceeded("dense_qgt: " + std::to_string(batch.n_params()) +
                      " parameters exceed the dense cap of " + std::to_string(cap));
  }
  const Eigen::VectorXcd w = batch.weights.cast<std::complex<double>>();
  const Eigen::RowVectorXcd o_mean = (batch.log_derivs.transpose() * w).transpose();
  const Eigen::MatrixXcd d_o = batch.log_derivs.rowwise() - o_mean;
  const Eigen::MatrixXd s = (d_o.adjoint() * w.asDiagonal() * d_o).real();
  return 0.5 * (s + s.transpose());
}

}  // namespace nqs
