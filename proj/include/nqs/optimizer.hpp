#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nqs/ansatz.hpp"
#include "nqs/estimators.hpp"
#include "nqs/hamiltonian.hpp"
#include "nqs/krylov.hpp"

namespace nqs {

inline constexpr double kHartreeToKcalPerMol = 627.509474;

/// Stream used to derive the ansatz initialization seed from a run seed.
inline constexpr std::uint64_t kInitSeedStream = 0x616e;

enum class Method { kIrl, kSl, kAdam };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Eigen::VectorXd first;
  Eigen::VectorXd second;
  long t = 0;  ///< number of updates applied
};

/// Scales base * 2^e for e in [min_exponent, max_exponent].
struct LineSearchGrid {
  int min_exponent = -6;
  int max_exponent = 1;
  double base = 1.0;

  std::vector<double> scales() const;
};

struct OptimizerConfig {
  Method method = Method::kIrl;
  int m = 20;
  double tol = 1e-12;
  int max_restarts = 500;
  int max_outer_steps = 10;
  double convergence_eps = 1e-10;
  LineSearchGrid line_search;
  AdamHyper adam;
  int sl_iterations = 100;
  BatchMode batch = ExactMode{};
  std::uint64_t seed = 111;
  bool record_timing = true;
};

struct TrajectoryRecord {
  int step = 0;
  double energy = 0.0;        ///< Hartree, at the start of the step
  double err_ha = 0.0;        ///< |E - E_ref|, NaN without a reference
  double err_kcal = 0.0;
  double lambda_min = 0.0;    ///< NaN when not computed
  double step_scale = 0.0;
  long matvecs = 0;
  double wall_ms = 0.0;
};

struct OuterStep {
  AnsatzParameters params;
  double lambda_min = 0.0;
  double step_scale = 0.0;
  double energy_before = 0.0;
  double energy_after = 0.0;
  double direction_dot_gradient = 0.0;
  long matvecs = 0;
  bool solver_converged = false;
  bool stalled = false;
  bool converged = false;  ///< |lambda_min| < convergence_eps, no update applied
};

/// One IRL (or SL) update: build a batch, solve for the lowest H_eff
/// eigenpair, orient it downhill, and line-search the step length.
OuterStep irl_outer_step(const AnsatzParameters& params, const MolecularIntegrals& ham,
                         const OptimizerConfig& config, int step_index);

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& gradient, AdamState& state,
               const AdamHyper& hyper);

struct OptimizationResult {
  std::vector<TrajectoryRecord> records;
  AnsatzParameters final_params;
  bool converged = false;
  bool stalled = false;
  int steps_taken = 0;  ///< parameter updates applied
  long total_matvecs = 0;
  long gradient_evaluations = 0;
  std::string error;  ///< non-empty when the run aborted
};

using RecordSink = std::function<void(const TrajectoryRecord&)>;

/// `reference_energy` feeds the err columns. `sink` sees each record as it is made.
OptimizationResult run_optimization(const MolecularIntegrals& ham, const AnsatzParameters& initial,
                                    const OptimizerConfig& config,
                                    std::optional<double> reference_energy,
                                    const RecordSink& sink = {});

}  // namespace nqs
