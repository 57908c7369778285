#include "nqs/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nqs/diagnostics.hpp"
#include "nqs/rng.hpp"

namespace nqs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// stream ids for derive_seed
constexpr std::uint64_t kBatchStream = 1;
constexpr std::uint64_t kSolverStream = 2;
constexpr std::uint64_t kLineSearchStream = 3;

BatchMode mode_for_step(const BatchMode& mode, std::uint64_t seed, int step, std::uint64_t stream) {
  if (std::holds_alternative<ExactMode>(mode)) return mode;
  StochasticMode sm = std::get<StochasticMode>(mode);
  sm.seed = derive_seed(derive_seed(seed, stream), static_cast<std::uint64_t>(step));
  return sm;
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::kIrl: return "irl";
    case Method::kSl: return "sl";
    case Method::kAdam: return "adam";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "irl") return Method::kIrl;
  if (s == "sl") return Method::kSl;
  if (s == "adam") return Method::kAdam;
  throw std::invalid_argument("unknown method '" + s + "' (expected irl, sl or adam)");
}

std::vector<double> LineSearchGrid::scales() const {
  if (min_exponent > max_exponent) throw std::invalid_argument("line search: empty exponent range");
  std::vector<double> out;
  for (int e = min_exponent; e <= max_exponent; ++e) out.push_back(std::ldexp(base, e));
  return out;
}

OuterStep irl_outer_step(const AnsatzParameters& params, const MolecularIntegrals& ham,
                         const OptimizerConfig& config, int step_index) {
  const BatchMode mode = mode_for_step(config.batch, config.seed, step_index, kBatchStream);
  const SampleBatch batch = build_batch(params, ham, mode);
  const EnergyEstimate energy = estimate_energy(batch);
  const Eigen::VectorXd grad = energy_gradient(batch, energy);

  const Eigen::Index p = params.theta.size();
  long count = 0;
  const MatVec op = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    y = heff_matvec(batch, energy, x);
    ++count;
  };
  const std::uint64_t solver_seed =
      derive_seed(derive_seed(config.seed, kSolverStream), static_cast<std::uint64_t>(step_index));

  RitzPair pair;
  if (config.method == Method::kSl) {
    pair = sl_smallest(op, p, SlOptions{config.sl_iterations, solver_seed});
  } else if (config.method == Method::kIrl) {
    pair = irl_smallest(op, p, IrlOptions{config.m, config.tol, config.max_restarts, solver_seed});
  } else {
    throw std::invalid_argument("irl_outer_step: method must be irl or sl");
  }

  OuterStep out;
  out.params = params;
  out.lambda_min = pair.lambda;
  out.matvecs = count;
  out.solver_converged = pair.converged;
  out.energy_before = energy.mean;
  out.energy_after = energy.mean;

  if (std::abs(pair.lambda) < config.convergence_eps) {
    out.converged = true;
    return out;
  }

  Eigen::VectorXd d = pair.y;
  double dot = d.dot(grad);
  if (dot > 0.0) {
    d = -d;
    dot = -dot;
  }
  out.direction_dot_gradient = dot;

  // Trial energies share one sample stream so the comparison is paired.
  const BatchMode ls_mode = mode_for_step(config.batch, config.seed, step_index, kLineSearchStream);
  const double e_ref =
      std::holds_alternative<ExactMode>(ls_mode) ? energy.mean : evaluate_energy(params, ham, ls_mode).mean;
  double best_e = e_ref;
  double best_s = 0.0;
  AnsatzParameters trial = params;
  for (double s : config.line_search.scales()) {
    trial.theta = params.theta + s * d;
    const double e = evaluate_energy(trial, ham, ls_mode).mean;
    if (std::isfinite(e) && e < best_e) {
      best_e = e;
      best_s = s;
    }
  }
  if (best_s == 0.0) {
    out.stalled = true;
    return out;
  }
  out.step_scale = best_s;
  out.params.theta = params.theta + best_s * d;
  out.energy_after = best_e;
  return out;
}

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& gradient, AdamState& state,
               const AdamHyper& hyper) {
  if (gradient.size() != theta.size()) throw std::invalid_argument("adam_step: size mismatch");
  if (state.first.size() != theta.size()) {
    state.first = Eigen::VectorXd::Zero(theta.size());
    state.second = Eigen::VectorXd::Zero(theta.size());
    state.t = 0;
  }
  ++state.t;
  state.first = hyper.beta1 * state.first + (1.0 - hyper.beta1) * gradient;
  state.second = hyper.beta2 * state.second + (1.0 - hyper.beta2) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
  const Eigen::ArrayXd m_hat = state.first.array() / c1;
  const Eigen::ArrayXd v_hat = state.second.array() / c2;
  theta.array() -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
}

OptimizationResult run_optimization(const MolecularIntegrals& ham, const AnsatzParameters& initial,
                                    const OptimizerConfig& config,
                                    std::optional<double> reference_energy,
                                    const RecordSink& sink) {
  if (config.max_outer_steps < 0) throw std::invalid_argument("max_outer_steps must be >= 0");
  if (config.m < 1) throw std::invalid_argument("Krylov dimension m must be >= 1");
  if (!(config.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (!(config.convergence_eps > 0.0)) throw std::invalid_argument("convergence eps must be positive");
  config.line_search.scales();

  OptimizationResult result;
  result.final_params = initial;
  AdamState adam;

  auto make_record = [&](int step, double energy) {
    TrajectoryRecord r;
    r.step = step;
    r.energy = energy;
    if (reference_energy) {
      r.err_ha = std::abs(energy - *reference_energy);
      r.err_kcal = r.err_ha * kHartreeToKcalPerMol;
    } else {
      r.err_ha = kNaN;
      r.err_kcal = kNaN;
    }
    r.lambda_min = kNaN;
    return r;
  };

  for (int step = 0;; ++step) {
    const auto t0 = Clock::now();
    const bool last = step == config.max_outer_steps;

    if (config.method == Method::kAdam || last) {
      const BatchMode mode = mode_for_step(config.batch, config.seed, step, kBatchStream);
      const SampleBatch batch = build_batch(result.final_params, ham, mode);
      const EnergyEstimate energy = estimate_energy(batch);
      TrajectoryRecord r = make_record(step, energy.mean);
      if (!last) {
        const Eigen::VectorXd grad = energy_gradient(batch, energy);
        ++result.gradient_evaluations;
        adam_step(result.final_params.theta, grad, adam, config.adam);
        if (!result.final_params.theta.allFinite()) {
          result.error = "adam produced non-finite parameters at step " + std::to_string(step);
        }
        r.step_scale = config.adam.learning_rate;
        ++result.steps_taken;
      }
      r.wall_ms = config.record_timing ? elapsed_ms(t0) : 0.0;
      result.records.push_back(r);
      if (sink) sink(r);
      if (last || !result.error.empty()) break;
      continue;
    }

    const OuterStep os = irl_outer_step(result.final_params, ham, config, step);
    TrajectoryRecord r = make_record(step, os.energy_before);
    r.lambda_min = os.lambda_min;
    r.step_scale = os.step_scale;
    r.matvecs = os.matvecs;
    r.wall_ms = config.record_timing ? elapsed_ms(t0) : 0.0;
    result.records.push_back(r);
    if (sink) sink(r);
    result.total_matvecs += os.matvecs;
    if (!os.solver_converged && config.method == Method::kIrl) {
      warn("outer step " + std::to_string(step) + ": Krylov solver hit its restart budget");
    }
    if (os.converged) {
      result.converged = true;
      break;
    }
    if (os.stalled) {
      // Exact mode would see the same batch again.
      if (std::holds_alternative<ExactMode>(config.batch)) {
        result.stalled = true;
        break;
      }
      continue;
    }
    result.final_params = os.params;
    ++result.steps_taken;
  }
  return result;
}

}  // namespace nqs
