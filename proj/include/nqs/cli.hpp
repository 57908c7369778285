#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "nqs/optimizer.hpp"

namespace nqs {

struct RunConfig {
  std::string fcidump_path;
  std::string method = "irl";
  int m = 20;
  double tol = 1e-12;
  double convergence_eps = 1e-10;
  int max_outer_steps = 10;
  int max_restarts = 500;
  std::string batch = "exact";  // exact | stochastic
  std::size_t n_samples = 10'000;
  std::uint64_t seed = 111;
  int hidden = 2;
  int phase_hidden = 2;
  double adam_lr = 1e-3;
  int sl_iterations = 100;
  std::string out_csv = "trajectory.csv";
  std::string out_json = "summary.json";
  bool timing = true;
};

nlohmann::ordered_json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

OptimizerConfig optimizer_config(const RunConfig& c);

/// Fixed-format CSV row; energies carry 17 significant digits.
std::string csv_header();
std::string csv_row(const TrajectoryRecord& r);

/// Exit codes: 0 converged, 2 not converged, 1 error.
int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_pvc(const std::string& fcidump_path, std::ostream& out, std::ostream& err);
int cmd_fci(const std::string& fcidump_path, const std::string& amplitudes_path, std::ostream& out,
            std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace nqs
