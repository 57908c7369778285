#include "nqs/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>

#include "nqs/diagnostics.hpp"
#include "nqs/rng.hpp"

namespace nqs {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// NaN has no JSON spelling
nlohmann::ordered_json num_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

bool reference_available(const Sector& s) { return s.size() <= kDefaultDenseCap; }

}  // namespace

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["fcidump_path"] = c.fcidump_path;
  j["method"] = c.method;
  j["m"] = c.m;
  j["tol"] = c.tol;
  j["convergence_eps"] = c.convergence_eps;
  j["max_outer_steps"] = c.max_outer_steps;
  j["max_restarts"] = c.max_restarts;
  j["batch"] = c.batch;
  j["n_samples"] = c.n_samples;
  j["seed"] = c.seed;
  j["hidden"] = c.hidden;
  j["phase_hidden"] = c.phase_hidden;
  j["adam_lr"] = c.adam_lr;
  j["sl_iterations"] = c.sl_iterations;
  j["out_csv"] = c.out_csv;
  j["out_json"] = c.out_json;
  j["timing"] = c.timing;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("fcidump_path", c.fcidump_path);
  get("method", c.method);
  get("m", c.m);
  get("tol", c.tol);
  get("convergence_eps", c.convergence_eps);
  get("max_outer_steps", c.max_outer_steps);
  get("max_restarts", c.max_restarts);
  get("batch", c.batch);
  get("n_samples", c.n_samples);
  get("seed", c.seed);
  get("hidden", c.hidden);
  get("phase_hidden", c.phase_hidden);
  get("adam_lr", c.adam_lr);
  get("sl_iterations", c.sl_iterations);
  get("out_csv", c.out_csv);
  get("out_json", c.out_json);
  get("timing", c.timing);
  for (const auto& [key, _] : j.items()) {
    if (!to_json(RunConfig{}).contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  }
  return c;
}

OptimizerConfig optimizer_config(const RunConfig& c) {
  OptimizerConfig o;
  o.method = parse_method(c.method);
  o.m = c.m;
  o.tol = c.tol;
  o.convergence_eps = c.convergence_eps;
  o.max_outer_steps = c.max_outer_steps;
  o.max_restarts = c.max_restarts;
  o.adam.learning_rate = c.adam_lr;
  o.sl_iterations = c.sl_iterations;
  o.seed = c.seed;
  o.record_timing = c.timing;
  if (c.batch == "exact") {
    o.batch = ExactMode{};
  } else if (c.batch == "stochastic") {
    if (c.n_samples == 0) throw std::invalid_argument("--ns must be >= 1");
    o.batch = StochasticMode{c.n_samples, c.seed};
  } else {
    throw std::invalid_argument("unknown batch mode '" + c.batch + "' (expected exact or stochastic)");
  }
  return o;
}

std::string csv_header() { return "step,energy_ha,err_ha,err_kcal,lambda_min,step_scale,matvecs,wall_ms"; }

std::string csv_row(const TrajectoryRecord& r) {
  std::ostringstream s;
  s << r.step << ',' << fmt17(r.energy) << ',' << fmt17(r.err_ha) << ',' << fmt17(r.err_kcal) << ','
    << fmt17(r.lambda_min) << ',' << fmt17(r.step_scale) << ',' << r.matvecs << ','
    << fmt17(r.wall_ms);
  return s.str();
}

int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  MolecularIntegrals ham;
  OptimizerConfig opt;
  Architecture arch;
  try {
    opt = optimizer_config(config);
    ham = load_fcidump(config.fcidump_path);
    arch = Architecture{ham.sector(), config.hidden, config.phase_hidden};
    arch.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  std::ofstream csv(config.out_csv);
  if (!csv) {
    err << "error: cannot open " << config.out_csv << " for writing\n";
    return 1;
  }
  csv << csv_header() << '\n' << std::flush;

  const Sector sector = ham.sector();
  nlohmann::ordered_json summary;
  summary["molecule"] = {{"spin_orbitals", sector.n_spin_orbitals},
                         {"electrons", sector.n_electrons()},
                         {"n_up", sector.n_up},
                         {"n_down", sector.n_down},
                         {"pvc", sector.size()}};
  summary["n_params"] = arch.n_params();

  auto write_summary = [&](const std::string& status) -> bool {
    summary["status"] = status;
    summary["config"] = to_json(config);
    std::ofstream js(config.out_json);
    if (!js) return false;
    js << summary.dump(2) << '\n';
    return static_cast<bool>(js);
  };

  int code = 1;
  try {
    std::optional<double> e_ref;
    if (reference_available(sector)) e_ref = dense_fci_ground_state(ham, sector).energy;
    summary["e_fci"] = e_ref ? nlohmann::ordered_json(*e_ref) : nlohmann::ordered_json(nullptr);

    const AnsatzParameters init = AnsatzParameters::initialize(arch, derive_seed(config.seed, kInitSeedStream));
    const auto sink = [&csv](const TrajectoryRecord& r) { csv << csv_row(r) << '\n' << std::flush; };
    const OptimizationResult res = run_optimization(ham, init, opt, e_ref, sink);

    const TrajectoryRecord& last = res.records.back();
    double wall_ms = 0.0;
    long matvecs = 0;
    for (const auto& r : res.records) {
      wall_ms += r.wall_ms;
      matvecs += r.matvecs;
    }
    summary["final_energy"] = last.energy;
    summary["error_ha"] = num_or_null(last.err_ha);
    summary["error_kcal"] = num_or_null(last.err_kcal);
    summary["steps_taken"] = res.steps_taken;
    summary["records"] = res.records.size();
    summary["total_matvecs"] = matvecs;
    summary["gradient_evaluations"] = res.gradient_evaluations;
    summary["wall_seconds"] = wall_ms / 1000.0;
    summary["converged"] = res.converged;
    summary["stalled"] = res.stalled;
    if (!res.error.empty()) summary["error"] = res.error;

    std::string status = res.converged ? "converged" : "not_converged";
    code = res.converged ? 0 : 2;
    if (!res.error.empty()) {
      status = "error";
      code = 1;
    }
    out << "final energy " << fmt17(last.energy) << " Ha, " << status << " after " << res.steps_taken
        << " steps\n";
    if (!write_summary(status)) {
      err << "error: cannot write " << config.out_json << '\n';
      return 1;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    summary["error"] = e.what();
    summary["converged"] = false;
    write_summary("error");
    return 1;
  }
  return code;
}

int cmd_pvc(const std::string& fcidump_path, std::ostream& out, std::ostream& err) {
  try {
    const MolecularIntegrals ham = load_fcidump(fcidump_path);
    const Sector s = ham.sector();
    out << "M " << s.n_spin_orbitals << "\nN_up " << s.n_up << "\nN_down " << s.n_down << "\nPVC "
        << s.size() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_fci(const std::string& fcidump_path, const std::string& amplitudes_path, std::ostream& out,
            std::ostream& err) {
  try {
    const MolecularIntegrals ham = load_fcidump(fcidump_path);
    const GroundState gs = dense_fci_ground_state(ham, ham.sector());
    out << "E_FCI " << std::fixed << std::setprecision(12) << gs.energy << '\n';
    if (!amplitudes_path.empty()) {
      std::ofstream a(amplitudes_path);
      if (!a) throw std::runtime_error("cannot open " + amplitudes_path + " for writing");
      for (std::size_t k = 0; k < gs.basis.size(); ++k) {
        a << gs.basis[k].to_string() << ' ' << fmt17(gs.amplitudes(static_cast<Eigen::Index>(k))) << '\n';
      }
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cli_main(int argc, char** argv) {
  if (const char* t = std::getenv("NQS_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(t, &end, 10);
    if (end != t && *end == '\0' && n > 0) {
      omp_set_num_threads(static_cast<int>(n));
    } else {
      warn(std::string("ignoring NQS_THREADS='") + t + "'");
    }
  }

  CLI::App app{"Krylov-subspace optimizer for autoregressive neural quantum states"};
  app.require_subcommand(1);

  RunConfig rc;
  std::string config_path;
  auto* run = app.add_subcommand("run", "optimize the ansatz on an FCIDUMP");
  run->add_option("--config", config_path, "JSON config; explicit flags override it");
  run->add_option("--fcidump", rc.fcidump_path, "integral file");
  run->add_option("--method", rc.method)->check(CLI::IsMember({"irl", "sl", "adam"}));
  run->add_option("--m", rc.m, "Krylov dimension");
  run->add_option("--tol", rc.tol, "Ritz residual tolerance");
  run->add_option("--eps", rc.convergence_eps, "stop when |lambda_min| < eps");
  run->add_option("--max-steps", rc.max_outer_steps);
  run->add_option("--max-restarts", rc.max_restarts);
  run->add_option("--batch", rc.batch)->check(CLI::IsMember({"exact", "stochastic"}));
  run->add_option("--ns", rc.n_samples, "samples per batch (stochastic)");
  run->add_option("--seed", rc.seed);
  run->add_option("--hidden", rc.hidden, "conditional network width");
  run->add_option("--phase-hidden", rc.phase_hidden, "phase network width");
  run->add_option("--lr", rc.adam_lr, "Adam learning rate");
  run->add_option("--sl-iterations", rc.sl_iterations);
  run->add_option("--out-csv", rc.out_csv);
  run->add_option("--out-json", rc.out_json);
  run->add_flag("!--no-timing", rc.timing, "write 0 for timings (byte-reproducible output)");

  std::string path, amps;
  auto* pvc = app.add_subcommand("pvc", "print the sector and its PVC count");
  pvc->add_option("--fcidump", path)->required();
  auto* fci = app.add_subcommand("fci", "dense FCI ground state");
  fci->add_option("--fcidump", path)->required();
  fci->add_option("--amplitudes", amps, "write the eigenvector here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (*run) {
    RunConfig effective = rc;
    if (!config_path.empty()) {
      try {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open " + config_path);
        effective = run_config_from_json(nlohmann::json::parse(in));
      } catch (const std::exception& e) {
        std::cerr << "error: " << config_path << ": " << e.what() << '\n';
        return 1;
      }
      // flags given on the command line win
      const RunConfig defaults;
      const auto given = to_json(rc), base = to_json(defaults);
      auto merged = to_json(effective);
      for (auto& [k, v] : given.items()) {
        if (v != base[k]) merged[k] = v;
      }
      effective = run_config_from_json(merged);
    }
    if (effective.fcidump_path.empty()) {
      std::cerr << "error: --fcidump is required\n";
      return 1;
    }
    return cmd_run(effective, std::cout, std::cerr);
  }
  if (*pvc) return cmd_pvc(path, std::cout, std::cerr);
  return cmd_fci(path, amps, std::cout, std::cerr);
}

}  // namespace nqs
