#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "nqs/cli.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace nqs;

namespace {

std::string data(const std::string& name) { return std::string(NQS_DATA_DIR) + "/fcidump/" + name; }

struct Result {
  int code;
  std::string out;
};

Result run_cli(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / ("nqs_cli_out_" + std::to_string(::getpid()));
  const std::string cmd = std::string(NQS_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  fs::remove(out);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("nqs_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

std::string write_fcidump(const fs::path& p, int norb, int nelec, int ms2) {
  std::ofstream f(p);
  f << "&FCI NORB=" << norb << ",NELEC=" << nelec << ",MS2=" << ms2 << ", &END\n";
  for (int i = 1; i <= norb; ++i) f << -1.0 / i << ' ' << i << ' ' << i << " 0 0\n";
  f << "0.25 1 1 1 1\n0.5 0 0 0 0\n";
  return p.string();
}

}  // namespace

TEST(Cli, PvcMatchesSectorFormula) {
  const std::pair<const char*, const char*> cases[] = {
      {"h2_sto3g.fcidump", "PVC 4"}, {"lih_sto3g.fcidump", "PVC 225"},
      {"h2o_sto3g.fcidump", "PVC 441"}, {"ch4_sto3g.fcidump", "PVC 15876"}};
  for (const auto& [file, expect] : cases) {
    const Result r = run_cli("pvc --fcidump " + data(file));
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find(expect), std::string::npos) << r.out;
  }
  TempDir d;
  const Result r = run_cli("pvc --fcidump " + write_fcidump(d / "ten.fcidump", 10, 10, 0));
  EXPECT_NE(r.out.find("M 20\nN_up 5\nN_down 5\nPVC 63504"), std::string::npos) << r.out;
}

TEST(Cli, FciMatchesPowerIteration) {
  const Result r = run_cli("fci --fcidump " + data("h2_sto3g.fcidump"));
  ASSERT_EQ(r.code, 0);
  const double printed = std::stod(r.out.substr(r.out.find("E_FCI") + 6));
  const auto ham = load_fcidump(data("h2_sto3g.fcidump"));
  const double ref = oracle::power_lowest(dense_hamiltonian(ham, ham.sector())).value;
  EXPECT_NEAR(printed, ref, 1e-10);
}

TEST(Cli, FciSingleConfiguration) {
  TempDir d;
  const std::string f = write_fcidump(d / "full.fcidump", 2, 4, 0);
  const Result r = run_cli("fci --fcidump " + f + " --amplitudes " + (d / "amps.txt").string());
  ASSERT_EQ(r.code, 0);
  const auto ham = load_fcidump(f);
  const OccupationVector x(0b1111, 4);
  EXPECT_NEAR(std::stod(r.out.substr(6)), matrix_element(ham, x, x), 1e-12);
  EXPECT_EQ(lines(slurp(d / "amps.txt")).size(), 1u);
}

TEST(Cli, FciCapExceeded) {
  TempDir d;
  const Result r = run_cli("fci --fcidump " + write_fcidump(d / "ten.fcidump", 10, 10, 0));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("cap"), std::string::npos) << r.out;
}

TEST(Cli, MissingFileWritesNothing) {
  TempDir d;
  const Result r = run_cli("run --fcidump " + (d / "nope.fcidump").string() + " --out-csv " +
                           (d / "t.csv").string() + " --out-json " + (d / "s.json").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(d / "t.csv"));
  EXPECT_FALSE(fs::exists(d / "s.json"));
}

TEST(Cli, ZeroStepsGivesOneRowAndExitTwo) {
  TempDir d;
  const Result r = run_cli("run --fcidump " + data("h2_sto3g.fcidump") + " --max-steps 0 --out-csv " +
                           (d / "t.csv").string() + " --out-json " + (d / "s.json").string());
  EXPECT_EQ(r.code, 2);
  const auto rows = lines(slurp(d / "t.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "step,energy_ha,err_ha,err_kcal,lambda_min,step_scale,matvecs,wall_ms");
  const auto j = nlohmann::json::parse(slurp(d / "s.json"));
  EXPECT_EQ(j["status"], "not_converged");
  EXPECT_EQ(j["converged"], false);
}

TEST(Cli, OutputsAreByteIdenticalAndConsistent) {
  TempDir d;
  const std::string base = "run --fcidump " + data("lih_sto3g.fcidump") +
                           " --max-steps 3 --max-restarts 50 --batch stochastic --ns 500 --no-timing";
  const Result a = run_cli(base + " --out-csv " + (d / "a.csv").string() + " --out-json " + (d / "a.json").string());
  const Result b = run_cli(base + " --out-csv " + (d / "b.csv").string() + " --out-json " + (d / "b.json").string());
  ASSERT_NE(a.code, 1) << a.out;
  EXPECT_EQ(slurp(d / "a.csv"), slurp(d / "b.csv"));
  auto ja = nlohmann::json::parse(slurp(d / "a.json"));
  auto jb = nlohmann::json::parse(slurp(d / "b.json"));
  // config echo differs only in the output paths
  ja["config"].erase("out_csv"), ja["config"].erase("out_json");
  jb["config"].erase("out_csv"), jb["config"].erase("out_json");
  EXPECT_EQ(ja, jb);

  const auto rows = lines(slurp(d / "a.csv"));
  EXPECT_EQ(rows.size() - 1, ja["records"].get<std::size_t>());
  long mv = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<std::string> cols;
    std::stringstream ss(rows[i]);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    ASSERT_EQ(cols.size(), 8u);
    mv += std::stol(cols[6]);
    const double e = std::stod(cols[1]), err = std::stod(cols[2]), kcal = std::stod(cols[3]);
    EXPECT_NEAR(kcal, err * 627.509474, 1e-12 * std::max(1.0, kcal));
    EXPECT_NEAR(err, std::abs(e - ja["e_fci"].get<double>()), 1e-12);
  }
  EXPECT_EQ(mv, ja["total_matvecs"].get<long>());
  EXPECT_EQ(ja["molecule"]["pvc"], 225);
  EXPECT_EQ(ja["config"]["batch"], "stochastic");
  EXPECT_EQ(ja["config"]["n_samples"], 500);
}

TEST(Cli, CsvRoundTripsEnergiesLosslessly) {
  TrajectoryRecord r;
  r.energy = -1.1372838344885008;
  r.err_ha = 1e-300 / 3;
  r.lambda_min = std::nan("");
  const std::string row = csv_row(r);
  std::vector<std::string> cols;
  std::stringstream ss(row);
  for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  EXPECT_EQ(std::stod(cols[1]), r.energy);
  EXPECT_EQ(std::stod(cols[2]), r.err_ha);
  EXPECT_EQ(cols[4], "nan");
}

TEST(Cli, ConfigJsonRoundTrip) {
  RunConfig c;
  c.fcidump_path = "x.fcidump";
  c.method = "sl";
  c.seed = 7;
  c.tol = 3e-11;
  c.batch = "stochastic";
  c.n_samples = 123;
  const RunConfig d = run_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(d), to_json(c));
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"bogus", 1}}), std::invalid_argument);
  EXPECT_THROW(optimizer_config(RunConfig{.batch = "mcmc"}), std::invalid_argument);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  TempDir d;
  RunConfig c;
  c.fcidump_path = data("h2_sto3g.fcidump");
  c.max_outer_steps = 5;
  c.out_csv = (d / "t.csv").string();
  c.out_json = (d / "s.json").string();
  std::ofstream(d / "cfg.json") << to_json(c).dump();
  const Result r = run_cli("run --config " + (d / "cfg.json").string() + " --max-steps 0");
  EXPECT_EQ(r.code, 2) << r.out;
  const auto j = nlohmann::json::parse(slurp(d / "s.json"));
  EXPECT_EQ(j["config"]["max_outer_steps"], 0);
  EXPECT_EQ(j["config"]["fcidump_path"], c.fcidump_path);
}

TEST(Cli, ThreadCountDoesNotChangeOutput) {
  TempDir d;
  const std::string base = "run --fcidump " + data("lih_sto3g.fcidump") + " --max-steps 2 --max-restarts 30 --no-timing";
  run_cli(base + " --out-csv " + (d / "a.csv").string() + " --out-json " + (d / "a.json").string());
  const std::string cmd2 = "NQS_THREADS=3 " + std::string(NQS_CLI_PATH) + " " + base + " --out-csv " +
                           (d / "b.csv").string() + " --out-json " + (d / "b.json").string() + " > /dev/null 2>&1";
  ASSERT_NE(std::system(cmd2.c_str()), -1);
  EXPECT_EQ(slurp(d / "a.csv"), slurp(d / "b.csv"));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("run --fcidump x --method newton").code, 1);
  EXPECT_EQ(run_cli("pvc").code, 1);
}
