#include <random>

#include <gtest/gtest.h>

#include "nqs/estimators.hpp"

using namespace nqs;

namespace {

std::string data(const std::string& name) { return std::string(NQS_DATA_DIR) + "/fcidump/" + name; }

AnsatzParameters randomized(const Architecture& arch, std::uint64_t seed, double scale = 0.6) {
  AnsatzParameters p = AnsatzParameters::initialize(arch, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Eigen::Index k = 0; k < p.theta.size(); ++k) p.theta(k) += u(rng);
  return p;
}

Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

// psi over the sector as a dense complex vector (enumeration order).
Eigen::VectorXcd dense_psi(const AnsatzParameters& p) {
  const auto basis = enumerate_sector(p.arch.sector);
  Eigen::VectorXcd psi(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) psi(static_cast<Eigen::Index>(k)) = std::exp(log_amplitude(p, basis[k]).value());
  return psi;
}

struct DenseReference {
  double energy;
  Eigen::MatrixXd heff;  // symmetric part
  Eigen::MatrixXd qgt;
  Eigen::VectorXd grad;
};

// Everything from the dense Hamiltonian and psi vector; no local-energy code.
DenseReference dense_reference(const AnsatzParameters& p, const MolecularIntegrals& ham) {
  const auto basis = enumerate_sector(p.arch.sector);
  const Eigen::MatrixXd h = dense_hamiltonian(ham, p.arch.sector);
  const Eigen::VectorXcd psi = dense_psi(p);
  const double z = psi.squaredNorm();
  const Eigen::VectorXcd hpsi = h.cast<std::complex<double>>() * psi;
  const double e = (psi.dot(hpsi)).real() / z;
  const Eigen::Index n = psi.size(), np = p.theta.size();
  Eigen::MatrixXcd o(n, np);
  for (Eigen::Index k = 0; k < n; ++k) o.row(k) = log_derivative(p, basis[static_cast<std::size_t>(k)]).transpose();
  Eigen::VectorXd w = psi.cwiseAbs2() / z;
  Eigen::VectorXcd eloc = hpsi.cwiseQuotient(psi);
  Eigen::RowVectorXcd mean = (w.cast<std::complex<double>>().asDiagonal() * o).colwise().sum();
  DenseReference r;
  r.energy = e;
  r.heff = Eigen::MatrixXd::Zero(np, np);
  r.qgt = Eigen::MatrixXd::Zero(np, np);
  r.grad = Eigen::VectorXd::Zero(np);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::RowVectorXcd d = o.row(k) - mean;
    const double de = eloc(k).real() - e;
    r.heff += w(k) * de * (d.adjoint() * d).real();
    r.qgt += w(k) * (d.adjoint() * d).real();
    r.grad += 2.0 * w(k) * (d.conjugate().transpose() * (eloc(k) - e)).real();
  }
  return r;
}

}  // namespace

TEST(Estimators, ExactBatchShape) {
  const auto ham = load_fcidump(data("h2_sto3g.fcidump"));
  const auto p = randomized({ham.sector(), 2, 2}, 1);
  const SampleBatch b = build_batch(p, ham, ExactMode{});
  EXPECT_EQ(b.size(), 4);
  EXPECT_TRUE(b.exact);
  EXPECT_NEAR(b.weights.sum(), 1.0, 1e-12);
  EXPECT_GE(b.weights.minCoeff(), 0.0);
  EXPECT_EQ(b.n_params(), p.theta.size());
}

TEST(Estimators, ExactBatchCapExceeded) {
  const auto ham = load_fcidump(data("lih_sto3g.fcidump"));
  const auto p = AnsatzParameters::initialize({ham.sector(), 2, 2}, 1);
  EXPECT_THROW(build_batch(p, ham, ExactMode{}, 100), CapExceeded);
}

TEST(Estimators, ZeroIntegralHamiltonian) {
  MolecularIntegrals ham(3, 2, 0);
  ham.set_e_core(-2.5);
  const auto p = randomized({ham.sector(), 3, 2}, 2);
  for (const BatchMode& mode : {BatchMode{ExactMode{}}, BatchMode{StochasticMode{500, 4}}}) {
    const SampleBatch b = build_batch(p, ham, mode);
    const EnergyEstimate e = estimate_energy(b);
    EXPECT_DOUBLE_EQ(e.mean, -2.5);
    EXPECT_EQ(e.variance, 0.0);
    EXPECT_EQ(energy_gradient(b, e), Eigen::VectorXd::Zero(p.theta.size()));
    EXPECT_EQ(dense_heff(b, e).matrix, Eigen::MatrixXd::Zero(p.theta.size(), p.theta.size()));
  }
}

TEST(Estimators, UniformPsiEnergyIsQuadraticForm) {
  const auto ham = load_fcidump(data("h2_sto3g.fcidump"));
  AnsatzParameters p = AnsatzParameters::initialize({ham.sector(), 2, 2}, 3);
  p.theta.setZero();  // every free conditional is 1/2: uniform over the 4 configs
  const SampleBatch b = build_batch(p, ham, ExactMode{});
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(b.weights(k), 0.25, 1e-15);
  const Eigen::MatrixXd h = dense_hamiltonian(ham, ham.sector());
  const Eigen::VectorXd u = Eigen::VectorXd::Ones(4);
  EXPECT_NEAR(estimate_energy(b).mean, u.dot(h * u) / u.squaredNorm(), 1e-12);
}

TEST(Estimators, ExactModeMatchesDenseReference) {
  for (const char* name : {"h2_sto3g.fcidump", "lih_sto3g.fcidump"}) {
    const auto ham = load_fcidump(data(name));
    const auto p = randomized({ham.sector(), 3, 2}, 5);
    const SampleBatch b = build_batch(p, ham, ExactMode{});
    const EnergyEstimate e = estimate_energy(b);
    const DenseReference r = dense_reference(p, ham);
    EXPECT_NEAR(e.mean, r.energy, 1e-10) << name;
    EXPECT_EQ(e.std_error, 0.0);
    EXPECT_LE(std::abs(e.imag_mean), 1e-10);
    EXPECT_LE((energy_gradient(b, e) - r.grad).cwiseAbs().maxCoeff(), 1e-9) << name;
    EXPECT_LE((dense_heff(b, e).matrix - r.heff).cwiseAbs().maxCoeff(), 1e-9) << name;
    EXPECT_LE((dense_qgt(b) - r.qgt).cwiseAbs().maxCoeff(), 1e-10) << name;
    EXPECT_EQ(evaluate_energy(p, ham, ExactMode{}).mean, e.mean);
  }
}

TEST(Estimators, GradientMatchesFiniteDifferences) {
  const auto ham = load_fcidump(data("lih_sto3g.fcidump"));
  const auto p = randomized({ham.sector(), 3, 3}, 6);
  const SampleBatch b = build_batch(p, ham, ExactMode{});
  const Eigen::VectorXd f = energy_gradient(b, estimate_energy(b));
  std::mt19937_64 rng(7);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Index k = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(f.size()));
    const double h = 1e-5;
    AnsatzParameters a = p, c = p;
    a.theta(k) += h;
    c.theta(k) -= h;
    const double fd = (evaluate_energy(a, ham, ExactMode{}).mean - evaluate_energy(c, ham, ExactMode{}).mean) / (2 * h);
    EXPECT_LE(std::abs(fd - f(k)), 1e-6 * std::max(1.0, std::abs(f(k)))) << k;
  }
}

TEST(Estimators, MatvecMatchesDenseOracle) {
  const auto ham = load_fcidump(data("h2_sto3g.fcidump"));
  const Architecture arch{ham.sector(), 2, 2};
  ASSERT_LE(arch.n_params(), 50);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto p = randomized(arch, seed, 1.0);
    const SampleBatch b = build_batch(p, ham, ExactMode{});
    const EnergyEstimate e = estimate_energy(b);
    const DenseHeff d = dense_heff(b, e);
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd v = random_vector(arch.n_params(), 100 * seed + t);
      EXPECT_LE((heff_matvec(b, e, v) - d.matrix * v).cwiseAbs().maxCoeff(), 1e-10);
    }
    for (Eigen::Index i = 0; i < arch.n_params(); ++i) {
      const Eigen::VectorXd col = heff_matvec(b, e, Eigen::VectorXd::Unit(arch.n_params(), i));
      EXPECT_LE((col - d.matrix.row(i).transpose()).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Estimators, MatvecLinearity) {
  const auto ham = load_fcidump(data("lih_sto3g.fcidump"));
  const auto p = randomized({ham.sector(), 3, 3}, 8);
  const SampleBatch b = build_batch(p, ham, StochasticMode{2000, 3});
  const EnergyEstimate e = estimate_energy(b);
  const Eigen::VectorXd v1 = random_vector(p.theta.size(), 1), v2 = random_vector(p.theta.size(), 2);
  const Eigen::VectorXd lhs = heff_matvec(b, e, 0.7 * v1 - 1.3 * v2);
  const Eigen::VectorXd rhs = 0.7 * heff_matvec(b, e, v1) - 1.3 * heff_matvec(b, e, v2);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(heff_matvec(b, e, Eigen::VectorXd::Zero(p.theta.size())), Eigen::VectorXd::Zero(p.theta.size()));
  EXPECT_THROW(heff_matvec(b, e, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Estimators, HeffSymmetricAtZeroPhase) {
  const auto ham = load_fcidump(data("lih_sto3g.fcidump"));
  const auto p = AnsatzParameters::initialize({ham.sector(), 3, 3}, 111);
  const SampleBatch b = build_batch(p, ham, ExactMode{});
  EXPECT_LE(dense_heff(b, estimate_energy(b)).asymmetry, 1e-10);
}

TEST(Estimators, DenseCaps) {
  const auto ham = load_fcidump(data("h2_sto3g.fcidump"));
  const auto p = AnsatzParameters::initialize({ham.sector(), 2, 2}, 1);
  const SampleBatch b = build_batch(p, ham, ExactMode{});
  EXPECT_THROW(dense_heff(b, estimate_energy(b), 10), CapExceeded);
  EXPECT_THROW(dense_qgt(b, 10), CapExceeded);
}

TEST(Estimators, QgtProperties) {
  const auto ham = load_fcidump(data("lih_sto3g.fcidump"));
  const auto p = randomized({ham.sector(), 3, 3}, 9);
  const SampleBatch b = build_batch(p, ham, ExactMode{});
  const Eigen::MatrixXd s = dense_qgt(b);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const std::complex<double> mean = b.weights.cast<std::complex<double>>().dot(b.log_derivs.col(i));
    const double var = b.weights.dot((b.log_derivs.col(i).array() - mean).abs2().matrix());
    EXPECT_NEAR(s(i, i), var, 1e-12);
  }
  SampleBatch one = b;
  one.configs.resize(1);
  one.weights = Eigen::VectorXd::Ones(1);
  one.local_energies = b.local_energies.head(1);
  one.log_derivs = b.log_derivs.topRows(1);
  EXPECT_LE(dense_qgt(one).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Estimators, StationaryAtFciEigenvector) {
  const auto ham = load_fcidump(data("lih_sto3g.fcidump"));
  const GroundState gs = dense_fci_ground_state(ham, ham.sector());
  // FCI amplitudes with arbitrary log-derivatives: any ansatz that reproduces psi exactly
  SampleBatch b;
  b.exact = true;
  const auto lookup = [&](const OccupationVector& x) {
    const auto j = std::lower_bound(gs.basis.begin(), gs.basis.end(), x) - gs.basis.begin();
    const double a = gs.amplitudes(j);
    return std::complex<double>(std::log(std::abs(a)), a < 0 ? M_PI : 0.0);
  };
  std::vector<double> w;
  std::vector<std::complex<double>> el;
  for (Eigen::Index k = 0; k < gs.amplitudes.size(); ++k) {
    if (gs.amplitudes(k) == 0.0) continue;
    b.configs.push_back(gs.basis[static_cast<std::size_t>(k)]);
    w.push_back(gs.amplitudes(k) * gs.amplitudes(k));
    el.push_back(local_energy(lookup, ham, b.configs.back()));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(w.size());
  b.n_samples = static_cast<std::size_t>(n);
  b.weights = Eigen::Map<Eigen::VectorXd>(w.data(), n);
  b.local_energies = Eigen::Map<Eigen::VectorXcd>(el.data(), n);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  b.log_derivs.resize(n, 12);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < 12; ++j) b.log_derivs(i, j) = {nd(rng), nd(rng)};
  const EnergyEstimate e = estimate_energy(b);
  EXPECT_NEAR(e.mean, gs.energy, 1e-10);
  EXPECT_LE(e.variance, 1e-18);
  EXPECT_LE(energy_gradient(b, e).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(dense_heff(b, e).matrix.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Estimators, StochasticIsDeterministicAndConsistent) {
  const auto ham = load_fcidump(data("h2_sto3g.fcidump"));
  const auto p = randomized({ham.sector(), 3, 3}, 10, 1.0);
  const double exact = evaluate_energy(p, ham, ExactMode{}).mean;
  const SampleBatch a = build_batch(p, ham, StochasticMode{10'000, 42});
  const SampleBatch c = build_batch(p, ham, StochasticMode{10'000, 42});
  EXPECT_EQ(a.weights, c.weights);
  EXPECT_EQ(a.local_energies, c.local_energies);
  EXPECT_NEAR(a.weights.sum(), 1.0, 1e-12);
  double prev_err = std::numeric_limits<double>::infinity();
  for (std::size_t ns : {100, 1000, 10'000}) {
    // average |error| over a few seeds so the trend is not one draw's luck
    double err = 0.0;
    for (std::uint64_t s = 0; s < 8; ++s) {
      const EnergyEstimate e = estimate_energy(build_batch(p, ham, StochasticMode{ns, 1000 + s}));
      EXPECT_LE(std::abs(e.mean - exact), 5.0 * e.std_error + 1e-12) << ns;
      EXPECT_GT(e.std_error, 0.0);
      err += std::abs(e.mean - exact) / 8.0;
    }
    EXPECT_LT(err, prev_err);
    prev_err = err;
  }
}

TEST(Estimators, EmptyBatchRejected) {
  SampleBatch b;
  EXPECT_THROW(estimate_energy(b), std::invalid_argument);
  EXPECT_THROW(energy_gradient(b, {}), std::invalid_argument);
}
