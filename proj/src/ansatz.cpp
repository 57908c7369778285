#include "nqs/ansatz.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "nqs/rng.hpp"

namespace nqs {

Eigen::Index Architecture::n_params() const { return ParameterLayout(*this).total; }

void Architecture::validate() const {
  sector.validate();
  if (hidden < 1 || phase_hidden < 1) {
    throw std::invalid_argument("Architecture: hidden widths must be >= 1");
  }
}

ParameterLayout::ParameterLayout(const Architecture& arch) {
  const Eigen::Index m = arch.n_spin_orbitals();
  const Eigen::Index h = arch.hidden;
  const Eigen::Index hp = arch.phase_hidden;
  w1 = 0;
  b1 = w1 + h * 2 * m;
  w2 = b1 + h;
  b2 = w2 + 2 * h;
  wp = b2 + 2;
  bp = wp + hp * m;
  wo = bp + hp;
  bo = wo + hp;
  total = bo + 1;
}

AnsatzParameters AnsatzParameters::initialize(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  const ParameterLayout L(arch);
  const int m = arch.n_spin_orbitals();
  AnsatzParameters p{arch, Eigen::VectorXd::Zero(L.total)};
  std::mt19937_64 rng(seed);
  auto fill = [&](Eigen::Index begin, Eigen::Index end, int fan_in) {
    const double sigma = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index k = begin; k < end; ++k) p.theta(k) = sigma * (2.0 * uniform01(rng) - 1.0);
  };
  fill(L.w1, L.w2, 2 * m);      // W1, b1
  fill(L.w2, L.wp, arch.hidden);  // W2, b2
  fill(L.wp, L.wo, m);          // Wp, bp
  // wo, bo stay zero: the initial phase is identically zero.
  return p;
}

namespace {

enum class Mask { kFree, kForceEmpty, kForceOccupied };

// Which outcomes are feasible at position i given `prefix` (bits < i).
Mask mask_at(const Sector& s, std::uint64_t prefix, int i) {
  const int half = s.n_spatial();
  const bool up = i < half;
  const int block_start = up ? 0 : half;
  const int block_end = up ? half : 2 * half;
  const int target = up ? s.n_up : s.n_down;
  int filled = 0;
  for (int j = block_start; j < i; ++j) filled += (prefix >> j) & 1u;
  const int need = target - filled;
  const int remaining = block_end - i;  // including i
  if (need < 0 || need > remaining) {
    throw std::logic_error("conditional: prefix is infeasible for the sector");
  }
  if (need == 0) return Mask::kForceEmpty;
  if (need == remaining) return Mask::kForceOccupied;
  return Mask::kFree;
}

struct ConditionalNet {
  const Architecture& arch;
  const ParameterLayout L;
  const Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>> w1;  // hidden x 2M
  const Eigen::Map<const Eigen::VectorXd> b1;
  const Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>> w2;  // 2 x hidden
  const Eigen::Map<const Eigen::Vector2d> b2;

  explicit ConditionalNet(const AnsatzParameters& p)
      : arch(p.arch),
        L(p.arch),
        // Row-major blocks viewed as column-major transposes.
        w1(p.theta.data() + L.w1, 2 * p.arch.n_spin_orbitals(), p.arch.hidden,
           Eigen::OuterStride<>(2 * p.arch.n_spin_orbitals())),
        b1(p.theta.data() + L.b1, p.arch.hidden),
        w2(p.theta.data() + L.w2, p.arch.hidden, 2, Eigen::OuterStride<>(p.arch.hidden)),
        b2(p.theta.data() + L.b2) {}

  // Column j of W1 (weights from input j) is row j of the transposed map.
  auto input_column(int j) const { return w1.row(j).transpose(); }
};

struct PhaseHead {
  const Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>> wp;  // M x hp (transposed)
  const Eigen::Map<const Eigen::VectorXd> bp;
  const Eigen::Map<const Eigen::VectorXd> wo;
  double bo;

  PhaseHead(const AnsatzParameters& p, const ParameterLayout& L)
      : wp(p.theta.data() + L.wp, p.arch.n_spin_orbitals(), p.arch.phase_hidden,
           Eigen::OuterStride<>(p.arch.n_spin_orbitals())),
        bp(p.theta.data() + L.bp, p.arch.phase_hidden),
        wo(p.theta.data() + L.wo, p.arch.phase_hidden),
        bo(p.theta(L.bo)) {}
};

inline double spin_value(std::uint64_t bits, int j) { return ((bits >> j) & 1u) ? 1.0 : -1.0; }

// Numerically stable log-softmax of a 2-vector.
inline Eigen::Vector2d log_softmax(const Eigen::Vector2d& z) {
  const double mx = z.maxCoeff();
  const double lse = mx + std::log(std::exp(z(0) - mx) + std::exp(z(1) - mx));
  return z.array() - lse;
}

void check_arch(const AnsatzParameters& p) {
  if (p.theta.size() != p.arch.n_params()) {
    throw std::invalid_argument("AnsatzParameters: theta length does not match architecture");
  }
}

}  // namespace

Eigen::Vector2d conditional_logits(const AnsatzParameters& params, std::uint64_t prefix, int i) {
  check_arch(params);
  const int m = params.arch.n_spin_orbitals();
  if (i < 0 || i >= m) throw std::out_of_range("conditional: position out of range");
  const ConditionalNet net(params);
  Eigen::VectorXd z = net.b1 + net.input_column(m + i);
  for (int j = 0; j < i; ++j) z += spin_value(prefix, j) * net.input_column(j);
  const Eigen::VectorXd a = z.array().tanh();
  return net.w2.transpose() * a + net.b2;
}

ConditionalProbabilities conditional(const AnsatzParameters& params, std::uint64_t prefix, int i) {
  const int m = params.arch.n_spin_orbitals();
  if (i < 0 || i >= m) throw std::out_of_range("conditional: position out of range");
  prefix &= (i == 0) ? 0 : (~std::uint64_t{0} >> (64 - i));
  const Sector& s = params.arch.sector;
  const std::uint64_t up_mask = (std::uint64_t{1} << s.n_spatial()) - 1;
  const int up = std::popcount(prefix & up_mask);
  // a finished up block must hold exactly n_up
  if (up > s.n_up || (i >= s.n_spatial() && up != s.n_up)) {
    throw std::logic_error("conditional: prefix is infeasible for the sector");
  }
  switch (mask_at(s, prefix, i)) {
    case Mask::kForceEmpty:
      return {1.0, 0.0};
    case Mask::kForceOccupied:
      return {0.0, 1.0};
    case Mask::kFree:
      break;
  }
  const Eigen::Vector2d lp = log_softmax(conditional_logits(params, prefix, i));
  return {std::exp(lp(0)), std::exp(lp(1))};
}

std::vector<OccupationVector> sample(const AnsatzParameters& params, std::size_t count,
                                     std::uint64_t seed) {
  check_arch(params);
  const int m = params.arch.n_spin_orbitals();
  const Sector& sector = params.arch.sector;
  const ConditionalNet net(params);
  constexpr std::size_t kChunk = 64;
  const std::size_t n_chunks = (count + kChunk - 1) / kChunk;
  std::vector<OccupationVector> out(count);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_chunks); ++c) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t end = std::min(count, begin + kChunk);
    Eigen::VectorXd z(params.arch.hidden);
    for (std::size_t s = begin; s < end; ++s) {
      std::uint64_t bits = 0;
      z = net.b1;
      for (int i = 0; i < m; ++i) {
        const Mask mask = mask_at(sector, bits, i);
        bool occ;
        if (mask == Mask::kForceEmpty) {
          occ = false;
        } else if (mask == Mask::kForceOccupied) {
          occ = true;
        } else {
          const Eigen::VectorXd a = (z + net.input_column(m + i)).array().tanh();
          const Eigen::Vector2d lp = log_softmax(net.w2.transpose() * a + net.b2);
          occ = uniform01(rng) < std::exp(lp(1));
        }
        if (occ) bits |= std::uint64_t{1} << i;
        z += (occ ? 1.0 : -1.0) * net.input_column(i);
      }
      out[s] = OccupationVector(bits, m);
    }
  }
  return out;
}

namespace {

LogAmplitude evaluate(const AnsatzParameters& params, const OccupationVector& x,
                      Eigen::VectorXcd* grad) {
  check_arch(params);
  const Architecture& arch = params.arch;
  const int m = arch.n_spin_orbitals();
  if (x.size() != m) throw std::invalid_argument("log_amplitude: configuration width mismatch");
  if (!arch.sector.contains(x)) {
    if (grad != nullptr) throw std::domain_error("log_derivative: configuration has zero amplitude");
    return LogAmplitude::zero();
  }
  const ConditionalNet net(params);
  const ParameterLayout& L = net.L;
  const std::uint64_t bits = x.bits();
  const int h = arch.hidden;

  Eigen::VectorXd d_theta;
  Eigen::MatrixXd dz_by_pos;  // h x M, dlogp/dz at each free position
  std::vector<bool> free_pos(m, false);
  if (grad != nullptr) {
    d_theta = Eigen::VectorXd::Zero(L.total);
    dz_by_pos = Eigen::MatrixXd::Zero(h, m);
  }

  double log_prob = 0.0;
  Eigen::VectorXd z = net.b1;
  for (int i = 0; i < m; ++i) {
    const Mask mask = mask_at(arch.sector, bits, i);
    const bool occ = (bits >> i) & 1u;
    if (mask == Mask::kFree) {
      free_pos[i] = true;
      const Eigen::VectorXd a = (z + net.input_column(m + i)).array().tanh();
      const Eigen::Vector2d lp = log_softmax(net.w2.transpose() * a + net.b2);
      log_prob += lp(occ ? 1 : 0);
      if (grad != nullptr) {
        Eigen::Vector2d delta = -lp.array().exp();
        delta(occ ? 1 : 0) += 1.0;
        // W2 stored row-major 2 x h: entry (r, k) at w2 + r*h + k.
        d_theta.segment(L.w2, h) += delta(0) * a;
        d_theta.segment(L.w2 + h, h) += delta(1) * a;
        d_theta.segment(L.b2, 2) += delta;
        dz_by_pos.col(i) = (net.w2 * delta).cwiseProduct((1.0 - a.array().square()).matrix());
      }
    }
    z += spin_value(bits, i) * net.input_column(i);
  }

  if (grad != nullptr) {
    // W1 stored row-major h x 2M: entry (k, j) at w1 + k*2M + j.
    auto w1_grad = [&](int k, int j) -> double& { return d_theta(L.w1 + k * 2 * m + j); };
    Eigen::VectorXd suffix = Eigen::VectorXd::Zero(h);
    for (int i = m - 1; i >= 0; --i) {
      if (free_pos[i]) {
        for (int k = 0; k < h; ++k) w1_grad(k, m + i) += dz_by_pos(k, i);
        d_theta.segment(L.b1, h) += dz_by_pos.col(i);
      }
      // Input j = i feeds every later position.
      const double s = spin_value(bits, i);
      for (int k = 0; k < h; ++k) w1_grad(k, i) += s * suffix(k);
      if (free_pos[i]) suffix += dz_by_pos.col(i);
    }
  }

  // Phase head.
  const PhaseHead ph(params, L);
  Eigen::VectorXd sv(m);
  for (int j = 0; j < m; ++j) sv(j) = spin_value(bits, j);
  const Eigen::VectorXd ap = (ph.wp.transpose() * sv + ph.bp).array().tanh();
  const double phase = ph.wo.dot(ap) + ph.bo;

  if (grad != nullptr) {
    const int hp = arch.phase_hidden;
    Eigen::VectorXd d_phase = Eigen::VectorXd::Zero(L.total);
    d_phase.segment(L.wo, hp) = ap;
    d_phase(L.bo) = 1.0;
    const Eigen::VectorXd dzp = ph.wo.cwiseProduct((1.0 - ap.array().square()).matrix());
    d_phase.segment(L.bp, hp) = dzp;
    for (int k = 0; k < hp; ++k) d_phase.segment(L.wp + k * m, m) = dzp(k) * sv;

    grad->resize(L.total);
    grad->real() = 0.5 * d_theta;
    grad->imag() = d_phase;
  }
  return {0.5 * log_prob, phase};
}

}  // namespace

LogAmplitude log_amplitude(const AnsatzParameters& params, const OccupationVector& x) {
  return evaluate(params, x, nullptr);
}

Eigen::VectorXcd log_derivative(const AnsatzParameters& params, const OccupationVector& x) {
  Eigen::VectorXcd g;
  evaluate(params, x, &g);
  return g;
}

LogAmplitude log_amplitude_and_derivative(const AnsatzParameters& params,
                                          const OccupationVector& x, Eigen::VectorXcd& grad) {
  return evaluate(params, x, &grad);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(std::ostream& out, const AnsatzParameters& params) {
  check_arch(params);
  const Architecture& a = params.arch;
  out << "nqs-checkpoint 1\n";
  out << "spin_orbitals " << a.sector.n_spin_orbitals << "\n";
  out << "n_up " << a.sector.n_up << "\n";
  out << "n_down " << a.sector.n_down << "\n";
  out << "hidden " << a.hidden << "\n";
  out << "phase_hidden " << a.phase_hidden << "\n";
  out << "n_params " << params.theta.size() << "\n";
  char buf[64];
  for (Eigen::Index k = 0; k < params.theta.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g\n", params.theta(k));
    out << buf;
  }
}

AnsatzParameters load_checkpoint(std::istream& in) {
  auto expect = [&](const char* key) {
    std::string k;
    long long v = 0;
    if (!(in >> k >> v) || k != key) {
      throw std::runtime_error(std::string("checkpoint: expected field '") + key + "'");
    }
    return v;
  };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "nqs-checkpoint" || version != 1) {
    throw std::runtime_error("checkpoint: bad magic line");
  }
  Architecture a;
  a.sector.n_spin_orbitals = static_cast<int>(expect("spin_orbitals"));
  a.sector.n_up = static_cast<int>(expect("n_up"));
  a.sector.n_down = static_cast<int>(expect("n_down"));
  a.hidden = static_cast<int>(expect("hidden"));
  a.phase_hidden = static_cast<int>(expect("phase_hidden"));
  const long long n = expect("n_params");
  a.validate();
  if (n != a.n_params()) throw std::runtime_error("checkpoint: n_params does not match architecture");
  AnsatzParameters p{a, Eigen::VectorXd(n)};
  for (long long k = 0; k < n; ++k) {
    std::string tok;
    if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated parameter list");
    p.theta(k) = std::strtod(tok.c_str(), nullptr);
    if (!std::isfinite(p.theta(k))) throw std::runtime_error("checkpoint: non-finite parameter");
  }
  return p;
}

}  // namespace nqs
