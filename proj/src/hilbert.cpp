#include "nqs/hilbert.hpp"

#include <bit>
#include <limits>

namespace nqs {

namespace {

std::uint64_t low_mask(int n) {
  return n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
}

// Gosper's hack: next larger integer with the same popcount.
std::uint64_t next_combination(std::uint64_t v) {
  const std::uint64_t t = v | (v - 1);
  return (t + 1) | (((~t & -~t) - 1) >> (std::countr_zero(v) + 1));
}

std::vector<std::uint64_t> combinations(int n, int k) {
  std::vector<std::uint64_t> out;
  if (k == 0) {
    out.push_back(0);
    return out;
  }
  const std::uint64_t last = low_mask(k) << (n - k);
  for (std::uint64_t v = low_mask(k);; v = next_combination(v)) {
    out.push_back(v);
    if (v == last) break;
  }
  return out;
}

}  // namespace

OccupationVector::OccupationVector(std::uint64_t bits, int n_spin_orbitals)
    : bits_(bits), n_spin_orbitals_(n_spin_orbitals) {
  if (n_spin_orbitals < 0 || n_spin_orbitals > kMaxSpinOrbitals) {
    throw std::invalid_argument("OccupationVector: spin-orbital count " +
                                std::to_string(n_spin_orbitals) + " outside [0, 64]");
  }
  if ((bits & ~low_mask(n_spin_orbitals)) != 0) {
    throw std::invalid_argument("OccupationVector: bits set beyond spin-orbital count");
  }
}

int OccupationVector::count() const { return std::popcount(bits_); }

int OccupationVector::count_up() const {
  return std::popcount(bits_ & low_mask(n_spatial()));
}

int OccupationVector::count_down() const { return std::popcount(bits_ >> n_spatial()); }

std::vector<int> OccupationVector::occupied_orbitals() const {
  std::vector<int> out;
  out.reserve(count());
  for (std::uint64_t b = bits_; b != 0; b &= b - 1) out.push_back(std::countr_zero(b));
  return out;
}

int OccupationVector::count_between(int a, int b) const {
  if (a > b) std::swap(a, b);
  if (b - a <= 1) return 0;
  const std::uint64_t mask = low_mask(b) & ~low_mask(a + 1);
  return std::popcount(bits_ & mask);
}

OccupationVector OccupationVector::flipped(int i) const {
  OccupationVector out = *this;
  out.bits_ ^= std::uint64_t{1} << i;
  return out;
}

std::string OccupationVector::to_string() const {
  std::string s(n_spin_orbitals_, '0');
  for (int i = 0; i < n_spin_orbitals_; ++i) {
    if (occupied(i)) s[i] = '1';
  }
  return s;
}

void Sector::validate() const {
  if (n_spin_orbitals <= 0 || n_spin_orbitals % 2 != 0) {
    throw std::invalid_argument("Sector: spin-orbital count must be positive and even, got " +
                                std::to_string(n_spin_orbitals));
  }
  if (n_spin_orbitals > kMaxSpinOrbitals) {
    throw std::invalid_argument("Sector: at most 64 spin-orbitals are supported, got " +
                                std::to_string(n_spin_orbitals));
  }
  const int half = n_spatial();
  if (n_up < 0 || n_up > half || n_down < 0 || n_down > half) {
    throw std::invalid_argument("Sector: electron counts (" + std::to_string(n_up) + ", " +
                                std::to_string(n_down) + ") do not fit in " +
                                std::to_string(half) + " spatial orbitals");
  }
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    // r * (n - k + i) / i is exact at every step.
    r = r / i * (n - k + i) + r % i * (n - k + i) / i;
  }
  return r;
}

std::uint64_t Sector::size() const {
  const std::uint64_t a = binomial(n_spatial(), n_up);
  const std::uint64_t b = binomial(n_spatial(), n_down);
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return a * b;
}

bool Sector::contains(const OccupationVector& x) const {
  return x.size() == n_spin_orbitals && x.count_up() == n_up && x.count_down() == n_down;
}

std::vector<OccupationVector> enumerate_sector(const Sector& sector, std::uint64_t cap) {
  sector.validate();
  const std::uint64_t n = sector.size();
  if (n > cap) {
    throw CapExceeded("enumerate_sector: sector has " + std::to_string(n) +
                      " configurations, cap is " + std::to_string(cap) +
                      "; use stochastic mode");
  }
  const int half = sector.n_spatial();
  const auto ups = combinations(half, sector.n_up);
  const auto downs = combinations(half, sector.n_down);
  std::vector<OccupationVector> out;
  out.reserve(n);
  // Down bits occupy the high half, so (down, up) lexicographic order is
  // ascending in the full bitmask.
  for (std::uint64_t d : downs) {
    for (std::uint64_t u : ups) {
      out.emplace_back(u | (d << half), sector.n_spin_orbitals);
    }
  }
  return out;
}

Excitation classify_excitation(const OccupationVector& x, const OccupationVector& x2) {
  if (x.size() != x2.size()) {
    throw std::invalid_argument("classify_excitation: spin-orbital counts differ");
  }
  Excitation e;
  const std::uint64_t diff = x.bits() ^ x2.bits();
  const int n_diff = std::popcount(diff);
  if (n_diff == 0) return e;
  if (n_diff % 2 != 0 || n_diff > 4 || std::popcount(x.bits() & diff) * 2 != n_diff) {
    e.degree = ExcitationDegree::kHigher;
    return e;
  }
  e.holes = OccupationVector(x.bits() & diff, x.size()).occupied_orbitals();
  e.particles = OccupationVector(x2.bits() & diff, x.size()).occupied_orbitals();
  e.degree = e.holes.size() == 1 ? ExcitationDegree::kSingle : ExcitationDegree::kDouble;

  int parity = x.count_between(e.holes[0], e.particles[0]);
  if (e.degree == ExcitationDegree::kDouble) {
    const OccupationVector mid = x.flipped(e.holes[0]).flipped(e.particles[0]);
    parity += mid.count_between(e.holes[1], e.particles[1]);
  }
  e.sign = (parity % 2 == 0) ? 1 : -1;
  return e;
}

}  // namespace nqs
