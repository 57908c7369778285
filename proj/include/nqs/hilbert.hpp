#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nqs {

/// Raised when an exhaustive enumeration would exceed its configured cap.
class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxSpinOrbitals = 64;

/// Occupation-number basis state |n_0 ... n_{M-1}> stored as a bitmask.
///
/// Spin-orbitals use the blocked layout: indices [0, M/2) are spin-up,
/// [M/2, M) spin-down, each block in spatial-orbital order.
class OccupationVector {
 public:
  OccupationVector() = default;
  OccupationVector(std::uint64_t bits, int n_spin_orbitals);

  std::uint64_t bits() const { return bits_; }
  int size() const { return n_spin_orbitals_; }
  int n_spatial() const { return n_spin_orbitals_ / 2; }

  bool occupied(int i) const { return (bits_ >> i) & 1u; }
  int count() const;
  int count_up() const;
  int count_down() const;

  /// Occupied spin-orbital indices in ascending order.
  std::vector<int> occupied_orbitals() const;

  /// Number of occupied orbitals with index strictly between a and b.
  int count_between(int a, int b) const;

  OccupationVector flipped(int i) const;

  std::string to_string() const;

  friend bool operator==(const OccupationVector& a, const OccupationVector& b) {
    return a.bits_ == b.bits_ && a.n_spin_orbitals_ == b.n_spin_orbitals_;
  }
  friend bool operator<(const OccupationVector& a, const OccupationVector& b) {
    return a.bits_ < b.bits_;
  }

 private:
  std::uint64_t bits_ = 0;
  int n_spin_orbitals_ = 0;
};

/// Fixed particle-number sector (M, N_up, N_down).
struct Sector {
  int n_spin_orbitals = 0;
  int n_up = 0;
  int n_down = 0;

  int n_spatial() const { return n_spin_orbitals / 2; }
  int n_electrons() const { return n_up + n_down; }

  /// Throws std::invalid_argument when the sector is malformed.
  void validate() const;

  /// C(M/2, N_up) * C(M/2, N_down); saturates at UINT64_MAX.
  std::uint64_t size() const;

  bool contains(const OccupationVector& x) const;

  friend bool operator==(const Sector&, const Sector&) = default;
};

std::uint64_t binomial(int n, int k);

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// All configurations of the sector in ascending bitmask order.
std::vector<OccupationVector> enumerate_sector(const Sector& sector,
                                               std::uint64_t cap = kDefaultEnumerationCap);

enum class ExcitationDegree { kNone = 0, kSingle = 1, kDouble = 2, kHigher = 3 };

/// Difference between two configurations, oriented as x -> x2.
///
/// For singles and doubles, |x2> = sign * a+_{p1} a_{h1} |x> (single) or
/// |x2> = sign * a+_{p2} a_{h2} a+_{p1} a_{h1} |x> (double), with states
/// normal-ordered by ascending spin-orbital index.
struct Excitation {
  ExcitationDegree degree = ExcitationDegree::kNone;
  std::vector<int> holes;      ///< vacated in x2, ascending
  std::vector<int> particles;  ///< filled in x2, ascending
  int sign = 1;
};

Excitation classify_excitation(const OccupationVector& x, const OccupationVector& x2);

}  // namespace nqs
