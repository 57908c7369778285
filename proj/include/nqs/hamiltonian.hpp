#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nqs/hilbert.hpp"

namespace nqs {

/// FCIDUMP parse error carrying the 1-based line number (0 when not line-specific).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Spatial-orbital integrals in chemists' notation, all in Hartree.
class MolecularIntegrals {
 public:
  MolecularIntegrals() = default;
  MolecularIntegrals(int n_spatial, int n_electrons, int ms2);

  int n_spatial() const { return n_spatial_; }
  int n_spin_orbitals() const { return 2 * n_spatial_; }
  int n_electrons() const { return n_electrons_; }
  int ms2() const { return ms2_; }

  /// Sector fixed by NELEC and MS2: N_up = (NELEC + MS2) / 2.
  Sector sector() const;

  double e_core() const { return e_core_; }
  double h(int p, int q) const { return h_[p * n_spatial_ + q]; }
  /// (pq|rs)
  double g(int p, int q, int r, int s) const {
    return g_[((p * n_spatial_ + q) * n_spatial_ + r) * n_spatial_ + s];
  }

  void set_e_core(double v) { e_core_ = v; }
  /// Writes h_pq and h_qp.
  void set_h(int p, int q, double v);
  /// Writes all eight permutation-equivalent slots of (pq|rs).
  void set_g(int p, int q, int r, int s, double v);

 private:
  int n_spatial_ = 0;
  int n_electrons_ = 0;
  int ms2_ = 0;
  double e_core_ = 0.0;
  std::vector<double> h_;
  std::vector<double> g_;
};

/// Reads a Molpro-style FCIDUMP (namelist header, then "value i j k l" lines).
MolecularIntegrals parse_fcidump(std::istream& in);
MolecularIntegrals load_fcidump(const std::string& path);

/// <x2|H|x> by Slater-Condon rules.
double matrix_element(const MolecularIntegrals& ham, const OccupationVector& x,
                      const OccupationVector& x2);

inline constexpr double kConnectedDropTolerance = 1e-14;

struct ConnectedEntry {
  OccupationVector config;
  double element = 0.0;  ///< <config|H|x>
};

/// Diagonal entry first, then singles and doubles in generation order.
std::vector<ConnectedEntry> connected_configurations(const MolecularIntegrals& ham,
                                                     const OccupationVector& x);

using LogPsiFn = std::function<std::complex<double>(const OccupationVector&)>;

/// E_loc(x) = sum_x' <x|H|x'> psi(x') / psi(x).
std::complex<double> local_energy(const LogPsiFn& log_psi, const MolecularIntegrals& ham,
                                  const OccupationVector& x);

/// Same, with the connected list supplied by the caller.
std::complex<double> local_energy(const std::vector<ConnectedEntry>& connected,
                                  const std::complex<double>& log_psi_x, const LogPsiFn& log_psi);

inline constexpr std::uint64_t kDefaultDenseCap = 20'000;

/// Dense sector Hamiltonian in enumerate_sector order.
Eigen::MatrixXd dense_hamiltonian(const MolecularIntegrals& ham, const Sector& sector,
                                  std::uint64_t cap = kDefaultDenseCap);

struct GroundState {
  double energy = 0.0;
  Eigen::VectorXd amplitudes;  ///< unit norm, largest-magnitude entry positive
  std::vector<OccupationVector> basis;
};

GroundState dense_fci_ground_state(const MolecularIntegrals& ham, const Sector& sector,
                                   std::uint64_t cap = kDefaultDenseCap);

}  // namespace nqs
