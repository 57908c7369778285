#include "nqs/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace nqs {

MolecularIntegrals::MolecularIntegrals(int n_spatial, int n_electrons, int ms2)
    : n_spatial_(n_spatial), n_electrons_(n_electrons), ms2_(ms2) {
  if (n_spatial <= 0 || 2 * n_spatial > kMaxSpinOrbitals) {
    throw std::invalid_argument("MolecularIntegrals: NORB must be in [1, 32], got " +
                                std::to_string(n_spatial));
  }
  const auto n = static_cast<std::size_t>(n_spatial);
  h_.assign(n * n, 0.0);
  g_.assign(n * n * n * n, 0.0);
}

Sector MolecularIntegrals::sector() const {
  if ((n_electrons_ + ms2_) % 2 != 0 || n_electrons_ < std::abs(ms2_)) {
    throw std::invalid_argument("MolecularIntegrals: NELEC=" + std::to_string(n_electrons_) +
                                " and MS2=" + std::to_string(ms2_) + " are inconsistent");
  }
  Sector s{n_spin_orbitals(), (n_electrons_ + ms2_) / 2, (n_electrons_ - ms2_) / 2};
  s.validate();
  return s;
}

void MolecularIntegrals::set_h(int p, int q, double v) {
  h_[p * n_spatial_ + q] = v;
  h_[q * n_spatial_ + p] = v;
}

void MolecularIntegrals::set_g(int p, int q, int r, int s, double v) {
  const int n = n_spatial_;
  auto at = [&](int a, int b, int c, int d) -> double& { return g_[((a * n + b) * n + c) * n + d]; };
  at(p, q, r, s) = v;
  at(q, p, r, s) = v;
  at(p, q, s, r) = v;
  at(q, p, s, r) = v;
  at(r, s, p, q) = v;
  at(s, r, p, q) = v;
  at(r, s, q, p) = v;
  at(s, r, q, p) = v;
}

// ---------------------------------------------------------------------------
// FCIDUMP

namespace {

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

bool parse_integral_line(const std::string& line, double& value, int idx[4]) {
  std::string fixed = line;
  // Fortran double-precision exponents.
  for (char& c : fixed) {
    if (c == 'D' || c == 'd') c = 'E';
  }
  std::istringstream ss(fixed);
  if (!(ss >> value)) return false;
  for (int k = 0; k < 4; ++k) {
    if (!(ss >> idx[k])) return false;
  }
  std::string rest;
  return !(ss >> rest);
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

struct Header {
  std::map<std::string, std::string> fields;
};

Header parse_header(const std::string& text, int line) {
  std::string body = upper(text);
  for (const char* marker : {"&FCI", "&END", "$FCI", "$END"}) {
    for (auto pos = body.find(marker); pos != std::string::npos; pos = body.find(marker)) {
      body.replace(pos, std::string(marker).size(), " ");
    }
  }
  for (char& c : body) {
    if (c == '/' || c == '\n' || c == '\r' || c == '\t') c = ' ';
  }
  Header h;
  static const std::regex key_re(R"(([A-Z][A-Z0-9_]*)\s*=)");
  std::vector<std::pair<std::string, std::size_t>> keys;  // name, end of "NAME="
  std::vector<std::size_t> starts;
  for (auto it = std::sregex_iterator(body.begin(), body.end(), key_re); it != std::sregex_iterator();
       ++it) {
    keys.emplace_back((*it)[1].str(), static_cast<std::size_t>(it->position() + it->length()));
    starts.push_back(static_cast<std::size_t>(it->position()));
  }
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const std::size_t end = k + 1 < keys.size() ? starts[k + 1] : body.size();
    std::string value = body.substr(keys[k].second, end - keys[k].second);
    std::replace(value.begin(), value.end(), ',', ' ');
    h.fields[keys[k].first] = value;
  }
  // Anything before the first key must be whitespace.
  const std::size_t first = starts.empty() ? body.size() : starts.front();
  if (!is_blank(body.substr(0, first))) {
    throw ParseError("malformed FCIDUMP header near '" + body.substr(0, first) + "'", line);
  }
  return h;
}

int header_int(const Header& h, const std::string& key, bool required, int fallback, int line) {
  auto it = h.fields.find(key);
  if (it == h.fields.end()) {
    if (required) throw ParseError("FCIDUMP header is missing " + key, line);
    return fallback;
  }
  std::istringstream ss(it->second);
  int v = 0;
  if (!(ss >> v)) throw ParseError("FCIDUMP header field " + key + " is not an integer", line);
  return v;
}

}  // namespace

MolecularIntegrals parse_fcidump(std::istream& in) {
  std::string line;
  std::string header_text;
  int line_no = 0;
  bool header_done = false;
  bool saw_marker = false;
  std::vector<std::pair<std::string, int>> data_lines;

  while (std::getline(in, line)) {
    ++line_no;
    if (!header_done) {
      double v;
      int idx[4];
      const std::string up = upper(line);
      if (!saw_marker && header_text.find('=') != std::string::npos && parse_integral_line(line, v, idx)) {
        header_done = true;
        data_lines.emplace_back(line, line_no);
        continue;
      }
      if (up.find("&FCI") != std::string::npos || up.find("$FCI") != std::string::npos) saw_marker = true;
      header_text += line;
      header_text += '\n';
      const std::string trimmed = up.substr(0, up.find_last_not_of(" \t\r") + 1);
      if (up.find("&END") != std::string::npos || up.find("$END") != std::string::npos ||
          (!trimmed.empty() && trimmed.back() == '/')) {
        header_done = true;
      }
      continue;
    }
    if (!is_blank(line)) data_lines.emplace_back(line, line_no);
  }
  if (!header_done && data_lines.empty() && header_text.find('=') == std::string::npos) {
    throw ParseError("FCIDUMP header not found", 0);
  }

  const Header header = parse_header(header_text, 1);
  const int norb = header_int(header, "NORB", true, 0, 1);
  const int nelec = header_int(header, "NELEC", true, 0, 1);
  const int ms2 = header_int(header, "MS2", false, 0, 1);
  if (norb <= 0) throw ParseError("NORB must be positive", 1);
  if (2 * norb > kMaxSpinOrbitals) {
    throw ParseError("NORB=" + std::to_string(norb) + " exceeds the 64 spin-orbital limit", 1);
  }
  if (nelec < 0 || nelec > 2 * norb) throw ParseError("NELEC out of range", 1);

  MolecularIntegrals ints(norb, nelec, ms2);
  using Key = std::tuple<int, int, int, int>;
  std::map<Key, double> seen;

  auto check_duplicate = [&](Key key, double v, int ln) {
    auto [it, inserted] = seen.emplace(key, v);
    if (!inserted && std::abs(it->second - v) > 1e-12) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "conflicting duplicate integral: " << it->second << " vs " << v;
      throw ParseError(msg.str(), ln);
    }
  };

  for (const auto& [text, ln] : data_lines) {
    double v = 0.0;
    int idx[4];
    if (!parse_integral_line(text, v, idx)) {
      throw ParseError("expected 'value i j k l', got '" + text + "'", ln);
    }
    for (int k = 0; k < 4; ++k) {
      if (idx[k] < 0 || idx[k] > norb) {
        throw ParseError("orbital index " + std::to_string(idx[k]) + " outside [0, " +
                             std::to_string(norb) + "]",
                         ln);
      }
    }
    const int i = idx[0], j = idx[1], k = idx[2], l = idx[3];
    if (i == 0 && j == 0 && k == 0 && l == 0) {
      check_duplicate({0, 0, 0, 0}, v, ln);
      ints.set_e_core(v);
    } else if (i != 0 && j != 0 && k == 0 && l == 0) {
      check_duplicate({std::min(i, j), std::max(i, j), 0, 0}, v, ln);
      ints.set_h(i - 1, j - 1, v);
    } else if (i != 0 && j != 0 && k != 0 && l != 0) {
      std::pair<int, int> a{std::min(i, j), std::max(i, j)};
      std::pair<int, int> b{std::min(k, l), std::max(k, l)};
      if (b < a) std::swap(a, b);
      check_duplicate({a.first, a.second, b.first, b.second}, v, ln);
      ints.set_g(i - 1, j - 1, k - 1, l - 1, v);
    } else if (i != 0 && j == 0 && k == 0 && l == 0) {
      // Orbital energy record; not part of the Hamiltonian.
    } else {
      throw ParseError("unrecognised index pattern in '" + text + "'", ln);
    }
  }
  return ints;
}

MolecularIntegrals load_fcidump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open FCIDUMP file '" + path + "'");
  try {
    return parse_fcidump(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

// ---------------------------------------------------------------------------
// Slater-Condon rules

namespace {

struct SpinOrbital {
  int spatial;
  int spin;  // 0 up, 1 down
};

inline SpinOrbital split(int i, int n) { return {i % n, i / n}; }

// (ab|cd) over spin-orbitals in chemists' notation.
inline double chem(const MolecularIntegrals& H, int a, int b, int c, int d) {
  const int n = H.n_spatial();
  const SpinOrbital A = split(a, n), B = split(b, n), C = split(c, n), D = split(d, n);
  if (A.spin != B.spin || C.spin != D.spin) return 0.0;
  return H.g(A.spatial, B.spatial, C.spatial, D.spatial);
}

double diagonal(const MolecularIntegrals& H, const std::vector<int>& occ) {
  const int n = H.n_spatial();
  double e = H.e_core();
  for (std::size_t a = 0; a < occ.size(); ++a) {
    const SpinOrbital i = split(occ[a], n);
    e += H.h(i.spatial, i.spatial);
    for (std::size_t b = a + 1; b < occ.size(); ++b) {
      const SpinOrbital j = split(occ[b], n);
      e += H.g(i.spatial, i.spatial, j.spatial, j.spatial);
      if (i.spin == j.spin) e -= H.g(i.spatial, j.spatial, j.spatial, i.spatial);
    }
  }
  return e;
}

// Unsigned <x with i->a|H|x>.
double single(const MolecularIntegrals& H, const std::vector<int>& occ, int i, int a) {
  const int n = H.n_spatial();
  const SpinOrbital I = split(i, n), A = split(a, n);
  if (I.spin != A.spin) return 0.0;
  double e = H.h(A.spatial, I.spatial);
  for (int j : occ) {
    if (j == i) continue;
    const SpinOrbital J = split(j, n);
    e += H.g(A.spatial, I.spatial, J.spatial, J.spatial);
    if (J.spin == I.spin) e -= H.g(A.spatial, J.spatial, J.spatial, I.spatial);
  }
  return e;
}

// Unsigned <ab||ij>.
inline double dbl(const MolecularIntegrals& H, int i, int j, int a, int b) {
  return chem(H, a, i, b, j) - chem(H, a, j, b, i);
}

int parity_sign(int count) { return (count & 1) ? -1 : 1; }

}  // namespace

double matrix_element(const MolecularIntegrals& ham, const OccupationVector& x,
                      const OccupationVector& x2) {
  if (x.size() != ham.n_spin_orbitals() || x2.size() != ham.n_spin_orbitals()) {
    throw std::invalid_argument("matrix_element: configuration width does not match integrals");
  }
  if (x.count_up() != x2.count_up() || x.count_down() != x2.count_down()) {
    throw std::invalid_argument("matrix_element: configurations are in different sectors");
  }
  const Excitation ex = classify_excitation(x, x2);
  switch (ex.degree) {
    case ExcitationDegree::kNone:
      return diagonal(ham, x.occupied_orbitals());
    case ExcitationDegree::kSingle:
      return ex.sign * single(ham, x.occupied_orbitals(), ex.holes[0], ex.particles[0]);
    case ExcitationDegree::kDouble:
      return ex.sign * dbl(ham, ex.holes[0], ex.holes[1], ex.particles[0], ex.particles[1]);
    case ExcitationDegree::kHigher:
      break;
  }
  return 0.0;
}

std::vector<ConnectedEntry> connected_configurations(const MolecularIntegrals& ham,
                                                     const OccupationVector& x) {
  const int m = ham.n_spin_orbitals();
  const int n = ham.n_spatial();
  if (x.size() != m) {
    throw std::invalid_argument("connected_configurations: configuration width does not match");
  }
  const std::vector<int> occ = x.occupied_orbitals();
  std::vector<int> virt;
  for (int a = 0; a < m; ++a) {
    if (!x.occupied(a)) virt.push_back(a);
  }

  std::vector<ConnectedEntry> out;
  out.push_back({x, diagonal(ham, occ)});

  for (int i : occ) {
    for (int a : virt) {
      if (i / n != a / n) continue;
      const double v = single(ham, occ, i, a) * parity_sign(x.count_between(i, a));
      if (std::abs(v) > kConnectedDropTolerance) out.push_back({x.flipped(i).flipped(a), v});
    }
  }

  for (std::size_t p = 0; p < occ.size(); ++p) {
    for (std::size_t q = p + 1; q < occ.size(); ++q) {
      const int i = occ[p], j = occ[q];
      const int spin_ij = i / n + j / n;
      const OccupationVector removed = x.flipped(i).flipped(j);
      for (std::size_t r = 0; r < virt.size(); ++r) {
        for (std::size_t s = r + 1; s < virt.size(); ++s) {
          const int a = virt[r], b = virt[s];
          if (a / n + b / n != spin_ij) continue;
          const double raw = dbl(ham, i, j, a, b);
          if (std::abs(raw) <= kConnectedDropTolerance) continue;
          const OccupationVector mid = x.flipped(i).flipped(a);
          const int sign = parity_sign(x.count_between(i, a) + mid.count_between(j, b));
          out.push_back({removed.flipped(a).flipped(b), sign * raw});
        }
      }
    }
  }
  return out;
}

std::complex<double> local_energy(const std::vector<ConnectedEntry>& connected,
                                  const std::complex<double>& log_psi_x, const LogPsiFn& log_psi) {
  if (!std::isfinite(log_psi_x.real()) || !std::isfinite(log_psi_x.imag())) {
    throw std::domain_error("local_energy: log-amplitude is not finite at the configuration");
  }
  std::complex<double> e{0.0, 0.0};
  for (const ConnectedEntry& c : connected) {
    const std::complex<double> lp = log_psi(c.config);
    if (lp.real() == -std::numeric_limits<double>::infinity()) continue;
    e += c.element * std::exp(lp - log_psi_x);
  }
  return e;
}

std::complex<double> local_energy(const LogPsiFn& log_psi, const MolecularIntegrals& ham,
                                  const OccupationVector& x) {
  return local_energy(connected_configurations(ham, x), log_psi(x), log_psi);
}

Eigen::MatrixXd dense_hamiltonian(const MolecularIntegrals& ham, const Sector& sector,
                                  std::uint64_t cap) {
  if (sector.n_spin_orbitals != ham.n_spin_orbitals()) {
    throw std::invalid_argument("dense_hamiltonian: sector width does not match integrals");
  }
  if (sector.size() > cap) {
    throw CapExceeded("dense_hamiltonian: sector has " + std::to_string(sector.size()) +
                      " configurations, dense cap is " + std::to_string(cap));
  }
  const auto basis = enumerate_sector(sector, cap);
  std::unordered_map<std::uint64_t, Eigen::Index> index;
  index.reserve(basis.size());
  for (std::size_t k = 0; k < basis.size(); ++k) index.emplace(basis[k].bits(), k);

  const auto dim = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index col = 0; col < dim; ++col) {
    for (const ConnectedEntry& e : connected_configurations(ham, basis[col])) {
      H(index.at(e.config.bits()), col) += e.element;
    }
  }
  return H;
}

GroundState dense_fci_ground_state(const MolecularIntegrals& ham, const Sector& sector,
                                   std::uint64_t cap) {
  const Eigen::MatrixXd H = dense_hamiltonian(ham, sector, cap);
  const double asym = (H - H.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, H.cwiseAbs().maxCoeff())) {
    throw std::logic_error("dense_fci_ground_state: assembled Hamiltonian is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(H);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("dense_fci_ground_state: eigensolver failed");
  }
  GroundState gs;
  gs.energy = solver.eigenvalues()(0);
  gs.amplitudes = solver.eigenvectors().col(0).normalized();
  Eigen::Index arg = 0;
  gs.amplitudes.cwiseAbs().maxCoeff(&arg);
  if (gs.amplitudes(arg) < 0) gs.amplitudes = -gs.amplitudes;
  gs.basis = enumerate_sector(sector, cap);
  return gs;
}

}  // namespace nqs
