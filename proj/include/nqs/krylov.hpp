#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nqs {

/// y = A x for a symmetric operator A. Must not alias x and y.
using MatVec = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& y)>;

struct TridiagonalMatrix {
  Eigen::VectorXd alpha;  ///< diagonal, length m
  Eigen::VectorXd beta;   ///< subdiagonal, length m-1, entries >= 0
  double beta_last = 0.0; ///< coupling to the next (residual) direction

  Eigen::Index size() const { return alpha.size(); }
  Eigen::MatrixXd dense() const;
};

struct LanczosOptions {
  /// Full reorthogonalization against every stored basis vector (two passes).
  bool reorthogonalize = true;
  /// Breakdown when beta_j <= tol * max(1, max |alpha|, |beta| seen so far).
  double breakdown_tol = 1e-12;
};

/// A V = V T + f e_m^T with f = beta_last * v_{m+1}.
struct LanczosFactorization {
  Eigen::MatrixXd basis;     ///< dim x m, orthonormal columns
  TridiagonalMatrix t;
  Eigen::VectorXd residual;  ///< f
  bool invariant_subspace = false;
  long matvecs = 0;

  Eigen::Index steps() const { return basis.cols(); }
};

LanczosFactorization lanczos(const MatVec& matvec, const Eigen::VectorXd& v1, int m,
                             const LanczosOptions& options = {});

/// Grows an existing k-step factorization to m steps.
void extend_lanczos(LanczosFactorization& fac, const MatVec& matvec, int m,
                    const LanczosOptions& options = {});

struct TridiagonalEigen {
  Eigen::VectorXd values;   ///< ascending
  Eigen::MatrixXd vectors;  ///< columns orthonormal, matching values
};

inline constexpr Eigen::Index kTridiagonalCap = 1000;

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
TridiagonalEigen tridiag_eigen(const TridiagonalMatrix& t);

/// Applies one implicit shifted-QR sweep per shift to T and compresses the
/// factorization to `keep` steps. The new first basis vector is proportional
/// to prod_j (A - shift_j I) v_1.
LanczosFactorization implicit_restart(const LanczosFactorization& fac, std::span<const double> shifts,
                                      int keep);

struct RitzPair {
  double lambda = 0.0;
  Eigen::VectorXd y;        ///< unit norm
  double residual = 0.0;    ///< ||A y - lambda y||, explicit
  double residual_estimate = 0.0;  ///< beta_m |e_m^T u|
  bool converged = false;
  int restarts = 0;
  long matvecs = 0;
  std::vector<double> ritz_history;  ///< lowest Ritz value per cycle
  double max_orthogonality_loss = 0.0;  ///< max |V^T V - I| seen
};

struct IrlOptions {
  int m = 20;
  double tol = 1e-12;
  int max_restarts = 500;
  std::uint64_t seed = 0;
};

/// Lowest eigenpair by implicitly restarted Lanczos (k = 1, exact shifts).
RitzPair irl_smallest(const MatVec& matvec, Eigen::Index dim, const IrlOptions& options = {});

struct SlOptions {
  int iterations = 100;
  std::uint64_t seed = 0;
};

/// Plain Lanczos baseline: no reorthogonalization, no restarts.
RitzPair sl_smallest(const MatVec& matvec, Eigen::Index dim, const SlOptions& options = {});

/// Unit vector with i.i.d. normal entries.
Eigen::VectorXd random_unit_vector(Eigen::Index dim, std::uint64_t seed);

}  // namespace nqs
