#include "nqs/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "nqs/diagnostics.hpp"
#include "nqs/rng.hpp"

namespace nqs {

Eigen::MatrixXd TridiagonalMatrix::dense() const {
  const Eigen::Index m = size();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  t.diagonal() = alpha;
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    t(i + 1, i) = beta(i);
    t(i, i + 1) = beta(i);
  }
  return t;
}

Eigen::VectorXd random_unit_vector(Eigen::Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x1a2c));
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    // Box-Muller on portable uniforms.
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    v(i) = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  return v.normalized();
}

namespace {

void check_finite(const Eigen::VectorXd& w) {
  if (!w.allFinite()) throw std::domain_error("lanczos: matvec produced non-finite values");
}

}  // namespace

void extend_lanczos(LanczosFactorization& fac, const MatVec& matvec, int m,
                    const LanczosOptions& options) {
  const Eigen::Index dim = fac.basis.rows();
  Eigen::Index j = fac.steps();
  if (j == 0) throw std::invalid_argument("extend_lanczos: empty factorization");
  if (fac.invariant_subspace || j >= m) return;

  Eigen::MatrixXd v(dim, m);
  v.leftCols(j) = fac.basis;
  Eigen::VectorXd alpha(m), beta(std::max(m - 1, 0));
  alpha.head(j) = fac.t.alpha;
  beta.head(j - 1) = fac.t.beta;

  double scale = 1.0;
  if (j > 0) scale = std::max(scale, fac.t.alpha.cwiseAbs().maxCoeff());
  if (j > 1) scale = std::max(scale, fac.t.beta.maxCoeff());

  // Continue from the stored residual: v_{j+1} = f / ||f||.
  double b = fac.t.beta_last;
  if (!(b > options.breakdown_tol * scale)) {
    fac.invariant_subspace = true;
    fac.t.beta_last = 0.0;
    fac.residual.setZero(dim);
    return;
  }
  v.col(j) = fac.residual / b;
  beta(j - 1) = b;

  Eigen::VectorXd w(dim);
  for (;; ++j) {
    matvec(v.col(j), w);
    ++fac.matvecs;
    check_finite(w);
    alpha(j) = v.col(j).dot(w);
    w -= alpha(j) * v.col(j);
    if (j > 0) w -= beta(j - 1) * v.col(j - 1);
    if (options.reorthogonalize) {
      for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXd h = v.leftCols(j + 1).transpose() * w;
        w -= v.leftCols(j + 1) * h;
        alpha(j) += h(j);
      }
    }
    const double bj = w.norm();
    scale = std::max({scale, std::abs(alpha(j)), j > 0 ? beta(j - 1) : 0.0});
    const bool last = (j + 1 == m);
    if (bj <= options.breakdown_tol * scale) {
      fac.invariant_subspace = true;
      fac.basis = v.leftCols(j + 1);
      fac.t.alpha = alpha.head(j + 1);
      fac.t.beta = beta.head(j);
      fac.t.beta_last = 0.0;
      fac.residual = Eigen::VectorXd::Zero(dim);
      return;
    }
    if (last) {
      fac.basis = std::move(v);
      fac.t.alpha = alpha;
      fac.t.beta = beta;
      fac.t.beta_last = bj;
      fac.residual = w;
      return;
    }
    beta(j) = bj;
    v.col(j + 1) = w / bj;
  }
}

LanczosFactorization lanczos(const MatVec& matvec, const Eigen::VectorXd& v1, int m,
                             const LanczosOptions& options) {
  if (m < 1) throw std::invalid_argument("lanczos: subspace size must be >= 1");
  if (std::abs(v1.norm() - 1.0) > 1e-12) {
    throw std::invalid_argument("lanczos: starting vector must have unit norm");
  }
  const Eigen::Index dim = v1.size();
  LanczosFactorization fac;
  // Seed with a zero-step factorization whose residual is v1.
  fac.basis.resize(dim, 0);
  Eigen::VectorXd w(dim);
  matvec(v1, w);
  fac.matvecs = 1;
  check_finite(w);
  const double a = v1.dot(w);
  w -= a * v1;
  if (options.reorthogonalize) {
    for (int pass = 0; pass < 2; ++pass) {
      const double h = v1.dot(w);
      w -= h * v1;
    }
  }
  fac.basis = v1;
  fac.t.alpha = Eigen::VectorXd::Constant(1, a);
  fac.t.beta.resize(0);
  fac.t.beta_last = w.norm();
  fac.residual = w;
  const double scale = std::max(1.0, std::abs(a));
  if (fac.t.beta_last <= options.breakdown_tol * scale) {
    fac.invariant_subspace = true;
    fac.t.beta_last = 0.0;
    fac.residual.setZero();
    return fac;
  }
  extend_lanczos(fac, matvec, m, options);
  return fac;
}

TridiagonalEigen tridiag_eigen(const TridiagonalMatrix& t) {
  const Eigen::Index n = t.size();
  if (n == 0) return {};
  if (n > kTridiagonalCap) throw std::invalid_argument("tridiag_eigen: matrix exceeds size cap");
  Eigen::VectorXd d = t.alpha;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e.head(n - 1) = t.beta;
  Eigen::MatrixXd z = Eigen::MatrixXd::Identity(n, n);
  constexpr double eps = std::numeric_limits<double>::epsilon();

  for (Eigen::Index l = 0; l < n; ++l) {
    int iter = 0;
    Eigen::Index m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d(m)) + std::abs(d(m + 1));
        if (std::abs(e(m)) <= eps * dd || std::abs(e(m)) < std::numeric_limits<double>::min()) break;
      }
      if (m == l) break;
      if (++iter > 100) throw std::runtime_error("tridiag_eigen: QL iteration did not converge");
      // Wilkinson-type shift from the leading 2x2 block.
      double g = (d(l + 1) - d(l)) / (2.0 * e(l));
      double r = std::hypot(g, 1.0);
      g = d(m) - d(l) + e(l) / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      Eigen::Index i;
      bool underflow = false;
      for (i = m - 1; i >= l; --i) {
        double f = s * e(i);
        const double b = c * e(i);
        r = std::hypot(f, g);
        e(i + 1) = r;
        if (r == 0.0) {
          d(i + 1) -= p;
          e(m) = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d(i + 1) - p;
        r = (d(i) - g) * s + 2.0 * c * b;
        p = s * r;
        d(i + 1) = g + p;
        g = c * r - b;
        for (Eigen::Index k = 0; k < n; ++k) {
          f = z(k, i + 1);
          z(k, i + 1) = s * z(k, i) + c * f;
          z(k, i) = c * z(k, i) - s * f;
        }
      }
      if (underflow) continue;
      d(l) -= p;
      e(l) = g;
      e(m) = 0.0;
    } while (m != l);
  }

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return d(a) < d(b); });
  TridiagonalEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = d(order[k]);
    out.vectors.col(k) = z.col(order[k]);
  }
  return out;
}

namespace {

// One implicit symmetric QR sweep with shift mu on rows/cols [lo, hi] of h,
// accumulating the rotations into q.
void bulge_chase(Eigen::MatrixXd& h, Eigen::MatrixXd& q, Eigen::Index lo, Eigen::Index hi, double mu) {
  double x = h(lo, lo) - mu;
  double y = h(lo + 1, lo);
  for (Eigen::Index i = lo; i < hi; ++i) {
    const double r = std::hypot(x, y);
    double c = 1.0, s = 0.0;
    if (r != 0.0) {
      c = x / r;
      s = y / r;
    }
    // G acts on (i, i+1): [c -s; s c]; h <- G^T h G, q <- q G.
    for (Eigen::Index k = 0; k < h.cols(); ++k) {
      const double a = h(i, k), b = h(i + 1, k);
      h(i, k) = c * a + s * b;
      h(i + 1, k) = -s * a + c * b;
    }
    for (Eigen::Index k = 0; k < h.rows(); ++k) {
      const double a = h(k, i), b = h(k, i + 1);
      h(k, i) = c * a + s * b;
      h(k, i + 1) = -s * a + c * b;
    }
    for (Eigen::Index k = 0; k < q.rows(); ++k) {
      const double a = q(k, i), b = q(k, i + 1);
      q(k, i) = c * a + s * b;
      q(k, i + 1) = -s * a + c * b;
    }
    if (i + 1 < hi) {
      x = h(i + 1, i);
      y = h(i + 2, i);
    }
  }
}

}  // namespace

LanczosFactorization implicit_restart(const LanczosFactorization& fac, std::span<const double> shifts,
                                      int keep) {
  const Eigen::Index m = fac.steps();
  if (keep < 1 || keep > m) throw std::invalid_argument("implicit_restart: keep must be in [1, m]");
  if (static_cast<Eigen::Index>(shifts.size()) > m - keep) {
    throw std::invalid_argument("implicit_restart: at most m - keep shifts are allowed");
  }
  Eigen::MatrixXd h = fac.t.dense();
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(m, m);

  // Guard against shifts that would annihilate the kept Ritz values.
  std::vector<double> mus(shifts.begin(), shifts.end());
  if (!mus.empty()) {
    const TridiagonalEigen ritz = tridiag_eigen(fac.t);
    const double spread = std::max(ritz.values(m - 1) - ritz.values(0), 1.0);
    for (double& mu : mus) {
      for (Eigen::Index k = 0; k < keep; ++k) {
        if (std::abs(mu - ritz.values(k)) < 1e-14) {
          warn("implicit_restart: shift coincides with a kept Ritz value; perturbing");
          mu += (mu >= ritz.values(k) ? 1.0 : -1.0) * 1e-12 * spread;
        }
      }
    }
  }

  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (double mu : mus) {
    // Deflate negligible couplings, then sweep each unreduced block.
    for (Eigen::Index i = 0; i + 1 < m; ++i) {
      if (std::abs(h(i + 1, i)) <= eps * (std::abs(h(i, i)) + std::abs(h(i + 1, i + 1)))) {
        h(i + 1, i) = 0.0;
        h(i, i + 1) = 0.0;
      }
    }
    Eigen::Index lo = 0;
    while (lo < m - 1) {
      Eigen::Index hi = lo;
      while (hi < m - 1 && h(hi + 1, hi) != 0.0) ++hi;
      if (hi > lo) bulge_chase(h, q, lo, hi, mu);
      lo = hi + 1;
    }
    // Restore exact tridiagonal symmetric structure.
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index k = 0; k < m; ++k) {
        if (std::abs(i - k) > 1) h(i, k) = 0.0;
      }
    }
    for (Eigen::Index i = 0; i + 1 < m; ++i) {
      const double b = 0.5 * (h(i + 1, i) + h(i, i + 1));
      h(i + 1, i) = b;
      h(i, i + 1) = b;
    }
  }

  LanczosFactorization out;
  out.matvecs = 0;
  const Eigen::MatrixXd vq = fac.basis * q.leftCols(std::min<Eigen::Index>(keep + 1, m));
  out.basis = vq.leftCols(keep);
  Eigen::VectorXd f = fac.residual * q(m - 1, keep - 1);
  if (keep < m) f += vq.col(keep) * h(keep, keep - 1);
  out.t.alpha = h.diagonal().head(keep);
  out.t.beta.resize(keep - 1);
  for (Eigen::Index i = 0; i + 1 < keep; ++i) out.t.beta(i) = h(i + 1, i);

  // Keep subdiagonal entries non-negative by flipping basis signs.
  for (Eigen::Index i = 0; i + 1 < keep; ++i) {
    if (out.t.beta(i) < 0.0) {
      out.t.beta(i) = -out.t.beta(i);
      out.basis.col(i + 1) *= -1.0;
      if (i + 1 < keep - 1) out.t.beta(i + 1) = -out.t.beta(i + 1);
      if (i + 1 == keep - 1) f = -f;
    }
  }
  out.t.beta_last = f.norm();
  out.residual = std::move(f);
  out.invariant_subspace = false;
  return out;
}

namespace {

double orthogonality_loss(const Eigen::MatrixXd& v) {
  const Eigen::MatrixXd g = v.transpose() * v - Eigen::MatrixXd::Identity(v.cols(), v.cols());
  return g.cwiseAbs().maxCoeff();
}

double explicit_residual(const MatVec& matvec, const Eigen::VectorXd& y, double lambda,
                         long& matvecs) {
  Eigen::VectorXd ay(y.size());
  matvec(y, ay);
  ++matvecs;
  check_finite(ay);
  return (ay - lambda * y).norm();
}

}  // namespace

RitzPair irl_smallest(const MatVec& matvec, Eigen::Index dim, const IrlOptions& options) {
  if (dim < 1) throw std::invalid_argument("irl_smallest: dimension must be >= 1");
  if (options.m < 2 && dim > 1) throw std::invalid_argument("irl_smallest: m must be >= 2");
  RitzPair out;
  if (dim == 1) {
    Eigen::VectorXd y = Eigen::VectorXd::Ones(1), ay(1);
    matvec(y, ay);
    check_finite(ay);
    out.lambda = ay(0);
    out.y = y;
    out.residual = 0.0;
    out.converged = true;
    out.matvecs = 1;
    out.ritz_history.push_back(out.lambda);
    return out;
  }

  const int m = static_cast<int>(std::min<Eigen::Index>(options.m, dim));
  LanczosFactorization fac = lanczos(matvec, random_unit_vector(dim, options.seed), m);
  long matvecs = fac.matvecs;

  for (int restart = 0;; ++restart) {
    out.max_orthogonality_loss = std::max(out.max_orthogonality_loss, orthogonality_loss(fac.basis));
    const TridiagonalEigen eig = tridiag_eigen(fac.t);
    const double theta = eig.values(0);
    const Eigen::VectorXd u = eig.vectors.col(0);
    out.ritz_history.push_back(theta);
    const double estimate =
        fac.invariant_subspace ? 0.0 : fac.t.beta_last * std::abs(u(fac.steps() - 1));

    const bool give_up = restart >= options.max_restarts;
    if (estimate <= options.tol || give_up) {
      Eigen::VectorXd y = fac.basis * u;
      y.normalize();
      const double r = explicit_residual(matvec, y, theta, matvecs);
      out.lambda = theta;
      out.y = std::move(y);
      out.residual = r;
      out.residual_estimate = estimate;
      out.restarts = restart;
      out.matvecs = matvecs;
      out.converged = r <= options.tol;
      if (out.converged || give_up) {
        if (!out.converged) {
          warn("irl_smallest: not converged after " + std::to_string(restart) +
               " restarts (residual " + std::to_string(r) + ")");
        }
        return out;
      }
      if (fac.invariant_subspace) {
        // Rounding left an invariant subspace with a poor residual; restart from the Ritz vector.
        fac = lanczos(matvec, out.y, m);
        matvecs += fac.matvecs;
        continue;
      }
    }

    const Eigen::Index k = fac.steps();
    if (k < 2) {
      fac = lanczos(matvec, (fac.basis * u).normalized(), m);
      matvecs += fac.matvecs;
      continue;
    }
    std::vector<double> shifts(eig.values.data() + 1, eig.values.data() + k);
    fac = implicit_restart(fac, shifts, 1);
    const long before = fac.matvecs;
    extend_lanczos(fac, matvec, m);
    matvecs += fac.matvecs - before;
  }
}

RitzPair sl_smallest(const MatVec& matvec, Eigen::Index dim, const SlOptions& options) {
  if (dim < 1) throw std::invalid_argument("sl_smallest: dimension must be >= 1");
  if (options.iterations < 1) throw std::invalid_argument("sl_smallest: iterations must be >= 1");
  LanczosOptions lo;
  lo.reorthogonalize = false;
  const LanczosFactorization fac =
      lanczos(matvec, random_unit_vector(dim, options.seed), options.iterations, lo);
  long matvecs = fac.matvecs;
  const TridiagonalEigen eig = tridiag_eigen(fac.t);
  RitzPair out;
  out.lambda = eig.values(0);
  out.y = (fac.basis * eig.vectors.col(0)).normalized();
  out.residual_estimate =
      fac.invariant_subspace ? 0.0 : fac.t.beta_last * std::abs(eig.vectors(fac.steps() - 1, 0));
  out.residual = explicit_residual(matvec, out.y, out.lambda, matvecs);
  out.matvecs = matvecs;
  out.converged = true;  // fixed budget; no convergence test
  out.ritz_history.push_back(out.lambda);
  out.max_orthogonality_loss = orthogonality_loss(fac.basis);
  return out;
}

}  // namespace nqs
