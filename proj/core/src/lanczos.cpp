// Block shift-invert Lanczos for the pencil (L, M).
//
// The Krylov space of (L - sigma M)^{-1} M is grown block by block with full
// M-reorthogonalization; Ritz pairs come from a Rayleigh-Ritz projection of
// L onto the accumulated basis. Blocks (rather than a single start vector)
// are needed because symmetric meshes such as icospheres have exactly
// repeated eigenvalues, and a single Krylov sequence only sees one direction
// per distinct eigenvalue.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "unimatch/errors.hpp"
#include "unimatch/spectral.hpp"

namespace unimatch::detail {

namespace {

class MInner {
 public:
  explicit MInner(const Eigen::VectorXd& mass) : mass_(mass) {}

  // Removes the span of `basis` from `block` (twice, classical Gram-Schmidt).
  void project_out(const Eigen::MatrixXd& basis, Eigen::Index used, Eigen::MatrixXd& block) const {
    if (used == 0) return;
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::MatrixXd coeff = basis.leftCols(used).transpose() * (mass_.asDiagonal() * block);
      block.noalias() -= basis.leftCols(used) * coeff;
    }
  }

  double norm(const Eigen::VectorXd& v) const {
    return std::sqrt(v.dot(mass_.cwiseProduct(v)));
  }

  double dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return a.dot(mass_.cwiseProduct(b));
  }

 private:
  const Eigen::VectorXd& mass_;
};

}  // namespace

SpectralBasis lanczos_eigenbasis(const CotanLaplacian& lap, int k, const EigenOptions& options) {
  const Eigen::Index n = lap.mass.size();
  const Eigen::VectorXd& mass = lap.mass;
  MInner inner(mass);

  // Small negative shift keeps L - sigma M positive definite.
  const double diag_scale =
      (lap.stiffness.diagonal().array() / mass.array()).mean();
  const double sigma = -1e-4 * diag_scale;
  SparseMatrix shifted = lap.stiffness;
  for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma * mass[i];
  Eigen::SimplicialLDLT<SparseMatrix> factor(shifted);
  if (factor.info() != Eigen::Success) {
    throw ConvergenceError("lanczos: factorization of L - sigma M failed");
  }

  const Eigen::Index block = std::min<Eigen::Index>(n, 8);
  Eigen::Index capacity = std::min<Eigen::Index>(n, std::max<Eigen::Index>(2 * k + 2 * block, 40));
  Eigen::MatrixXd basis(n, capacity);
  Eigen::Index used = 0;

  std::mt19937_64 rng(0x5eed1a2c0ffeeULL);
  std::normal_distribution<double> gauss;
  auto random_block = [&](Eigen::Index cols) {
    Eigen::MatrixXd r(n, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < n; ++i) r(i, j) = gauss(rng);
    return r;
  };

  // Appends the M-orthonormalized columns of `cand`, replacing columns that
  // vanish after projection by fresh random directions.
  auto append = [&](Eigen::MatrixXd cand) {
    inner.project_out(basis, used, cand);
    for (Eigen::Index j = 0; j < cand.cols() && used < n; ++j) {
      Eigen::VectorXd v = cand.col(j);
      double before = inner.norm(v);
      for (int attempt = 0; attempt < 4; ++attempt) {
        for (int pass = 0; pass < 2; ++pass) {
          Eigen::VectorXd coeff = basis.leftCols(used).transpose() * mass.cwiseProduct(v);
          v.noalias() -= basis.leftCols(used) * coeff;
        }
        double after = inner.norm(v);
        if (after > 1e-10 * std::max(before, 1e-300)) break;
        v = random_block(1).col(0);
        before = inner.norm(v);
      }
      double len = inner.norm(v);
      if (!(len > 0.0)) continue;
      if (used == basis.cols()) {
        capacity = std::min<Eigen::Index>(n, 2 * basis.cols());
        basis.conservativeResize(Eigen::NoChange, capacity);
      }
      basis.col(used++) = v / len;
    }
  };

  append(random_block(block));
  Eigen::Index block_start = 0;

  SpectralBasis out;
  out.mass = mass;
  int rounds = 0;
  for (;;) {
    // Grow until the basis reaches its current capacity.
    while (used < std::min(capacity, n)) {
      const Eigen::Index block_end = used;
      Eigen::MatrixXd image(n, block_end - block_start);
      for (Eigen::Index j = block_start; j < block_end; ++j) {
        image.col(j - block_start) = factor.solve(mass.cwiseProduct(basis.col(j)));
      }
      block_start = block_end;
      append(std::move(image));
      if (used == block_end) append(random_block(block));  // Krylov space exhausted
    }

    // Rayleigh-Ritz for L on span(basis); basis is M-orthonormal.
    Eigen::MatrixXd Q = basis.leftCols(used);
    Eigen::MatrixXd H = Q.transpose() * (lap.stiffness * Q);
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(H);
    out.eigenvalues = ritz.eigenvalues().head(k);
    out.eigenfunctions = Q * ritz.eigenvectors().leftCols(k);

    if (used == n || max_relative_residual(lap, out) <= options.tolerance) return out;

    if (++rounds > options.max_restarts) {
      throw ConvergenceError("lanczos: residual target not met after " + std::to_string(rounds) +
                             " rounds (basis size " + std::to_string(used) + ")");
    }
    capacity = std::min<Eigen::Index>(n, used + std::max<Eigen::Index>(k, 2 * block));
    if (basis.cols() < capacity) basis.conservativeResize(Eigen::NoChange, capacity);
  }
}

}  // namespace unimatch::detail
