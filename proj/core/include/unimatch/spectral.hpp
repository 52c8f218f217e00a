#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "unimatch/mesh.hpp"

namespace unimatch {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Cotangent stiffness matrix (symmetric positive semidefinite, zero row
/// sums) together with the lumped vertex masses (one third of incident area).
struct CotanLaplacian {
  SparseMatrix stiffness;
  Eigen::VectorXd mass;
};

/// Throws DegenerateError for zero-area faces.
CotanLaplacian cotan_laplacian(const TriangleMesh& mesh);

/// First k generalized eigenpairs of L phi = lambda M phi.
///
/// Columns of `eigenfunctions` are mass-orthonormal; eigenvalues are
/// nondecreasing. Each column's entry of largest magnitude is positive.
struct SpectralBasis {
  Eigen::MatrixXd eigenfunctions;  ///< n x k
  Eigen::VectorXd eigenvalues;     ///< k
  Eigen::VectorXd mass;            ///< n lumped masses

  int size() const { return static_cast<int>(eigenvalues.size()); }
  int num_vertices() const { return static_cast<int>(mass.size()); }
  double total_mass() const { return mass.sum(); }
};

enum class EigenMethod { Auto, Dense, Lanczos };

struct EigenOptions {
  EigenMethod method = EigenMethod::Auto;
  /// Relative residual target per eigenpair.
  double tolerance = 1e-8;
  /// Auto uses the dense solver up to this many vertices.
  int dense_threshold = 512;
  /// Safety cap on Lanczos restarts.
  int max_restarts = 8;
};

/// Throws DimensionError when k is out of range and ConvergenceError if the
/// residual target is not met.
SpectralBasis eigenbasis(const CotanLaplacian& laplacian, int k, const EigenOptions& options = {});

/// Convenience: cotan_laplacian followed by eigenbasis.
SpectralBasis compute_basis(const TriangleMesh& mesh, int k, const EigenOptions& options = {});

/// Max over columns of |L phi - lambda M phi| relative to the column scale.
double max_relative_residual(const CotanLaplacian& laplacian, const SpectralBasis& basis);

/// Mass-weighted pseudoinverse projection: Phi^T diag(M) F (k x c).
Eigen::MatrixXd project(const SpectralBasis& basis, const Eigen::MatrixXd& features);

/// Flips each column so that its largest-magnitude entry is positive
/// (ties resolved toward the lowest row index).
void fix_signs(Eigen::MatrixXd& eigenfunctions);

// Cache files keyed by (mesh hash, k).
void save_basis(const SpectralBasis& basis, std::uint64_t mesh_hash,
                const std::filesystem::path& path);
/// Returns nullopt when the file is missing, unreadable or stale.
std::optional<SpectralBasis> load_basis(const std::filesystem::path& path,
                                        std::uint64_t mesh_hash, int k);

namespace detail {

/// Eigenpairs of the symmetric-definite pencil by dense decomposition.
SpectralBasis dense_eigenbasis(const CotanLaplacian& laplacian, int k);

/// Shift-invert Lanczos with full M-reorthogonalization.
SpectralBasis lanczos_eigenbasis(const CotanLaplacian& laplacian, int k,
                                 const EigenOptions& options);

}  // namespace detail

}  // namespace unimatch
