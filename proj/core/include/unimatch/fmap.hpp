#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "unimatch/spectral.hpp"

namespace unimatch {

/// Per-entry penalty of the regularized solver (k_y x k_x, nonnegative).
///
/// With f(l) = l^g / (l^2g + 1) and h(l) = 1 / (l^2g + 1):
/// M(i, j) = (f(ly_i) - f(lx_j))^2 + (h(ly_i) - h(lx_j))^2.
struct ResolventMask {
  Eigen::MatrixXd values;
  double gamma = 0.5;
};

ResolventMask resolvent_mask(const Eigen::VectorXd& evals_x, const Eigen::VectorXd& evals_y,
                             double gamma = 0.5);

/// k_y x k_x matrix C with C A_x ~ A_y.
///
/// Every construction bumps a process-wide counter so callers can assert
/// that a code path never builds functional maps.
class FunctionalMap {
 public:
  FunctionalMap(Eigen::MatrixXd C, double lambda, double gamma, std::string source_id = {},
                std::string target_id = {});
  FunctionalMap(const FunctionalMap& other);
  FunctionalMap(FunctionalMap&& other) noexcept;
  FunctionalMap& operator=(const FunctionalMap&) = default;
  FunctionalMap& operator=(FunctionalMap&&) noexcept = default;
  ~FunctionalMap() = default;

  const Eigen::MatrixXd& matrix() const { return C_; }
  double lambda() const { return lambda_; }
  double gamma() const { return gamma_; }
  const std::string& source_id() const { return source_id_; }
  const std::string& target_id() const { return target_id_; }

  static std::uint64_t instances_created();

 private:
  Eigen::MatrixXd C_;
  double lambda_ = 0.0;
  double gamma_ = 0.5;
  std::string source_id_;
  std::string target_id_;
};

/// Row-wise solver for
///   argmin_C |C A_x - A_y|_F^2 + lambda sum_ij C_ij^2 M_ij.
/// Row i solves (A_x A_x^T + lambda diag(M_i,:)) c = A_x A_y(i,:)^T.
/// Factorizations are kept for the adjoint pass.
class RegularizedFmapSolver {
 public:
  /// Throws DimensionError on shape mismatch and SingularError if a row
  /// system is singular (e.g. lambda = 0 with rank-deficient A_x).
  RegularizedFmapSolver(const Eigen::MatrixXd& A_x, const Eigen::MatrixXd& A_y,
                        const ResolventMask& mask, double lambda);

  const Eigen::MatrixXd& solution() const { return C_; }

  struct Adjoint {
    Eigen::MatrixXd grad_Ax;
    Eigen::MatrixXd grad_Ay;
  };
  /// Vector-Jacobian product by implicit differentiation of the row systems.
  Adjoint backward(const Eigen::MatrixXd& grad_C) const;

  /// Process-wide construction count, like FunctionalMap::instances_created.
  static std::uint64_t instances_created();

 private:
  Eigen::MatrixXd A_x_;
  Eigen::MatrixXd A_y_;
  Eigen::MatrixXd C_;
  bool shared_factor_ = false;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factors_;
};

FunctionalMap solve_fmap(const Eigen::MatrixXd& A_x, const Eigen::MatrixXd& A_y,
                         const ResolventMask& mask, double lambda);

/// Vertex correspondences; targets[i] is the matched vertex or kNone.
struct PointMap {
  static constexpr int kNone = -1;
  std::vector<int> targets;
  int target_size = 0;

  int size() const { return static_cast<int>(targets.size()); }
  /// Row sums <= 1 hold by representation; checks injectivity and range.
  bool is_partial_permutation() const;
  int matched_count() const;
};

/// Index of the nearest row of `reference` for every row of `query`
/// (squared Euclidean, ties to the lowest index).
std::vector<int> nearest_rows(const Eigen::MatrixXd& query, const Eigen::MatrixXd& reference);

/// Point map Pi_yx from Phi_y C_xy ~ Pi_yx Phi_x: row j of Phi_y C_xy is
/// matched to its nearest row of Phi_x. Many-to-one in general.
PointMap fmap_to_pointmap(const Eigen::MatrixXd& C_xy, const SpectralBasis& basis_x,
                          const SpectralBasis& basis_y);

/// Number of partial-shape eigenvalues strictly below the largest complete
/// one: r = max{i | evals_y(i) < max(evals_x)} (1-based count).
int partial_rank(const Eigen::VectorXd& evals_complete, const Eigen::VectorXd& evals_partial);

/// Plain-text export: header line "k_y k_x lambda gamma", then rows.
void save_functional_map(const FunctionalMap& map, const std::filesystem::path& path);
FunctionalMap load_functional_map(const std::filesystem::path& path);

}  // namespace unimatch
