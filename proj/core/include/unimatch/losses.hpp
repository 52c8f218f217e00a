#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace unimatch {

enum class MatchingMode { Complete, Partial };

std::string to_string(MatchingMode mode);
/// Accepts "complete" / "partial"; throws ConfigError otherwise.
MatchingMode parse_matching_mode(const std::string& text);

struct LossWeights {
  double w_bij = 1.0;
  double w_orth = 1.0;
  double w_lap = 1e-3;
  double lambda_cls = 0.01;
  double smoothing = 0.1;

  static LossWeights complete() { return {}; }
  static LossWeights partial() { return {1.0, 1.0, 0.0, 1.0, 0.1}; }
  static LossWeights defaults(MatchingMode mode) {
    return mode == MatchingMode::Complete ? complete() : partial();
  }

  /// Throws ConfigError for negative or non-finite weights.
  void validate() const;
};

// Each loss optionally writes its gradient w.r.t. the matrix arguments.
// Gradient outputs may be null.

/// |C_xy C_yx - I|^2 + |C_yx C_xy - I|^2.
double loss_bijectivity(const Eigen::MatrixXd& C_xy, const Eigen::MatrixXd& C_yx,
                        Eigen::MatrixXd* grad_xy = nullptr, Eigen::MatrixXd* grad_yx = nullptr);

/// |C_xy^T C_xy - I|^2 + |C_yx^T C_yx - I|^2.
double loss_orthogonality(const Eigen::MatrixXd& C_xy, const Eigen::MatrixXd& C_yx,
                          Eigen::MatrixXd* grad_xy = nullptr, Eigen::MatrixXd* grad_yx = nullptr);

/// |C_xy L_x - L_y C_xy|^2 + |C_yx L_y - L_x C_yx|^2 with L = diag(evals),
/// evaluated entrywise as sum C_ij^2 (evals_src(j) - evals_dst(i))^2.
double loss_laplacian(const Eigen::MatrixXd& C_xy, const Eigen::MatrixXd& C_yx,
                      const Eigen::VectorXd& evals_x, const Eigen::VectorXd& evals_y,
                      Eigen::MatrixXd* grad_xy = nullptr, Eigen::MatrixXd* grad_yx = nullptr);

struct PartialStructural {
  double bij = 0.0;
  double orth = 0.0;
};

/// X complete, Y partial: bij = |C_xy C_yx - I_r|^2, orth = |C_xy C_xy^T - I_r|^2
/// where I_r keeps the first r diagonal ones. Gradients are of bij + orth
/// scaled by the given weights.
PartialStructural loss_partial_structural(const Eigen::MatrixXd& C_xy, const Eigen::MatrixXd& C_yx,
                                          int r, double w_bij = 1.0, double w_orth = 1.0,
                                          Eigen::MatrixXd* grad_xy = nullptr,
                                          Eigen::MatrixXd* grad_yx = nullptr);

/// |Phi_x C_yx - P_x P_y^T Phi_y|^2, computed without forming the n_x x n_y
/// soft map.
double loss_classifier(const Eigen::MatrixXd& Phi_x, const Eigen::MatrixXd& Phi_y,
                       const Eigen::MatrixXd& C_yx, const Eigen::MatrixXd& P_x,
                       const Eigen::MatrixXd& P_y, Eigen::MatrixXd* grad_C = nullptr,
                       Eigen::MatrixXd* grad_Px = nullptr, Eigen::MatrixXd* grad_Py = nullptr);

/// Mean over rows with a target (>= 0) of -sum_c q_c log p_c, where
/// q = (1 - eps) onehot(target) + eps / d. Gradient is w.r.t. log p.
double smoothed_cross_entropy(const Eigen::MatrixXd& log_prob, const std::vector<int>& targets,
                              double smoothing, Eigen::MatrixXd* grad_log_prob = nullptr);

/// Complete shape X acts as the universe: CE(P_x, identity) + CE(P_y, pseudo).
double loss_classifier_partial(const Eigen::MatrixXd& log_Px, const Eigen::MatrixXd& log_Py,
                               const std::vector<int>& pseudo_targets, double smoothing,
                               Eigen::MatrixXd* grad_log_Px = nullptr,
                               Eigen::MatrixXd* grad_log_Py = nullptr);

struct LossParts {
  double bij = 0.0;
  double orth = 0.0;
  double lap = 0.0;
  double cls = 0.0;
};

/// Weighted sum; the Laplacian term is dropped in partial mode.
double loss_total(const LossParts& parts, const LossWeights& weights, MatchingMode mode);

}  // namespace unimatch
