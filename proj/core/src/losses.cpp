#include "unimatch/losses.hpp"

#include <cmath>

#include "unimatch/errors.hpp"

namespace unimatch {

namespace {

void require_square_pair(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
  if (a.rows() != b.cols() || a.cols() != b.rows()) {
    throw DimensionError(std::string(what) + ": C_xy is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ", C_yx is " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()));
  }
}

}  // namespace

std::string to_string(MatchingMode mode) {
  return mode == MatchingMode::Complete ? "complete" : "partial";
}

MatchingMode parse_matching_mode(const std::string& text) {
  if (text == "complete") return MatchingMode::Complete;
  if (text == "partial") return MatchingMode::Partial;
  throw ConfigError("unknown mode '" + text + "' (expected complete or partial)");
}

void LossWeights::validate() const {
  for (double w : {w_bij, w_orth, w_lap, lambda_cls}) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and >= 0");
  }
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("smoothing must lie in [0, 1)");
}

double loss_bijectivity(const Eigen::MatrixXd& C_xy, const Eigen::MatrixXd& C_yx,
                        Eigen::MatrixXd* grad_xy, Eigen::MatrixXd* grad_yx) {
  require_square_pair(C_xy, C_yx, "loss_bijectivity");
  const Eigen::MatrixXd R1 = C_xy * C_yx - Eigen::MatrixXd::Identity(C_xy.rows(), C_xy.rows());
  const Eigen::MatrixXd R2 = C_yx * C_xy - Eigen::MatrixXd::Identity(C_yx.rows(), C_yx.rows());
  if (grad_xy) *grad_xy = 2.0 * (R1 * C_yx.transpose() + C_yx.transpose() * R2);
  if (grad_yx) *grad_yx = 2.0 * (C_xy.transpose() * R1 + R2 * C_xy.transpose());
  return R1.squaredNorm() + R2.squaredNorm();
}

double loss_orthogonality(const Eigen::MatrixXd& C_xy, const Eigen::MatrixXd& C_yx,
                          Eigen::MatrixXd* grad_xy, Eigen::MatrixXd* grad_yx) {
  require_square_pair(C_xy, C_yx, "loss_orthogonality");
  const Eigen::MatrixXd R1 =
      C_xy.transpose() * C_xy - Eigen::MatrixXd::Identity(C_xy.cols(), C_xy.cols());
  const Eigen::MatrixXd R2 =
      C_yx.transpose() * C_yx - Eigen::MatrixXd::Identity(C_yx.cols(), C_yx.cols());
  if (grad_xy) *grad_xy = 4.0 * C_xy * R1;
  if (grad_yx) *grad_yx = 4.0 * C_yx * R2;
  return R1.squaredNorm() + R2.squaredNorm();
}

double loss_laplacian(const Eigen::MatrixXd& C_xy, const Eigen::MatrixXd& C_yx,
                      const Eigen::VectorXd& evals_x, const Eigen::VectorXd& evals_y,
                      Eigen::MatrixXd* grad_xy, Eigen::MatrixXd* grad_yx) {
  require_square_pair(C_xy, C_yx, "loss_laplacian");
  if (C_xy.rows() != evals_y.size() || C_xy.cols() != evals_x.size()) {
    throw DimensionError("loss_laplacian: eigenvalue counts do not match C");
  }
  // W(i, j) = (evals_src(j) - evals_dst(i))^2
  auto weights = [](const Eigen::VectorXd& src, const Eigen::VectorXd& dst) {
    Eigen::MatrixXd W(dst.size(), src.size());
    for (Eigen::Index i = 0; i < dst.size(); ++i)
      W.row(i) = (src.array() - dst[i]).square().matrix().transpose();
    return W;
  };
  const Eigen::MatrixXd Wxy = weights(evals_x, evals_y);
  const Eigen::MatrixXd Wyx = weights(evals_y, evals_x);
  if (grad_xy) *grad_xy = 2.0 * Wxy.cwiseProduct(C_xy);
  if (grad_yx) *grad_yx = 2.0 * Wyx.cwiseProduct(C_yx);
  return (Wxy.array() * C_xy.array().square()).sum() + (Wyx.array() * C_yx.array().square()).sum();
}

PartialStructural loss_partial_structural(const Eigen::MatrixXd& C_xy, const Eigen::MatrixXd& C_yx,
                                          int r, double w_bij, double w_orth,
                                          Eigen::MatrixXd* grad_xy, Eigen::MatrixXd* grad_yx) {
  require_square_pair(C_xy, C_yx, "loss_partial_structural");
  const Eigen::Index k = C_xy.rows();
  if (r < 0 || r > k) throw DimensionError("loss_partial_structural: rank out of range");
  Eigen::MatrixXd I_r = Eigen::MatrixXd::Zero(k, k);
  I_r.diagonal().head(r).setOnes();
  const Eigen::MatrixXd Rb = C_xy * C_yx - I_r;
  const Eigen::MatrixXd Ro = C_xy * C_xy.transpose() - I_r;
  if (grad_xy) *grad_xy = 2.0 * w_bij * Rb * C_yx.transpose() + 4.0 * w_orth * Ro * C_xy;
  if (grad_yx) *grad_yx = 2.0 * w_bij * C_xy.transpose() * Rb;
  return {Rb.squaredNorm(), Ro.squaredNorm()};
}

double loss_classifier(const Eigen::MatrixXd& Phi_x, const Eigen::MatrixXd& Phi_y,
                       const Eigen::MatrixXd& C_yx, const Eigen::MatrixXd& P_x,
                       const Eigen::MatrixXd& P_y, Eigen::MatrixXd* grad_C,
                       Eigen::MatrixXd* grad_Px, Eigen::MatrixXd* grad_Py) {
  if (Phi_x.cols() != C_yx.rows() || Phi_y.cols() != C_yx.cols() ||
      P_x.rows() != Phi_x.rows() || P_y.rows() != Phi_y.rows() || P_x.cols() != P_y.cols()) {
    throw DimensionError("loss_classifier: inconsistent dimensions");
  }
  const Eigen::MatrixXd U = P_y.transpose() * Phi_y;  // d x k_y
  const Eigen::MatrixXd R = Phi_x * C_yx - P_x * U;
  if (grad_C) *grad_C = 2.0 * Phi_x.transpose() * R;
  if (grad_Px) *grad_Px = -2.0 * R * U.transpose();
  if (grad_Py) *grad_Py = -2.0 * Phi_y * (R.transpose() * P_x);
  return R.squaredNorm();
}

double smoothed_cross_entropy(const Eigen::MatrixXd& log_prob, const std::vector<int>& targets,
                              double smoothing, Eigen::MatrixXd* grad_log_prob) {
  if (static_cast<Eigen::Index>(targets.size()) != log_prob.rows()) {
    throw DimensionError("smoothed_cross_entropy: one target per row required");
  }
  const Eigen::Index d = log_prob.cols();
  const double off = smoothing / static_cast<double>(d);
  int counted = 0;
  for (int t : targets) counted += t >= 0;
  if (grad_log_prob) grad_log_prob->setZero(log_prob.rows(), d);
  if (counted == 0) return 0.0;
  const double scale = 1.0 / counted;
  double total = 0.0;
  for (Eigen::Index i = 0; i < log_prob.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0) continue;
    if (t >= d) throw DimensionError("smoothed_cross_entropy: target out of range");
    total -= off * log_prob.row(i).sum() + (1.0 - smoothing) * log_prob(i, t);
    if (grad_log_prob) {
      grad_log_prob->row(i).setConstant(-off * scale);
      (*grad_log_prob)(i, t) -= (1.0 - smoothing) * scale;
    }
  }
  return total * scale;
}

double loss_classifier_partial(const Eigen::MatrixXd& log_Px, const Eigen::MatrixXd& log_Py,
                               const std::vector<int>& pseudo_targets, double smoothing,
                               Eigen::MatrixXd* grad_log_Px, Eigen::MatrixXd* grad_log_Py) {
  std::vector<int> identity(static_cast<std::size_t>(log_Px.rows()));
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);
  return smoothed_cross_entropy(log_Px, identity, smoothing, grad_log_Px) +
         smoothed_cross_entropy(log_Py, pseudo_targets, smoothing, grad_log_Py);
}

double loss_total(const LossParts& parts, const LossWeights& weights, MatchingMode mode) {
  double total = weights.w_bij * parts.bij + weights.w_orth * parts.orth +
                 weights.lambda_cls * parts.cls;
  if (mode == MatchingMode::Complete) total += weights.w_lap * parts.lap;
  return total;
}

}  // namespace unimatch
