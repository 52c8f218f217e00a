#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unimatch/fmap.hpp"

namespace unimatch {

/// Row-stochastic soft shape-to-universe assignment (n x d).
struct SoftAssignment {
  Eigen::MatrixXd prob;
  Eigen::MatrixXd log_prob;
  double tau = 0.2;
  int iters = 10;

  int rows() const { return static_cast<int>(prob.rows()); }
  int universe_size() const { return static_cast<int>(prob.cols()); }
};

/// Log-domain Sinkhorn on logits / tau: `iters` rounds of (row softmax,
/// column step), then a closing row softmax. The column step normalises
/// every column when n == d and only rescales columns whose mass exceeds one
/// when n < d. Throws DimensionError when d < n.
SoftAssignment sinkhorn(const Eigen::MatrixXd& logits, double tau = 0.2, int iters = 10);

/// Sinkhorn with every intermediate kept for the backward pass.
class SinkhornOp {
 public:
  SinkhornOp(const Eigen::MatrixXd& logits, double tau, int iters);

  const SoftAssignment& result() const { return result_; }

  /// Gradient w.r.t. the logits given the gradient w.r.t. log_prob.
  Eigen::MatrixXd backward_log(const Eigen::MatrixXd& grad_log_prob) const;
  /// Gradient w.r.t. the logits given the gradient w.r.t. prob.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_prob) const;

 private:
  SoftAssignment result_;
  // Softmax of every step along its axis; column steps also record which
  // columns moved.
  std::vector<Eigen::MatrixXd> softmax_;
  std::vector<std::vector<bool>> column_active_;
};

/// Injective vertex -> universe class assignment.
struct HardAssignment {
  std::vector<int> universe_class;
  int universe_size = 0;

  int size() const { return static_cast<int>(universe_class.size()); }
  bool is_injective() const;
};

/// Greedy discretization: vertices in descending order of their peak
/// probability take their best still-free class.
HardAssignment harden(const SoftAssignment& soft);

/// Assignment maximizing the total probability (Hungarian method). Used as
/// an oracle; requires n <= d.
HardAssignment harden_optimal(const Eigen::MatrixXd& prob);

/// Sum of prob(i, class(i)).
double assigned_probability(const Eigen::MatrixXd& prob, const HardAssignment& hard);

/// Pi_xy = Pi_x Pi_y^T: vertex i of X maps to the vertex of Y holding the
/// same universe class, or PointMap::kNone.
PointMap compose_pairwise(const HardAssignment& x, const HardAssignment& y);

/// Universe size when no reference shape is given: the largest vertex count.
int universe_size(const std::vector<int>& vertex_counts);

/// All pairwise maps of a collection; maps[x][y] is Pi_xy (diagonal unused).
struct MapCollection {
  std::vector<std::string> shape_ids;
  std::vector<std::vector<PointMap>> maps;

  int size() const { return static_cast<int>(maps.size()); }
};

MapCollection compose_all(const std::vector<HardAssignment>& assignments,
                          std::vector<std::string> shape_ids = {});

struct CycleViolation {
  int x, y, z;
  int vertex;  ///< vertex of X
  int via;     ///< Pi_yz(Pi_xy(vertex))
  int direct;  ///< Pi_xz(vertex), possibly kNone
};

struct CycleReport {
  long long triplets_checked = 0;
  long long violation_count = 0;
  /// First violations found (capped).
  std::vector<CycleViolation> violations;

  bool consistent() const { return violation_count == 0; }
};

/// Checks Pi_xz = Pi_xy Pi_yz over all ordered triplets of distinct shapes,
/// wherever the path through Y is defined.
CycleReport check_cycle_consistency(const MapCollection& maps, std::size_t max_reported = 100);

// Plain-text artifacts: a '#' header line, then one integer per line.
void save_correspondence(const PointMap& map, const std::string& source_id,
                         const std::string& target_id, int universe_size,
                         const std::filesystem::path& path);
PointMap load_correspondence(const std::filesystem::path& path, int target_size);
void save_assignment(const HardAssignment& assignment, const std::string& shape_id,
                     const std::filesystem::path& path);
HardAssignment load_assignment(const std::filesystem::path& path);

}  // namespace unimatch
