#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unimatch/assignment.hpp"
#include "unimatch/descriptors.hpp"
#include "unimatch/fmap.hpp"
#include "unimatch/losses.hpp"
#include "unimatch/mesh.hpp"
#include "unimatch/network.hpp"
#include "unimatch/spectral.hpp"

namespace unimatch {

/// Everything the pipeline needs about one shape.
struct ShapeData {
  std::string id;
  TriangleMesh mesh;
  SpectralBasis basis;
  /// Network input: SHOT followed by the leading eigenfunctions scaled by
  /// sqrt(total area).
  Eigen::MatrixXd input;
  /// Optional labels (universe class per vertex), used only by the
  /// supervised variant.
  std::vector<int> labels;

  int num_vertices() const { return mesh.num_vertices(); }
};

inline constexpr int kSpectralInputs = 16;
inline constexpr int kNetworkInputs = kShotDims + kSpectralInputs;

Eigen::MatrixXd network_input(const FeatureField& shot_field, const SpectralBasis& basis);

/// Builds the basis (k eigenpairs) and SHOT descriptors from scratch.
ShapeData prepare_shape(std::string id, TriangleMesh mesh, int k,
                        const ShotParams& shot_params = {}, const EigenOptions& eigen = {});
/// Same, from precomputed caches.
ShapeData make_shape_data(std::string id, TriangleMesh mesh, SpectralBasis basis,
                          const FeatureField& shot_field);

/// Which matching signal trains the networks.
enum class TrainVariant {
  Full,               ///< universe classifier + functional-map losses
  FeatureSimilarity,  ///< soft maps from feature distances instead of a classifier
  ClassifierFree,     ///< functional-map losses only
  Supervised,         ///< classifier trained against known labels
};

std::string to_string(TrainVariant variant);
TrainVariant parse_train_variant(const std::string& text);

struct TrainingConfig {
  double learning_rate = 1e-3;
  int total_iters = 20000;
  int detach_iters = 4000;
  int batch_pairs = 1;
  double tau = 0.2;
  int sinkhorn_iters = 10;
  LossWeights weights = LossWeights::complete();
  MatchingMode mode = MatchingMode::Complete;
  TrainVariant variant = TrainVariant::Full;
  /// Regularization of the functional-map solver and resolvent exponent.
  double fmap_lambda = 0.0;
  double gamma = 0.5;
  std::vector<int> feature_widths{kNetworkInputs, 256, 256, 128};
  int classifier_hidden = 256;
  /// 0: the largest vertex count (complete) or the reference shape's
  /// vertex count (partial).
  int universe_size = 0;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;

  static TrainingConfig defaults(MatchingMode mode);
  /// Throws ConfigError.
  void validate() const;
};

struct PairOutputs {
  Eigen::MatrixXd C_xy;  ///< k_y x k_x
  Eigen::MatrixXd C_yx;
  /// Soft assignments (classifier variants) or the soft map Pi_xy
  /// (feature-similarity variant, stored in P_x).
  Eigen::MatrixXd P_x;
  Eigen::MatrixXd P_y;
  LossParts parts;
  double total = 0.0;
  /// Partial rank used by the partial losses, -1 in complete mode.
  int rank = -1;
};

/// Gradients aligned with Networks::parameters().
struct PairGradients {
  PairOutputs outputs;
  std::vector<Eigen::MatrixXd> grads;
};

/// Forward pass of the whole pipeline on one pair. In partial mode X must
/// be the complete (universe) shape. `iteration` drives the detach schedule.
PairOutputs forward_pair(const ShapeData& x, const ShapeData& y, const Networks& nets,
                         const TrainingConfig& config, int iteration);

/// Forward plus reverse sweep. Throws NonFiniteGradientError.
PairGradients backward_pair(const ShapeData& x, const ShapeData& y, const Networks& nets,
                            const TrainingConfig& config, int iteration);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;

  void update(const std::vector<Eigen::MatrixXd*>& params,
              const std::vector<Eigen::MatrixXd>& grads, double learning_rate);
};

struct LogEntry {
  int iteration = 0;
  int x = 0;
  int y = 0;
  LossParts parts;
  double total = 0.0;
};

/// "iter=... x=... y=... bij=... orth=... lap=... cls=... total=..."
std::string format_log(const LogEntry& entry);

/// Resumable training state.
struct TrainingState {
  Networks nets;
  AdamState adam;
  int iteration = 0;
  std::mt19937_64 rng;
  /// Current epoch's pair order (indices into the pair list) and position.
  std::vector<int> order;
  int cursor = 0;
};

/// Training pairs: every unordered pair (complete) or (0, j) for every
/// partial shape j (partial; shape 0 is the complete reference).
std::vector<std::pair<int, int>> training_pairs(int shape_count, MatchingMode mode);

int resolve_universe_size(const std::vector<ShapeData>& shapes, const TrainingConfig& config);

TrainingState init_training(const std::vector<ShapeData>& shapes, const TrainingConfig& config);

struct TrainCallbacks {
  std::function<void(const LogEntry&)> on_log;
  /// Called every config.checkpoint_every iterations and at the end.
  std::function<void(const TrainingState&)> on_checkpoint;
};

/// Runs steps until state.iteration == until_iteration. On a non-finite
/// gradient the state keeps the parameters of the last completed step and
/// NonFiniteGradientError propagates.
void train_steps(TrainingState& state, const std::vector<ShapeData>& shapes,
                 const TrainingConfig& config, int until_iteration,
                 const TrainCallbacks& callbacks = {});

TrainingState train(const std::vector<ShapeData>& shapes, const TrainingConfig& config,
                    const TrainCallbacks& callbacks = {});

/// `passes` optimizer steps on one pair with a fresh optimizer; the input
/// networks are not modified.
Networks fine_tune(const ShapeData& x, const ShapeData& y, const Networks& nets,
                   const TrainingConfig& config, int passes = 5);

/// Learned per-vertex descriptors.
Eigen::MatrixXd extract_features(const ShapeData& shape, const Networks& nets);

SoftAssignment infer_soft_assignment(const ShapeData& shape, const Networks& nets, double tau = 0.2,
                                     int iters = 10);
HardAssignment infer_assignment(const ShapeData& shape, const Networks& nets, double tau = 0.2,
                                int iters = 10);

/// Shape-to-universe classification of both shapes composed into Pi_xy.
/// Never solves for a functional map.
PointMap infer_match(const ShapeData& x, const ShapeData& y, const Networks& nets,
                     double tau = 0.2, int iters = 10);

// Checkpoints hold parameters, optimizer moments, iteration, RNG state, the
// pair schedule and the caller's resolved configuration text.
void save_checkpoint(const TrainingState& state, const std::string& config_text,
                     const std::filesystem::path& path);
struct LoadedCheckpoint {
  TrainingState state;
  std::string config_text;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace unimatch
