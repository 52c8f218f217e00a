#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unimatch/fmap.hpp"
#include "unimatch/mesh.hpp"
#include "unimatch/model.hpp"

namespace unimatch {

/// Reference-vertex index per vertex of one shape; kUndefined where the
/// annotation is missing.
struct GroundTruth {
  static constexpr int kUndefined = -1;
  std::vector<int> reference;

  int size() const { return static_cast<int>(reference.size()); }
};

/// One index per line, -1 for undefined. `index_base` 1 shifts every
/// defined value down by one.
GroundTruth load_ground_truth(const std::filesystem::path& path, int index_base = 0);
void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);

/// Expected target on Y of every vertex of X (PointMap::kNone where X's
/// reference vertex is absent from Y or undefined).
std::vector<int> expected_targets(const GroundTruth& gt_x, const GroundTruth& gt_y);

struct GeodesicErrors {
  /// Normalized geodesic error per source vertex; NaN where not evaluated.
  std::vector<double> per_vertex;
  double mean = 0.0;
  int evaluated = 0;
  /// Predictions of kNone on vertices with a defined expectation.
  int unmatched = 0;
  /// Vertices without a defined expectation.
  int undefined = 0;

  /// Finite errors only.
  std::vector<double> values() const;
};

/// Distances on Y between pred(i) and expected(i), divided by sqrt(area of Y).
GeodesicErrors geodesic_error(const PointMap& pred, const std::vector<int>& expected,
                              const TriangleMesh& mesh_y);
GeodesicErrors geodesic_error(const PointMap& pred, const GroundTruth& gt_x,
                              const GroundTruth& gt_y, const TriangleMesh& mesh_y);

struct PckCurve {
  std::vector<double> thresholds;
  std::vector<double> fractions;
};

/// Fraction of errors <= each threshold (thresholds must be increasing).
PckCurve pck(const std::vector<double>& errors, const std::vector<double>& thresholds);
/// count evenly spaced thresholds over [0, max_threshold].
std::vector<double> default_pck_thresholds(double max_threshold = 0.25, int count = 26);

/// Uniformly random map (injective when n_x <= n_y).
PointMap random_pointmap(int n_x, int n_y, std::uint64_t seed);

// Synthetic benchmark.

enum class SyntheticBase { Icosphere, BumpySphere };
std::string to_string(SyntheticBase base);
SyntheticBase parse_synthetic_base(const std::string& text);

struct SyntheticOptions {
  int subdivisions = 3;
  /// Multiplies the default normal-displacement and bending magnitudes.
  double amplitude = 1.0;
};

struct SyntheticCollection {
  TriangleMesh base;
  std::vector<TriangleMesh> meshes;
  std::vector<GroundTruth> ground_truth;  ///< vertex -> base vertex
};

/// Smooth deformations of a shared base mesh; every shape's vertex order is
/// randomly permuted and the permutation kept as its ground truth.
SyntheticCollection make_synthetic_collection(SyntheticBase base, int count, std::uint64_t seed,
                                              const SyntheticOptions& options = {});

TriangleMesh make_base_mesh(SyntheticBase base, int subdivisions = 3);

/// Applies the random low-frequency displacement and bending of the
/// generator to a mesh (vertex order unchanged).
TriangleMesh deform(const TriangleMesh& mesh, std::uint64_t seed, double amplitude = 1.0);

enum class PartialKind { Cut, Holes };
std::string to_string(PartialKind kind);
PartialKind parse_partial_kind(const std::string& text);

struct PartialShape {
  TriangleMesh mesh;
  GroundTruth ground_truth;
  std::vector<int> kept_to_old;
  double removed_area_fraction = 0.0;
};

/// Cut: removes the geodesic ball around a random vertex holding ~fraction
/// of the area. Holes: removes several smaller balls totaling ~fraction.
/// Throws TopologyError if no connected result is found.
PartialShape make_partial(const TriangleMesh& mesh, const GroundTruth& gt, PartialKind kind,
                          double fraction, std::uint64_t seed, int holes = 5);

// Ablations.

/// Point map X -> Y as predicted by the given variant: universe classifier
/// (Full, Supervised), nearest learned feature (FeatureSimilarity) or
/// functional map + nearest neighbour (ClassifierFree).
PointMap predict_map(TrainVariant variant, const ShapeData& x, const ShapeData& y,
                     const Networks& nets, const TrainingConfig& config);

struct AblationResult {
  TrainVariant variant = TrainVariant::Full;
  double mean_error = 0.0;
  std::vector<double> pair_errors;
  double final_loss = 0.0;
  std::vector<LogEntry> log;
  Networks nets;
};

/// Trains the variant on `train` (labels used only by Supervised) and
/// reports the mean geodesic error over all ordered pairs of `test`.
/// Shapes' `labels` hold their ground truth.
AblationResult run_ablation(TrainVariant variant, const std::vector<ShapeData>& train,
                            const std::vector<ShapeData>& test, TrainingConfig config);

/// Mean error over all ordered pairs of `shapes` for a trained model.
double evaluate_pairs(TrainVariant variant, const std::vector<ShapeData>& shapes,
                      const Networks& nets, const TrainingConfig& config,
                      std::vector<double>* pair_errors = nullptr);

}  // namespace unimatch
