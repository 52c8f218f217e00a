#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unimatch/mesh.hpp"
#include "unimatch/spectral.hpp"

namespace unimatch {

enum class DescriptorKind { Shot, Hks, Wks, Learned };

std::string to_string(DescriptorKind kind);

/// Per-vertex descriptor matrix (n x c).
struct FeatureField {
  Eigen::MatrixXd values;
  DescriptorKind kind = DescriptorKind::Learned;
  std::map<std::string, double> params;
  /// Vertices whose descriptor could not be computed (rows left at zero).
  std::vector<int> degenerate_rows;

  int rows() const { return static_cast<int>(values.rows()); }
  int dims() const { return static_cast<int>(values.cols()); }
};

// SHOT layout: 8 azimuth x 2 elevation x 2 radial spatial cells, each holding
// an 11-bin histogram of cos(angle between neighbour normal and local z).
inline constexpr int kShotAzimuthBins = 8;
inline constexpr int kShotElevationBins = 2;
inline constexpr int kShotRadialBins = 2;
inline constexpr int kShotCosineBins = 11;
inline constexpr int kShotSpatialBins = kShotAzimuthBins * kShotElevationBins * kShotRadialBins;
inline constexpr int kShotDims = kShotSpatialBins * kShotCosineBins;  // 352

struct ShotParams {
  /// Support radius as a fraction of the bounding-box diagonal.
  double radius_frac = 0.10;
  /// Absolute support radius; overrides radius_frac when positive. Partial
  /// shapes use their complete reference's radius so descriptors agree.
  double radius = 0.0;
};

/// Support radius SHOT uses on this mesh.
double shot_support_radius(const TriangleMesh& mesh, const ShotParams& params = {});

/// Column of a SHOT descriptor for (azimuth, elevation, radial, cosine) bins.
constexpr int shot_index(int azimuth, int elevation, int radial, int cosine) {
  return ((azimuth * kShotElevationBins + elevation) * kShotRadialBins + radial) *
             kShotCosineBins +
         cosine;
}

/// Local reference frame at a point: rows are the x, y, z axes.
struct LocalFrame {
  Eigen::Matrix3d axes;
  bool valid = false;
};

/// SHOT local reference frame from the distance-weighted covariance of the
/// support; x and z signs follow the majority of neighbour offsets.
LocalFrame shot_frame(const Vertices& points, int center, std::span<const int> support,
                      double radius, const Eigen::Vector3d& normal);

/// SHOT signature for every vertex, L2-normalized per row. Rows of vertices
/// with a rank-deficient neighbourhood are zero and listed in
/// degenerate_rows.
FeatureField shot(const TriangleMesh& mesh, const ShotParams& params = {});

/// Heat kernel signature: sum_i exp(-lambda_i t) phi_i(v)^2.
FeatureField hks(const SpectralBasis& basis, std::span<const double> times);

/// 16 log-spaced times over [4 ln10 / lambda_last, 4 ln10 / lambda_1].
std::vector<double> default_hks_times(const SpectralBasis& basis, int count = 16);

/// Wave kernel signature with Gaussian log-energy bands, normalized by the
/// band weight sum.
FeatureField wks(const SpectralBasis& basis, std::span<const double> energies, double sigma);

/// Evenly spaced log energies over [log lambda_1, log lambda_last] and the
/// matching band width.
std::pair<std::vector<double>, double> default_wks_energies(const SpectralBasis& basis,
                                                            int count = 16);

// Cache keyed by (mesh hash, kind, params).
void save_features(const FeatureField& field, std::uint64_t mesh_hash,
                   const std::filesystem::path& path);
std::optional<FeatureField> load_features(const std::filesystem::path& path,
                                          std::uint64_t mesh_hash, DescriptorKind kind,
                                          const std::map<std::string, double>& params);

}  // namespace unimatch
