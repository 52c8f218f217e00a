#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <unordered_map>
#include <vector>

#include <Eigen/Eigenvalues>

#include "unimatch/descriptors.hpp"
#include "unimatch/errors.hpp"

namespace unimatch {

namespace {

// Uniform grid with cell size equal to the query radius.
class RadiusGrid {
 public:
  RadiusGrid(const Vertices& points, double radius) : points_(points), cell_(radius) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      cells_[key(cell_of(points.row(i)))].push_back(static_cast<int>(i));
    }
  }

  void query(int center, double radius, std::vector<int>& out) const {
    out.clear();
    const Eigen::RowVector3d p = points_.row(center);
    const auto c = cell_of(p);
    const double r2 = radius * radius;
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (int j : it->second) {
            if ((points_.row(j) - p).squaredNorm() <= r2) out.push_back(j);
          }
        }
    std::sort(out.begin(), out.end());
  }

 private:
  std::array<long, 3> cell_of(const Eigen::RowVector3d& p) const {
    return {static_cast<long>(std::floor(p[0] / cell_)), static_cast<long>(std::floor(p[1] / cell_)),
            static_cast<long>(std::floor(p[2] / cell_))};
  }
  static std::uint64_t key(const std::array<long, 3>& c) {
    auto h = [](long v) { return static_cast<std::uint64_t>(v) & 0x1fffffULL; };
    return (h(c[0]) << 42) | (h(c[1]) << 21) | h(c[2]);
  }

  const Vertices& points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

// Signed count of offsets on the positive side of `axis`.
int majority(const Vertices& points, const Eigen::Vector3d& p, std::span<const int> support,
             const Eigen::Vector3d& axis, double eps) {
  int balance = 0;
  for (int j : support) {
    double s = (points.row(j).transpose() - p).dot(axis);
    if (s > eps) ++balance;
    else if (s < -eps) --balance;
  }
  return balance;
}

// Bounding-box diagonal measured in the principal-axis frame, so the support
// radius does not change under rotation.
double principal_box_diagonal(const Vertices& V) {
  const Eigen::RowVector3d mean = V.colwise().mean();
  const Eigen::MatrixXd centered = V.rowwise() - mean;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(centered.transpose() * centered);
  const Eigen::MatrixXd local = centered * eig.eigenvectors();
  return (local.colwise().maxCoeff() - local.colwise().minCoeff()).norm();
}

}  // namespace

LocalFrame shot_frame(const Vertices& points, int center, std::span<const int> support,
                      double radius, const Eigen::Vector3d& normal) {
  LocalFrame frame;
  const Eigen::Vector3d p = points.row(center).transpose();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double wsum = 0.0;
  int count = 0;
  for (int j : support) {
    Eigen::Vector3d d = points.row(j).transpose() - p;
    double dist = d.norm();
    if (dist <= 0.0) continue;
    double w = radius - dist;
    cov += w * d * d.transpose();
    wsum += w;
    ++count;
  }
  if (count < 3 || !(wsum > 0.0)) return frame;
  cov /= wsum;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
  if (!(evals[2] > 0.0) || evals[1] <= 1e-10 * evals[2]) return frame;

  Eigen::Vector3d x = eig.eigenvectors().col(2);
  Eigen::Vector3d z = eig.eigenvectors().col(0);
  const double eps = 1e-12 * radius;
  // An x count tie falls back to the summed projection, then to global +x;
  // a z tie (flat support) follows the vertex normal.
  int xb = majority(points, p, support, x, eps);
  if (xb == 0) {
    double proj = 0.0;
    for (int j : support) proj += (points.row(j).transpose() - p).dot(x);
    if (std::abs(proj) > eps * static_cast<double>(support.size())) xb = proj > 0.0 ? 1 : -1;
  }
  if (xb < 0 || (xb == 0 && x[0] < 0.0)) x = -x;
  int zb = majority(points, p, support, z, eps);
  if (zb < 0 || (zb == 0 && z.dot(normal) < 0.0)) z = -z;
  Eigen::Vector3d y = z.cross(x);

  frame.axes.row(0) = x.transpose();
  frame.axes.row(1) = y.transpose();
  frame.axes.row(2) = z.transpose();
  frame.valid = true;
  return frame;
}

double shot_support_radius(const TriangleMesh& mesh, const ShotParams& params) {
  if (params.radius > 0.0) return params.radius;
  return params.radius_frac * principal_box_diagonal(mesh.vertices());
}

FeatureField shot(const TriangleMesh& mesh, const ShotParams& params) {
  using std::numbers::pi;
  const int n = mesh.num_vertices();
  const Vertices& V = mesh.vertices();
  const Vertices normals = vertex_normals(mesh);
  const double radius = shot_support_radius(mesh, params);
  if (!(radius > 0.0)) throw DegenerateError("shot: zero support radius");

  FeatureField out;
  out.kind = DescriptorKind::Shot;
  out.params = {{"radius_frac", params.radius_frac}};
  if (params.radius > 0.0) out.params["radius"] = params.radius;
  out.values = Eigen::MatrixXd::Zero(n, kShotDims);

  RadiusGrid grid(V, radius);
  std::vector<int> support;
  const double azimuth_step = 2.0 * pi / kShotAzimuthBins;

  for (int v = 0; v < n; ++v) {
    grid.query(v, radius, support);
    const Eigen::Vector3d p = V.row(v).transpose();
    LocalFrame frame = shot_frame(V, v, support, radius, normals.row(v).transpose());
    if (!frame.valid) {
      out.degenerate_rows.push_back(v);
      continue;
    }
    auto row = out.values.row(v);
    const Eigen::Vector3d z = frame.axes.row(2).transpose();

    for (int j : support) {
      Eigen::Vector3d local = frame.axes * (V.row(j).transpose() - p);
      const double dist = local.norm();
      if (dist <= 1e-12 * radius) continue;

      // Cosine bin position in [0, bins].
      double cosine = std::clamp(normals.row(j).dot(z.transpose()), -1.0, 1.0);
      double cpos = 0.5 * (cosine + 1.0) * kShotCosineBins;
      int cbin = std::min(static_cast<int>(cpos), kShotCosineBins - 1);
      double cdelta = cpos - (cbin + 0.5);

      int rbin = dist > 0.5 * radius ? 1 : 0;
      double rdelta = (dist - (rbin == 1 ? 0.75 : 0.25) * radius) / (0.5 * radius);

      // Inclination from +z in [0, pi]; bin 1 is the upper hemisphere.
      double inclination = std::acos(std::clamp(local[2] / dist, -1.0, 1.0));
      int ebin = local[2] > 0.0 ? 1 : 0;
      double edelta = (inclination - (ebin == 1 ? 0.25 : 0.75) * pi) / (0.5 * pi);
      // Upper-hemisphere bin index grows as inclination shrinks.
      edelta = -edelta;

      double azimuth = std::atan2(local[1], local[0]);
      if (azimuth < 0.0) azimuth += 2.0 * pi;
      int abin = std::min(static_cast<int>(azimuth / azimuth_step), kShotAzimuthBins - 1);
      double adelta = (azimuth - (abin + 0.5) * azimuth_step) / azimuth_step;

      double own = 0.0;
      auto spread = [&](double delta, auto neighbour_index) {
        // delta is the signed offset from the bin centre in bin widths.
        double a = std::abs(delta);
        own += 1.0 - a;
        int idx = neighbour_index(delta > 0.0 ? 1 : -1);
        if (idx >= 0) row[idx] += a;
        else own += a;
      };

      spread(cdelta, [&](int step) {
        int c = cbin + step;
        return (c < 0 || c >= kShotCosineBins) ? -1 : shot_index(abin, ebin, rbin, c);
      });
      // Radial and elevation interpolation only applies between the two
      // bin centres; beyond them the weight stays in the own bin.
      spread(rdelta, [&](int step) {
        int r = rbin + step;
        return (r < 0 || r >= kShotRadialBins) ? -1 : shot_index(abin, ebin, r, cbin);
      });
      spread(edelta, [&](int step) {
        int e = ebin + step;
        return (e < 0 || e >= kShotElevationBins) ? -1 : shot_index(abin, e, rbin, cbin);
      });
      spread(adelta, [&](int step) {
        int a = (abin + step + kShotAzimuthBins) % kShotAzimuthBins;
        return shot_index(a, ebin, rbin, cbin);
      });
      row[shot_index(abin, ebin, rbin, cbin)] += own;
    }

    double norm = row.norm();
    if (norm > 0.0) row /= norm;
    else out.degenerate_rows.push_back(v);
  }
  return out;
}

}  // namespace unimatch
