#include "unimatch/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "unimatch/errors.hpp"

namespace unimatch {

GroundTruth load_ground_truth(const std::filesystem::path& path, int index_base) {
  if (index_base != 0 && index_base != 1) throw ConfigError("index base must be 0 or 1");
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open ground truth '" + path.string() + "'");
  GroundTruth gt;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long v = 0;
    if (!(ss >> v)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected an index");
    }
    if (v == -1) {
      gt.reference.push_back(GroundTruth::kUndefined);
    } else if (v < index_base) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": index " +
                       std::to_string(v) + " below base " + std::to_string(index_base));
    } else {
      gt.reference.push_back(static_cast<int>(v - index_base));
    }
  }
  return gt;
}

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (int r : gt.reference) out << r << '\n';
}

std::vector<int> expected_targets(const GroundTruth& gt_x, const GroundTruth& gt_y) {
  std::unordered_map<int, int> where;
  for (int j = 0; j < gt_y.size(); ++j) {
    const int r = gt_y.reference[static_cast<std::size_t>(j)];
    if (r != GroundTruth::kUndefined) where.emplace(r, j);
  }
  std::vector<int> out(static_cast<std::size_t>(gt_x.size()), PointMap::kNone);
  for (int i = 0; i < gt_x.size(); ++i) {
    const int r = gt_x.reference[static_cast<std::size_t>(i)];
    if (r == GroundTruth::kUndefined) continue;
    const auto it = where.find(r);
    if (it != where.end()) out[static_cast<std::size_t>(i)] = it->second;
  }
  return out;
}

std::vector<double> GeodesicErrors::values() const {
  std::vector<double> out;
  for (double e : per_vertex)
    if (std::isfinite(e)) out.push_back(e);
  return out;
}

GeodesicErrors geodesic_error(const PointMap& pred, const std::vector<int>& expected,
                              const TriangleMesh& mesh_y) {
  if (pred.size() != static_cast<int>(expected.size())) {
    throw DimensionError("geodesic_error: prediction and ground truth sizes differ");
  }
  const int n_y = mesh_y.num_vertices();
  GeodesicErrors out;
  out.per_vertex.assign(expected.size(), std::numeric_limits<double>::quiet_NaN());
  std::unordered_map<int, Eigen::VectorXd> fields;
  double sum = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const int e = expected[i];
    if (e == PointMap::kNone) {
      ++out.undefined;
      continue;
    }
    const int p = pred.targets[i];
    if (p == PointMap::kNone) {
      ++out.unmatched;
      continue;
    }
    if (p < 0 || p >= n_y || e < 0 || e >= n_y) {
      throw DimensionError("geodesic_error: vertex index out of range");
    }
    auto it = fields.find(e);
    if (it == fields.end()) it = fields.emplace(e, geodesic_distances(mesh_y, e).distances).first;
    const double err = it->second[p];
    out.per_vertex[i] = err;
    sum += err;
    ++out.evaluated;
  }
  out.mean = out.evaluated > 0 ? sum / out.evaluated : 0.0;
  return out;
}

GeodesicErrors geodesic_error(const PointMap& pred, const GroundTruth& gt_x,
                              const GroundTruth& gt_y, const TriangleMesh& mesh_y) {
  return geodesic_error(pred, expected_targets(gt_x, gt_y), mesh_y);
}

PckCurve pck(const std::vector<double>& errors, const std::vector<double>& thresholds) {
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) {
      throw DimensionError("pck: thresholds must be increasing");
    }
  }
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  PckCurve curve;
  curve.thresholds = thresholds;
  for (double t : thresholds) {
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    curve.fractions.push_back(sorted.empty() ? 1.0
                                             : static_cast<double>(count) /
                                                   static_cast<double>(sorted.size()));
  }
  return curve;
}

std::vector<double> default_pck_thresholds(double max_threshold, int count) {
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    t[static_cast<std::size_t>(i)] = count == 1 ? max_threshold : max_threshold * i / (count - 1);
  }
  return t;
}

PointMap random_pointmap(int n_x, int n_y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PointMap pm;
  pm.target_size = n_y;
  if (n_x <= n_y) {
    std::vector<int> perm(static_cast<std::size_t>(n_y));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    pm.targets.assign(perm.begin(), perm.begin() + n_x);
  } else {
    std::uniform_int_distribution<int> dist(0, n_y - 1);
    for (int i = 0; i < n_x; ++i) pm.targets.push_back(dist(rng));
  }
  return pm;
}

}  // namespace unimatch
