#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "unimatch/errors.hpp"
#include "unimatch/eval.hpp"

namespace unimatch {

std::string to_string(SyntheticBase base) {
  return base == SyntheticBase::Icosphere ? "icosphere" : "bumpy-sphere";
}

SyntheticBase parse_synthetic_base(const std::string& text) {
  if (text == "icosphere") return SyntheticBase::Icosphere;
  if (text == "bumpy-sphere") return SyntheticBase::BumpySphere;
  throw ConfigError("unknown synthetic base '" + text + "' (expected icosphere or bumpy-sphere)");
}

std::string to_string(PartialKind kind) { return kind == PartialKind::Cut ? "cut" : "holes"; }

PartialKind parse_partial_kind(const std::string& text) {
  if (text == "cut") return PartialKind::Cut;
  if (text == "holes") return PartialKind::Holes;
  throw ConfigError("unknown partial kind '" + text + "' (expected cut or holes)");
}

TriangleMesh make_base_mesh(SyntheticBase base, int subdivisions) {
  TriangleMesh sphere = make_icosphere(subdivisions);
  if (base == SyntheticBase::Icosphere) return sphere;

  // Ellipsoid with a fixed, asymmetric set of Gaussian bumps.
  struct Bump {
    Eigen::Vector3d center;
    double height;
    double width;
  };
  const Bump bumps[] = {
      {{0.0, 0.0, 1.0}, 0.30, 0.45},   {{0.9, 0.3, 0.2}, 0.18, 0.40},
      {{-0.5, 0.8, -0.1}, 0.22, 0.35}, {{-0.3, -0.7, 0.6}, 0.12, 0.30},
      {{0.2, -0.4, -0.9}, 0.25, 0.50}, {{-0.8, -0.2, -0.5}, 0.08, 0.25},
  };
  const Eigen::Vector3d axes(1.0, 0.85, 0.7);
  Vertices v = sphere.vertices();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const Eigen::Vector3d u = v.row(i).transpose().normalized();
    double r = 1.0;
    for (const Bump& b : bumps) {
      r += b.height * std::exp(-(u - b.center.normalized()).squaredNorm() / (b.width * b.width));
    }
    v.row(i) = (axes.array() * u.array() * r).matrix().transpose();
  }
  return TriangleMesh(std::move(v), sphere.faces());
}

TriangleMesh deform(const TriangleMesh& mesh, std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto random_direction = [&] {
    Eigen::Vector3d d(gauss(rng), gauss(rng), gauss(rng));
    return Eigen::Vector3d(d.normalized());
  };

  // Low-frequency scalar field along the normals.
  struct Wave {
    Eigen::Vector3d k;
    double phase;
  };
  std::vector<Wave> waves;
  for (int m = 0; m < 3; ++m) {
    waves.push_back({random_direction() * (1.5 + unit(rng)), 2.0 * M_PI * unit(rng)});
  }
  const double displacement = 0.03 * amplitude;
  const Vertices normals = vertex_normals(mesh);
  Vertices v = mesh.vertices();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const Eigen::Vector3d p = v.row(i).transpose();
    double f = 0.0;
    for (const Wave& w : waves) f += std::sin(w.k.dot(p) + w.phase) / 3.0;
    v.row(i) += displacement * f * normals.row(i);
  }

  // Bend along a random axis: points at height t above the bending plane
  // follow arcs of radius 1/kappa - t.
  const Eigen::Vector3d along = random_direction();
  Eigen::Vector3d across = random_direction();
  across = (across - across.dot(along) * along).normalized();
  const double kappa = 0.03 * amplitude * (unit(rng) < 0.5 ? -1.0 : 1.0);
  if (kappa != 0.0) {
    const double R = 1.0 / kappa;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const Eigen::Vector3d p = v.row(i).transpose();
      const double s = p.dot(along), t = p.dot(across);
      const Eigen::Vector3d rest = p - s * along - t * across;
      const double theta = s / R;
      const double s2 = std::sin(theta) * (R - t);
      const double t2 = R - std::cos(theta) * (R - t);
      v.row(i) = (rest + s2 * along + t2 * across).transpose();
    }
  }
  return TriangleMesh(std::move(v), mesh.faces());
}

SyntheticCollection make_synthetic_collection(SyntheticBase base, int count, std::uint64_t seed,
                                              const SyntheticOptions& options) {
  if (count < 2) throw ConfigError("a synthetic collection needs at least two shapes");
  if (options.amplitude < 0.0) throw ConfigError("deformation amplitude must be nonnegative");
  SyntheticCollection out;
  out.base = make_base_mesh(base, options.subdivisions);
  const int n = out.base.num_vertices();
  std::mt19937_64 rng(seed);
  for (int s = 0; s < count; ++s) {
    const TriangleMesh shape = deform(out.base, rng(), options.amplitude);
    std::vector<int> perm(static_cast<std::size_t>(n));  // new vertex -> base vertex
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> inverse(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) inverse[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i;

    Vertices v(n, 3);
    for (int i = 0; i < n; ++i) v.row(i) = shape.vertices().row(perm[static_cast<std::size_t>(i)]);
    Faces f = shape.faces();
    for (Eigen::Index r = 0; r < f.rows(); ++r)
      for (int c = 0; c < 3; ++c) f(r, c) = inverse[static_cast<std::size_t>(f(r, c))];
    out.meshes.emplace_back(std::move(v), std::move(f));
    out.ground_truth.push_back(GroundTruth{perm});
  }
  return out;
}

namespace {

double kept_area(const TriangleMesh& mesh, const Eigen::VectorXd& areas,
                 const std::vector<bool>& keep) {
  double a = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (keep[static_cast<std::size_t>(mesh.faces()(f, 0))] &&
        keep[static_cast<std::size_t>(mesh.faces()(f, 1))] &&
        keep[static_cast<std::size_t>(mesh.faces()(f, 2))]) {
      a += areas[f];
    }
  }
  return a;
}

// Removes the vertices closest to `source` (among those still kept) until
// `target` area is gone; returns the removed area.
double carve_ball(const TriangleMesh& mesh, const Eigen::VectorXd& areas, std::vector<bool>& keep,
                  int source, double target) {
  const Eigen::VectorXd dist = graph_distances(mesh, source);
  std::vector<int> order;
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    if (keep[static_cast<std::size_t>(i)] && std::isfinite(dist[i])) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });
  const double before = kept_area(mesh, areas, keep);
  auto removed_with = [&](std::size_t count) {
    std::vector<bool> trial = keep;
    for (std::size_t i = 0; i < count; ++i) trial[static_cast<std::size_t>(order[i])] = false;
    return before - kept_area(mesh, areas, trial);
  };
  // Removed area grows with the prefix length; pick the prefix closest to target.
  std::size_t lo = 0, hi = order.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (removed_with(mid) < target) lo = mid + 1;
    else hi = mid;
  }
  std::size_t best = lo;
  if (lo > 0 && std::abs(removed_with(lo - 1) - target) < std::abs(removed_with(lo) - target)) {
    best = lo - 1;
  }
  for (std::size_t i = 0; i < best; ++i) keep[static_cast<std::size_t>(order[i])] = false;
  return before - kept_area(mesh, areas, keep);
}

}  // namespace

PartialShape make_partial(const TriangleMesh& mesh, const GroundTruth& gt, PartialKind kind,
                          double fraction, std::uint64_t seed, int holes) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("fraction must lie in [0, 1)");
  if (gt.size() != mesh.num_vertices()) {
    throw DimensionError("make_partial: ground truth does not match the mesh");
  }
  PartialShape out;
  if (fraction == 0.0) {
    out.mesh = mesh;
    out.ground_truth = gt;
    out.kept_to_old.resize(static_cast<std::size_t>(mesh.num_vertices()));
    std::iota(out.kept_to_old.begin(), out.kept_to_old.end(), 0);
    return out;
  }
  if (kind == PartialKind::Holes && holes < 1) throw ConfigError("holes must be at least 1");

  const Eigen::VectorXd areas = face_areas(mesh);
  const double total = areas.sum();
  std::mt19937_64 rng(seed);
  constexpr int kAttempts = 20;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::vector<bool> keep(static_cast<std::size_t>(mesh.num_vertices()), true);
    std::uniform_int_distribution<int> pick(0, mesh.num_vertices() - 1);
    if (kind == PartialKind::Cut) {
      carve_ball(mesh, areas, keep, pick(rng), fraction * total);
    } else {
      for (int h = 0; h < holes; ++h) {
        int source = pick(rng);
        while (!keep[static_cast<std::size_t>(source)]) source = pick(rng);
        const double remaining = fraction * total - (total - kept_area(mesh, areas, keep));
        carve_ball(mesh, areas, keep, source, remaining / (holes - h));
      }
    }
    std::vector<int> kept_to_old;
    TriangleMesh part = submesh(mesh, keep, &kept_to_old);
    if (part.num_vertices() == 0) continue;
    int components = 0;
    connected_components(part, &components);
    if (components != 1) continue;
    out.mesh = std::move(part);
    out.kept_to_old = std::move(kept_to_old);
    out.ground_truth.reference.clear();
    for (int old : out.kept_to_old) {
      out.ground_truth.reference.push_back(gt.reference[static_cast<std::size_t>(old)]);
    }
    out.removed_area_fraction = 1.0 - total_area(out.mesh) / total;
    return out;
  }
  throw TopologyError("make_partial: no connected " + to_string(kind) + " partial found after " +
                      std::to_string(kAttempts) + " attempts");
}

}  // namespace unimatch
