#include "unimatch/mesh.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <string>

#include "unimatch/container.hpp"
#include "unimatch/errors.hpp"

namespace unimatch {

TriangleMesh::TriangleMesh(Vertices vertices, Faces faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const int n = num_vertices();
  if (n == 0 || faces_.rows() == 0) throw TopologyError("mesh has no vertices or no faces");
  if (!vertices_.allFinite()) throw TopologyError("mesh has non-finite vertex coordinates");

  std::vector<bool> referenced(n, false);
  std::map<std::pair<int, int>, int> edge_faces;
  for (int f = 0; f < num_faces(); ++f) {
    std::array<int, 3> idx{faces_(f, 0), faces_(f, 1), faces_(f, 2)};
    for (int v : idx) {
      if (v < 0 || v >= n) {
        throw TopologyError("face " + std::to_string(f) + " references vertex " +
                            std::to_string(v) + " outside [0, " + std::to_string(n) + ")");
      }
      referenced[v] = true;
    }
    if (idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2]) {
      throw TopologyError("face " + std::to_string(f) + " repeats a vertex");
    }
    for (int e = 0; e < 3; ++e) {
      int a = idx[e], b = idx[(e + 1) % 3];
      ++edge_faces[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (int v = 0; v < n; ++v) {
    if (!referenced[v]) {
      throw TopologyError("vertex " + std::to_string(v) + " is not referenced by any face");
    }
  }

  adjacency_.assign(n, {});
  for (const auto& [edge, count] : edge_faces) {
    auto [a, b] = edge;
    double len = (vertices_.row(a) - vertices_.row(b)).norm();
    adjacency_[a].push_back({b, len});
    adjacency_[b].push_back({a, len});
    if (count > 2) non_manifold_edges_.push_back(edge);
  }
  for (auto& nbrs : adjacency_) {
    std::sort(nbrs.begin(), nbrs.end(),
              [](const Neighbor& x, const Neighbor& y) { return x.vertex < y.vertex; });
  }
  num_edges_ = static_cast<int>(edge_faces.size());
}

std::uint64_t TriangleMesh::hash() const {
  std::uint64_t h = fnv1a(vertices_.data(), sizeof(double) * vertices_.size());
  return fnv1a(faces_.data(), sizeof(int) * faces_.size(), h);
}

Eigen::VectorXd face_areas(const TriangleMesh& mesh) {
  const auto& V = mesh.vertices();
  const auto& F = mesh.faces();
  Eigen::VectorXd areas(F.rows());
  for (Eigen::Index f = 0; f < F.rows(); ++f) {
    Eigen::Vector3d e1 = V.row(F(f, 1)) - V.row(F(f, 0));
    Eigen::Vector3d e2 = V.row(F(f, 2)) - V.row(F(f, 0));
    areas[f] = 0.5 * e1.cross(e2).norm();
  }
  return areas;
}

double total_area(const TriangleMesh& mesh) {
  double a = face_areas(mesh).sum();
  if (!(a > 0.0)) throw DegenerateError("mesh has zero total area");
  return a;
}

Vertices vertex_normals(const TriangleMesh& mesh) {
  const auto& V = mesh.vertices();
  const auto& F = mesh.faces();
  Vertices N = Vertices::Zero(V.rows(), 3);
  for (Eigen::Index f = 0; f < F.rows(); ++f) {
    Eigen::Vector3d e1 = V.row(F(f, 1)) - V.row(F(f, 0));
    Eigen::Vector3d e2 = V.row(F(f, 2)) - V.row(F(f, 0));
    // Unnormalized cross product is twice the area times the unit normal.
    Eigen::RowVector3d n = e1.cross(e2).transpose();
    for (int c = 0; c < 3; ++c) N.row(F(f, c)) += n;
  }
  for (Eigen::Index i = 0; i < N.rows(); ++i) {
    double len = N.row(i).norm();
    if (len > 0.0) N.row(i) /= len;
  }
  return N;
}

double bounding_box_diagonal(const TriangleMesh& mesh) {
  const auto& V = mesh.vertices();
  return (V.colwise().maxCoeff() - V.colwise().minCoeff()).norm();
}

std::vector<int> connected_components(const TriangleMesh& mesh, int* count) {
  const int n = mesh.num_vertices();
  std::vector<int> comp(n, -1);
  int next = 0;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (const auto& nb : mesh.adjacency()[v]) {
        if (comp[nb.vertex] < 0) {
          comp[nb.vertex] = next;
          stack.push_back(nb.vertex);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return comp;
}

TriangleMesh submesh(const TriangleMesh& mesh, const std::vector<bool>& keep,
                     std::vector<int>* kept_to_old) {
  if (static_cast<int>(keep.size()) != mesh.num_vertices()) {
    throw DimensionError("submesh: mask size does not match vertex count");
  }
  const auto& F = mesh.faces();
  std::vector<int> kept_faces;
  std::vector<bool> used(mesh.num_vertices(), false);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (keep[F(f, 0)] && keep[F(f, 1)] && keep[F(f, 2)]) {
      kept_faces.push_back(f);
      for (int c = 0; c < 3; ++c) used[F(f, c)] = true;
    }
  }
  std::vector<int> remap(mesh.num_vertices(), -1);
  std::vector<int> old_index;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (used[v]) {
      remap[v] = static_cast<int>(old_index.size());
      old_index.push_back(v);
    }
  }
  Vertices V(old_index.size(), 3);
  for (std::size_t i = 0; i < old_index.size(); ++i) V.row(i) = mesh.vertices().row(old_index[i]);
  Faces NF(kept_faces.size(), 3);
  for (std::size_t i = 0; i < kept_faces.size(); ++i) {
    for (int c = 0; c < 3; ++c) NF(i, c) = remap[F(kept_faces[i], c)];
  }
  if (kept_to_old) *kept_to_old = std::move(old_index);
  return TriangleMesh(std::move(V), std::move(NF));
}

TriangleMesh make_icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      int id = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& [a, b, c] : faces) {
      int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  Vertices V(verts.size(), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) V.row(i) = verts[i].transpose();
  Faces F(faces.size(), 3);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    F.row(i) << faces[i][0], faces[i][1], faces[i][2];
  }
  return TriangleMesh(std::move(V), std::move(F));
}

}  // namespace unimatch
