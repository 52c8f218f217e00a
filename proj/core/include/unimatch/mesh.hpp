#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace unimatch {

using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3>;

/// Undirected neighbour with its Euclidean edge length.
struct Neighbor {
  int vertex;
  double length;
};

/// Immutable triangle mesh with a derived edge graph.
///
/// Construction validates that every face index is in range, that no face
/// repeats a vertex and that every vertex is referenced by some face
/// (TopologyError otherwise). Edges shared by more than two faces are kept
/// and reported through non_manifold_edges().
class TriangleMesh {
 public:
  TriangleMesh() = default;
  TriangleMesh(Vertices vertices, Faces faces);

  const Vertices& vertices() const { return vertices_; }
  const Faces& faces() const { return faces_; }
  int num_vertices() const { return static_cast<int>(vertices_.rows()); }
  int num_faces() const { return static_cast<int>(faces_.rows()); }

  Eigen::Vector3d vertex(int i) const { return vertices_.row(i).transpose(); }

  /// Adjacency lists, sorted by neighbour index.
  const std::vector<std::vector<Neighbor>>& adjacency() const { return adjacency_; }
  int num_edges() const { return num_edges_; }
  const std::vector<std::pair<int, int>>& non_manifold_edges() const {
    return non_manifold_edges_;
  }
  bool is_manifold() const { return non_manifold_edges_.empty(); }

  /// Content hash over vertex coordinates and faces.
  std::uint64_t hash() const;

 private:
  Vertices vertices_;
  Faces faces_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<std::pair<int, int>> non_manifold_edges_;
  int num_edges_ = 0;
};

/// Per-face areas from the cross-product formula.
Eigen::VectorXd face_areas(const TriangleMesh& mesh);

/// Sum of face areas. Throws DegenerateError if every face has zero area.
double total_area(const TriangleMesh& mesh);

/// Area-weighted average of incident face normals, unit length.
Vertices vertex_normals(const TriangleMesh& mesh);

double bounding_box_diagonal(const TriangleMesh& mesh);

/// Connected components of the edge graph; returns component id per vertex.
std::vector<int> connected_components(const TriangleMesh& mesh, int* count = nullptr);

/// Mesh made of the given vertex subset: faces whose three corners are all
/// kept survive, unreferenced vertices are dropped. `kept_to_old` receives
/// the original index of every new vertex.
TriangleMesh submesh(const TriangleMesh& mesh, const std::vector<bool>& keep,
                     std::vector<int>* kept_to_old = nullptr);

/// Subdivided icosahedron projected to the unit sphere; 3 subdivisions give
/// 642 vertices and 1280 faces.
TriangleMesh make_icosphere(int subdivisions);

enum class MeshFormat { Auto, Off, PlyAscii };

/// Reads OFF or ASCII PLY. Throws ParseError (malformed) or TopologyError.
TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format = MeshFormat::Auto);
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path,
               MeshFormat format = MeshFormat::Auto);

/// Shortest-path distances from one vertex.
struct GeodesicField {
  int source = 0;
  Eigen::VectorXd distances;  ///< Normalized by sqrt(total_area).
};

/// Dijkstra on the edge graph with Euclidean edge lengths, divided by
/// sqrt(total_area) so the result is scale invariant.
/// Throws DisconnectedError if a vertex is unreachable.
GeodesicField geodesic_distances(const TriangleMesh& mesh, int source);

/// Same as geodesic_distances but unnormalized and tolerant of unreachable
/// vertices (left at +inf).
Eigen::VectorXd graph_distances(const TriangleMesh& mesh, int source);

}  // namespace unimatch
