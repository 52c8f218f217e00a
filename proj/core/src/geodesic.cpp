#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "unimatch/errors.hpp"
#include "unimatch/mesh.hpp"

namespace unimatch {

Eigen::VectorXd graph_distances(const TriangleMesh& mesh, int source) {
  const int n = mesh.num_vertices();
  if (source < 0 || source >= n) {
    throw DimensionError("geodesic source " + std::to_string(source) + " out of range");
  }
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    for (const auto& nb : mesh.adjacency()[v]) {
      double cand = d + nb.length;
      if (cand < dist[nb.vertex]) {
        dist[nb.vertex] = cand;
        queue.emplace(cand, nb.vertex);
      }
    }
  }
  return dist;
}

GeodesicField geodesic_distances(const TriangleMesh& mesh, int source) {
  Eigen::VectorXd dist = graph_distances(mesh, source);
  if (!dist.allFinite()) {
    throw DisconnectedError("mesh is disconnected: vertex unreachable from " +
                            std::to_string(source));
  }
  return {source, dist / std::sqrt(total_area(mesh))};
}

}  // namespace unimatch
