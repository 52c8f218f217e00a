#include "unimatch/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "unimatch/errors.hpp"

namespace unimatch {

namespace {

// exp() of very negative arguments falls into the slow subnormal path; the
// clamped terms are below 1e-300 relative to the leading one.
constexpr double kExpFloor = -700.0;

// In place: Z -= logsumexp over each row; `soft` receives exp(Z) afterwards.
void row_step(Eigen::MatrixXd& Z, Eigen::MatrixXd& soft) {
  const Eigen::VectorXd m = Z.rowwise().maxCoeff();
  soft.noalias() = Z.colwise() - m;
  soft.array() = soft.array().max(kExpFloor).exp();
  const Eigen::VectorXd sum = soft.rowwise().sum();
  soft.array().colwise() /= sum.array();
  Z.colwise() -= (m.array() + sum.array().log()).matrix();
}

// In place: columns are shifted to mass one. A square problem normalises
// every column; with more classes than rows only columns above one move,
// since mass one everywhere is infeasible. Both keep the same fixed point
// (rows one, columns at most one). `soft` receives the column softmax of Z
// on entry; `active` flags the shifted columns.
void column_step(Eigen::MatrixXd& Z, Eigen::MatrixXd& soft, std::vector<bool>& active) {
  const bool square = Z.rows() == Z.cols();
  const Eigen::RowVectorXd m = Z.colwise().maxCoeff();
  soft.noalias() = Z.rowwise() - m;
  soft.array() = soft.array().max(kExpFloor).exp();
  const Eigen::RowVectorXd sum = soft.colwise().sum();
  soft.array().rowwise() /= sum.array();
  Eigen::RowVectorXd lse = m.array() + sum.array().log();
  active.resize(static_cast<std::size_t>(Z.cols()));
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    active[static_cast<std::size_t>(j)] = square || lse[j] > 0.0;
    if (!square) lse[j] = std::max(lse[j], 0.0);
  }
  Z.rowwise() -= lse;
}

}  // namespace

SinkhornOp::SinkhornOp(const Eigen::MatrixXd& logits, double tau, int iters) {
  if (logits.cols() < logits.rows()) {
    throw DimensionError("sinkhorn: universe of size " + std::to_string(logits.cols()) +
                         " is smaller than the shape (" + std::to_string(logits.rows()) +
                         " vertices)");
  }
  if (!(tau > 0.0)) throw DimensionError("sinkhorn: tau must be positive");
  if (iters < 1) throw DimensionError("sinkhorn: iters must be at least 1");

  Eigen::MatrixXd Z = logits / tau;
  softmax_.resize(static_cast<std::size_t>(2 * iters + 1));
  column_active_.resize(static_cast<std::size_t>(iters));
  for (int t = 0; t < iters; ++t) {
    row_step(Z, softmax_[static_cast<std::size_t>(2 * t)]);
    column_step(Z, softmax_[static_cast<std::size_t>(2 * t + 1)],
                column_active_[static_cast<std::size_t>(t)]);
  }
  row_step(Z, softmax_.back());

  result_.tau = tau;
  result_.iters = iters;
  result_.prob = softmax_.back();
  result_.log_prob = std::move(Z);
}

Eigen::MatrixXd SinkhornOp::backward_log(const Eigen::MatrixXd& grad_log_prob) const {
  Eigen::MatrixXd g = grad_log_prob;
  // Steps alternate row, column, ..., row; walk them in reverse. Both are
  // z - lse(z) along one axis, whose pullback is g - softmax * sum(g).
  for (std::size_t s = softmax_.size(); s-- > 0;) {
    const Eigen::MatrixXd& soft = softmax_[s];
    if (s % 2 == 0) {
      const Eigen::VectorXd sums = g.rowwise().sum();
      g.array() -= soft.array().colwise() * sums.array();
    } else {
      const auto& active = column_active_[s / 2];
      Eigen::RowVectorXd sums = g.colwise().sum();
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        if (!active[static_cast<std::size_t>(j)]) sums[j] = 0.0;
      }
      g.array() -= soft.array().rowwise() * sums.array();
    }
  }
  return g / result_.tau;
}

Eigen::MatrixXd SinkhornOp::backward(const Eigen::MatrixXd& grad_prob) const {
  return backward_log(grad_prob.cwiseProduct(result_.prob));
}

SoftAssignment sinkhorn(const Eigen::MatrixXd& logits, double tau, int iters) {
  return SinkhornOp(logits, tau, iters).result();
}

bool HardAssignment::is_injective() const {
  std::vector<bool> used(static_cast<std::size_t>(std::max(universe_size, 0)), false);
  for (int c : universe_class) {
    if (c < 0 || c >= universe_size || used[static_cast<std::size_t>(c)]) return false;
    used[static_cast<std::size_t>(c)] = true;
  }
  return true;
}

HardAssignment harden(const SoftAssignment& soft) {
  const Eigen::MatrixXd& P = soft.prob;
  const int n = static_cast<int>(P.rows()), d = static_cast<int>(P.cols());
  if (d < n) throw DimensionError("harden: universe smaller than the shape");

  std::vector<double> peak(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) peak[static_cast<std::size_t>(i)] = P.row(i).maxCoeff();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return peak[static_cast<std::size_t>(a)] > peak[static_cast<std::size_t>(b)];
  });

  HardAssignment hard;
  hard.universe_size = d;
  hard.universe_class.assign(static_cast<std::size_t>(n), -1);
  std::vector<bool> taken(static_cast<std::size_t>(d), false);
  for (int i : order) {
    int best = -1;
    double best_p = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < d; ++c) {
      if (!taken[static_cast<std::size_t>(c)] && P(i, c) > best_p) {
        best_p = P(i, c);
        best = c;
      }
    }
    taken[static_cast<std::size_t>(best)] = true;
    hard.universe_class[static_cast<std::size_t>(i)] = best;
  }
  return hard;
}

HardAssignment harden_optimal(const Eigen::MatrixXd& prob) {
  const int n = static_cast<int>(prob.rows()), m = static_cast<int>(prob.cols());
  if (m < n) throw DimensionError("harden_optimal: universe smaller than the shape");
  // Shortest augmenting path Hungarian method on cost = -prob, 1-based.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(m + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = -prob(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  HardAssignment hard;
  hard.universe_size = m;
  hard.universe_class.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (p[static_cast<std::size_t>(j)] != 0) {
      hard.universe_class[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    }
  }
  return hard;
}

double assigned_probability(const Eigen::MatrixXd& prob, const HardAssignment& hard) {
  double total = 0.0;
  for (int i = 0; i < hard.size(); ++i) {
    const int c = hard.universe_class[static_cast<std::size_t>(i)];
    if (c >= 0) total += prob(i, c);
  }
  return total;
}

PointMap compose_pairwise(const HardAssignment& x, const HardAssignment& y) {
  if (x.universe_size != y.universe_size) {
    throw DimensionError("compose_pairwise: universe sizes differ (" +
                         std::to_string(x.universe_size) + " vs " +
                         std::to_string(y.universe_size) + ")");
  }
  std::vector<int> owner(static_cast<std::size_t>(y.universe_size), PointMap::kNone);
  for (int j = 0; j < y.size(); ++j) {
    const int c = y.universe_class[static_cast<std::size_t>(j)];
    if (c >= 0) owner[static_cast<std::size_t>(c)] = j;
  }
  PointMap pm;
  pm.target_size = y.size();
  pm.targets.resize(static_cast<std::size_t>(x.size()));
  for (int i = 0; i < x.size(); ++i) {
    const int c = x.universe_class[static_cast<std::size_t>(i)];
    pm.targets[static_cast<std::size_t>(i)] =
        c >= 0 ? owner[static_cast<std::size_t>(c)] : PointMap::kNone;
  }
  return pm;
}

int universe_size(const std::vector<int>& vertex_counts) {
  if (vertex_counts.empty()) throw DimensionError("universe_size: empty collection");
  return *std::max_element(vertex_counts.begin(), vertex_counts.end());
}

MapCollection compose_all(const std::vector<HardAssignment>& assignments,
                          std::vector<std::string> shape_ids) {
  const std::size_t m = assignments.size();
  MapCollection out;
  if (shape_ids.empty()) {
    for (std::size_t i = 0; i < m; ++i) shape_ids.push_back(std::to_string(i));
  }
  out.shape_ids = std::move(shape_ids);
  out.maps.assign(m, std::vector<PointMap>(m));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      if (a != b) out.maps[a][b] = compose_pairwise(assignments[a], assignments[b]);
  return out;
}

CycleReport check_cycle_consistency(const MapCollection& maps, std::size_t max_reported) {
  CycleReport report;
  const int m = maps.size();
  for (int x = 0; x < m; ++x) {
    for (int y = 0; y < m; ++y) {
      if (y == x) continue;
      for (int z = 0; z < m; ++z) {
        if (z == x || z == y) continue;
        ++report.triplets_checked;
        const auto& xy = maps.maps[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)].targets;
        const auto& yz = maps.maps[static_cast<std::size_t>(y)][static_cast<std::size_t>(z)].targets;
        const auto& xz = maps.maps[static_cast<std::size_t>(x)][static_cast<std::size_t>(z)].targets;
        for (std::size_t i = 0; i < xy.size(); ++i) {
          const int j = xy[i];
          if (j == PointMap::kNone) continue;
          const int k = yz[static_cast<std::size_t>(j)];
          if (k == PointMap::kNone) continue;
          const int direct = i < xz.size() ? xz[i] : PointMap::kNone;
          if (direct == k) continue;
          ++report.violation_count;
          if (report.violations.size() < max_reported) {
            report.violations.push_back({x, y, z, static_cast<int>(i), k, direct});
          }
        }
      }
    }
  }
  return report;
}

namespace {

std::vector<long long> read_integer_lines(std::istream& in, const std::filesystem::path& path,
                                          std::string* header) {
  std::vector<long long> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header && header->empty()) *header = line;
      continue;
    }
    std::istringstream ss(line);
    long long v = 0;
    if (!(ss >> v)) throw ParseError(path.string() + ": bad line '" + line + "'");
    values.push_back(v);
  }
  return values;
}

int header_int(const std::string& header, const std::string& key, int fallback) {
  std::istringstream ss(header.substr(header.empty() ? 0 : 1));
  std::string token;
  while (ss >> token) {
    if (token.rfind(key + "=", 0) == 0) return std::stoi(token.substr(key.size() + 1));
  }
  return fallback;
}

}  // namespace

void save_correspondence(const PointMap& map, const std::string& source_id,
                         const std::string& target_id, int universe_size,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "# source=" << source_id << " target=" << target_id << " d=" << universe_size
      << " target_vertices=" << map.target_size << '\n';
  for (int t : map.targets) out << t << '\n';
}

PointMap load_correspondence(const std::filesystem::path& path, int target_size) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open correspondence file '" + path.string() + "'");
  std::string header;
  const auto values = read_integer_lines(in, path, &header);
  PointMap pm;
  pm.target_size = target_size > 0 ? target_size : header_int(header, "target_vertices", 0);
  for (long long v : values) {
    if (v < -1 || (pm.target_size > 0 && v >= pm.target_size)) {
      throw ParseError(path.string() + ": target index " + std::to_string(v) + " out of range");
    }
    pm.targets.push_back(static_cast<int>(v));
  }
  return pm;
}

void save_assignment(const HardAssignment& assignment, const std::string& shape_id,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "# shape=" << shape_id << " d=" << assignment.universe_size << '\n';
  for (int c : assignment.universe_class) out << c << '\n';
}

HardAssignment load_assignment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open assignment file '" + path.string() + "'");
  std::string header;
  const auto values = read_integer_lines(in, path, &header);
  HardAssignment hard;
  hard.universe_size = header_int(header, "d", 0);
  if (hard.universe_size <= 0) throw ParseError(path.string() + ": missing universe size");
  for (long long v : values) {
    if (v < 0 || v >= hard.universe_size) {
      throw ParseError(path.string() + ": class " + std::to_string(v) + " out of range");
    }
    hard.universe_class.push_back(static_cast<int>(v));
  }
  return hard;
}

}  // namespace unimatch
