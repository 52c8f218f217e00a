#include "unimatch/fmap.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>

#include "unimatch/errors.hpp"

namespace unimatch {

namespace {

std::atomic<std::uint64_t> g_fmap_instances{0};
std::atomic<std::uint64_t> g_solver_instances{0};

double resolvent_f(double l, double g) { return std::pow(l, g) / (std::pow(l, 2 * g) + 1.0); }
double resolvent_h(double l, double g) { return 1.0 / (std::pow(l, 2 * g) + 1.0); }

}  // namespace

ResolventMask resolvent_mask(const Eigen::VectorXd& evals_x, const Eigen::VectorXd& evals_y,
                             double gamma) {
  ResolventMask mask;
  mask.gamma = gamma;
  mask.values.resize(evals_y.size(), evals_x.size());
  for (Eigen::Index i = 0; i < evals_y.size(); ++i) {
    const double fy = resolvent_f(evals_y[i], gamma), hy = resolvent_h(evals_y[i], gamma);
    for (Eigen::Index j = 0; j < evals_x.size(); ++j) {
      const double df = fy - resolvent_f(evals_x[j], gamma);
      const double dh = hy - resolvent_h(evals_x[j], gamma);
      mask.values(i, j) = df * df + dh * dh;
    }
  }
  return mask;
}

FunctionalMap::FunctionalMap(Eigen::MatrixXd C, double lambda, double gamma,
                             std::string source_id, std::string target_id)
    : C_(std::move(C)),
      lambda_(lambda),
      gamma_(gamma),
      source_id_(std::move(source_id)),
      target_id_(std::move(target_id)) {
  ++g_fmap_instances;
}

FunctionalMap::FunctionalMap(const FunctionalMap& other)
    : C_(other.C_),
      lambda_(other.lambda_),
      gamma_(other.gamma_),
      source_id_(other.source_id_),
      target_id_(other.target_id_) {
  ++g_fmap_instances;
}

FunctionalMap::FunctionalMap(FunctionalMap&& other) noexcept
    : C_(std::move(other.C_)),
      lambda_(other.lambda_),
      gamma_(other.gamma_),
      source_id_(std::move(other.source_id_)),
      target_id_(std::move(other.target_id_)) {
  ++g_fmap_instances;
}

std::uint64_t FunctionalMap::instances_created() { return g_fmap_instances.load(); }

std::uint64_t RegularizedFmapSolver::instances_created() { return g_solver_instances.load(); }

RegularizedFmapSolver::RegularizedFmapSolver(const Eigen::MatrixXd& A_x,
                                             const Eigen::MatrixXd& A_y,
                                             const ResolventMask& mask, double lambda)
    : A_x_(A_x), A_y_(A_y) {
  ++g_solver_instances;
  const Eigen::Index kx = A_x.rows(), ky = A_y.rows();
  if (A_x.cols() != A_y.cols()) {
    throw DimensionError("solve_fmap: descriptor counts differ (" + std::to_string(A_x.cols()) +
                         " vs " + std::to_string(A_y.cols()) + ")");
  }
  if (lambda < 0.0) throw DimensionError("solve_fmap: lambda must be nonnegative");
  if (lambda > 0.0 && (mask.values.rows() != ky || mask.values.cols() != kx)) {
    throw DimensionError("solve_fmap: mask shape does not match the bases");
  }

  const Eigen::MatrixXd gram = A_x * A_x.transpose();
  const Eigen::MatrixXd rhs = A_x * A_y.transpose();  // column i is the rhs of row i
  C_.resize(ky, kx);

  auto factorize = [&](const Eigen::MatrixXd& H) {
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success || !(llt.rcond() >= 1e-14)) {
      throw SingularError("solve_fmap: row system is singular (lambda=" + std::to_string(lambda) +
                          ")");
    }
    return llt;
  };

  shared_factor_ = lambda == 0.0;
  if (shared_factor_) {
    factors_.push_back(factorize(gram));
    C_ = factors_.front().solve(rhs).transpose();
  } else {
    factors_.reserve(static_cast<std::size_t>(ky));
    for (Eigen::Index i = 0; i < ky; ++i) {
      Eigen::MatrixXd H = gram;
      H.diagonal() += lambda * mask.values.row(i).transpose();
      factors_.push_back(factorize(H));
      C_.row(i) = factors_.back().solve(rhs.col(i)).transpose();
    }
  }
}

RegularizedFmapSolver::Adjoint RegularizedFmapSolver::backward(const Eigen::MatrixXd& grad_C) const {
  if (grad_C.rows() != C_.rows() || grad_C.cols() != C_.cols()) {
    throw DimensionError("solve_fmap backward: gradient shape mismatch");
  }
  // S row i = H_i^{-1} grad_C(i,:)^T.
  Eigen::MatrixXd S(C_.rows(), C_.cols());
  if (shared_factor_) {
    S = factors_.front().solve(grad_C.transpose()).transpose();
  } else {
    for (Eigen::Index i = 0; i < C_.rows(); ++i) {
      S.row(i) = factors_[static_cast<std::size_t>(i)].solve(grad_C.row(i).transpose()).transpose();
    }
  }
  // dL/db_i = s_i, dL/dH_i = -s_i c_i^T with b_i = A_x a_i and H_i = A_x A_x^T + const.
  Adjoint adj;
  Eigen::MatrixXd sym = S.transpose() * C_ + C_.transpose() * S;  // sum_i s_i c_i^T + c_i s_i^T
  adj.grad_Ax = S.transpose() * A_y_ - sym * A_x_;
  adj.grad_Ay = S * A_x_;
  return adj;
}

FunctionalMap solve_fmap(const Eigen::MatrixXd& A_x, const Eigen::MatrixXd& A_y,
                         const ResolventMask& mask, double lambda) {
  RegularizedFmapSolver solver(A_x, A_y, mask, lambda);
  return FunctionalMap(solver.solution(), lambda, mask.gamma);
}

bool PointMap::is_partial_permutation() const {
  std::vector<bool> seen(static_cast<std::size_t>(std::max(target_size, 0)), false);
  for (int t : targets) {
    if (t == kNone) continue;
    if (t < 0 || t >= target_size || seen[static_cast<std::size_t>(t)]) return false;
    seen[static_cast<std::size_t>(t)] = true;
  }
  return true;
}

int PointMap::matched_count() const {
  int c = 0;
  for (int t : targets) c += t != kNone;
  return c;
}

std::vector<int> nearest_rows(const Eigen::MatrixXd& query, const Eigen::MatrixXd& reference) {
  if (query.cols() != reference.cols()) throw DimensionError("nearest_rows: width mismatch");
  if (reference.rows() == 0) throw DimensionError("nearest_rows: empty reference");
  // Row-major copies keep the inner distance loop contiguous.
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor q = query, r = reference;
  const Eigen::Index dims = q.cols();
  std::vector<int> out(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const double* qi = q.row(i).data();
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index j = 0; j < r.rows(); ++j) {
      const double* rj = r.row(j).data();
      double d = 0.0;
      for (Eigen::Index c = 0; c < dims; ++c) {
        const double t = qi[c] - rj[c];
        d += t * t;
      }
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    out[static_cast<std::size_t>(i)] = arg;
  }
  return out;
}

PointMap fmap_to_pointmap(const Eigen::MatrixXd& C_xy, const SpectralBasis& basis_x,
                          const SpectralBasis& basis_y) {
  if (C_xy.rows() != basis_y.size() || C_xy.cols() != basis_x.size()) {
    throw DimensionError("fmap_to_pointmap: C is " + std::to_string(C_xy.rows()) + "x" +
                         std::to_string(C_xy.cols()) + ", bases are " +
                         std::to_string(basis_y.size()) + " and " + std::to_string(basis_x.size()));
  }
  PointMap pm;
  pm.targets = nearest_rows(basis_y.eigenfunctions * C_xy, basis_x.eigenfunctions);
  pm.target_size = basis_x.num_vertices();
  return pm;
}

int partial_rank(const Eigen::VectorXd& evals_complete, const Eigen::VectorXd& evals_partial) {
  if (evals_complete.size() == 0 || evals_partial.size() == 0) {
    throw DimensionError("partial_rank: empty spectrum");
  }
  const double top = evals_complete.maxCoeff();
  int r = 0;
  for (Eigen::Index i = 0; i < evals_partial.size(); ++i) {
    if (evals_partial[i] < top) r = static_cast<int>(i) + 1;
  }
  return r;
}

void save_functional_map(const FunctionalMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  const auto& C = map.matrix();
  out << std::setprecision(17) << C.rows() << ' ' << C.cols() << ' ' << map.lambda() << ' '
      << map.gamma() << '\n';
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    for (Eigen::Index j = 0; j < C.cols(); ++j) out << (j ? " " : "") << C(i, j);
    out << '\n';
  }
}

FunctionalMap load_functional_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open functional map '" + path.string() + "'");
  Eigen::Index rows = 0, cols = 0;
  double lambda = 0.0, gamma = 0.0;
  if (!(in >> rows >> cols >> lambda >> gamma) || rows <= 0 || cols <= 0) {
    throw ParseError(path.string() + ": malformed functional map header");
  }
  Eigen::MatrixXd C(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(in >> C(i, j))) throw ParseError(path.string() + ": truncated functional map");
  return FunctionalMap(std::move(C), lambda, gamma);
}

}  // namespace unimatch
