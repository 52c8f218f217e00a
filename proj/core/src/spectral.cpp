#include "unimatch/spectral.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "unimatch/container.hpp"
#include "unimatch/errors.hpp"

namespace unimatch {

CotanLaplacian cotan_laplacian(const TriangleMesh& mesh) {
  const int n = mesh.num_vertices();
  const auto& V = mesh.vertices();
  const auto& F = mesh.faces();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(F.rows()) * 12);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);

  for (Eigen::Index f = 0; f < F.rows(); ++f) {
    const int idx[3] = {F(f, 0), F(f, 1), F(f, 2)};
    Eigen::Vector3d p[3] = {V.row(idx[0]), V.row(idx[1]), V.row(idx[2])};
    const double double_area = (p[1] - p[0]).cross(p[2] - p[0]).norm();
    if (!(double_area > 0.0)) {
      throw DegenerateError("face " + std::to_string(f) + " has zero area");
    }
    for (int c = 0; c < 3; ++c) {
      // Angle at corner c is opposite the edge (c+1, c+2).
      const int a = (c + 1) % 3, b = (c + 2) % 3;
      Eigen::Vector3d u = p[a] - p[c];
      Eigen::Vector3d v = p[b] - p[c];
      const double w = 0.5 * u.dot(v) / double_area;
      const int i = idx[a], j = idx[b];
      triplets.emplace_back(i, j, -w);
      triplets.emplace_back(j, i, -w);
      triplets.emplace_back(i, i, w);
      triplets.emplace_back(j, j, w);
    }
    for (int c = 0; c < 3; ++c) mass[idx[c]] += double_area / 6.0;
  }

  CotanLaplacian out;
  out.stiffness.resize(n, n);
  out.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  out.stiffness.makeCompressed();
  out.mass = std::move(mass);
  return out;
}

void fix_signs(Eigen::MatrixXd& phi) {
  for (Eigen::Index c = 0; c < phi.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index r = 0; r < phi.rows(); ++r) {
      // Strict comparison keeps the lowest index among equal magnitudes; the
      // relative slack absorbs round-off between mirror-symmetric entries.
      const double a = std::abs(phi(r, c));
      if (a > best_abs * (1.0 + 1e-9)) {
        best_abs = a;
        best = r;
      }
    }
    if (phi(best, c) < 0.0) phi.col(c) *= -1.0;
  }
}

namespace detail {

SpectralBasis dense_eigenbasis(const CotanLaplacian& lap, int k) {
  Eigen::VectorXd inv_sqrt_m = lap.mass.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd S = Eigen::MatrixXd(lap.stiffness);
  S = inv_sqrt_m.asDiagonal() * S * inv_sqrt_m.asDiagonal();
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  if (eig.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed");

  SpectralBasis basis;
  basis.eigenvalues = eig.eigenvalues().head(k);
  basis.eigenfunctions = inv_sqrt_m.asDiagonal() * eig.eigenvectors().leftCols(k);
  basis.mass = lap.mass;
  return basis;
}

}  // namespace detail

double max_relative_residual(const CotanLaplacian& lap, const SpectralBasis& basis) {
  // Column scale is |L phi|, floored by a normwise term so that the
  // numerically-null constant mode is measured against the operator size.
  double l_norm = 0.0;
  for (int c = 0; c < lap.stiffness.outerSize(); ++c) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(lap.stiffness, c); it; ++it) s += std::abs(it.value());
    l_norm = std::max(l_norm, s);
  }
  double worst = 0.0;
  for (int i = 0; i < basis.size(); ++i) {
    Eigen::VectorXd phi = basis.eigenfunctions.col(i);
    Eigen::VectorXd lphi = lap.stiffness * phi;
    Eigen::VectorXd r = lphi - basis.eigenvalues[i] * lap.mass.cwiseProduct(phi);
    double scale = std::max(lphi.norm(), 1e-6 * l_norm * phi.norm());
    worst = std::max(worst, r.norm() / scale);
  }
  return worst;
}

SpectralBasis eigenbasis(const CotanLaplacian& laplacian, int k, const EigenOptions& options) {
  const int n = static_cast<int>(laplacian.mass.size());
  if (k < 1 || k > n) {
    throw DimensionError("eigenbasis: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(n) + "]");
  }
  const bool dense = options.method == EigenMethod::Dense ||
                     (options.method == EigenMethod::Auto && n <= options.dense_threshold);
  SpectralBasis basis = dense ? detail::dense_eigenbasis(laplacian, k)
                              : detail::lanczos_eigenbasis(laplacian, k, options);

  // The null mode comes out at +-1e-16; negative values would poison
  // fractional powers downstream.
  basis.eigenvalues = basis.eigenvalues.cwiseMax(0.0);
  fix_signs(basis.eigenfunctions);

  const double residual = max_relative_residual(laplacian, basis);
  if (!(residual <= std::max(options.tolerance, 1e-6))) {
    throw ConvergenceError("eigenbasis residual " + std::to_string(residual) +
                           " above target");
  }
  return basis;
}

SpectralBasis compute_basis(const TriangleMesh& mesh, int k, const EigenOptions& options) {
  return eigenbasis(cotan_laplacian(mesh), k, options);
}

Eigen::MatrixXd project(const SpectralBasis& basis, const Eigen::MatrixXd& features) {
  if (features.rows() != basis.num_vertices()) {
    throw DimensionError("project: feature rows " + std::to_string(features.rows()) +
                         " != basis vertices " + std::to_string(basis.num_vertices()));
  }
  return basis.eigenfunctions.transpose() * (basis.mass.asDiagonal() * features);
}

void save_basis(const SpectralBasis& basis, std::uint64_t mesh_hash,
                const std::filesystem::path& path) {
  Container c("spectral_basis");
  c.put_u64("mesh_hash", mesh_hash);
  c.put("k", std::vector<std::int64_t>{basis.size()});
  c.put("eigenfunctions", basis.eigenfunctions);
  c.put("eigenvalues", Eigen::MatrixXd(basis.eigenvalues));
  c.put("mass", Eigen::MatrixXd(basis.mass));
  c.save(path);
}

std::optional<SpectralBasis> load_basis(const std::filesystem::path& path,
                                        std::uint64_t mesh_hash, int k) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    Container c = Container::load(path);
    if (c.kind() != "spectral_basis" || c.u64("mesh_hash") != mesh_hash ||
        c.integers("k").at(0) != k) {
      return std::nullopt;
    }
    SpectralBasis b;
    b.eigenfunctions = c.matrix("eigenfunctions");
    b.eigenvalues = c.matrix("eigenvalues").col(0);
    b.mass = c.matrix("mass").col(0);
    return b;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace unimatch
