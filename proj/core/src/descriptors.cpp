#include "unimatch/descriptors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "unimatch/container.hpp"
#include "unimatch/errors.hpp"

namespace unimatch {

std::string to_string(DescriptorKind kind) {
  switch (kind) {
    case DescriptorKind::Shot: return "shot";
    case DescriptorKind::Hks: return "hks";
    case DescriptorKind::Wks: return "wks";
    case DescriptorKind::Learned: return "learned";
  }
  return "unknown";
}

FeatureField hks(const SpectralBasis& basis, std::span<const double> times) {
  if (times.empty()) throw DimensionError("hks: no diffusion times");
  for (double t : times) {
    if (!(t > 0.0)) throw DimensionError("hks: diffusion times must be positive");
  }
  const Eigen::MatrixXd phi2 = basis.eigenfunctions.array().square();
  Eigen::MatrixXd weights(basis.size(), static_cast<Eigen::Index>(times.size()));
  for (std::size_t j = 0; j < times.size(); ++j) {
    weights.col(static_cast<Eigen::Index>(j)) = (-basis.eigenvalues.array() * times[j]).exp();
  }
  FeatureField out;
  out.kind = DescriptorKind::Hks;
  out.values = phi2 * weights;
  out.params = {{"count", static_cast<double>(times.size())}};
  return out;
}

std::vector<double> default_hks_times(const SpectralBasis& basis, int count) {
  const int k = basis.size();
  if (k < 2 || !(basis.eigenvalues[1] > 0.0) || count < 1) {
    throw DimensionError("default_hks_times: need at least one nonzero eigenvalue");
  }
  const double c = 4.0 * std::log(10.0);
  const double t_min = c / basis.eigenvalues[k - 1];
  const double t_max = c / basis.eigenvalues[1];
  std::vector<double> times(count);
  for (int i = 0; i < count; ++i) {
    double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    times[i] = std::exp(std::log(t_min) + f * (std::log(t_max) - std::log(t_min)));
  }
  return times;
}

FeatureField wks(const SpectralBasis& basis, std::span<const double> energies, double sigma) {
  if (energies.empty()) throw DimensionError("wks: no energies");
  if (!(sigma > 0.0)) throw DimensionError("wks: sigma must be positive");
  const int k = basis.size();
  Eigen::VectorXd log_ev(k);
  for (int i = 0; i < k; ++i) log_ev[i] = std::log(std::max(basis.eigenvalues[i], 1e-12));

  const Eigen::MatrixXd phi2 = basis.eigenfunctions.array().square();
  Eigen::MatrixXd weights(k, static_cast<Eigen::Index>(energies.size()));
  for (std::size_t j = 0; j < energies.size(); ++j) {
    Eigen::ArrayXd a = -(energies[j] - log_ev.array()).square() / (2.0 * sigma * sigma);
    // Normalized in the log domain so far-away bands do not underflow to 0/0.
    Eigen::ArrayXd w = (a - a.maxCoeff()).exp();
    weights.col(static_cast<Eigen::Index>(j)) = w / w.sum();
  }
  FeatureField out;
  out.kind = DescriptorKind::Wks;
  out.values = phi2 * weights;
  out.params = {{"count", static_cast<double>(energies.size())}, {"sigma", sigma}};
  return out;
}

std::pair<std::vector<double>, double> default_wks_energies(const SpectralBasis& basis,
                                                            int count) {
  const int k = basis.size();
  if (k < 2 || !(basis.eigenvalues[1] > 0.0) || count < 1) {
    throw DimensionError("default_wks_energies: need at least one nonzero eigenvalue");
  }
  const double lo = std::log(basis.eigenvalues[1]);
  const double hi = std::log(basis.eigenvalues[k - 1]);
  std::vector<double> e(count);
  for (int i = 0; i < count; ++i) {
    e[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  }
  double sigma = std::max(7.0 * (hi - lo) / count, 1e-6);
  return {e, sigma};
}

namespace {

std::string params_key(const std::map<std::string, double>& params) {
  std::ostringstream s;
  s.precision(17);
  for (const auto& [k, v] : params) s << k << '=' << v << ';';
  return s.str();
}

}  // namespace

void save_features(const FeatureField& field, std::uint64_t mesh_hash,
                   const std::filesystem::path& path) {
  Container c("features");
  c.put_u64("mesh_hash", mesh_hash);
  c.put("kind", to_string(field.kind));
  c.put("params", params_key(field.params));
  c.put("values", field.values);
  std::vector<std::int64_t> degenerate(field.degenerate_rows.begin(), field.degenerate_rows.end());
  c.put("degenerate_rows", degenerate);
  c.save(path);
}

std::optional<FeatureField> load_features(const std::filesystem::path& path,
                                          std::uint64_t mesh_hash, DescriptorKind kind,
                                          const std::map<std::string, double>& params) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    Container c = Container::load(path);
    if (c.kind() != "features" || c.u64("mesh_hash") != mesh_hash ||
        c.text("kind") != to_string(kind) || c.text("params") != params_key(params)) {
      return std::nullopt;
    }
    FeatureField f;
    f.kind = kind;
    f.params = params;
    f.values = c.matrix("values");
    for (auto r : c.integers("degenerate_rows")) f.degenerate_rows.push_back(static_cast<int>(r));
    return f;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace unimatch
