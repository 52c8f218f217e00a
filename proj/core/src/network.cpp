#include "unimatch/network.hpp"

#include <cmath>

#include "unimatch/errors.hpp"

namespace unimatch {

Mlp::Mlp(const std::vector<int>& widths, std::mt19937_64& rng) : widths_(widths) {
  if (widths.size() < 2) throw ConfigError("an MLP needs at least two widths");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] <= 0 || widths[l + 1] <= 0) throw ConfigError("MLP widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(widths[l], widths[l + 1]);
    layer.bias.resize(1, widths[l + 1]);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias.data()[i] = dist(rng);
    layers_.push_back(std::move(layer));
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  if (x.cols() != in_features()) {
    throw DimensionError("MLP expects " + std::to_string(in_features()) + " inputs, got " +
                         std::to_string(x.cols()));
  }
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = h * layers_[l].weight;
    z.rowwise() += layers_[l].bias.row(0);
    if (l + 1 < layers_.size()) {
      h = z.array() / (1.0 + (-z.array()).exp());
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Var Mlp::forward(Var x, const std::vector<Var>& params) const {
  if (x.value().cols() != in_features()) {
    throw DimensionError("MLP expects " + std::to_string(in_features()) + " inputs, got " +
                         std::to_string(x.value().cols()));
  }
  Var h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = ad::add_row(ad::matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < layers_.size()) h = ad::silu(h);
  }
  return h;
}

std::vector<Var> Mlp::bind(Tape& tape, bool trainable) const {
  std::vector<Var> out;
  for (const auto& layer : layers_) {
    out.push_back(tape.leaf(layer.weight, trainable));
    out.push_back(tape.leaf(layer.bias, trainable));
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_)
    count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return count;
}

std::vector<Eigen::MatrixXd*> Networks::parameters() {
  std::vector<Eigen::MatrixXd*> out;
  for (auto* mlp : {&feature.mlp, &classifier.mlp}) {
    for (auto& layer : mlp->layers()) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  }
  return out;
}

std::vector<const Eigen::MatrixXd*> Networks::parameters() const {
  std::vector<const Eigen::MatrixXd*> out;
  for (const auto* mlp : {&feature.mlp, &classifier.mlp}) {
    for (const auto& layer : mlp->layers()) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  }
  return out;
}

Networks make_networks(const std::vector<int>& feature_widths, int classifier_hidden,
                       int universe_size, std::uint64_t seed) {
  if (feature_widths.size() < 2) throw ConfigError("feature network needs at least two widths");
  if (classifier_hidden <= 0 || universe_size <= 0) {
    throw ConfigError("classifier widths must be positive");
  }
  std::mt19937_64 rng(seed);
  Networks nets;
  nets.feature.mlp = Mlp(feature_widths, rng);
  nets.classifier.mlp = Mlp({feature_widths.back(), classifier_hidden, universe_size}, rng);
  return nets;
}

}  // namespace unimatch
