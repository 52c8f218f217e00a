#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "unimatch/autodiff.hpp"

namespace unimatch {

/// y = x W + b, applied row-wise.
struct DenseLayer {
  Eigen::MatrixXd weight;  ///< in x out
  Eigen::MatrixXd bias;    ///< 1 x out

  int in_features() const { return static_cast<int>(weight.rows()); }
  int out_features() const { return static_cast<int>(weight.cols()); }
};

/// Per-vertex perceptron with SiLU between layers (none after the last).
class Mlp {
 public:
  Mlp() = default;
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization of weights and
  /// biases.
  Mlp(const std::vector<int>& widths, std::mt19937_64& rng);

  const std::vector<int>& widths() const { return widths_; }
  int in_features() const { return widths_.empty() ? 0 : widths_.front(); }
  int out_features() const { return widths_.empty() ? 0 : widths_.back(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Plain evaluation without taping.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  /// Taped evaluation; `params` must hold the (weight, bias) leaves created
  /// by bind() in layer order.
  Var forward(Var x, const std::vector<Var>& params) const;
  /// Puts every parameter on the tape as a leaf.
  std::vector<Var> bind(Tape& tape, bool trainable) const;

  std::size_t parameter_count() const;

 private:
  std::vector<int> widths_;
  std::vector<DenseLayer> layers_;
};

/// Siamese feature extractor: per-vertex inputs -> learned descriptors.
struct FeatureNetwork {
  Mlp mlp;
};

/// Per-vertex head producing d universe logits.
struct UniverseClassifier {
  Mlp mlp;
  int universe_size() const { return mlp.out_features(); }
};

struct Networks {
  FeatureNetwork feature;
  UniverseClassifier classifier;

  /// Flat parameter list: feature layers then classifier layers, each as
  /// weight followed by bias.
  std::vector<Eigen::MatrixXd*> parameters();
  std::vector<const Eigen::MatrixXd*> parameters() const;
};

/// widths: feature widths (input first); classifier maps the last feature
/// width through `classifier_hidden` to `universe_size` logits.
Networks make_networks(const std::vector<int>& feature_widths, int classifier_hidden,
                       int universe_size, std::uint64_t seed);

}  // namespace unimatch
