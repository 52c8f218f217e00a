#include <algorithm>
#include <cmath>
#include <cstdio>

#include "unimatch/errors.hpp"
#include "unimatch/model.hpp"

namespace unimatch {

std::string to_string(TrainVariant variant) {
  switch (variant) {
    case TrainVariant::Full: return "full";
    case TrainVariant::FeatureSimilarity: return "feature_similarity";
    case TrainVariant::ClassifierFree: return "classifier_free";
    case TrainVariant::Supervised: return "supervised";
  }
  return "full";
}

TrainVariant parse_train_variant(const std::string& text) {
  for (auto v : {TrainVariant::Full, TrainVariant::FeatureSimilarity, TrainVariant::ClassifierFree,
                 TrainVariant::Supervised}) {
    if (to_string(v) == text) return v;
  }
  throw ConfigError("unknown variant '" + text + "'");
}

TrainingConfig TrainingConfig::defaults(MatchingMode mode) {
  TrainingConfig c;
  c.mode = mode;
  c.weights = LossWeights::defaults(mode);
  c.fmap_lambda = mode == MatchingMode::Complete ? 0.0 : 100.0;
  return c;
}

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (total_iters < 0) throw ConfigError("total_iters must be nonnegative");
  if (detach_iters < 0 || detach_iters > total_iters) {
    throw ConfigError("detach_iters must lie in [0, total_iters]");
  }
  if (batch_pairs < 1) throw ConfigError("batch_pairs must be at least 1");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (sinkhorn_iters < 1) throw ConfigError("sinkhorn_iters must be at least 1");
  if (!(fmap_lambda >= 0.0)) throw ConfigError("fmap_lambda must be nonnegative");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (feature_widths.size() < 2 || feature_widths.front() != kNetworkInputs) {
    throw ConfigError("feature_widths must start with the input width " +
                      std::to_string(kNetworkInputs));
  }
  if (classifier_hidden <= 0) throw ConfigError("classifier_hidden must be positive");
  if (universe_size < 0) throw ConfigError("universe_size must be nonnegative");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be nonnegative");
  weights.validate();
}

void AdamState::update(const std::vector<Eigen::MatrixXd*>& params,
                       const std::vector<Eigen::MatrixXd>& grads, double learning_rate) {
  if (m.empty()) {
    for (const auto* p : params) {
      m.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i].cwiseAbs2();
    params[i]->array() -=
        learning_rate * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + eps);
  }
}

std::string format_log(const LogEntry& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "iter=%d x=%d y=%d bij=%.9g orth=%.9g lap=%.9g cls=%.9g total=%.9g", e.iteration,
                e.x, e.y, e.parts.bij, e.parts.orth, e.parts.lap, e.parts.cls, e.total);
  return buf;
}

std::vector<std::pair<int, int>> training_pairs(int shape_count, MatchingMode mode) {
  std::vector<std::pair<int, int>> pairs;
  if (mode == MatchingMode::Partial) {
    for (int j = 1; j < shape_count; ++j) pairs.emplace_back(0, j);
  } else {
    for (int i = 0; i < shape_count; ++i)
      for (int j = i + 1; j < shape_count; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

int resolve_universe_size(const std::vector<ShapeData>& shapes, const TrainingConfig& config) {
  if (config.universe_size > 0) return config.universe_size;
  if (shapes.empty()) throw DimensionError("empty shape collection");
  if (config.mode == MatchingMode::Partial) return shapes.front().num_vertices();
  std::vector<int> counts;
  for (const auto& s : shapes) counts.push_back(s.num_vertices());
  return universe_size(counts);
}

TrainingState init_training(const std::vector<ShapeData>& shapes, const TrainingConfig& config) {
  config.validate();
  if (shapes.size() < 2) throw DimensionError("training needs at least two shapes");
  const int d = resolve_universe_size(shapes, config);
  for (const auto& s : shapes) {
    if (s.num_vertices() > d) {
      throw DimensionError("shape '" + s.id + "' has more vertices (" +
                           std::to_string(s.num_vertices()) + ") than the universe (" +
                           std::to_string(d) + ")");
    }
  }
  TrainingState state;
  state.nets = make_networks(config.feature_widths, config.classifier_hidden, d, config.seed);
  state.rng.seed(config.seed ^ 0x9e3779b97f4a7c15ULL);
  return state;
}

namespace {

std::pair<int, int> next_pair(TrainingState& state, const std::vector<std::pair<int, int>>& pairs) {
  if (state.cursor >= static_cast<int>(state.order.size())) {
    state.order.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) state.order[i] = static_cast<int>(i);
    std::shuffle(state.order.begin(), state.order.end(), state.rng);
    state.cursor = 0;
  }
  return pairs[static_cast<std::size_t>(state.order[static_cast<std::size_t>(state.cursor++)])];
}

}  // namespace

void train_steps(TrainingState& state, const std::vector<ShapeData>& shapes,
                 const TrainingConfig& config, int until_iteration,
                 const TrainCallbacks& callbacks) {
  config.validate();
  const auto pairs = training_pairs(static_cast<int>(shapes.size()), config.mode);
  if (pairs.empty()) throw DimensionError("no training pairs");
  while (state.iteration < until_iteration) {
    std::vector<Eigen::MatrixXd> grads;
    LogEntry entry;
    entry.iteration = state.iteration;
    for (int b = 0; b < config.batch_pairs; ++b) {
      const auto [i, j] = next_pair(state, pairs);
      auto result = backward_pair(shapes[static_cast<std::size_t>(i)],
                                  shapes[static_cast<std::size_t>(j)], state.nets, config,
                                  state.iteration);
      if (grads.empty()) {
        grads = std::move(result.grads);
      } else {
        for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += result.grads[p];
      }
      entry.x = i;
      entry.y = j;
      const double s = 1.0 / config.batch_pairs;
      entry.parts.bij += s * result.outputs.parts.bij;
      entry.parts.orth += s * result.outputs.parts.orth;
      entry.parts.lap += s * result.outputs.parts.lap;
      entry.parts.cls += s * result.outputs.parts.cls;
      entry.total += s * result.outputs.total;
    }
    if (config.batch_pairs > 1) {
      for (auto& g : grads) g /= static_cast<double>(config.batch_pairs);
    }
    state.adam.update(state.nets.parameters(), grads, config.learning_rate);
    ++state.iteration;
    if (callbacks.on_log) callbacks.on_log(entry);
    if (callbacks.on_checkpoint &&
        ((config.checkpoint_every > 0 && state.iteration % config.checkpoint_every == 0) ||
         state.iteration == until_iteration)) {
      callbacks.on_checkpoint(state);
    }
  }
}

TrainingState train(const std::vector<ShapeData>& shapes, const TrainingConfig& config,
                    const TrainCallbacks& callbacks) {
  TrainingState state = init_training(shapes, config);
  train_steps(state, shapes, config, config.total_iters, callbacks);
  return state;
}

Networks fine_tune(const ShapeData& x, const ShapeData& y, const Networks& nets,
                   const TrainingConfig& config, int passes) {
  if (passes < 0) throw ConfigError("fine-tuning passes must be nonnegative");
  Networks adapted = nets;
  AdamState adam;
  for (int p = 0; p < passes; ++p) {
    const auto result = backward_pair(x, y, adapted, config, config.detach_iters);
    adam.update(adapted.parameters(), result.grads, config.learning_rate);
  }
  return adapted;
}

}  // namespace unimatch
