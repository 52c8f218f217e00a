#include "unimatch/errors.hpp"
#include "unimatch/eval.hpp"

namespace unimatch {

PointMap predict_map(TrainVariant variant, const ShapeData& x, const ShapeData& y,
                     const Networks& nets, const TrainingConfig& config) {
  switch (variant) {
    case TrainVariant::Full:
    case TrainVariant::Supervised:
      return infer_match(x, y, nets, config.tau, config.sinkhorn_iters);
    case TrainVariant::FeatureSimilarity: {
      PointMap pm;
      pm.targets = nearest_rows(extract_features(x, nets), extract_features(y, nets));
      pm.target_size = y.num_vertices();
      return pm;
    }
    case TrainVariant::ClassifierFree: {
      const Eigen::MatrixXd A_x = project(x.basis, extract_features(x, nets));
      const Eigen::MatrixXd A_y = project(y.basis, extract_features(y, nets));
      const auto mask = resolvent_mask(y.basis.eigenvalues, x.basis.eigenvalues, config.gamma);
      const FunctionalMap C_yx = solve_fmap(A_y, A_x, mask, config.fmap_lambda);
      // Phi_x C_yx ~ Pi_xy Phi_y
      return fmap_to_pointmap(C_yx.matrix(), y.basis, x.basis);
    }
  }
  throw ConfigError("unknown variant");
}

double evaluate_pairs(TrainVariant variant, const std::vector<ShapeData>& shapes,
                      const Networks& nets, const TrainingConfig& config,
                      std::vector<double>* pair_errors) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t a = 0; a < shapes.size(); ++a) {
    for (std::size_t b = 0; b < shapes.size(); ++b) {
      if (a == b) continue;
      const ShapeData& x = shapes[a];
      const ShapeData& y = shapes[b];
      if (x.labels.empty() || y.labels.empty()) {
        throw DimensionError("evaluation needs ground-truth labels on every shape");
      }
      const PointMap pred = predict_map(variant, x, y, nets, config);
      const auto err = geodesic_error(pred, GroundTruth{x.labels}, GroundTruth{y.labels}, y.mesh);
      if (pair_errors) pair_errors->push_back(err.mean);
      sum += err.mean;
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

AblationResult run_ablation(TrainVariant variant, const std::vector<ShapeData>& train_shapes,
                            const std::vector<ShapeData>& test, TrainingConfig config) {
  config.variant = variant;
  AblationResult result;
  result.variant = variant;
  TrainCallbacks callbacks;
  callbacks.on_log = [&](const LogEntry& e) { result.log.push_back(e); };
  TrainingState state = train(train_shapes, config, callbacks);
  result.final_loss = result.log.empty() ? 0.0 : result.log.back().total;
  result.mean_error = evaluate_pairs(variant, test, state.nets, config, &result.pair_errors);
  result.nets = std::move(state.nets);
  return result;
}

}  // namespace unimatch
