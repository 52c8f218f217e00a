#include "unimatch/model.hpp"

#include <cmath>
#include <memory>

#include "unimatch/errors.hpp"

namespace unimatch {

Eigen::MatrixXd network_input(const FeatureField& shot_field, const SpectralBasis& basis) {
  if (shot_field.dims() != kShotDims) throw DimensionError("network_input: expected SHOT features");
  if (basis.size() < kSpectralInputs) {
    throw DimensionError("network_input: need at least " + std::to_string(kSpectralInputs) +
                         " eigenfunctions, basis has " + std::to_string(basis.size()));
  }
  if (shot_field.rows() != basis.num_vertices()) {
    throw DimensionError("network_input: SHOT and basis vertex counts differ");
  }
  Eigen::MatrixXd input(shot_field.rows(), kNetworkInputs);
  input.leftCols(kShotDims) = shot_field.values;
  input.rightCols(kSpectralInputs) =
      basis.eigenfunctions.leftCols(kSpectralInputs) * std::sqrt(basis.total_mass());
  return input;
}

ShapeData prepare_shape(std::string id, TriangleMesh mesh, int k, const ShotParams& shot_params,
                        const EigenOptions& eigen) {
  SpectralBasis basis = compute_basis(mesh, k, eigen);
  const FeatureField field = shot(mesh, shot_params);
  return make_shape_data(std::move(id), std::move(mesh), std::move(basis), field);
}

ShapeData make_shape_data(std::string id, TriangleMesh mesh, SpectralBasis basis,
                          const FeatureField& shot_field) {
  ShapeData s;
  s.id = std::move(id);
  s.input = network_input(shot_field, basis);
  s.mesh = std::move(mesh);
  s.basis = std::move(basis);
  return s;
}

namespace {

// Projection Phi^T diag(M) as a dense k x n matrix.
Eigen::MatrixXd projector(const SpectralBasis& basis) {
  return (basis.eigenfunctions.array().colwise() * basis.mass.array()).matrix().transpose();
}

Var fmap_solve(Var A_x, Var A_y, const ResolventMask& mask, double lambda) {
  auto solver = std::make_shared<RegularizedFmapSolver>(A_x.value(), A_y.value(), mask, lambda);
  Eigen::MatrixXd C = solver->solution();
  return A_x.tape->push(std::move(C), {A_x, A_y},
                        [A_x, A_y, solver](Tape& t, const Eigen::MatrixXd& g) {
                          const auto adj = solver->backward(g);
                          t.accumulate(A_x, adj.grad_Ax);
                          t.accumulate(A_y, adj.grad_Ay);
                        });
}

// log of the Sinkhorn output.
Var log_sinkhorn(Var logits, double tau, int iters) {
  auto op = std::make_shared<SinkhornOp>(logits.value(), tau, iters);
  Eigen::MatrixXd out = op->result().log_prob;
  return logits.tape->push(std::move(out), {logits}, [logits, op](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(logits, op->backward_log(g));
  });
}

Var log_softmax_rows(Var z) {
  Eigen::MatrixXd out(z.value().rows(), z.value().cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double m = z.value().row(i).maxCoeff();
    const double lse = m + std::log((z.value().row(i).array() - m).exp().sum());
    out.row(i) = z.value().row(i).array() - lse;
  }
  Tape& tape = *z.tape;
  const int id = static_cast<int>(tape.size());
  return tape.push(std::move(out), {z}, [z, id](Tape& t, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd soft = t.value(Var{&t, id}).array().exp();
    t.accumulate(z, g - (soft.array().colwise() * g.rowwise().sum().array()).matrix());
  });
}

// D(i, j) = |a_i - b_j|^2
Var pairwise_sqdist(Var a, Var b) {
  const Eigen::MatrixXd& A = a.value();
  const Eigen::MatrixXd& B = b.value();
  Eigen::MatrixXd D = -2.0 * A * B.transpose();
  D.colwise() += A.rowwise().squaredNorm();
  D.rowwise() += B.rowwise().squaredNorm().transpose();
  D = D.cwiseMax(0.0);
  return a.tape->push(std::move(D), {a, b}, [a, b](Tape& t, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd& A = t.value(a);
    const Eigen::MatrixXd& B = t.value(b);
    if (t.requires_grad(a)) {
      t.accumulate(a, 2.0 * ((A.array().colwise() * g.rowwise().sum().array()).matrix() -
                             g * B));
    }
    if (t.requires_grad(b)) {
      t.accumulate(b, 2.0 * ((B.array().colwise() * g.colwise().sum().transpose().array())
                                 .matrix() -
                             g.transpose() * A));
    }
  });
}

Eigen::MatrixXd scalar_matrix(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

// Scalar node with gradients computed eagerly by the loss functions.
Var scalar_node(double value, const std::vector<Var>& parents,
                std::vector<Eigen::MatrixXd> grads) {
  return parents.front().tape->push(
      scalar_matrix(value), parents,
      [parents, grads = std::move(grads)](Tape& t, const Eigen::MatrixXd& g) {
        for (std::size_t i = 0; i < parents.size(); ++i) {
          if (grads[i].size() > 0) t.accumulate(parents[i], g(0, 0) * grads[i]);
        }
      });
}

Var classifier_term(const Eigen::MatrixXd& Phi_x, const Eigen::MatrixXd& Phi_y, Var C_yx, Var P_x,
                    Var P_y) {
  Eigen::MatrixXd gC, gPx, gPy;
  const bool need = C_yx.requires_grad() || P_x.requires_grad() || P_y.requires_grad();
  const double value = loss_classifier(Phi_x, Phi_y, C_yx.value(), P_x.value(), P_y.value(),
                                       need ? &gC : nullptr, need ? &gPx : nullptr,
                                       need ? &gPy : nullptr);
  return scalar_node(value, {C_yx, P_x, P_y}, {gC, gPx, gPy});
}

struct TapedPair {
  Tape tape;
  std::vector<Var> params;
  PairOutputs outputs;
  Var total;
};

void run_pair(TapedPair& run, const ShapeData& x, const ShapeData& y, const Networks& nets,
              const TrainingConfig& config, int iteration, bool with_grad) {
  Tape& tape = run.tape;
  const bool use_classifier =
      config.variant == TrainVariant::Full || config.variant == TrainVariant::Supervised;
  const auto feature_params = nets.feature.mlp.bind(tape, with_grad);
  const auto classifier_params =
      use_classifier ? nets.classifier.mlp.bind(tape, with_grad) : std::vector<Var>{};
  run.params = feature_params;
  run.params.insert(run.params.end(), classifier_params.begin(), classifier_params.end());

  const Var F_x = nets.feature.mlp.forward(tape.constant(x.input), feature_params);
  const Var F_y = nets.feature.mlp.forward(tape.constant(y.input), feature_params);
  const Var A_x = ad::matmul(tape.constant(projector(x.basis)), F_x);
  const Var A_y = ad::matmul(tape.constant(projector(y.basis)), F_y);

  const auto& ev_x = x.basis.eigenvalues;
  const auto& ev_y = y.basis.eigenvalues;
  const Var C_xy = fmap_solve(A_x, A_y, resolvent_mask(ev_x, ev_y, config.gamma), config.fmap_lambda);
  const Var C_yx = fmap_solve(A_y, A_x, resolvent_mask(ev_y, ev_x, config.gamma), config.fmap_lambda);

  PairOutputs& out = run.outputs;
  out.C_xy = C_xy.value();
  out.C_yx = C_yx.value();
  const LossWeights& w = config.weights;
  std::vector<Var> terms;
  std::vector<double> weights;

  if (config.mode == MatchingMode::Complete) {
    Eigen::MatrixXd g1, g2;
    out.parts.bij = loss_bijectivity(out.C_xy, out.C_yx, &g1, &g2);
    terms.push_back(scalar_node(out.parts.bij, {C_xy, C_yx}, {g1, g2}));
    weights.push_back(w.w_bij);
    out.parts.orth = loss_orthogonality(out.C_xy, out.C_yx, &g1, &g2);
    terms.push_back(scalar_node(out.parts.orth, {C_xy, C_yx}, {g1, g2}));
    weights.push_back(w.w_orth);
    out.parts.lap = loss_laplacian(out.C_xy, out.C_yx, ev_x, ev_y, &g1, &g2);
    terms.push_back(scalar_node(out.parts.lap, {C_xy, C_yx}, {g1, g2}));
    weights.push_back(w.w_lap);
  } else {
    out.rank = partial_rank(ev_x, ev_y);
    Eigen::MatrixXd g1, g2;
    const auto bij = loss_partial_structural(out.C_xy, out.C_yx, out.rank, 1.0, 0.0, &g1, &g2);
    out.parts.bij = bij.bij;
    terms.push_back(scalar_node(bij.bij, {C_xy, C_yx}, {g1, g2}));
    weights.push_back(w.w_bij);
    const auto orth = loss_partial_structural(out.C_xy, out.C_yx, out.rank, 0.0, 1.0, &g1, &g2);
    out.parts.orth = orth.orth;
    terms.push_back(scalar_node(orth.orth, {C_xy, C_yx}, {g1, g2}));
    weights.push_back(w.w_orth);
  }

  const Eigen::MatrixXd& Phi_x = x.basis.eigenfunctions;
  const Eigen::MatrixXd& Phi_y = y.basis.eigenfunctions;
  const bool detached = iteration < config.detach_iters;
  Var cls{};
  switch (config.variant) {
    case TrainVariant::Full:
    case TrainVariant::Supervised: {
      const Var logP_x = log_sinkhorn(nets.classifier.mlp.forward(F_x, classifier_params),
                                      config.tau, config.sinkhorn_iters);
      const Var logP_y = log_sinkhorn(nets.classifier.mlp.forward(F_y, classifier_params),
                                      config.tau, config.sinkhorn_iters);
      if (config.variant == TrainVariant::Supervised) {
        if (x.labels.empty() || y.labels.empty()) {
          throw DimensionError("supervised training needs per-vertex labels");
        }
        Eigen::MatrixXd g1, g2;
        const double v = smoothed_cross_entropy(logP_x.value(), x.labels, 0.0, &g1) +
                         smoothed_cross_entropy(logP_y.value(), y.labels, 0.0, &g2);
        cls = scalar_node(v, {logP_x, logP_y}, {g1, g2});
      } else if (config.mode == MatchingMode::Partial) {
        const PointMap pseudo = fmap_to_pointmap(out.C_xy, x.basis, y.basis);
        Eigen::MatrixXd g1, g2;
        const double v = loss_classifier_partial(logP_x.value(), logP_y.value(), pseudo.targets,
                                                 w.smoothing, &g1, &g2);
        cls = scalar_node(v, {logP_x, logP_y}, {g1, g2});
      } else {
        const Var P_x = ad::exp(logP_x);
        const Var P_y = ad::exp(logP_y);
        const Var Cyx = detached ? ad::detach(C_yx) : C_yx;
        const Var Cxy = detached ? ad::detach(C_xy) : C_xy;
        const Var a = classifier_term(Phi_x, Phi_y, Cyx, P_x, P_y);
        const Var b = classifier_term(Phi_y, Phi_x, Cxy, P_y, P_x);
        cls = ad::weighted_sum({a, b}, {0.5, 0.5});
      }
      out.P_x = logP_x.value().array().max(-700.0).exp();
      out.P_y = logP_y.value().array().max(-700.0).exp();
      break;
    }
    case TrainVariant::FeatureSimilarity: {
      const Var D = pairwise_sqdist(F_x, F_y);
      const double bandwidth = std::max(D.value().mean(), 1e-12);
      const Var Pi_xy = ad::exp(log_softmax_rows(ad::scale(D, -1.0 / bandwidth)));
      const Var Pi_yx = ad::exp(log_softmax_rows(ad::scale(ad::transpose(D), -1.0 / bandwidth)));
      const Var Cyx = detached ? ad::detach(C_yx) : C_yx;
      const Var Cxy = detached ? ad::detach(C_xy) : C_xy;
      const Var Rx = ad::sub(ad::matmul(tape.constant(Phi_x), Cyx),
                             ad::matmul(Pi_xy, tape.constant(Phi_y)));
      const Var Ry = ad::sub(ad::matmul(tape.constant(Phi_y), Cxy),
                             ad::matmul(Pi_yx, tape.constant(Phi_x)));
      cls = ad::weighted_sum({ad::squared_norm(Rx), ad::squared_norm(Ry)}, {0.5, 0.5});
      out.P_x = Pi_xy.value();
      out.P_y = Pi_yx.value();
      break;
    }
    case TrainVariant::ClassifierFree:
      break;
  }
  if (cls.tape) {
    out.parts.cls = cls.scalar();
    terms.push_back(cls);
    weights.push_back(w.lambda_cls);
  }
  run.total = ad::weighted_sum(terms, weights);
  out.total = loss_total(out.parts, w, config.mode);
}

}  // namespace

PairOutputs forward_pair(const ShapeData& x, const ShapeData& y, const Networks& nets,
                         const TrainingConfig& config, int iteration) {
  TapedPair run;
  run_pair(run, x, y, nets, config, iteration, false);
  return std::move(run.outputs);
}

PairGradients backward_pair(const ShapeData& x, const ShapeData& y, const Networks& nets,
                            const TrainingConfig& config, int iteration) {
  TapedPair run;
  run_pair(run, x, y, nets, config, iteration, true);
  run.tape.backward(run.total);

  PairGradients result;
  const auto params = nets.parameters();
  result.grads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::MatrixXd g = i < run.params.size() ? run.tape.grad(run.params[i])
                                              : Eigen::MatrixXd::Zero(params[i]->rows(),
                                                                      params[i]->cols());
    if (!g.allFinite()) {
      throw NonFiniteGradientError("non-finite gradient in parameter tensor " + std::to_string(i));
    }
    result.grads.push_back(std::move(g));
  }
  result.outputs = std::move(run.outputs);
  return result;
}

Eigen::MatrixXd extract_features(const ShapeData& shape, const Networks& nets) {
  return nets.feature.mlp.forward(shape.input);
}

SoftAssignment infer_soft_assignment(const ShapeData& shape, const Networks& nets, double tau,
                                     int iters) {
  const Eigen::MatrixXd logits = nets.classifier.mlp.forward(extract_features(shape, nets));
  return sinkhorn(logits, tau, iters);
}

HardAssignment infer_assignment(const ShapeData& shape, const Networks& nets, double tau,
                                int iters) {
  return harden(infer_soft_assignment(shape, nets, tau, iters));
}

PointMap infer_match(const ShapeData& x, const ShapeData& y, const Networks& nets, double tau,
                     int iters) {
  return compose_pairwise(infer_assignment(x, nets, tau, iters),
                          infer_assignment(y, nets, tau, iters));
}

}  // namespace unimatch
