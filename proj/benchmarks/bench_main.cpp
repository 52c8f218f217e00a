#include <random>

#include <benchmark/benchmark.h>

#include "unimatch/assignment.hpp"
#include "unimatch/descriptors.hpp"
#include "unimatch/eval.hpp"
#include "unimatch/fmap.hpp"
#include "unimatch/model.hpp"
#include "unimatch/spectral.hpp"

using namespace unimatch;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

const TriangleMesh& bench_mesh(int subdivisions) {
  static TriangleMesh meshes[4] = {
      make_base_mesh(SyntheticBase::BumpySphere, 0), make_base_mesh(SyntheticBase::BumpySphere, 1),
      make_base_mesh(SyntheticBase::BumpySphere, 2), make_base_mesh(SyntheticBase::BumpySphere, 3)};
  return meshes[subdivisions];
}

}  // namespace

static void BM_SolveFmap(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const double lambda = static_cast<double>(state.range(1));
  const Eigen::MatrixXd Ax = gaussian(k, 128, 1), Ay = gaussian(k, 128, 2);
  Eigen::VectorXd ev = Eigen::VectorXd::LinSpaced(k, 0.0, 60.0);
  const ResolventMask mask = resolvent_mask(ev, ev);
  for (auto _ : state) benchmark::DoNotOptimize(solve_fmap(Ax, Ay, mask, lambda));
}
BENCHMARK(BM_SolveFmap)->Args({30, 0})->Args({30, 100})->Args({60, 100});

static void BM_Sinkhorn(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd logits = gaussian(n, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn(logits, 0.2, 10));
}
BENCHMARK(BM_Sinkhorn)->Arg(162)->Arg(642);

static void BM_Eigenbasis(benchmark::State& state) {
  const TriangleMesh& mesh = bench_mesh(static_cast<int>(state.range(0)));
  const CotanLaplacian L = cotan_laplacian(mesh);
  for (auto _ : state) benchmark::DoNotOptimize(eigenbasis(L, 30));
  state.counters["vertices"] = mesh.num_vertices();
}
BENCHMARK(BM_Eigenbasis)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_Shot(benchmark::State& state) {
  const TriangleMesh& mesh = bench_mesh(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(shot(mesh));
}
BENCHMARK(BM_Shot)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_ForwardBackwardPair(benchmark::State& state) {
  const SyntheticCollection col = make_synthetic_collection(SyntheticBase::BumpySphere, 2, 4);
  const ShapeData x = prepare_shape("x", col.meshes[0], 30);
  const ShapeData y = prepare_shape("y", col.meshes[1], 30);
  TrainingConfig cfg;
  const Networks nets = make_networks(cfg.feature_widths, cfg.classifier_hidden,
                                      x.num_vertices(), cfg.seed);
  for (auto _ : state) {
    if (state.range(0) == 0) benchmark::DoNotOptimize(forward_pair(x, y, nets, cfg, cfg.detach_iters));
    else benchmark::DoNotOptimize(backward_pair(x, y, nets, cfg, cfg.detach_iters));
  }
}
BENCHMARK(BM_ForwardBackwardPair)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
