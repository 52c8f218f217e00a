#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <utility>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_support.hpp"
#include "unimatch/assignment.hpp"
#include "unimatch/errors.hpp"

using namespace unimatch;
using unimatch::testing::numeric_gradient;
using unimatch::testing::random_matrix;
using unimatch::testing::relative_error;

namespace {

HardAssignment random_injective(int n, int d, std::mt19937_64& rng) {
  std::vector<int> classes(d);
  std::iota(classes.begin(), classes.end(), 0);
  std::shuffle(classes.begin(), classes.end(), rng);
  classes.resize(n);
  return {classes, d};
}

// Permutation-based brute force over all injective maps (tiny sizes only).
double exhaustive_best(const Eigen::MatrixXd& P) {
  const int n = static_cast<int>(P.rows()), d = static_cast<int>(P.cols());
  std::vector<int> cls(d);
  std::iota(cls.begin(), cls.end(), 0);
  double best = -1.0;
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += P(i, cls[i]);
    best = std::max(best, s);
  } while (std::next_permutation(cls.begin(), cls.end()));
  return best;
}

}  // namespace

TEST(Sinkhorn, EqualLogitsGiveUniformRows) {
  const SoftAssignment s = sinkhorn(Eigen::MatrixXd::Constant(4, 7, 0.3));
  EXPECT_LT((s.prob.array() - 1.0 / 7).abs().maxCoeff(), 1e-12);
  EXPECT_EQ(s.tau, 0.2);
  EXPECT_EQ(s.iters, 10);
}

TEST(Sinkhorn, LargeMarginDominates) {
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(1, 5);
  logits(0, 2) = 10.0;
  EXPECT_GT(sinkhorn(logits).prob(0, 2), 0.999);
}

TEST(Sinkhorn, MatchesProbabilityDomainReference) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd L = random_matrix(6, trial % 2 ? 6 : 9, rng, 0.3);
    const SoftAssignment s = sinkhorn(L, 0.2, 10);
    EXPECT_LE((s.prob - unimatch::testing::sinkhorn_oracle(L, 0.2, 10)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((s.log_prob.array().exp().matrix() - s.prob).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Sinkhorn, RowsExactAndSquareConvergesToDoublyStochastic) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + trial;
    const SoftAssignment sq = sinkhorn(random_matrix(n, n, rng, 0.1), 0.2, 50);
    EXPECT_LE((sq.prob.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LE((sq.prob.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-6);
    const SoftAssignment wide = sinkhorn(random_matrix(n, n + 3, rng, 0.1), 0.2, 30);
    EXPECT_LE((wide.prob.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LE(wide.prob.colwise().sum().maxCoeff(), 1.01);
    EXPECT_GE(wide.prob.minCoeff(), 0.0);
  }
}

TEST(Sinkhorn, RowShiftInvariant) {
  std::mt19937_64 rng(3);
  Eigen::MatrixXd L = random_matrix(5, 8, rng);
  const SoftAssignment a = sinkhorn(L);
  L.row(2).array() += 3.7;
  L.row(4).array() -= 1.2;
  EXPECT_LE((sinkhorn(L).prob - a.prob).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Sinkhorn, RejectsBadArguments) {
  EXPECT_THROW(sinkhorn(Eigen::MatrixXd::Zero(5, 4)), DimensionError);
  EXPECT_THROW(sinkhorn(Eigen::MatrixXd::Zero(3, 4), 0.0), DimensionError);
  EXPECT_THROW(sinkhorn(Eigen::MatrixXd::Zero(3, 4), 0.2, 0), DimensionError);
}

TEST(Sinkhorn, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (const auto& [d, scale] : {std::pair{7, 0.1}, std::pair{7, 1.0}, std::pair{5, 0.1}, std::pair{5, 1.0}}) {
    const Eigen::MatrixXd L = random_matrix(5, d, rng, scale);
    const Eigen::MatrixXd W = random_matrix(5, d, rng);
    const SinkhornOp op(L, 0.2, 10);
    const auto f_prob = [&](const Eigen::MatrixXd& x) {
      return (W.array() * sinkhorn(x, 0.2, 10).prob.array()).sum();
    };
    const auto f_log = [&](const Eigen::MatrixXd& x) {
      return (W.array() * sinkhorn(x, 0.2, 10).log_prob.array()).sum();
    };
    EXPECT_LT(relative_error(op.backward(W), numeric_gradient(f_prob, L)), 1e-4);
    EXPECT_LT(relative_error(op.backward_log(W), numeric_gradient(f_log, L)), 1e-4);
  }
}

TEST(Harden, PermutationIsKept) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(3, 3);
  P(0, 2) = P(1, 0) = P(2, 1) = 1.0;
  const HardAssignment h = harden({P, P, 0.2, 10});
  EXPECT_EQ(h.universe_class, (std::vector<int>{2, 0, 1}));
  EXPECT_EQ(h.universe_size, 3);
}

TEST(Harden, ConfidentVertexWinsConflict) {
  Eigen::MatrixXd P(2, 3);
  P << 0.6, 0.3, 0.1,   //
      0.9, 0.02, 0.08;
  const HardAssignment h = harden({P, P.array().log(), 0.2, 10});
  EXPECT_EQ(h.universe_class, (std::vector<int>{1, 0}));
  EXPECT_TRUE(h.is_injective());
}

TEST(Harden, GreedyVersusOptimal) {
  std::mt19937_64 rng(5);
  int optimal_hits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const SoftAssignment s = sinkhorn(random_matrix(8, 10, rng, 0.3));
    const HardAssignment g = harden(s);
    ASSERT_TRUE(g.is_injective());
    // Per-row argmax with conflicting rows dropped.
    std::vector<int> owner(10, -1);
    double argmax_total = 0.0;
    std::vector<double> best(10, -1.0);
    for (int i = 0; i < 8; ++i) {
      Eigen::Index c;
      const double p = s.prob.row(i).maxCoeff(&c);
      if (owner[c] == -1) owner[c] = i;
      else owner[c] = -2;
      best[c] = p;
    }
    for (int c = 0; c < 10; ++c) if (owner[c] >= 0) argmax_total += best[c];
    const double greedy = assigned_probability(s.prob, g);
    EXPECT_GE(greedy, argmax_total - 1e-12);
    const double opt = assigned_probability(s.prob, harden_optimal(s.prob));
    EXPECT_LE(greedy, opt + 1e-12);
    optimal_hits += std::abs(greedy - opt) <= 1e-9;
  }
  std::printf("greedy hardening optimal in %d/100 trials\n", optimal_hits);
}

TEST(Harden, HungarianMatchesExhaustiveSearch) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd P = sinkhorn(random_matrix(4, 6, rng)).prob;
    const HardAssignment h = harden_optimal(P);
    EXPECT_TRUE(h.is_injective());
    EXPECT_NEAR(assigned_probability(P, h), exhaustive_best(P), 1e-12);
  }
}

TEST(Harden, PermutationEquivariant) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd L = random_matrix(12, 15, rng);
  std::vector<int> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd Lp(12, 15);
  for (int i = 0; i < 12; ++i) Lp.row(i) = L.row(perm[i]);
  const HardAssignment a = harden(sinkhorn(L)), b = harden(sinkhorn(Lp));
  for (int i = 0; i < 12; ++i) EXPECT_EQ(b.universe_class[i], a.universe_class[perm[i]]);
}

TEST(Compose, IdentityAndDisjoint) {
  const HardAssignment x{{3, 1, 0}, 6};
  const PointMap id = compose_pairwise(x, x);
  EXPECT_EQ(id.targets, (std::vector<int>{0, 1, 2}));
  const HardAssignment y{{2, 4, 5}, 6};
  const PointMap none = compose_pairwise(x, y);
  EXPECT_EQ(none.matched_count(), 0);
  EXPECT_EQ(none.target_size, 3);
  EXPECT_THROW(compose_pairwise(x, HardAssignment{{0}, 5}), DimensionError);
}

TEST(Compose, TripletConsistency) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const HardAssignment x = random_injective(20, 25, rng), y = random_injective(20, 25, rng),
                         z = random_injective(20, 25, rng);
    const PointMap xy = compose_pairwise(x, y), yz = compose_pairwise(y, z),
                   xz = compose_pairwise(x, z);
    EXPECT_TRUE(xy.is_partial_permutation());
    for (int i = 0; i < 20; ++i) {
      if (xy.targets[i] == PointMap::kNone) continue;
      EXPECT_EQ(yz.targets[xy.targets[i]], xz.targets[i]);
    }
  }
  // Y covering every class: the composition is exact everywhere.
  const HardAssignment x = random_injective(20, 25, rng), z = random_injective(20, 25, rng);
  const HardAssignment y = random_injective(25, 25, rng);
  const PointMap xy = compose_pairwise(x, y), yz = compose_pairwise(y, z), xz = compose_pairwise(x, z);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(yz.targets[xy.targets[i]], xz.targets[i]);
}

TEST(CycleCheck, UniverseMapsAreConsistent) {
  std::mt19937_64 rng(9);
  std::vector<HardAssignment> shapes;
  for (int n : {10, 12, 8, 12}) shapes.push_back(random_injective(n, 12, rng));
  const CycleReport r = check_cycle_consistency(compose_all(shapes));
  EXPECT_TRUE(r.consistent());
  EXPECT_EQ(r.triplets_checked, 4 * 3 * 2);
  EXPECT_EQ(check_cycle_consistency(compose_all({shapes[0]})).triplets_checked, 0);
  EXPECT_EQ(universe_size({10, 12, 8}), 12);
}

TEST(CycleCheck, TranspositionsAreReported) {
  MapCollection maps;
  maps.shape_ids = {"a", "b", "c"};
  const PointMap id{{0, 1, 2}, 3}, swap01{{1, 0, 2}, 3};
  maps.maps = {{id, id, id}, {id, id, swap01}, {id, id, id}};
  const CycleReport r = check_cycle_consistency(maps);
  EXPECT_FALSE(r.consistent());
  ASSERT_FALSE(r.violations.empty());
  const CycleViolation& v = r.violations.front();
  EXPECT_TRUE((v.x == 0 && v.y == 1 && v.z == 2) || v.y == 2 || v.x == 1 || v.z == 1);
  EXPECT_NE(v.via, v.direct);
}

TEST(AssignmentIo, RoundTrips) {
  const auto dir = unimatch::testing::temp_dir("assignment_io");
  const PointMap pm{{2, PointMap::kNone, 0}, 4};
  save_correspondence(pm, "x", "y", 5, dir / "c.txt");
  const PointMap back = load_correspondence(dir / "c.txt", 4);
  EXPECT_EQ(back.targets, pm.targets);
  const HardAssignment h{{4, 0, 2}, 5};
  save_assignment(h, "x", dir / "a.txt");
  const HardAssignment hb = load_assignment(dir / "a.txt");
  EXPECT_EQ(hb.universe_class, h.universe_class);
  EXPECT_EQ(hb.universe_size, 5);
}
