#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "test_support.hpp"
#include "unimatch/assignment.hpp"
#include "unimatch/eval.hpp"

namespace fs = std::filesystem;
using namespace unimatch;
using unimatch::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Small, fast settings shared by every command.
std::vector<std::string> tiny(const fs::path& out) {
  return {"out=" + out.string(),       "k=16",
          "synth_subdivisions=1",      "synth_count=3",
          "feature_widths=368,32,24",  "classifier_hidden=16",
          "iters=6",                   "detach_iters=2",
          "checkpoint_every=2",        "seed=5"};
}

std::vector<std::string> cmd(const std::string& name, const fs::path& out,
                             std::vector<std::string> extra = {}) {
  std::vector<std::string> args{name};
  for (auto& a : tiny(out)) args.push_back(a);
  for (auto& a : extra) args.push_back(a);
  return args;
}

}  // namespace

TEST(Cli, ConfigErrorsExitWithTwo) {
  const fs::path dir = unimatch::testing::temp_dir("cli_config");
  EXPECT_EQ(invoke(cmd("preprocess", dir, {"bogus_key=1"})).code, 2);
  EXPECT_EQ(invoke(cmd("train", dir, {"mode=sideways"})).code, 2);
  EXPECT_EQ(invoke(cmd("train", dir, {"lr=fast"})).code, 2);
  EXPECT_EQ(invoke({"train", "--config", (dir / "missing.cfg").string()}).code, 2);
  EXPECT_EQ(invoke({"nonsense"}).code, 2);
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "# comment\nk = 12\nnot_a_key = 3\n";
  }
  const Result r = invoke({"preprocess", "--config", (dir / "bad.cfg").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.cfg:3"), std::string::npos);
}

TEST(Cli, EmptyCollectionIsADataError) {
  const fs::path dir = unimatch::testing::temp_dir("cli_empty");
  EXPECT_EQ(invoke(cmd("preprocess", dir)).code, 3);
}

TEST(Cli, PreprocessCachesAndRebuildsOnKChange) {
  const fs::path dir = unimatch::testing::temp_dir("cli_pre");
  ASSERT_EQ(invoke(cmd("synth", dir)).code, 0);
  EXPECT_EQ(unimatch::cli::list_meshes(dir / "data").size(), 3u);
  const Result first = invoke(cmd("preprocess", dir));
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_EQ(first.out.find("cached"), std::string::npos);
  const Result second = invoke(cmd("preprocess", dir));
  EXPECT_EQ(second.out.find("computed"), std::string::npos);
  EXPECT_NE(second.out.find("cached shape_00"), std::string::npos);
  const Result rebuilt = invoke(cmd("preprocess", dir, {"k=18"}));
  EXPECT_EQ(rebuilt.out.find("cached"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "preprocess_config.txt"));
}

TEST(Cli, TrainMatchEvalRoundTrip) {
  const fs::path dir = unimatch::testing::temp_dir("cli_full");
  ASSERT_EQ(invoke(cmd("synth", dir)).code, 0);
  const Result t = invoke(cmd("train", dir));
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(dir / "checkpoint.bin"));
  EXPECT_NE(slurp(dir / "train_config.txt").find("w_lap=0.001"), std::string::npos);
  std::istringstream log(slurp(dir / "train_log.txt"));
  int lines = 0;
  for (std::string line; std::getline(log, line);) ++lines;
  EXPECT_EQ(lines, 6);

  const Result m = invoke(cmd("match", dir));
  ASSERT_EQ(m.code, 0) << m.err;
  for (const char* f : {"shape_00.assignment.txt", "shape_01.assignment.txt",
                        "shape_02.assignment.txt", "shape_00__shape_01.txt",
                        "shape_00__shape_02.txt", "shape_01__shape_02.txt"}) {
    EXPECT_TRUE(fs::exists(dir / "matches" / f)) << f;
  }
  EXPECT_EQ(slurp(dir / "matches" / "cycle_report.txt").rfind("triplets=6 violations=0", 0), 0u);

  const Result e = invoke(cmd("eval", dir));
  ASSERT_EQ(e.code, 0) << e.err;
  const std::string metrics = slurp(dir / "eval" / "metrics.txt");
  EXPECT_NE(metrics.find("pair=shape_00__shape_01"), std::string::npos);
  std::istringstream ms(metrics);
  int pck_rows = 0;
  for (std::string line; std::getline(ms, line);) pck_rows += line.rfind("pck ", 0) == 0;
  EXPECT_EQ(pck_rows, 26);

  EXPECT_EQ(invoke(cmd("match", dir, {"--checkpoint", (dir / "nope.bin").string()})).code, 2);
  EXPECT_EQ(invoke(cmd("match", dir, {"--shapes", "shape_00,ghost"})).code, 2);
}

TEST(Cli, FineTuneKeepsCycleConsistency) {
  const fs::path dir = unimatch::testing::temp_dir("cli_fine");
  ASSERT_EQ(invoke(cmd("synth", dir)).code, 0);
  ASSERT_EQ(invoke(cmd("train", dir)).code, 0);
  const Result m = invoke(cmd("match", dir, {"--fine-tune", "fine_tune_passes=2"}));
  ASSERT_EQ(m.code, 0) << m.err;
  EXPECT_NE(m.out.find("fine-tuned 2 passes"), std::string::npos);
  EXPECT_NE(m.out.find("cycle violations=0"), std::string::npos);
}

TEST(Cli, ResumeMatchesUninterruptedRun) {
  const fs::path a = unimatch::testing::temp_dir("cli_resume_a");
  const fs::path b = unimatch::testing::temp_dir("cli_resume_b");
  for (const auto& dir : {a, b}) ASSERT_EQ(invoke(cmd("synth", dir)).code, 0);
  ASSERT_EQ(invoke(cmd("train", a)).code, 0);
  ASSERT_EQ(invoke(cmd("train", b, {"iters=4"})).code, 0);
  const Result r = invoke(cmd("train", b, {"--resume"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("resuming at iteration 4"), std::string::npos);
  const auto sa = load_checkpoint(a / "checkpoint.bin").state;
  const auto sb = load_checkpoint(b / "checkpoint.bin").state;
  EXPECT_EQ(sa.iteration, 6);
  EXPECT_EQ(sb.iteration, 6);
  const auto pa = sa.nets.parameters(), pb = sb.nets.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
  EXPECT_EQ(invoke(cmd("train", unimatch::testing::temp_dir("cli_resume_c"), {"--resume"})).code, 2);
}

TEST(Cli, EvalOfGroundTruthIsZeroAndPartialReportsUnmatched) {
  const fs::path dir = unimatch::testing::temp_dir("cli_eval");
  ASSERT_EQ(invoke(cmd("synth", dir, {"partial_kind=cut", "synth_subdivisions=2"})).code, 0);
  const GroundTruth g0 = load_ground_truth(dir / "data" / "gt" / "shape_00.txt");
  const GroundTruth g1 = load_ground_truth(dir / "data" / "gt" / "shape_01.txt");
  const fs::path pred = dir / "pred";
  fs::create_directories(pred);
  // Complete -> partial: vertices cut away on shape_01 have no expectation.
  const auto expected = expected_targets(g0, g1);
  save_correspondence({expected, g1.size()}, "shape_00", "shape_01", g0.size(),
                      pred / "shape_00__shape_01.txt");
  std::vector<int> holes = expected_targets(g1, g0);
  holes[0] = PointMap::kNone;
  save_correspondence({holes, g0.size()}, "shape_01", "shape_00", g0.size(),
                      pred / "shape_01__shape_00.txt");
  const Result e = invoke(cmd("eval", dir, {"synth_subdivisions=2", "--pred", pred.string()}));
  ASSERT_EQ(e.code, 0) << e.err;
  const std::string metrics = slurp(dir / "eval" / "metrics.txt");
  EXPECT_NE(metrics.find("pair=shape_00__shape_01 mean=0 "), std::string::npos) << metrics;
  EXPECT_NE(metrics.find("pair=shape_01__shape_00 mean=0 evaluated="), std::string::npos);
  EXPECT_NE(metrics.find("unmatched=1"), std::string::npos);
  EXPECT_EQ(invoke(cmd("eval", dir, {"--index-base", "3"})).code, 2);
}

TEST(Cli, SameSeedSameAssignments) {
  const fs::path a = unimatch::testing::temp_dir("cli_det_a");
  const fs::path b = unimatch::testing::temp_dir("cli_det_b");
  for (const auto& dir : {a, b}) {
    ASSERT_EQ(invoke(cmd("synth", dir)).code, 0);
    ASSERT_EQ(invoke(cmd("train", dir)).code, 0);
    ASSERT_EQ(invoke(cmd("match", dir)).code, 0);
  }
  EXPECT_EQ(slurp(a / "matches" / "shape_01.assignment.txt"),
            slurp(b / "matches" / "shape_01.assignment.txt"));
  EXPECT_EQ(slurp(a / "data" / "shape_02.off"), slurp(b / "data" / "shape_02.off"));
}
