#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"
#include "unimatch/eval.hpp"
#include "unimatch/model.hpp"

namespace unimatch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// A mesh collection on disk: <data>/<id>.off|.ply plus optional
/// <data>/gt/<id>.txt.
struct Collection {
  std::vector<ShapeData> shapes;
  std::vector<std::optional<GroundTruth>> ground_truth;

  int find(const std::string& id) const;
};

std::vector<std::filesystem::path> list_meshes(const std::filesystem::path& data_dir);

/// Loads every mesh with cached bases and SHOT descriptors, computing and
/// storing whatever is missing or stale. Logs "cached <id>" or
/// "computed <id>" per shape.
Collection load_collection(const RunConfig& config, std::ostream& log);

int cmd_synth(const RunConfig& config, std::ostream& log);
int cmd_preprocess(const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, bool resume, std::ostream& log);
int cmd_match(const RunConfig& config, const std::filesystem::path& checkpoint,
              const std::vector<std::string>& shape_ids, bool fine_tune, std::ostream& log);
int cmd_eval(const RunConfig& config, const std::filesystem::path& predictions,
             std::ostream& log);

/// Parses arguments, runs the subcommand and maps errors to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace unimatch::cli
