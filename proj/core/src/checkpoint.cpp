#include <sstream>

#include "unimatch/container.hpp"
#include "unimatch/errors.hpp"
#include "unimatch/model.hpp"

namespace unimatch {

namespace {

constexpr const char* kCheckpointKind = "checkpoint";

std::vector<std::int64_t> to_int64(const std::vector<int>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

void save_checkpoint(const TrainingState& state, const std::string& config_text,
                     const std::filesystem::path& path) {
  Container c(kCheckpointKind);
  c.put("feature_widths", to_int64(state.nets.feature.mlp.widths()));
  c.put("classifier_widths", to_int64(state.nets.classifier.mlp.widths()));
  const auto params = state.nets.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.put("param/" + std::to_string(i), *params[i]);
  }
  for (std::size_t i = 0; i < state.adam.m.size(); ++i) {
    c.put("adam_m/" + std::to_string(i), state.adam.m[i]);
    c.put("adam_v/" + std::to_string(i), state.adam.v[i]);
  }
  c.put_u64("adam_step", static_cast<std::uint64_t>(state.adam.step));
  c.put_u64("iteration", static_cast<std::uint64_t>(state.iteration));
  std::ostringstream rng;
  rng << state.rng;
  c.put("rng", rng.str());
  c.put("pair_order", to_int64(state.order));
  c.put_u64("pair_cursor", static_cast<std::uint64_t>(state.cursor));
  c.put("config", config_text);
  c.save(path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = Container::load(path);
  if (c.kind() != kCheckpointKind) {
    throw ParseError(path.string() + ": not a checkpoint (kind '" + c.kind() + "')");
  }
  auto widths = [&](const std::string& name) {
    const auto& raw = c.integers(name);
    return std::vector<int>(raw.begin(), raw.end());
  };
  const auto fw = widths("feature_widths");
  const auto cw = widths("classifier_widths");
  if (cw.size() != 3 || fw.empty() || cw.front() != fw.back()) {
    throw ParseError(path.string() + ": inconsistent network widths");
  }

  LoadedCheckpoint out;
  TrainingState& s = out.state;
  s.nets = make_networks(fw, cw[1], cw[2], 0);
  auto params = s.nets.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = c.matrix("param/" + std::to_string(i));
    if (m.rows() != params[i]->rows() || m.cols() != params[i]->cols()) {
      throw ParseError(path.string() + ": parameter " + std::to_string(i) + " has wrong shape");
    }
    *params[i] = m;
  }
  for (std::size_t i = 0; c.contains("adam_m/" + std::to_string(i)); ++i) {
    s.adam.m.push_back(c.matrix("adam_m/" + std::to_string(i)));
    s.adam.v.push_back(c.matrix("adam_v/" + std::to_string(i)));
  }
  s.adam.step = static_cast<std::int64_t>(c.u64("adam_step"));
  s.iteration = static_cast<int>(c.u64("iteration"));
  std::istringstream rng(c.text("rng"));
  rng >> s.rng;
  if (!rng) throw ParseError(path.string() + ": corrupt RNG state");
  const auto& order = c.integers("pair_order");
  s.order.assign(order.begin(), order.end());
  s.cursor = static_cast<int>(c.u64("pair_cursor"));
  out.config_text = c.text("config");
  return out;
}

}  // namespace unimatch
