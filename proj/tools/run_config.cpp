#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "unimatch/errors.hpp"

namespace unimatch::cli {

namespace {

const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> d = {
      {"out", "run"},
      {"data", ""},
      {"cache", ""},
      {"k", "30"},
      {"shot_radius", "0.1"},
      {"mode", "complete"},
      {"variant", "full"},
      {"lr", "1e-3"},
      {"iters", "20000"},
      {"detach_iters", "4000"},
      {"tau", "0.2"},
      {"sinkhorn_iters", "10"},
      {"w_bij", "1"},
      {"w_orth", "1"},
      {"w_lap", ""},
      {"lambda_cls", ""},
      {"smoothing", "0.1"},
      {"fmap_lambda", ""},
      {"gamma", "0.5"},
      {"feature_widths", "368,256,256,128"},
      {"classifier_hidden", "256"},
      {"universe_size", "0"},
      {"seed", "0"},
      {"checkpoint_every", "1000"},
      {"log_every", "50"},
      {"fine_tune_passes", "5"},
      {"synth_base", "bumpy-sphere"},
      {"synth_count", "8"},
      {"synth_subdivisions", "3"},
      {"synth_amplitude", "1"},
      {"partial_kind", "none"},
      {"partial_fraction", "0.4"},
      {"index_base", "0"},
  };
  return d;
}

std::string format_number(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, value] : defaults()) out.push_back(key);
    return out;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::merge_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + text + "'");
  set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      merge_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  const std::string& s = get(key);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + s + "'");
  }
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& s = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "' expects a number, got '" + s + "'");
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    int v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw ConfigError("config key '" + key + "' expects a comma-separated integer list");
    }
    out.push_back(v);
  }
  return out;
}

std::filesystem::path RunConfig::out_dir() const { return get("out"); }

std::filesystem::path RunConfig::data_dir() const {
  return has_value("data") ? std::filesystem::path(get("data")) : out_dir() / "data";
}

std::filesystem::path RunConfig::cache_dir() const {
  return has_value("cache") ? std::filesystem::path(get("cache")) : out_dir() / "cache";
}

MatchingMode RunConfig::mode() const { return parse_matching_mode(get("mode")); }

TrainingConfig RunConfig::training() const {
  TrainingConfig c = TrainingConfig::defaults(mode());
  c.variant = parse_train_variant(get("variant"));
  c.learning_rate = get_double("lr");
  c.total_iters = get_int("iters");
  c.detach_iters = get_int("detach_iters");
  c.tau = get_double("tau");
  c.sinkhorn_iters = get_int("sinkhorn_iters");
  c.weights.w_bij = get_double("w_bij");
  c.weights.w_orth = get_double("w_orth");
  if (has_value("w_lap")) c.weights.w_lap = get_double("w_lap");
  if (has_value("lambda_cls")) c.weights.lambda_cls = get_double("lambda_cls");
  c.weights.smoothing = get_double("smoothing");
  if (has_value("fmap_lambda")) c.fmap_lambda = get_double("fmap_lambda");
  c.gamma = get_double("gamma");
  c.feature_widths = get_int_list("feature_widths");
  c.classifier_hidden = get_int("classifier_hidden");
  c.universe_size = get_int("universe_size");
  const int seed = get_int("seed");
  if (seed < 0) throw ConfigError("seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.checkpoint_every = get_int("checkpoint_every");
  c.weights.validate();
  c.validate();
  return c;
}

ShotParams RunConfig::shot() const {
  ShotParams p;
  p.radius_frac = get_double("shot_radius");
  if (!(p.radius_frac > 0.0)) throw ConfigError("shot_radius must be positive");
  return p;
}

std::string RunConfig::resolved_text() const {
  // Mode-dependent blanks are written out with their effective values.
  const TrainingConfig t = training();
  std::ostringstream s;
  for (const auto& [k, v] : values_) {
    std::string value = v;
    if (v.empty()) {
      if (k == "w_lap") value = format_number(t.weights.w_lap);
      else if (k == "lambda_cls") value = format_number(t.weights.lambda_cls);
      else if (k == "fmap_lambda") value = format_number(t.fmap_lambda);
      else if (k == "data") value = data_dir().string();
      else if (k == "cache") value = cache_dir().string();
    }
    s << k << '=' << value << '\n';
  }
  return s.str();
}

void RunConfig::write_resolved(const std::filesystem::path& path) const {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << resolved_text();
}

}  // namespace unimatch::cli
