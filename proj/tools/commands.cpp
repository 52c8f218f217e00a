#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "unimatch/errors.hpp"

namespace unimatch::cli {

namespace fs = std::filesystem;

namespace {

std::string shape_name(int i) {
  std::ostringstream s;
  s << "shape_" << std::setw(2) << std::setfill('0') << i;
  return s.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

Networks load_networks(const fs::path& checkpoint) {
  if (!fs::exists(checkpoint)) {
    throw ConfigError("checkpoint '" + checkpoint.string() + "' does not exist");
  }
  return load_checkpoint(checkpoint).state.nets;
}

}  // namespace

int Collection::find(const std::string& id) const {
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<fs::path> list_meshes(const fs::path& data_dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(data_dir)) return out;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".off" || ext == ".ply") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Collection load_collection(const RunConfig& config, std::ostream& log) {
  const auto files = list_meshes(config.data_dir());
  if (files.empty()) {
    throw ParseError("no .off or .ply meshes in '" + config.data_dir().string() + "'");
  }
  const int k = config.get_int("k");
  ShotParams shot_params = config.shot();
  const bool partial = config.mode() == MatchingMode::Partial;
  const int index_base = config.get_int("index_base");
  const fs::path cache = config.cache_dir();
  ensure_dir(cache);

  Collection c;
  for (const auto& file : files) {
    const std::string id = file.stem().string();
    TriangleMesh mesh = load_mesh(file);
    const std::uint64_t hash = mesh.hash();
    const fs::path basis_path = cache / (id + ".basis");
    const fs::path shot_path = cache / (id + ".shot");
    // Partial shapes share the complete reference's absolute support radius.
    if (partial && c.shapes.empty()) shot_params.radius = shot_support_radius(mesh, shot_params);

    std::optional<SpectralBasis> basis = load_basis(basis_path, hash, k);
    FeatureField probe;
    probe.params = {{"radius_frac", shot_params.radius_frac}};
    if (shot_params.radius > 0.0) probe.params["radius"] = shot_params.radius;
    std::optional<FeatureField> field =
        load_features(shot_path, hash, DescriptorKind::Shot, probe.params);
    const bool cached = basis.has_value() && field.has_value();
    if (!basis) {
      basis = compute_basis(mesh, k);
      save_basis(*basis, hash, basis_path);
    }
    if (!field) {
      field = shot(mesh, shot_params);
      save_features(*field, hash, shot_path);
    }
    log << (cached ? "cached " : "computed ") << id << '\n';
    c.shapes.push_back(make_shape_data(id, std::move(mesh), std::move(*basis), *field));

    const fs::path gt_path = config.data_dir() / "gt" / (id + ".txt");
    if (fs::exists(gt_path)) {
      GroundTruth gt = load_ground_truth(gt_path, index_base);
      if (gt.size() != c.shapes.back().num_vertices()) {
        throw ParseError("ground truth '" + gt_path.string() + "' has " +
                         std::to_string(gt.size()) + " entries for " +
                         std::to_string(c.shapes.back().num_vertices()) + " vertices");
      }
      c.ground_truth.emplace_back(std::move(gt));
    } else {
      c.ground_truth.emplace_back(std::nullopt);
    }
  }
  return c;
}

int cmd_synth(const RunConfig& config, std::ostream& log) {
  const SyntheticBase base = parse_synthetic_base(config.get("synth_base"));
  SyntheticOptions options;
  options.subdivisions = config.get_int("synth_subdivisions");
  options.amplitude = config.get_double("synth_amplitude");
  const int count = config.get_int("synth_count");
  const std::uint64_t seed = static_cast<std::uint64_t>(config.get_int("seed"));
  const std::string partial = config.get("partial_kind");

  SyntheticCollection col = make_synthetic_collection(base, count, seed, options);
  const fs::path data = config.data_dir();
  ensure_dir(data / "gt");
  for (int i = 0; i < count; ++i) {
    TriangleMesh mesh = col.meshes[i];
    GroundTruth gt = col.ground_truth[i];
    // Shape 0 stays complete and serves as the partial-mode reference.
    if (partial != "none" && i > 0) {
      PartialShape p = make_partial(mesh, gt, parse_partial_kind(partial),
                                    config.get_double("partial_fraction"), seed + 7919 * i);
      mesh = std::move(p.mesh);
      gt = std::move(p.ground_truth);
    }
    const std::string id = shape_name(i);
    save_mesh(mesh, data / (id + ".off"));
    save_ground_truth(gt, data / "gt" / (id + ".txt"));
    log << "wrote " << id << " (" << mesh.num_vertices() << " vertices)\n";
  }
  config.write_resolved(config.out_dir() / "synth_config.txt");
  return kExitOk;
}

int cmd_preprocess(const RunConfig& config, std::ostream& log) {
  const Collection c = load_collection(config, log);
  config.write_resolved(config.out_dir() / "preprocess_config.txt");
  log << "preprocessed " << c.shapes.size() << " shapes\n";
  return kExitOk;
}

int cmd_train(const RunConfig& config, bool resume, std::ostream& log) {
  const TrainingConfig tc = config.training();
  const fs::path out = config.out_dir();
  const fs::path ckpt = out / "checkpoint.bin";
  if (resume && !fs::exists(ckpt)) {
    throw ConfigError("--resume: no checkpoint at '" + ckpt.string() + "'");
  }
  const Collection c = load_collection(config, log);
  ensure_dir(out);
  const std::string config_text = config.resolved_text();
  config.write_resolved(out / "train_config.txt");

  TrainingState state;
  if (resume) {
    state = load_checkpoint(ckpt).state;
    log << "resuming at iteration " << state.iteration << '\n';
  } else {
    state = init_training(c.shapes, tc);
  }
  if (state.iteration > tc.total_iters) {
    throw ConfigError("checkpoint is at iteration " + std::to_string(state.iteration) +
                      ", beyond iters=" + std::to_string(tc.total_iters));
  }

  std::ofstream loss_log = open_out(out / "train_log.txt", resume ? std::ios::app : std::ios::out);
  const int log_every = std::max(1, config.get_int("log_every"));
  TrainCallbacks cb;
  cb.on_log = [&](const LogEntry& e) {
    const std::string line = format_log(e);
    loss_log << line << '\n';
    if (e.iteration % log_every == 0) log << line << '\n';
  };
  cb.on_checkpoint = [&](const TrainingState& s) { save_checkpoint(s, config_text, ckpt); };
  try {
    train_steps(state, c.shapes, tc, tc.total_iters, cb);
  } catch (const NonFiniteGradientError&) {
    save_checkpoint(state, config_text, ckpt);
    throw;
  }
  save_checkpoint(state, config_text, ckpt);
  log << "checkpoint " << ckpt.string() << " at iteration " << state.iteration << '\n';
  return kExitOk;
}

int cmd_match(const RunConfig& config, const fs::path& checkpoint,
              const std::vector<std::string>& shape_ids, bool fine_tune_pairs, std::ostream& log) {
  const TrainingConfig tc = config.training();
  Networks nets = load_networks(checkpoint);
  const Collection c = load_collection(config, log);

  std::vector<int> selected;
  if (shape_ids.empty()) {
    for (std::size_t i = 0; i < c.shapes.size(); ++i) selected.push_back(static_cast<int>(i));
  } else {
    for (const auto& id : shape_ids) {
      const int i = c.find(id);
      if (i < 0) throw ConfigError("unknown shape '" + id + "'");
      selected.push_back(i);
    }
  }
  const int d = nets.classifier.universe_size();
  for (int i : selected) {
    if (c.shapes[i].num_vertices() > d) {
      throw DimensionError("shape '" + c.shapes[i].id + "' has more vertices than the universe (" +
                           std::to_string(d) + ")");
    }
  }

  if (fine_tune_pairs) {
    // Adaptation is accumulated over all pairs so that every shape keeps a
    // single universe assignment.
    const int passes = config.get_int("fine_tune_passes");
    for (std::size_t a = 0; a < selected.size(); ++a) {
      for (std::size_t b = a + 1; b < selected.size(); ++b) {
        nets = fine_tune(c.shapes[selected[a]], c.shapes[selected[b]], nets, tc, passes);
      }
    }
    log << "fine-tuned " << passes << " passes per pair\n";
  }

  const fs::path dir = config.out_dir() / "matches";
  ensure_dir(dir);
  config.write_resolved(dir / "match_config.txt");
  std::vector<HardAssignment> assignments;
  std::vector<std::string> ids;
  for (int i : selected) {
    const ShapeData& s = c.shapes[i];
    assignments.push_back(infer_assignment(s, nets, tc.tau, tc.sinkhorn_iters));
    ids.push_back(s.id);
    save_assignment(assignments.back(), s.id, dir / (s.id + ".assignment.txt"));
  }
  const MapCollection maps = compose_all(assignments, ids);
  int pair_files = 0;
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      save_correspondence(maps.maps[a][b], ids[a], ids[b], d,
                          dir / (ids[a] + "__" + ids[b] + ".txt"));
      ++pair_files;
    }
  }
  const CycleReport report = check_cycle_consistency(maps);
  {
    std::ofstream out = open_out(dir / "cycle_report.txt");
    out << "triplets=" << report.triplets_checked << " violations=" << report.violation_count
        << '\n';
    for (const auto& v : report.violations) {
      out << ids[v.x] << ' ' << ids[v.y] << ' ' << ids[v.z] << " vertex=" << v.vertex
          << " via=" << v.via << " direct=" << v.direct << '\n';
    }
  }
  log << "wrote " << assignments.size() << " assignments and " << pair_files
      << " pair maps; cycle violations=" << report.violation_count << '\n';
  if (!report.consistent()) {
    log << "error: cycle-consistency violated\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_eval(const RunConfig& config, const fs::path& predictions, std::ostream& log) {
  const Collection c = load_collection(config, log);
  if (!fs::is_directory(predictions)) {
    throw ConfigError("prediction directory '" + predictions.string() + "' does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(predictions)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.find("__") != std::string::npos &&
        entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ParseError("no pair maps in '" + predictions.string() + "'");

  const fs::path dir = config.out_dir() / "eval";
  ensure_dir(dir);
  config.write_resolved(dir / "eval_config.txt");
  std::ofstream report = open_out(dir / "metrics.txt");
  report << std::setprecision(9);
  std::vector<double> all_errors;
  long long unmatched = 0;
  for (const auto& file : files) {
    const std::string stem = file.stem().string();
    const auto sep = stem.find("__");
    const std::string xid = stem.substr(0, sep), yid = stem.substr(sep + 2);
    const int x = c.find(xid), y = c.find(yid);
    if (x < 0 || y < 0) throw ParseError("'" + file.string() + "' names an unknown shape");
    if (!c.ground_truth[x] || !c.ground_truth[y]) {
      throw ParseError("missing ground truth for pair " + stem);
    }
    const PointMap pred = load_correspondence(file, c.shapes[y].num_vertices());
    if (pred.size() != c.shapes[x].num_vertices()) {
      throw ParseError("'" + file.string() + "' has the wrong number of rows");
    }
    const GeodesicErrors e =
        geodesic_error(pred, *c.ground_truth[x], *c.ground_truth[y], c.shapes[y].mesh);
    report << "pair=" << stem << " mean=" << e.mean << " evaluated=" << e.evaluated
           << " unmatched=" << e.unmatched << " undefined=" << e.undefined << '\n';
    const auto v = e.values();
    all_errors.insert(all_errors.end(), v.begin(), v.end());
    unmatched += e.unmatched;
  }
  double mean = 0.0;
  for (double e : all_errors) mean += e;
  if (!all_errors.empty()) mean /= static_cast<double>(all_errors.size());
  report << "summary pairs=" << files.size() << " mean=" << mean
         << " evaluated=" << all_errors.size() << " unmatched=" << unmatched << '\n';
  const PckCurve curve = pck(all_errors, default_pck_thresholds());
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    report << "pck threshold=" << curve.thresholds[i] << " fraction=" << curve.fractions[i] << '\n';
  }
  log << "mean geodesic error " << mean << " over " << files.size() << " pairs (" << unmatched
      << " unmatched)\n";
  return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cycle-consistent multi-shape matching through a universe classifier"};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> overrides;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "key=value configuration file");
    sub->add_option("overrides", overrides, "key=value overrides");
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic mesh collection");
  add_common(synth);
  CLI::App* pre = app.add_subcommand("preprocess", "Build spectral and SHOT caches");
  add_common(pre);
  CLI::App* train = app.add_subcommand("train", "Train the networks");
  add_common(train);
  bool resume = false;
  train->add_flag("--resume", resume, "Continue from <out>/checkpoint.bin");
  CLI::App* match = app.add_subcommand("match", "Predict universe assignments and pair maps");
  add_common(match);
  std::string checkpoint;
  std::string shapes;
  bool fine = false;
  match->add_option("--checkpoint", checkpoint, "Checkpoint (default <out>/checkpoint.bin)");
  match->add_option("--shapes", shapes, "Comma-separated shape ids (default all)");
  match->add_flag("--fine-tune", fine, "Adapt the networks on every pair before matching");
  CLI::App* eval = app.add_subcommand("eval", "Score pair maps against ground truth");
  add_common(eval);
  std::string pred_dir;
  int index_base = -1;
  eval->add_option("--pred", pred_dir, "Directory of pair maps (default <out>/matches)");
  eval->add_option("--index-base", index_base, "Ground-truth index base (0 or 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    RunConfig config;
    if (!config_file.empty()) config.merge_file(config_file);
    for (const auto& o : overrides) config.merge_assignment(o);
    if (index_base >= 0) config.set("index_base", std::to_string(index_base));
    const int base = config.get_int("index_base");
    if (base != 0 && base != 1) throw ConfigError("index_base must be 0 or 1");
    config.training();  // validates every training key up front

    if (*synth) return cmd_synth(config, out);
    if (*pre) return cmd_preprocess(config, out);
    if (*train) return cmd_train(config, resume, out);
    if (*match) {
      std::vector<std::string> ids;
      std::stringstream ss(shapes);
      for (std::string id; std::getline(ss, id, ',');) {
        if (!id.empty()) ids.push_back(id);
      }
      const fs::path ckpt =
          checkpoint.empty() ? config.out_dir() / "checkpoint.bin" : fs::path(checkpoint);
      return cmd_match(config, ckpt, ids, fine, out);
    }
    if (*eval) {
      const fs::path dir = pred_dir.empty() ? config.out_dir() / "matches" : fs::path(pred_dir);
      return cmd_eval(config, dir, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const TopologyError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DisconnectedError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DegenerateError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConvergenceError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const SingularError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NonFiniteGradientError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("unimatch");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace unimatch::cli
