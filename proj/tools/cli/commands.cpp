#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "log.hpp"
#include "run_config.hpp"
#include "trapcc/checkpoint.hpp"
#include "trapcc/completion.hpp"
#include "trapcc/detection_filter.hpp"
#include "trapcc/error.hpp"
#include "trapcc/gt_pool.hpp"
#include "trapcc/io.hpp"
#include "trapcc/metrics.hpp"
#include "trapcc/scene_io.hpp"
#include "trapcc/synth.hpp"
#include "trapcc/training.hpp"

namespace trapcc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string object_tag(int frame, int object_id) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "f%03d_o%04d", frame, object_id);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads. The first
/// exception (lowest index) is rethrown after every worker has finished.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(body);
  body();
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Flag bound to a config key; applied over file and environment layers.
struct Binding {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

struct Command {
  CLI::App* app = nullptr;
  std::deque<Binding> bindings;
  std::string config_path;
  std::vector<std::string> overrides;  // key=value

  void bind(const std::string& flag, const std::string& key, const std::string& help) {
    bindings.push_back({key, "", nullptr});
    bindings.back().option = app->add_option(flag, bindings.back().value, help);
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    cfg.apply_process_env();
    for (const auto& b : bindings) {
      if (b.option->count() > 0) cfg.set(b.key, b.value, Source::Flag);
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::Config, "--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1), Source::Flag);
    }
    return cfg;
  }
};

Command make_command(CLI::App& root, const std::string& name, const std::string& help) {
  Command c;
  c.app = root.add_subcommand(name, help);
  return c;
}

void add_common(Command& c) {
  c.app->add_option("--config", c.config_path, "TOML or JSON config file")->check(CLI::ExistingFile);
  c.app->add_option("--set", c.overrides, "override any config key, key=value");
}

void log_config(Logger& log, const RunConfig& cfg, const std::string& prefix) {
  json fields = json::object();
  for (const auto& [key, vs] : cfg.dump()) {
    if (key.rfind(prefix, 0) == 0 || key.rfind("scene.", 0) == 0) fields[key] = vs.first + " (" + to_string(vs.second) + ")";
  }
  log.info("config", fields);
}

// gen-synth ---------------------------------------------------------------

int cmd_gen_synth(const RunConfig& cfg, const fs::path& out_dir, Logger& log, std::ostream& out) {
  const auto options = synth_options(cfg);
  log_config(log, cfg, "synth.");
  const auto t0 = std::chrono::steady_clock::now();
  const auto summary = synth::generate_dataset(out_dir, options);
  log.info("gen_synth_done", {{"objects", summary.objects},
                              {"observations", summary.observations},
                              {"empty_observations", summary.empty_observations},
                              {"seconds", seconds_since(t0)}});
  out << json{{"objects", summary.objects}, {"observations", summary.observations}}.dump() << '\n';
  return kOk;
}

// build-gt-pool ----------------------------------------------------------

int cmd_build_pool(const RunConfig& cfg, const fs::path& scenes_dir, const fs::path& out_dir, Logger& log,
                   std::ostream& out) {
  const auto options = pool_options(cfg);
  log_config(log, cfg, "pool.");
  const auto t0 = std::chrono::steady_clock::now();
  const SceneSet scenes = load_scenes(scenes_dir);
  const GtPool pool = build_pool(tracked_instances(scenes, cfg.get_real("scene.crop_margin")), options);
  save_pool(pool, out_dir);
  log.info("pool_built", {{"whole", pool.whole.size()},
                          {"partial", pool.partial.size()},
                          {"warnings", pool.warnings},
                          {"seconds", seconds_since(t0)}});
  out << json{{"whole", pool.whole.size()}, {"partial", pool.partial.size()}, {"warnings", pool.warnings}}.dump()
      << '\n';
  if (pool.whole.empty()) {
    log.warn("empty_pool", {{"scenes", scenes_dir.string()}});
    return kEmpty;
  }
  return kOk;
}

// train ------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, const fs::path& pool_dir, const fs::path& scenes_dir, const fs::path& out_dir,
              Logger& log, std::ostream& out) {
  const auto arch = architecture(cfg);
  auto tc = train_config(cfg);
  const auto dopt = dataset_options(cfg);
  log_config(log, cfg, "train.");
  tc.checkpoint_dir = out_dir;

  const GtPool pool = load_pool(pool_dir);
  const SceneSet scenes = load_scenes(scenes_dir);
  const auto dataset = build_dataset(scenes, pool, arch, dopt);
  log.info("dataset", {{"samples", dataset.size()}, {"pool_whole", pool.whole.size()}});
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "no usable training observations in " + scenes_dir.string());

  fs::create_directories(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto init = nn::NetworkParams::initialize(arch, tc.seed);
  const auto result = train(dataset, init, tc, [&](const EpochLoss& e) {
    log.info("epoch", {{"epoch", e.epoch},
                       {"l_p", e.mean.l_p},
                       {"l_c", e.mean.l_c},
                       {"l_mcd", e.mean.l_mcd},
                       {"total", e.mean.total},
                       {"seconds", seconds_since(t0)}});
  });
  save_checkpoint(out_dir / "checkpoint.bin", result.params);
  write_loss_csv(out_dir / "loss.csv", result.log);
  const double first = result.log.front().mean.total;
  const double last = result.log.back().mean.total;
  log.info("train_done", {{"epochs", result.log.size()}, {"first_loss", first}, {"final_loss", last},
                          {"seconds", seconds_since(t0)}});
  out << json{{"samples", dataset.size()}, {"first_loss", first}, {"final_loss", last}}.dump() << '\n';
  return kOk;
}

// complete ---------------------------------------------------------------

int cmd_complete(const RunConfig& cfg, const fs::path& scenes_dir, const fs::path& checkpoint, const fs::path& out_dir,
                 Logger& log, std::ostream& out) {
  const auto graph = graph_options(cfg);
  const double margin = cfg.get_real("scene.crop_margin");
  const auto params = load_checkpoint(checkpoint);
  const SceneSet scenes = load_scenes(scenes_dir);
  fs::create_directories(out_dir);

  std::vector<FrameCompletion> per_frame(scenes.frames.size());
  parallel_for(scenes.frames.size(), [&](std::size_t i) {
    const auto objects = frame_objects(scenes.frames[i]);
    per_frame[i] = complete_frame(params, objects, graph, margin);
    for (const auto& [id, res] : per_frame[i].results) {
      write_xyzf32(out_dir / (object_tag(scenes.frames[i].frame, id) + ".pcxy"), res.detailed);
    }
  });

  json entries = json::array();
  json failures = json::array();
  for (std::size_t i = 0; i < scenes.frames.size(); ++i) {
    const auto& frame = scenes.frames[i];
    for (const auto& entry : frame.objects) {
      const int id = entry.object.object_id;
      if (const auto it = per_frame[i].results.find(id); it != per_frame[i].results.end()) {
        entries.push_back({{"frame", frame.frame},
                           {"object_id", id},
                           {"input", entry.cloud_file},
                           {"output", object_tag(frame.frame, id) + ".pcxy"},
                           {"points", it->second.detailed.size()}});
      } else {
        const auto f = per_frame[i].failures.find(id);
        const std::string reason = f != per_frame[i].failures.end() ? f->second : "unknown";
        failures.push_back({{"frame", frame.frame}, {"object_id", id}, {"reason", reason}});
        log.warn("completion_failed", {{"frame", frame.frame}, {"object_id", id}, {"reason", reason}});
      }
    }
  }
  const json manifest = {{"format", "trapcc-completions"},
                         {"version", 1},
                         {"variant", nn::to_string(params.arch.variant)},
                         {"frame", "object"},
                         {"entries", entries},
                         {"failures", failures}};
  atomic_write(out_dir / "manifest.json", manifest.dump(2) + "\n");
  log.info("complete_done", {{"completed", entries.size()}, {"failed", failures.size()}});
  out << json{{"completed", entries.size()}, {"failed", failures.size()}}.dump() << '\n';
  if (entries.empty() && failures.empty()) {
    log.warn("no_objects", {{"scenes", scenes_dir.string()}});
    return kOk;
  }
  return entries.empty() ? kEmpty : kOk;
}

// evaluate ---------------------------------------------------------------

struct Prediction {
  std::string output;
};

int cmd_evaluate(const RunConfig& cfg, const fs::path& pred_dir, const fs::path& scenes_dir, const fs::path& pool_dir,
                 const fs::path& oracle_dir, const std::string& variant, const fs::path& out_csv, Logger& log,
                 std::ostream& out) {
  const double margin = cfg.get_real("scene.crop_margin");
  const auto retrieval = dataset_options(cfg).retrieval;

  json manifest;
  try {
    manifest = json::parse(read_file(pred_dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, "predictions manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "trapcc-completions") {
    throw Error(ErrorCode::Format, "predictions manifest has an unexpected format");
  }
  const std::string pred_variant = manifest.value("variant", "");
  if (!variant.empty() && nn::to_string(nn::variant_from_string(variant)) != pred_variant) {
    throw Error(ErrorCode::Config, "requested variant " + variant + " but predictions come from " + pred_variant);
  }

  std::map<std::pair<int, int>, Prediction> predicted;
  std::set<std::pair<int, int>> failed;
  for (const auto& e : manifest.at("entries")) {
    predicted[{e.at("frame").get<int>(), e.at("object_id").get<int>()}] = {e.at("output").get<std::string>()};
  }
  for (const auto& e : manifest.at("failures")) failed.insert({e.at("frame").get<int>(), e.at("object_id").get<int>()});

  const SceneSet scenes = load_scenes(scenes_dir);
  std::vector<std::string> missing;
  std::set<std::pair<int, int>> seen;
  for (const auto& frame : scenes.frames) {
    for (const auto& entry : frame.objects) {
      const std::pair<int, int> key{frame.frame, entry.object.object_id};
      seen.insert(key);
      if (!predicted.count(key) && !failed.count(key)) missing.push_back(object_tag(key.first, key.second));
    }
  }
  std::vector<std::string> unexpected;
  for (const auto& [key, p] : predicted) {
    if (!seen.count(key)) unexpected.push_back(object_tag(key.first, key.second));
  }
  if (!missing.empty() || !unexpected.empty()) {
    std::string msg = "predictions and scenes do not match;";
    if (!missing.empty()) {
      msg += " missing:";
      for (const auto& m : missing) msg += " " + m;
      msg += ";";
    }
    if (!unexpected.empty()) {
      msg += " unexpected:";
      for (const auto& u : unexpected) msg += " " + u;
    }
    throw Error(ErrorCode::Format, msg);
  }

  const bool use_oracle = !oracle_dir.empty();
  GtPool pool;
  std::map<int, synth::OracleObject> oracle;
  if (use_oracle) {
    oracle = synth::load_oracle(oracle_dir);
  } else {
    pool = load_pool(pool_dir);
  }

  struct Job {
    const SceneFrame* frame;
    const SceneEntry* entry;
  };
  std::vector<Job> jobs;
  std::size_t skipped = 0;
  for (const auto& frame : scenes.frames) {
    for (const auto& entry : frame.objects) {
      const std::pair<int, int> key{frame.frame, entry.object.object_id};
      if (!predicted.count(key)) continue;
      if (use_oracle) {
        const auto it = oracle.find(entry.object.object_id);
        if (it == oracle.end()) throw Error(ErrorCode::Format, "oracle has no object " + std::to_string(key.second));
        if (!it->second.vehicle) {
          ++skipped;
          continue;
        }
      }
      jobs.push_back({&frame, &entry});
    }
  }

  std::vector<EvalRow> rows(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& obj = jobs[i].entry->object;
    const int frame = jobs[i].frame->frame;
    const PointCloud prediction =
        read_xyzf32(pred_dir / predicted.at({frame, obj.object_id}).output, Frame::Object);
    const PointCloud raw = to_object_frame(crop_to_box(obj.cloud, obj.box, margin), obj.box);
    PointCloud whole{Frame::Object};
    std::vector<PointCloud> partials;
    if (use_oracle) {
      whole = sample_fixed(oracle.at(obj.object_id).complete, 2048, SampleMode::Random,
                           static_cast<std::uint64_t>(obj.object_id));
      auto fb = split_front_back(whole);
      partials = {std::move(fb.front), std::move(fb.back)};
    } else {
      const Size3 size{obj.box.length, obj.box.width, obj.box.height};
      const GtMatch match = retrieve_gt(raw, size, pool, retrieval);
      whole = pool.whole[match.whole_index].cloud;
      partials = {pool.front_of(match.whole_index).cloud, pool.back_of(match.whole_index).cloud};
    }
    rows[i] = {object_tag(frame, obj.object_id), evaluate(prediction, raw, whole, partials)};
  });

  write_eval_csv(out_csv, rows);
  const EvalReport mean = mean_report(rows);
  const json summary = {{"variant", pred_variant},
                        {"ground_truth", use_oracle ? "oracle" : "pool"},
                        {"rows", rows.size()},
                        {"skipped_non_vehicle", skipped},
                        {"failed_completions", failed.size()},
                        {"l_g", mean.l_g},
                        {"l_i", mean.l_i},
                        {"l_s", mean.l_s},
                        {"mean_cd", mean.mean_cd}};
  log.info("evaluate_done", summary);
  out << summary.dump() << '\n';
  return rows.empty() ? kEmpty : kOk;
}

// filter -----------------------------------------------------------------

int cmd_filter(const RunConfig& cfg, const fs::path& scenes_dir, const fs::path& checkpoint, const fs::path& out_csv,
               Logger& log, std::ostream& out) {
  const auto config = filter_config(cfg);
  log_config(log, cfg, "filter.");
  const auto params = load_checkpoint(checkpoint);
  const SceneSet scenes = load_scenes(scenes_dir);

  std::vector<std::vector<FilterDecision>> per_frame(scenes.frames.size());
  std::vector<FilterCounters> counters(scenes.frames.size());
  parallel_for(scenes.frames.size(),
               [&](std::size_t i) { per_frame[i] = filter_frame(params, scenes.frames[i], config, counters[i]); });

  std::vector<FilterDecision> decisions;
  FilterCounters total;
  for (std::size_t i = 0; i < per_frame.size(); ++i) {
    decisions.insert(decisions.end(), per_frame[i].begin(), per_frame[i].end());
    total.completions += counters[i].completions;
    total.high_confidence += counters[i].high_confidence;
    total.kept_low_confidence += counters[i].kept_low_confidence;
    total.deleted += counters[i].deleted;
    total.failures += counters[i].failures;
  }
  for (const auto& d : decisions) {
    if (!d.note.empty()) log.warn("filter_note", {{"frame", d.frame}, {"object_id", d.object_id}, {"note", d.note}});
  }
  write_decisions_csv(out_csv, decisions);
  const json summary = {{"objects", decisions.size()},
                        {"completions", total.completions},
                        {"high_confidence", total.high_confidence},
                        {"kept_low_confidence", total.kept_low_confidence},
                        {"deleted", total.deleted},
                        {"failures", total.failures}};
  log.info("filter_done", summary);
  out << summary.dump() << '\n';
  return kOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument: return kConfig;
    case ErrorCode::Io:
    case ErrorCode::Format:
    case ErrorCode::CheckpointLoad: return kIo;
    case ErrorCode::EmptyDataset:
    case ErrorCode::EmptyPool:
    case ErrorCode::EmptyCloud:
    case ErrorCode::NoObservations: return kEmpty;
    default: return kInternal;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& log_stream) {
  CLI::App app{"Trajectory-aided point cloud completion and detection filtering"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("--quiet", quiet, "plain-text logs, warnings and errors only");

  std::string out_path, scenes_path, pool_path, checkpoint_path, pred_path, oracle_path, variant_check;

  Command gen = make_command(app, "gen-synth", "generate a synthetic scene set with oracle clouds");
  add_common(gen);
  gen.bind("--vehicles", "synth.vehicles", "number of vehicles");
  gen.bind("--frames", "synth.frames", "frames per scene");
  gen.bind("--clutter", "synth.clutter", "number of clutter objects");
  gen.bind("--seed", "synth.seed", "master seed");
  gen.bind("--half-scanned-fraction", "synth.half_scanned_fraction", "share of vehicles seen from one side");
  gen.app->add_option("--out", out_path, "output directory")->required();

  Command pool = make_command(app, "build-gt-pool", "aggregate tracked vehicles into a ground-truth pool");
  add_common(pool);
  pool.bind("--threshold", "pool.threshold", "quadrant fraction threshold");
  pool.bind("--min-points", "pool.min_points", "minimum aggregated points");
  pool.app->add_option("--scenes", scenes_path, "scene directory")->required();
  pool.app->add_option("--out", out_path, "pool directory")->required();

  Command tr = make_command(app, "train", "train the completion network");
  add_common(tr);
  tr.bind("--epochs", "train.epochs", "number of epochs");
  tr.bind("--seed", "train.seed", "training seed");
  tr.bind("--variant", "arch.variant", "c-net, cp-net or full");
  tr.bind("--max-samples", "train.max_samples", "seeded subset size, 0 for all");
  tr.app->add_flag_callback("--stagewise", [&] { tr.overrides.push_back("train.stagewise=true"); },
                            "train P-Net first, then C-Net");
  tr.app->add_option("--pool", pool_path, "pool directory")->required();
  tr.app->add_option("--scenes", scenes_path, "scene directory")->required();
  tr.app->add_option("--out", out_path, "output directory")->required();

  Command comp = make_command(app, "complete", "complete every object of a scene set");
  add_common(comp);
  comp.app->add_option("--scenes", scenes_path, "scene directory")->required();
  comp.app->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  comp.app->add_option("--out", out_path, "output directory")->required();

  Command ev = make_command(app, "evaluate", "score completions against ground truth");
  add_common(ev);
  ev.app->add_option("--predictions", pred_path, "output directory of complete")->required();
  ev.app->add_option("--scenes", scenes_path, "scene directory")->required();
  auto* pool_opt = ev.app->add_option("--pool", pool_path, "pool directory, ground truth by retrieval");
  auto* oracle_opt = ev.app->add_option("--oracle", oracle_path, "synthetic dataset directory, ground truth by oracle");
  pool_opt->excludes(oracle_opt);
  ev.app->add_option("--variant", variant_check, "expected variant of the predictions");
  ev.app->add_option("--out", out_path, "per-object CSV")->required();

  Command fil = make_command(app, "filter", "delete low-confidence detections that do not look like vehicles");
  add_common(fil);
  fil.bind("--matching-threshold", "filter.matching_threshold", "deletion threshold on the matching score");
  fil.bind("--detection-threshold", "filter.detection_threshold", "confidence below which objects are checked");
  fil.bind("--contour-weight", "filter.contour_weight", "contour share of the matching score");
  fil.app->add_option("--scenes", scenes_path, "scene directory")->required();
  fil.app->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  fil.app->add_option("--out", out_path, "decision CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, log_stream);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, log_stream);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, log_stream);
    return kConfig;
  }

  Logger log(log_stream, quiet);
  try {
    if (gen.app->parsed()) return cmd_gen_synth(gen.resolve(), out_path, log, out);
    if (pool.app->parsed()) return cmd_build_pool(pool.resolve(), scenes_path, out_path, log, out);
    if (tr.app->parsed()) return cmd_train(tr.resolve(), pool_path, scenes_path, out_path, log, out);
    if (comp.app->parsed()) return cmd_complete(comp.resolve(), scenes_path, checkpoint_path, out_path, log, out);
    if (ev.app->parsed()) {
      if (pool_path.empty() && oracle_path.empty()) {
        throw Error(ErrorCode::Config, "evaluate needs --pool or --oracle");
      }
      return cmd_evaluate(ev.resolve(), pred_path, scenes_path, pool_path, oracle_path, variant_check, out_path, log,
                          out);
    }
    if (fil.app->parsed()) return cmd_filter(fil.resolve(), scenes_path, checkpoint_path, out_path, log, out);
  } catch (const Error& e) {
    log.error("failed", {{"code", to_string(e.code())}, {"message", e.what()}});
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    log.error("failed", {{"code", "Io"}, {"message", e.what()}});
    return kIo;
  } catch (const std::exception& e) {
    log.error("failed", {{"code", "Internal"}, {"message", e.what()}});
    return kInternal;
  }
  return kInternal;
}

}  // namespace trapcc::cli
