#include "sumgraph/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sumgraph/checkpoint.hpp"
#include "sumgraph/dataio.hpp"
#include "sumgraph/errors.hpp"
#include "sumgraph/evaluation.hpp"
#include "sumgraph/trainer.hpp"

namespace sumgraph {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> data;
  std::string checkpoint;
  std::string out;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::string features;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

void require_flag(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw ConfigError(std::string(command) + " requires " + flag);
}

json config_document(const Options& o) {
  json j = o.config.empty() ? json::object() : read_json_file(o.config);
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!o.mode.empty()) j["mode"] = o.mode;
  if (o.seed) j["seed"] = *o.seed;
  if (o.k) j["K"] = *o.k;
  return j;
}

std::vector<VideoRecord> load_data(const Options& o, const char* command) {
  if (o.data.empty()) throw ConfigError(std::string(command) + " requires --data");
  std::vector<fs::path> dirs(o.data.begin(), o.data.end());
  return load_datasets(dirs);
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  SyntheticSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "videos") s.videos = v.get<std::size_t>();
      else if (key == "min_frames") s.min_frames = v.get<std::size_t>();
      else if (key == "max_frames") s.max_frames = v.get<std::size_t>();
      else if (key == "dims") s.dims = v.get<std::size_t>();
      else if (key == "keyframe_fraction") s.keyframe_fraction = v.get<double>();
      else if (key == "clusters") s.clusters = v.get<std::size_t>();
      else if (key == "noise") s.noise = v.get<double>();
      else if (key == "users") s.users = v.get<std::size_t>();
      else if (key == "user_noise") s.user_noise = v.get<double>();
      else if (key == "segment_length") s.segment_length = v.get<std::size_t>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown synthetic key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic config: ") + e.what());
  }
  return s;
}

int cmd_gen_synth(const Options& o, std::ostream& out) {
  require_flag(o.out, "--out", "gen-synth");
  json j = o.config.empty() ? json::object() : read_json_file(o.config);
  if (o.seed) j["seed"] = *o.seed;
  const SyntheticSpec spec = synthetic_spec_from_json(j);
  const auto videos = generate_synthetic(spec);
  save_dataset(o.out, videos);
  out << "wrote " << videos.size() << " synthetic videos to " << o.out << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  require_flag(o.out, "--out", "train");
  const TrainConfig config = train_config_from_json(config_document(o));
  const auto videos = load_data(o, "train");
  fs::create_directories(o.out);
  const fs::path log_path = fs::path(o.out) / "train_log.jsonl";
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw DataError(log_path.string() + ": cannot open for writing");

  const TrainResult result = train(videos, config, [&](const EpochLog& e, const ModelParams&) {
    log << format_log_record(e, config.log_wall_time) << "\n";
    log.flush();
  });
  for (const auto& w : result.warnings) err << "warning: " << w << "\n";

  Checkpoint ckpt{result.params, result.adam, static_cast<std::uint32_t>(config.epochs),
                  static_cast<std::uint32_t>(config.k), config.hash()};
  const fs::path ckpt_path =
      o.checkpoint.empty() ? fs::path(o.out) / "checkpoint.sgrf" : fs::path(o.checkpoint);
  save_checkpoint(ckpt_path, ckpt);
  write_text(fs::path(o.out) / "config.json", to_json(config).dump(2) + "\n");
  const EpochLog& last = result.log.back();
  out << "trained " << config.epochs << " epochs on " << videos.size()
      << " videos, final loss " << last.mean.total << "\n"
      << "checkpoint: " << ckpt_path.string() << "\n";
  return kExitOk;
}

Checkpoint load_for_inference(const Options& o, const char* command, std::ostream& err) {
  require_flag(o.checkpoint, "--checkpoint", command);
  std::vector<std::string> warnings;
  std::optional<std::uint64_t> expected;
  if (!o.config.empty()) expected = train_config_from_json(config_document(o)).hash();
  Checkpoint c = load_checkpoint(o.checkpoint, expected, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  if (o.k) c.k = static_cast<std::uint32_t>(*o.k);
  return c;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  require_flag(o.out, "--out", "eval");
  const Checkpoint ckpt = load_for_inference(o, "eval", err);
  const EvalConfig ec = eval_config_from_json(o.config.empty() ? json::object() : read_json_file(o.config));
  const auto videos = load_data(o, "eval");
  const MetricsReport report = evaluate_videos(ckpt.params, ckpt.k, videos, ec);

  const fs::path dir(o.out);
  fs::create_directories(dir / "frames");
  write_text(dir / "metrics.json", to_json(report).dump(2) + "\n");
  for (const VideoMetrics& v : report.videos) {
    write_text(dir / "frames" / (v.id + ".csv"), frame_table_csv(v));
  }
  auto show = [&](const char* name, const std::optional<double>& x) {
    out << name << ": ";
    if (x) out << *x; else out << "n/a";
    out << "\n";
  };
  out << "evaluated " << report.videos.size() << " videos\n";
  show("keyshot F-score", report.aggregate.keyshot_f);
  show("keyframe F-score", report.aggregate.keyframe_f);
  show("Kendall tau", report.aggregate.kendall);
  show("Spearman rho", report.aggregate.spearman);
  return kExitOk;
}

int cmd_summarize(const Options& o, std::size_t segment_length, std::ostream& out,
                  std::ostream& err) {
  require_flag(o.out, "--out", "summarize");
  require_flag(o.features, "--features", "summarize");
  const Checkpoint ckpt = load_for_inference(o, "summarize", err);
  EvalConfig ec = eval_config_from_json(o.config.empty() ? json::object() : read_json_file(o.config));
  if (segment_length > 0) ec.segment_length = segment_length;
  ec.validate();

  const FeatureMatrix x = load_features(o.features);
  const ForwardTrace trace = forward(x, ckpt.params, ckpt.k);
  const SegmentList segs = SegmentList::uniform(x.frames(), ec.segment_length);
  const KeyshotSummary shots = frames_to_keyshots(trace.scores.y, segs, ec.budget);

  json keyshots = json::array();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (shots.segment_selected[i]) {
      keyshots.push_back({segs.segments()[i].start, segs.segments()[i].end});
    }
  }
  json keyframes = json::array();
  for (std::size_t i : trace.scores.selected_indices()) keyframes.push_back(i);
  const json doc{{"frames", x.frames()},
                 {"scores", trace.scores.y},
                 {"keyframes", keyframes},
                 {"keyshots", keyshots},
                 {"budget", ec.budget}};
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "summary.json", doc.dump(2) + "\n");
  out << "scored " << x.frames() << " frames, " << keyframes.size() << " keyframes, "
      << keyshots.size() << " keyshots\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video summarization with recursive relation graphs", "sumgraph"};
  app.require_subcommand(1);
  Options o;
  std::size_t segment_length = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Random seed");
  };
  CLI::App* gen = app.add_subcommand("gen-synth", "Write a synthetic planted-structure dataset");
  add_common(gen);
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd);
  train_cmd->add_option("--data", o.data, "Dataset directories")->expected(1, -1);
  train_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint output path");
  train_cmd->add_option("--mode", o.mode, "supervised|unsupervised")
      ->check(CLI::IsMember({"supervised", "unsupervised"}));
  train_cmd->add_option("--k", o.k, "Refinement iterations");
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  add_common(eval_cmd);
  eval_cmd->add_option("--data", o.data, "Dataset directories")->expected(1, -1);
  eval_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint to evaluate");
  eval_cmd->add_option("--k", o.k, "Override refinement iterations");
  eval_cmd->add_option("--mode", o.mode, "Mode used for the config hash check");
  CLI::App* sum_cmd = app.add_subcommand("summarize", "Score one video's features");
  add_common(sum_cmd);
  sum_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint to use");
  sum_cmd->add_option("--features", o.features, "Feature file (.sgft)");
  sum_cmd->add_option("--k", o.k, "Override refinement iterations");
  sum_cmd->add_option("--segment-length", segment_length, "Uniform shot length in frames");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_synth(o, out);
    if (train_cmd->parsed()) return cmd_train(o, out, err);
    if (eval_cmd->parsed()) return cmd_eval(o, out, err);
    if (sum_cmd->parsed()) return cmd_summarize(o, segment_length, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DegenerateInputError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  err << "error: no subcommand\n";
  return kExitConfig;
}

}  // namespace sumgraph
