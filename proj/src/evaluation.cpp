#include "sumgraph/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sumgraph/errors.hpp"
#include "sumgraph/random.hpp"

namespace sumgraph {

using nlohmann::json;

void EvalConfig::validate() const {
  if (!(budget > 0.0 && budget <= 1.0)) throw ConfigError("eval budget must be in (0, 1]");
  if (segment_length == 0) throw ConfigError("eval segment_length must be positive");
}

EvalConfig eval_config_from_json(const json& j) {
  EvalConfig c;
  if (!j.is_object() || !j.contains("eval")) return c;
  const json& e = j.at("eval");
  if (!e.is_object()) throw ConfigError("config 'eval' must be an object");
  try {
    for (const auto& [key, value] : e.items()) {
      if (key == "budget") {
        c.budget = value.get<double>();
      } else if (key == "segment_length") {
        c.segment_length = value.get<std::size_t>();
      } else if (key == "aggregation") {
        const std::string a = value.get<std::string>();
        if (a == "mean") {
          c.aggregation = UserAggregation::kMean;
        } else if (a == "max") {
          c.aggregation = UserAggregation::kMax;
        } else {
          throw ConfigError("eval aggregation must be 'mean' or 'max', got '" + a + "'");
        }
      } else {
        throw ConfigError("unknown eval key '" + key + "'");
      }
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("eval config: ") + ex.what());
  }
  c.validate();
  return c;
}

VideoMetrics evaluate_video(const ModelParams& params, std::size_t k, const VideoRecord& video,
                            const EvalConfig& config) {
  const ForwardTrace trace = forward(video.features, params, k);
  const std::vector<double>& y = trace.scores.y;
  const SegmentList segments =
      video.segments ? *video.segments : SegmentList::uniform(video.frames(), config.segment_length);
  const KeyshotSummary predicted = frames_to_keyshots(y, segments, config.budget);

  VideoMetrics m;
  m.id = video.id;
  m.frames = video.frames();

  std::vector<KeyshotSummary> references;
  if (video.users && video.users->users() > 0) {
    for (const auto& u : video.users->scores) {
      references.push_back(frames_to_keyshots(u, segments, config.budget));
    }
  } else if (video.labels) {
    references.push_back(frames_to_keyshots(video.labels->as_reals(), segments, config.budget));
  }
  if (!references.empty()) m.keyshot = multi_user_fscore(predicted, references, config.aggregation);
  if (video.labels) m.keyframe = precision_recall_fscore(trace.scores.selected, video.labels->labels());

  std::vector<double> user_mean(video.frames(), 0.0);
  if (video.users && video.users->users() > 0) {
    user_mean = video.users->mean_scores();
    try {
      m.kendall = mean_kendall_tau(y, *video.users);
      m.spearman = mean_spearman_rho(y, *video.users);
    } catch (const DegenerateInputError&) {
      // Constant predictions or annotations: correlation undefined.
      m.kendall.reset();
      m.spearman.reset();
    }
  } else if (video.labels) {
    user_mean = video.labels->as_reals();
  }

  m.table.reserve(video.frames());
  for (std::size_t f = 0; f < video.frames(); ++f) {
    m.table.push_back({f, y[f], user_mean[f], static_cast<bool>(trace.scores.selected[f]),
                       static_cast<bool>(predicted.frame_selected[f])});
  }
  return m;
}

namespace {

template <class Get>
std::optional<double> mean_present(std::span<const VideoMetrics> videos, Get get) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const VideoMetrics& v : videos) {
    if (const std::optional<double> x = get(v)) {
      acc += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return acc / static_cast<double>(n);
}

std::optional<double> f_of(const std::optional<PrecisionRecall>& pr) {
  return pr ? std::optional<double>(pr->f_score) : std::nullopt;
}

}  // namespace

MetricsReport evaluate_videos(const ModelParams& params, std::size_t k,
                              std::span<const VideoRecord> videos, const EvalConfig& config) {
  config.validate();
  if (videos.empty()) throw DegenerateInputError("evaluation set is empty");
  MetricsReport r;
  for (const VideoRecord& v : videos) r.videos.push_back(evaluate_video(params, k, v, config));
  r.aggregate.keyshot_f = mean_present(r.videos, [](const VideoMetrics& v) { return f_of(v.keyshot); });
  r.aggregate.keyframe_f = mean_present(r.videos, [](const VideoMetrics& v) { return f_of(v.keyframe); });
  r.aggregate.kendall = mean_present(r.videos, [](const VideoMetrics& v) { return v.kendall; });
  r.aggregate.spearman = mean_present(r.videos, [](const VideoMetrics& v) { return v.spearman; });
  return r;
}

namespace {

json opt(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

json pr_json(const std::optional<PrecisionRecall>& pr) {
  if (!pr) return nullptr;
  return {{"precision", pr->precision}, {"recall", pr->recall}, {"f_score", pr->f_score}};
}

json aggregate_json(const Aggregate& a) {
  return {{"keyshot_f", opt(a.keyshot_f)},
          {"keyframe_f", opt(a.keyframe_f)},
          {"kendall_tau", opt(a.kendall)},
          {"spearman_rho", opt(a.spearman)}};
}

}  // namespace

json to_json(const MetricsReport& r) {
  json videos = json::array();
  for (const VideoMetrics& v : r.videos) {
    json frame = json::array(), score = json::array(), user = json::array(),
         keyframe = json::array(), keyshot = json::array();
    for (const FrameRow& row : v.table) {
      frame.push_back(row.frame);
      score.push_back(row.score);
      user.push_back(row.user_mean);
      keyframe.push_back(row.keyframe ? 1 : 0);
      keyshot.push_back(row.keyshot ? 1 : 0);
    }
    videos.push_back({{"id", v.id},
                      {"frames", v.frames},
                      {"keyshot", pr_json(v.keyshot)},
                      {"keyframe", pr_json(v.keyframe)},
                      {"kendall_tau", opt(v.kendall)},
                      {"spearman_rho", opt(v.spearman)},
                      {"table",
                       {{"frame", frame},
                        {"score", score},
                        {"user_mean", user},
                        {"keyframe", keyframe},
                        {"keyshot", keyshot}}}});
  }
  return {{"videos", videos}, {"aggregate", aggregate_json(r.aggregate)}};
}

std::string frame_table_csv(const VideoMetrics& v) {
  std::ostringstream out;
  out.precision(17);
  out << "frame,score,user_mean,keyframe,keyshot\n";
  for (const FrameRow& row : v.table) {
    out << row.frame << ',' << row.score << ',' << row.user_mean << ',' << (row.keyframe ? 1 : 0)
        << ',' << (row.keyshot ? 1 : 0) << '\n';
  }
  return out.str();
}

std::vector<Split> make_splits(std::size_t videos, std::size_t count, double test_fraction,
                               std::uint64_t seed) {
  if (count == 0) throw ConfigError("need at least one split");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test fraction must be in (0, 1)");
  }
  const std::size_t n_test =
      videos == 0 ? 0
                  : std::max<std::size_t>(
                        1, static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(videos))));
  if (n_test == 0 || n_test >= videos) {
    throw DegenerateInputError("cannot split " + std::to_string(videos) +
                               " videos into non-empty train and test sets");
  }
  Rng rng(seed);
  std::vector<Split> splits;
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<std::size_t> order(videos);
    for (std::size_t i = 0; i < videos; ++i) order[i] = i;
    rng.shuffle(order);
    Split split;
    split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.train.begin(), split.train.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

Aggregate mean_of(std::span<const Aggregate> parts) {
  auto mean = [&](auto member) -> std::optional<double> {
    double acc = 0.0;
    std::size_t n = 0;
    for (const Aggregate& a : parts) {
      if (const auto& x = a.*member) {
        acc += *x;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return acc / static_cast<double>(n);
  };
  return {mean(&Aggregate::keyshot_f), mean(&Aggregate::keyframe_f), mean(&Aggregate::kendall),
          mean(&Aggregate::spearman)};
}

SplitSummary evaluate_splits(std::span<const VideoRecord> videos, const TrainConfig& train_config,
                             const EvalConfig& eval_config, std::size_t count,
                             double test_fraction) {
  SplitSummary summary;
  std::vector<Aggregate> parts;
  for (const Split& split : make_splits(videos.size(), count, test_fraction, train_config.seed)) {
    std::vector<VideoRecord> train_set, test_set;
    for (std::size_t i : split.train) train_set.push_back(videos[i]);
    for (std::size_t i : split.test) test_set.push_back(videos[i]);
    const TrainResult trained = train(train_set, train_config);
    summary.reports.push_back(evaluate_videos(trained.params, train_config.k, test_set, eval_config));
    parts.push_back(summary.reports.back().aggregate);
  }
  summary.mean = mean_of(parts);
  return summary;
}

}  // namespace sumgraph
