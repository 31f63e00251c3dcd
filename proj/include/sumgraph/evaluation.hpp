#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "sumgraph/dataio.hpp"
#include "sumgraph/evalkit.hpp"
#include "sumgraph/graph_model.hpp"
#include "sumgraph/trainer.hpp"

namespace sumgraph {

struct EvalConfig {
  double budget = kDefaultBudget;
  UserAggregation aggregation = UserAggregation::kMean;
  // Used for videos that carry no segment list.
  std::size_t segment_length = kDefaultSegmentLength;

  void validate() const;
};

// Reads the optional "eval" object of a config document.
EvalConfig eval_config_from_json(const nlohmann::json& j);

struct FrameRow {
  std::size_t frame = 0;
  double score = 0.0;
  double user_mean = 0.0;
  bool keyframe = false;  // score > 0.5
  bool keyshot = false;   // inside a selected keyshot
};

struct VideoMetrics {
  std::string id;
  std::size_t frames = 0;
  // Keyshot summary against user (or label-derived) keyshots.
  std::optional<PrecisionRecall> keyshot;
  // Thresholded keyframes against the labels.
  std::optional<PrecisionRecall> keyframe;
  std::optional<double> kendall;
  std::optional<double> spearman;
  std::vector<FrameRow> table;
};

struct Aggregate {
  std::optional<double> keyshot_f;
  std::optional<double> keyframe_f;
  std::optional<double> kendall;
  std::optional<double> spearman;
};

struct MetricsReport {
  std::vector<VideoMetrics> videos;
  Aggregate aggregate;
};

// Forward pass plus all metrics per video. DegenerateInputError for an empty
// video list.
MetricsReport evaluate_videos(const ModelParams& params, std::size_t k,
                              std::span<const VideoRecord> videos, const EvalConfig& config);

VideoMetrics evaluate_video(const ModelParams& params, std::size_t k, const VideoRecord& video,
                            const EvalConfig& config);

nlohmann::json to_json(const MetricsReport& r);
// CSV with header frame,score,user_mean,keyframe,keyshot.
std::string frame_table_csv(const VideoMetrics& v);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded random partitions; round(test_fraction * n) test videos each
// (at least 1). DegenerateInputError if either side would be empty.
std::vector<Split> make_splits(std::size_t videos, std::size_t count, double test_fraction,
                               std::uint64_t seed);

struct SplitSummary {
  std::vector<MetricsReport> reports;
  Aggregate mean;  // arithmetic mean of each split's aggregate
};

Aggregate mean_of(std::span<const Aggregate> parts);

// Train on each split's training videos, evaluate on its test videos, and
// average over splits.
SplitSummary evaluate_splits(std::span<const VideoRecord> videos, const TrainConfig& train_config,
                             const EvalConfig& eval_config, std::size_t count = 5,
                             double test_fraction = 0.2);

}  // namespace sumgraph
