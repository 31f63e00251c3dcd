#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "sumgraph/adam.hpp"
#include "sumgraph/dataio.hpp"
#include "sumgraph/graph_model.hpp"
#include "sumgraph/losses.hpp"

namespace sumgraph {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 5;
  double lr = 1e-3;
  double lr_decay = 0.1;
  std::size_t decay_every = 20;
  std::size_t k = 5;
  TrainMode mode = TrainMode::kSupervised;
  LossWeights weights = LossWeights::supervised_defaults();
  std::uint64_t seed = 0;
  std::size_t hidden = 512;
  std::size_t embedding = 256;
  // Adds a wall_time_s field to each log record. Off by default so that logs
  // from identical runs are byte-identical.
  bool log_wall_time = false;

  // ConfigError when an invariant is broken.
  void validate() const;
  // FNV-1a over the canonical JSON form.
  std::uint64_t hash() const;
};

// Keys mirror the struct fields ("K" for k, "lambda"/"alpha"/"beta" for the
// loss weights, "mode" is "supervised" or "unsupervised"). Missing keys keep
// their defaults; loss weights default per mode. Unknown keys are a
// ConfigError. An "eval" object is tolerated and left for EvalConfig.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);

const char* mode_name(TrainMode mode);

// lr * lr_decay^floor(epoch / decay_every), epoch counted from 0.
double learning_rate_at(const TrainConfig& c, std::size_t epoch);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  LossValues mean;  // averaged over the videos that contributed this epoch
  std::size_t videos = 0;
  double wall_seconds = 0.0;
};

// One line-delimited JSON record.
std::string format_log_record(const EpochLog& e, bool with_wall_time);

struct TrainResult {
  ModelParams params;
  AdamState adam;
  std::vector<EpochLog> log;
  std::vector<std::string> warnings;
};

using EpochCallback = std::function<void(const EpochLog&, const ModelParams&)>;

// Per batch, every video runs forward/backward on its own tape; gradients are
// summed in a fixed order, averaged over the videos that contributed, and fed
// to a single Adam step. Videos are reshuffled each epoch with the run seed.
// Supervised mode requires labels on every video (ConfigError); videos whose
// labels are all one class are skipped with a warning.
TrainResult train(std::span<const VideoRecord> videos, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace sumgraph
