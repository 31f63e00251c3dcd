#include "sumgraph/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "sumgraph/errors.hpp"
#include "sumgraph/random.hpp"

namespace sumgraph {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (k < 1) throw ConfigError("K must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must be in (0, 1]");
  if (decay_every < 1) throw ConfigError("decay_every must be >= 1");
  if (hidden < 1 || embedding < 1) throw ConfigError("hidden and embedding must be >= 1");
  weights.validate();
}

const char* mode_name(TrainMode mode) {
  return mode == TrainMode::kSupervised ? "supervised" : "unsupervised";
}

json to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"lr_decay", c.lr_decay},
              {"decay_every", c.decay_every},
              {"K", c.k},
              {"mode", mode_name(c.mode)},
              {"lambda", c.weights.lambda},
              {"alpha", c.weights.alpha},
              {"beta", c.weights.beta},
              {"seed", c.seed},
              {"hidden", c.hidden},
              {"embedding", c.embedding},
              {"log_wall_time", c.log_wall_time}};
}

std::uint64_t TrainConfig::hash() const {
  const std::string canonical = to_json(*this).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> kKeys = {
      "epochs", "batch_size", "lr",    "lr_decay", "decay_every", "K",         "mode",
      "lambda", "alpha",      "beta",  "seed",     "hidden",      "embedding", "log_wall_time",
      "eval"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  TrainConfig c;
  try {
    if (j.contains("mode")) {
      const std::string m = j.at("mode").get<std::string>();
      if (m == "supervised") {
        c.mode = TrainMode::kSupervised;
      } else if (m == "unsupervised") {
        c.mode = TrainMode::kUnsupervised;
        c.weights = LossWeights::unsupervised_defaults();
      } else {
        throw ConfigError("mode must be 'supervised' or 'unsupervised', got '" + m + "'");
      }
    }
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    read("epochs", c.epochs);
    read("batch_size", c.batch_size);
    read("lr", c.lr);
    read("lr_decay", c.lr_decay);
    read("decay_every", c.decay_every);
    read("K", c.k);
    read("lambda", c.weights.lambda);
    read("alpha", c.weights.alpha);
    read("beta", c.weights.beta);
    read("seed", c.seed);
    read("hidden", c.hidden);
    read("embedding", c.embedding);
    read("log_wall_time", c.log_wall_time);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

double learning_rate_at(const TrainConfig& c, std::size_t epoch) {
  return c.lr * std::pow(c.lr_decay, static_cast<double>(epoch / c.decay_every));
}

std::string format_log_record(const EpochLog& e, bool with_wall_time) {
  json j{{"epoch", e.epoch},
         {"lr", e.lr},
         {"videos", e.videos},
         {"loss",
          {{"total", e.mean.total},
           {"classification", e.mean.classification},
           {"sparsity", e.mean.sparsity},
           {"diversity", e.mean.diversity},
           {"reconstruction", e.mean.reconstruction}}}};
  if (with_wall_time) j["wall_time_s"] = e.wall_seconds;
  return j.dump();
}

namespace {

void add_into(LossValues& acc, const LossValues& v) {
  acc.classification += v.classification;
  acc.sparsity += v.sparsity;
  acc.diversity += v.diversity;
  acc.reconstruction += v.reconstruction;
  acc.total += v.total;
}

LossValues divided(LossValues v, double n) {
  v.classification /= n;
  v.sparsity /= n;
  v.diversity /= n;
  v.reconstruction /= n;
  v.total /= n;
  return v;
}

}  // namespace

TrainResult train(std::span<const VideoRecord> videos, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (videos.empty()) throw ConfigError("training set is empty");
  const std::size_t input_dims = videos.front().features.dims();
  for (const VideoRecord& v : videos) {
    if (v.features.dims() != input_dims) {
      throw DataError("video '" + v.id + "' has " + std::to_string(v.features.dims()) +
                      "-dim features, expected " + std::to_string(input_dims));
    }
    if (config.mode == TrainMode::kSupervised && !v.labels) {
      throw ConfigError("supervised training needs labels, video '" + v.id + "' has none");
    }
  }

  TrainResult result;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (config.mode == TrainMode::kSupervised && !videos[i].labels->balanced_weights_defined()) {
      result.warnings.push_back("skipping video '" + videos[i].id +
                                "': labels contain a single class");
      continue;
    }
    usable.push_back(i);
  }
  if (usable.empty()) throw DataError("no video is usable for training");

  Rng rng(config.seed);
  result.params = ModelParams::init({input_dims, config.hidden, config.embedding}, rng.next_u64());
  {
    std::vector<Matrix> shapes;
    for (const Matrix* m : result.params.tensors()) shapes.push_back(*m);
    result.adam = AdamState(shapes);
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = learning_rate_at(config, epoch);
    std::vector<std::size_t> order = usable;
    rng.shuffle(order);

    LossValues epoch_sum;
    std::size_t epoch_count = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t end = std::min(order.size(), b + config.batch_size);
      ModelParams grad_sum = ModelParams::zeros_like(result.params);
      std::size_t contributed = 0;
      for (std::size_t i = b; i < end; ++i) {
        const VideoRecord& v = videos[order[i]];
        Tape tape;
        const ParamVars pv = bind_parameters(tape, result.params, true);
        const GroundTruth* gt = v.labels ? &*v.labels : nullptr;
        const Objective obj =
            build_objective(tape, pv, v.features, gt, config.mode, config.weights, config.k);
        if (!std::isfinite(obj.values.total)) {
          throw InvariantError("non-finite loss on video '" + v.id + "' at epoch " +
                               std::to_string(epoch));
        }
        tape.backward(obj.total);
        const ModelParams g = collect_gradients(tape, pv);
        auto dst = grad_sum.tensors();
        const auto src = g.tensors();
        for (std::size_t t = 0; t < ModelParams::kCount; ++t) *dst[t] += *src[t];
        add_into(epoch_sum, obj.values);
        ++epoch_count;
        ++contributed;
      }
      std::vector<Matrix> grads;
      for (const Matrix* m : grad_sum.tensors()) {
        grads.push_back(*m * (1.0 / static_cast<double>(contributed)));
        if (!grads.back().all_finite()) throw InvariantError("non-finite gradient");
      }
      std::vector<Matrix> params;
      for (const Matrix* m : result.params.tensors()) params.push_back(*m);
      result.adam.step(params, grads, lr);
      auto dst = result.params.tensors();
      for (std::size_t t = 0; t < ModelParams::kCount; ++t) *dst[t] = std::move(params[t]);
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.videos = epoch_count;
    log.mean = divided(epoch_sum, static_cast<double>(epoch_count));
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log, result.params);
  }
  return result;
}

}  // namespace sumgraph
