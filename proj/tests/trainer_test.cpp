#include <cmath>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "sumgraph/byte_io.hpp"
#include "sumgraph/checkpoint.hpp"
#include "sumgraph/errors.hpp"
#include "sumgraph/evaluation.hpp"
#include "sumgraph/trainer.hpp"

namespace sumgraph {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<VideoRecord> tiny_dataset(std::size_t videos = 4) {
  SyntheticSpec s;
  s.videos = videos;
  s.min_frames = 12;
  s.max_frames = 16;
  s.dims = 8;
  s.segment_length = 2;
  return generate_synthetic(s);
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 4;
  c.batch_size = 2;
  c.k = 2;
  c.hidden = 6;
  c.embedding = 4;
  c.lr = 1e-2;
  c.decay_every = 2;
  c.seed = 3;
  return c;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("sumgraph_trainer_" + name);
}

TEST(TrainConfigTest, DefaultsFollowProtocol) {
  const TrainConfig c;
  EXPECT_EQ(c.epochs, 50u);
  EXPECT_EQ(c.batch_size, 5u);
  EXPECT_EQ(c.lr, 1e-3);
  EXPECT_EQ(c.lr_decay, 0.1);
  EXPECT_EQ(c.decay_every, 20u);
  EXPECT_EQ(c.k, 5u);
  EXPECT_NO_THROW(c.validate());
}

TEST(TrainConfigTest, InvariantsEnforced) {
  auto broken = [](auto edit) {
    TrainConfig c;
    edit(c);
    return c;
  };
  EXPECT_THROW(broken([](TrainConfig& c) { c.epochs = 0; }).validate(), ConfigError);
  EXPECT_THROW(broken([](TrainConfig& c) { c.batch_size = 0; }).validate(), ConfigError);
  EXPECT_THROW(broken([](TrainConfig& c) { c.k = 0; }).validate(), ConfigError);
  EXPECT_THROW(broken([](TrainConfig& c) { c.lr_decay = 0.0; }).validate(), ConfigError);
  EXPECT_THROW(broken([](TrainConfig& c) { c.lr_decay = 1.5; }).validate(), ConfigError);
  EXPECT_NO_THROW(broken([](TrainConfig& c) { c.lr_decay = 1.0; }).validate());
}

TEST(TrainConfigTest, JsonParsing) {
  const TrainConfig u = train_config_from_json(json{{"mode", "unsupervised"}, {"K", 3}, {"epochs", 7}});
  EXPECT_EQ(u.mode, TrainMode::kUnsupervised);
  EXPECT_EQ(u.weights, LossWeights::unsupervised_defaults());
  EXPECT_EQ(u.k, 3u);
  EXPECT_EQ(u.epochs, 7u);
  const TrainConfig s = train_config_from_json(json{{"alpha", 2.0}, {"eval", {{"budget", 0.2}}}});
  EXPECT_EQ(s.weights.alpha, 2.0);
  EXPECT_EQ(s.weights.lambda, 0.001);
  EXPECT_THROW(train_config_from_json(json{{"epoch", 3}}), ConfigError);
  EXPECT_THROW(train_config_from_json(json{{"mode", "semi"}}), ConfigError);
  EXPECT_THROW(train_config_from_json(json{{"epochs", "ten"}}), ConfigError);
  EXPECT_THROW(train_config_from_json(json{{"epochs", 0}}), ConfigError);
  EXPECT_THROW(train_config_from_json(json{{"beta", -1.0}}), ConfigError);
}

TEST(TrainConfigTest, JsonRoundTripAndHash) {
  TrainConfig c = tiny_config();
  const TrainConfig back = train_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.hash(), c.hash());
  TrainConfig d = c;
  d.seed = 4;
  EXPECT_NE(d.hash(), c.hash());
}

TEST(ScheduleTest, StepDecayAtEpochBoundaries) {
  TrainConfig c;
  for (std::size_t e = 0; e < 100; ++e) {
    EXPECT_EQ(learning_rate_at(c, e), 1e-3 * std::pow(0.1, static_cast<double>(e / 20))) << e;
  }
  EXPECT_EQ(learning_rate_at(c, 19), 1e-3);
  EXPECT_NEAR(learning_rate_at(c, 20), 1e-4, 1e-19);
  EXPECT_NEAR(learning_rate_at(c, 45), 1e-5, 1e-20);
}

TEST(LogTest, RecordsAreJsonLines) {
  EpochLog e;
  e.epoch = 3;
  e.lr = 0.5;
  e.videos = 2;
  e.mean.total = 1.25;
  e.wall_seconds = 9.0;
  const std::string plain = format_log_record(e, false);
  EXPECT_EQ(plain.find('\n'), std::string::npos);
  const json j = json::parse(plain);
  EXPECT_EQ(j["epoch"], 3);
  EXPECT_EQ(j["loss"]["total"], 1.25);
  EXPECT_FALSE(j.contains("wall_time_s"));
  EXPECT_TRUE(json::parse(format_log_record(e, true)).contains("wall_time_s"));
}

TEST(TrainTest, DeterministicForFixedSeed) {
  const auto data = tiny_dataset();
  const TrainResult a = train(data, tiny_config());
  const TrainResult b = train(data, tiny_config());
  ASSERT_EQ(a.log.size(), 4u);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(format_log_record(a.log[i], false), format_log_record(b.log[i], false));
  }
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.adam, b.adam);
  TrainConfig other = tiny_config();
  other.seed = 4;
  EXPECT_NE(train(data, other).params, a.params);
}

TEST(TrainTest, LogFollowsSchedule) {
  const TrainResult r = train(tiny_dataset(), tiny_config());
  for (std::size_t e = 0; e < r.log.size(); ++e) {
    EXPECT_EQ(r.log[e].epoch, e);
    EXPECT_EQ(r.log[e].lr, learning_rate_at(tiny_config(), e));
    EXPECT_EQ(r.log[e].videos, 4u);
    EXPECT_TRUE(std::isfinite(r.log[e].mean.total));
  }
  // Two batches per epoch, one Adam step each.
  EXPECT_EQ(r.adam.steps(), 8u);
}

TEST(TrainTest, CallbackSeesEveryEpoch) {
  std::size_t calls = 0;
  train(tiny_dataset(), tiny_config(), [&](const EpochLog& e, const ModelParams& p) {
    EXPECT_EQ(e.epoch, calls);
    EXPECT_EQ(p.dims().hidden, 6u);
    ++calls;
  });
  EXPECT_EQ(calls, 4u);
}

TEST(TrainTest, LossDecreasesOnSmallTask) {
  TrainConfig c = tiny_config();
  c.epochs = 30;
  c.decay_every = 100;
  const TrainResult r = train(tiny_dataset(), c);
  EXPECT_LT(r.log.back().mean.total, r.log.front().mean.total);
}

// Mean loss over consecutive 10-epoch windows of the synthetic overfit run may
// rise at most twice.
TEST(TrainTest, LossTrendNonIncreasingByWindow) {
  TrainConfig c;
  c.epochs = 200;
  c.lr = 3e-2;
  c.decay_every = 100;
  c.hidden = 32;
  c.embedding = 16;
  const TrainResult r = train(generate_synthetic(SyntheticSpec{}), c);
  std::vector<double> windows;
  for (std::size_t start = 0; start < r.log.size(); start += 10) {
    double acc = 0;
    for (std::size_t e = start; e < start + 10; ++e) acc += r.log[e].mean.total;
    windows.push_back(acc / 10);
  }
  int violations = 0;
  for (std::size_t i = 1; i < windows.size(); ++i) violations += windows[i] > windows[i - 1] ? 1 : 0;
  EXPECT_LE(violations, 2);
}

TEST(TrainTest, UnsupervisedRunsWithoutLabels) {
  auto data = tiny_dataset();
  for (auto& v : data) v.labels.reset();
  TrainConfig c = tiny_config();
  c.mode = TrainMode::kUnsupervised;
  c.weights = LossWeights::unsupervised_defaults();
  const TrainResult r = train(data, c);
  EXPECT_EQ(r.log.back().mean.classification, 0.0);
  EXPECT_TRUE(std::isfinite(r.log.back().mean.total));
}

TEST(TrainTest, SupervisedNeedsLabels) {
  auto data = tiny_dataset();
  data[1].labels.reset();
  EXPECT_THROW(train(data, tiny_config()), ConfigError);
}

TEST(TrainTest, DegenerateLabelsSkippedWithWarning) {
  auto data = tiny_dataset();
  data[2].labels = GroundTruth(Mask(data[2].frames(), false));
  const TrainResult r = train(data, tiny_config());
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings.front().find(data[2].id), std::string::npos);
  EXPECT_EQ(r.log.front().videos, 3u);
}

TEST(TrainTest, EmptyDatasetRejected) {
  EXPECT_ANY_THROW(train(std::vector<VideoRecord>{}, tiny_config()));
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  const TrainConfig c = tiny_config();
  const TrainResult r = train(tiny_dataset(), c);
  const Checkpoint ck{r.params, r.adam, 4, 2, c.hash()};
  const auto bytes = encode_checkpoint(ck);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SGRF");
  const Checkpoint back = decode_checkpoint(bytes);
  EXPECT_EQ(back, ck);
  EXPECT_EQ(encode_checkpoint(back), bytes);
}

TEST(CheckpointTest, SaveLoadSaveByteIdenticalAndForwardUnchanged) {
  const auto data = tiny_dataset();
  const TrainConfig c = tiny_config();
  const TrainResult r = train(data, c);
  const fs::path a = temp_path("a.sgrf"), b = temp_path("b.sgrf");
  save_checkpoint(a, {r.params, r.adam, 4, 2, c.hash()});
  const Checkpoint loaded = load_checkpoint(a);
  save_checkpoint(b, loaded);
  EXPECT_EQ(read_file_bytes(a), read_file_bytes(b));
  for (const auto& v : data) {
    EXPECT_EQ(forward(v.features, loaded.params, 2).scores.y,
              forward(v.features, r.params, 2).scores.y);
  }
  fs::remove(a);
  fs::remove(b);
}

TEST(CheckpointTest, HashMismatchWarnsOnly) {
  const fs::path p = temp_path("hash.sgrf");
  const ModelParams params = ModelParams::init({4, 3, 2}, 1);
  const std::array<Matrix, 7> shapes{params.w_c, params.w_r, params.w_theta, params.w_phi,
                                     params.w_s, params.w_d1, params.w_d2};
  save_checkpoint(p, {params, AdamState(shapes), 0, 5, 111});
  std::vector<std::string> warnings;
  EXPECT_NO_THROW(load_checkpoint(p, 222, &warnings));
  ASSERT_EQ(warnings.size(), 1u);
  warnings.clear();
  load_checkpoint(p, 111, &warnings);
  EXPECT_TRUE(warnings.empty());
  fs::remove(p);
}

TEST(CheckpointTest, CorruptFileReportsOffset) {
  const ModelParams params = ModelParams::init({4, 3, 2}, 1);
  const std::array<Matrix, 7> shapes{params.w_c, params.w_r, params.w_theta, params.w_phi,
                                     params.w_s, params.w_d1, params.w_d2};
  auto bytes = encode_checkpoint({params, AdamState(shapes), 0, 5, 1});
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  try {
    decode_checkpoint(truncated);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
  }
  auto bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), DataError);
  EXPECT_THROW(load_checkpoint(temp_path("does_not_exist.sgrf")), DataError);
}

TEST(SplitTest, PartitionsAreDisjointAndSeeded) {
  const auto splits = make_splits(10, 5, 0.2, 9);
  ASSERT_EQ(splits.size(), 5u);
  for (const Split& s : splits) {
    EXPECT_EQ(s.test.size(), 2u);
    EXPECT_EQ(s.train.size(), 8u);
    std::vector<bool> seen(10, false);
    for (auto i : s.test) seen[i] = true;
    for (auto i : s.train) {
      EXPECT_FALSE(seen[i]);
      seen[i] = true;
    }
  }
  const auto again = make_splits(10, 5, 0.2, 9);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(splits[i].test, again[i].test);
}

TEST(SplitTest, EmptySideRejected) {
  EXPECT_THROW(make_splits(1, 5, 0.2, 0), DegenerateInputError);
  EXPECT_THROW(make_splits(0, 5, 0.2, 0), DegenerateInputError);
}

TEST(SplitTest, MeanOfIsArithmeticMean) {
  const Aggregate parts[] = {{0.2, 0.4, 0.1, std::nullopt},
                             {0.4, 0.8, 0.3, std::nullopt},
                             {0.9, 0.3, 0.2, std::nullopt}};
  const Aggregate m = mean_of(parts);
  EXPECT_NEAR(*m.keyshot_f, 0.5, 1e-15);
  EXPECT_NEAR(*m.keyframe_f, 0.5, 1e-15);
  EXPECT_NEAR(*m.kendall, 0.2, 1e-15);
  EXPECT_FALSE(m.spearman.has_value());
}

TEST(EvaluateTest, ReportsEveryMetric) {
  const auto data = tiny_dataset(3);
  const TrainResult r = train(data, tiny_config());
  EvalConfig ec;
  ec.budget = 0.3;
  const MetricsReport rep = evaluate_videos(r.params, 2, data, ec);
  ASSERT_EQ(rep.videos.size(), 3u);
  for (const VideoMetrics& v : rep.videos) {
    EXPECT_EQ(v.table.size(), v.frames);
    ASSERT_TRUE(v.keyshot && v.keyframe && v.kendall && v.spearman);
    EXPECT_GE(v.keyshot->f_score, 0.0);
    EXPECT_LE(v.keyshot->f_score, 1.0);
  }
  ASSERT_TRUE(rep.aggregate.keyshot_f.has_value());
  const json j = to_json(rep);
  EXPECT_EQ(j["videos"].size(), 3u);
  const std::string csv = frame_table_csv(rep.videos[0]);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "frame,score,user_mean,keyframe,keyshot");
  EXPECT_THROW(evaluate_videos(r.params, 2, std::vector<VideoRecord>{}, ec), DegenerateInputError);
}

TEST(EvaluateTest, SplitAverageIsMeanOfSplits) {
  const auto data = tiny_dataset(5);
  TrainConfig c = tiny_config();
  c.epochs = 2;
  EvalConfig ec;
  ec.budget = 0.3;
  const SplitSummary s = evaluate_splits(data, c, ec, 3, 0.2);
  ASSERT_EQ(s.reports.size(), 3u);
  double acc = 0;
  for (const auto& r : s.reports) {
    EXPECT_EQ(r.videos.size(), 1u);
    acc += *r.aggregate.keyshot_f;
  }
  EXPECT_NEAR(*s.mean.keyshot_f, acc / 3.0, 1e-15);
}

TEST(EvalConfigTest, JsonParsing) {
  const EvalConfig e = eval_config_from_json(json{{"eval", {{"budget", 0.2}, {"aggregation", "max"}}}});
  EXPECT_EQ(e.budget, 0.2);
  EXPECT_EQ(e.aggregation, UserAggregation::kMax);
  EXPECT_EQ(eval_config_from_json(json::object()).aggregation, UserAggregation::kMean);
  EXPECT_THROW(eval_config_from_json(json{{"eval", {{"budget", 2.0}}}}), ConfigError);
  EXPECT_THROW(eval_config_from_json(json{{"eval", {{"bugdet", 0.2}}}}), ConfigError);
}

}  // namespace
}  // namespace sumgraph
