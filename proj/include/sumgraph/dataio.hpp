#pragma once

// On-disk dataset layout
//
//   <dir>/manifest.txt     "sumgraph-dataset 1" then one video id per line
//   <dir>/<id>.sgft        features: "SGFT", u16 version, u32 T, u32 d,
//                          then T*d little-endian float32, row-major
//   <dir>/<id>.ann         optional annotation document, line oriented:
//                            sumgraph-annotation 1
//                            frames <T>
//                            labels <T values in {0,1}>
//                            segments <start end start end ...>
//                            user <T reals>           (repeatable)
//
// '#' starts a comment line in both text formats. Reals are written in
// shortest round-trip form.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sumgraph/evalkit.hpp"
#include "sumgraph/graph_model.hpp"
#include "sumgraph/losses.hpp"

namespace sumgraph {

struct VideoRecord {
  std::string id;
  FeatureMatrix features;
  std::optional<GroundTruth> labels;
  std::optional<UserAnnotations> users;
  std::optional<SegmentList> segments;

  std::size_t frames() const { return features.frames(); }
  // DataError when any optional annotation disagrees with the frame count.
  void validate() const;
};

// -- feature files -------------------------------------------------------------

std::vector<std::uint8_t> encode_features(const FeatureMatrix& x);
// DataError naming the byte offset on truncated or malformed input.
FeatureMatrix decode_features(std::span<const std::uint8_t> bytes);

void save_features(const std::filesystem::path& path, const FeatureMatrix& x);
FeatureMatrix load_features(const std::filesystem::path& path);

// -- annotation documents ----------------------------------------------------------

std::string encode_annotations(const VideoRecord& v);
struct Annotations {
  std::size_t frames = 0;
  std::optional<GroundTruth> labels;
  std::optional<UserAnnotations> users;
  std::optional<SegmentList> segments;
};
Annotations decode_annotations(const std::string& text);

// -- datasets ---------------------------------------------------------------------

// Writes manifest, feature and annotation files; creates `dir` if needed.
void save_dataset(const std::filesystem::path& dir, std::span<const VideoRecord> videos);

// Reads every video named in the manifest. Each file is parsed, then
// validated, then admitted; all failures are gathered into one DataError
// listing each offending path with its reason.
std::vector<VideoRecord> load_dataset(const std::filesystem::path& dir);

// Concatenates several dataset directories. Duplicate ids are a DataError.
std::vector<VideoRecord> load_datasets(std::span<const std::filesystem::path> dirs);

// -- synthetic data ----------------------------------------------------------------

struct SyntheticSpec {
  std::size_t videos = 10;
  std::size_t min_frames = 50;
  std::size_t max_frames = 80;
  std::size_t dims = 64;
  double keyframe_fraction = 0.2;
  std::size_t clusters = 4;
  double noise = 0.05;
  std::size_t users = 3;
  double user_noise = 0.3;
  std::size_t segment_length = 5;
  std::uint64_t seed = 7;

  // ConfigError on out-of-range fields.
  void validate() const;
};

// Planted-structure videos. A dataset-wide set of "story" cluster centres
// (round(clusters * keyframe_fraction), at least 1) is drawn first; each
// video then draws its own background centres. Keyframes are laid down as
// whole uniform segments (the last one possibly partial) and sampled around
// story centres; all other frames around background centres. Every user
// score is label + U(-user_noise, user_noise). Features are rounded to
// float32 so the dataset round-trips through .sgft files exactly.
std::vector<VideoRecord> generate_synthetic(const SyntheticSpec& spec);

}  // namespace sumgraph
