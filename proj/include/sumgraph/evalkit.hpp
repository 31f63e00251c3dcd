#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sumgraph {

// Half-open frame interval [start, end).
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

// Shot boundaries that partition [0, frames) with no gaps or overlaps.
class SegmentList {
 public:
  // DataError unless `segments` is a gap-free, overlap-free, ordered cover of
  // [0, frames).
  SegmentList(std::vector<Segment> segments, std::size_t frames);

  // Fixed-length shots; the last one takes the remainder.
  static SegmentList uniform(std::size_t frames, std::size_t length);

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t frames() const { return frames_; }
  std::size_t size() const { return segments_.size(); }

  friend bool operator==(const SegmentList&, const SegmentList&) = default;

 private:
  std::vector<Segment> segments_;
  std::size_t frames_ = 0;
};

inline constexpr std::size_t kDefaultSegmentLength = 20;
inline constexpr double kDefaultBudget = 0.15;

struct KeyshotSummary {
  std::vector<bool> segment_selected;
  std::vector<bool> frame_selected;
  double budget = kDefaultBudget;

  std::size_t selected_frames() const;
};

// Segment value is the mean frame score inside it; picks the subset of
// segments with the largest total value whose total length is at most
// floor(budget * T), solved exactly by 0/1 knapsack dynamic programming.
KeyshotSummary frames_to_keyshots(std::span<const double> scores, const SegmentList& segments,
                                  double budget = kDefaultBudget);

// Exact 0/1 knapsack with integer weights and real values. Returns the chosen
// items; ties keep the lighter/earlier solution.
std::vector<bool> knapsack(std::span<const double> values, std::span<const std::size_t> weights,
                           std::size_t capacity);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
};

// Overlap-based scores over frame masks. Empty prediction or reference gives
// 0 for the corresponding ratio; f is 0 when p + r == 0.
PrecisionRecall precision_recall_fscore(const std::vector<bool>& predicted,
                                        const std::vector<bool>& reference);
PrecisionRecall precision_recall_fscore(const KeyshotSummary& predicted,
                                        const KeyshotSummary& reference);

enum class UserAggregation { kMean, kMax };

// Per-frame importance scores from several annotators.
struct UserAnnotations {
  std::vector<std::vector<double>> scores;

  std::size_t users() const { return scores.size(); }
  std::vector<double> mean_scores() const;
};

// Per-user F-score of `predicted` against each reference, combined by
// `policy`. DegenerateInputError for an empty reference list.
PrecisionRecall multi_user_fscore(const KeyshotSummary& predicted,
                                  std::span<const KeyshotSummary> references,
                                  UserAggregation policy);

// Kendall's tau-b (tie-corrected), O(n log n). DegenerateInputError when
// either side is constant; ShapeError for mismatched or < 2 lengths.
double kendall_tau(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average-tie ranks. DegenerateInputError when either
// rank vector has zero variance.
double spearman_rho(std::span<const double> x, std::span<const double> y);
// 1-based ranks, ties receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> x);

// Correlation of `predicted` against every annotator, averaged.
double mean_kendall_tau(std::span<const double> predicted, const UserAnnotations& users);
double mean_spearman_rho(std::span<const double> predicted, const UserAnnotations& users);

}  // namespace sumgraph
