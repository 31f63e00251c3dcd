#include "sumgraph/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "sumgraph/errors.hpp"

namespace sumgraph {

SegmentList::SegmentList(std::vector<Segment> segments, std::size_t frames)
    : segments_(std::move(segments)), frames_(frames) {
  if (segments_.empty()) throw DataError("segment list is empty");
  std::size_t expected = 0;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& s = segments_[i];
    if (s.start != expected) {
      throw DataError("segment " + std::to_string(i) + " starts at " + std::to_string(s.start) +
                      ", expected " + std::to_string(expected) + " (gap or overlap)");
    }
    if (s.end <= s.start) throw DataError("segment " + std::to_string(i) + " is empty");
    expected = s.end;
  }
  if (expected != frames_) {
    throw DataError("segments cover " + std::to_string(expected) + " frames, video has " +
                    std::to_string(frames_));
  }
}

SegmentList SegmentList::uniform(std::size_t frames, std::size_t length) {
  if (length == 0) throw ConfigError("segment length must be positive");
  std::vector<Segment> segs;
  for (std::size_t start = 0; start < frames; start += length) {
    segs.push_back({start, std::min(frames, start + length)});
  }
  return SegmentList(std::move(segs), frames);
}

std::size_t KeyshotSummary::selected_frames() const {
  return static_cast<std::size_t>(std::count(frame_selected.begin(), frame_selected.end(), true));
}

std::vector<bool> knapsack(std::span<const double> values, std::span<const std::size_t> weights,
                           std::size_t capacity) {
  if (values.size() != weights.size()) throw ShapeError("knapsack: values/weights mismatch");
  const std::size_t n = values.size();
  const std::size_t width = capacity + 1;
  std::vector<double> best(width, 0.0);
  std::vector<bool> take(n * width, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t w = weights[i];
    if (w > capacity) continue;
    // Descending capacity so each item is used at most once.
    for (std::size_t c = capacity + 1; c-- > w;) {
      const double with = best[c - w] + values[i];
      if (with > best[c]) {
        best[c] = with;
        take[i * width + c] = true;
      }
    }
  }
  std::vector<bool> chosen(n, false);
  std::size_t c = capacity;
  for (std::size_t i = n; i-- > 0;) {
    if (take[i * width + c]) {
      chosen[i] = true;
      c -= weights[i];
    }
  }
  return chosen;
}

KeyshotSummary frames_to_keyshots(std::span<const double> scores, const SegmentList& segments,
                                  double budget) {
  if (!(budget > 0.0 && budget <= 1.0)) throw ConfigError("keyshot budget must be in (0, 1]");
  if (segments.size() == 0) throw ShapeError("keyshots: empty segment list");
  if (scores.size() != segments.frames()) {
    throw ShapeError("keyshots: " + std::to_string(scores.size()) + " scores for " +
                     std::to_string(segments.frames()) + " frames");
  }
  const auto& segs = segments.segments();
  std::vector<double> values(segs.size());
  std::vector<std::size_t> weights(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    double acc = 0.0;
    for (std::size_t f = segs[i].start; f < segs[i].end; ++f) acc += scores[f];
    weights[i] = segs[i].length();
    values[i] = acc / static_cast<double>(weights[i]);
  }
  // Small slack so products like 0.15 * 60 = 9.000000000000002 floor as intended.
  const auto capacity =
      static_cast<std::size_t>(std::floor(budget * static_cast<double>(scores.size()) + 1e-9));

  KeyshotSummary out;
  out.budget = budget;
  out.segment_selected = knapsack(values, weights, capacity);
  out.frame_selected.assign(scores.size(), false);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (!out.segment_selected[i]) continue;
    for (std::size_t f = segs[i].start; f < segs[i].end; ++f) out.frame_selected[f] = true;
  }
  return out;
}

PrecisionRecall precision_recall_fscore(const std::vector<bool>& predicted,
                                        const std::vector<bool>& reference) {
  if (predicted.size() != reference.size()) {
    throw ShapeError("precision/recall: summaries cover different frame counts");
  }
  std::size_t overlap = 0, n_pred = 0, n_ref = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    n_pred += predicted[i];
    n_ref += reference[i];
    overlap += predicted[i] && reference[i];
  }
  PrecisionRecall out;
  out.precision = n_pred == 0 ? 0.0 : static_cast<double>(overlap) / static_cast<double>(n_pred);
  out.recall = n_ref == 0 ? 0.0 : static_cast<double>(overlap) / static_cast<double>(n_ref);
  const double denom = out.precision + out.recall;
  out.f_score = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

PrecisionRecall precision_recall_fscore(const KeyshotSummary& predicted,
                                        const KeyshotSummary& reference) {
  return precision_recall_fscore(predicted.frame_selected, reference.frame_selected);
}

std::vector<double> UserAnnotations::mean_scores() const {
  if (scores.empty()) return {};
  std::vector<double> mean(scores.front().size(), 0.0);
  for (const auto& user : scores) {
    if (user.size() != mean.size()) throw ShapeError("user score vectors differ in length");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += user[i];
  }
  for (double& m : mean) m /= static_cast<double>(scores.size());
  return mean;
}

PrecisionRecall multi_user_fscore(const KeyshotSummary& predicted,
                                  std::span<const KeyshotSummary> references,
                                  UserAggregation policy) {
  if (references.empty()) throw DegenerateInputError("multi-user F-score needs >= 1 user");
  PrecisionRecall acc;
  PrecisionRecall best{0.0, 0.0, -1.0};
  for (const KeyshotSummary& ref : references) {
    const PrecisionRecall pr = precision_recall_fscore(predicted, ref);
    acc.precision += pr.precision;
    acc.recall += pr.recall;
    acc.f_score += pr.f_score;
    if (pr.f_score > best.f_score) best = pr;
  }
  if (policy == UserAggregation::kMax) return best;
  const double n = static_cast<double>(references.size());
  return {acc.precision / n, acc.recall / n, acc.f_score / n};
}

// ---------------------------------------------------------------------------
// Rank correlation

namespace {

void require_pair(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw ShapeError(std::string(what) + ": length mismatch");
  if (x.size() < 2) throw ShapeError(std::string(what) + ": need at least two observations");
}

std::int64_t tied_pairs(std::int64_t run) { return run * (run - 1) / 2; }

// Counts pairs i < j with v[i] > v[j] while merge-sorting v.
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& scratch,
                              std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, "kendall_tau");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  std::int64_t ties_x = 0, ties_xy = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    ties_x += tied_pairs(static_cast<std::int64_t>(j - i));
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && y[order[b]] == y[order[a]]) ++b;
      ties_xy += tied_pairs(static_cast<std::int64_t>(b - a));
      a = b;
    }
    i = j;
  }

  std::vector<double> ys(n), scratch(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const std::int64_t discordant = count_inversions(ys, scratch, 0, n);

  std::int64_t ties_y = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && ys[j] == ys[i]) ++j;
    ties_y += tied_pairs(static_cast<std::int64_t>(j - i));
    i = j;
  }

  const std::int64_t total = tied_pairs(static_cast<std::int64_t>(n));
  if (total == ties_x || total == ties_y) {
    throw DegenerateInputError("kendall_tau undefined: a ranking is constant");
  }
  const std::int64_t numerator = total - ties_x - ties_y + ties_xy - 2 * discordant;
  return static_cast<double>(numerator) /
         std::sqrt(static_cast<double>(total - ties_x) * static_cast<double>(total - ties_y));
}

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    // Ranks i+1 .. j share their mean.
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, "spearman_rho");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DegenerateInputError("spearman_rho undefined: a rank vector has zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

template <class F>
double mean_over_users(std::span<const double> predicted, const UserAnnotations& users, F corr) {
  if (users.users() == 0) throw DegenerateInputError("rank correlation needs >= 1 user");
  double acc = 0.0;
  for (const auto& u : users.scores) acc += corr(predicted, std::span<const double>(u));
  return acc / static_cast<double>(users.users());
}

}  // namespace

double mean_kendall_tau(std::span<const double> predicted, const UserAnnotations& users) {
  return mean_over_users(predicted, users, kendall_tau);
}

double mean_spearman_rho(std::span<const double> predicted, const UserAnnotations& users) {
  return mean_over_users(predicted, users, spearman_rho);
}

}  // namespace sumgraph
