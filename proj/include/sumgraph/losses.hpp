#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sumgraph/errors.hpp"
#include "sumgraph/graph_model.hpp"
#include "sumgraph/tape.hpp"

namespace sumgraph {

// Raised when a loss needs a non-empty keyframe set and got none.
class EmptySummaryError : public DegenerateInputError {
 public:
  using DegenerateInputError::DegenerateInputError;
};

struct LossWeights {
  double lambda = 0.0;  // sparsity
  double alpha = 0.0;   // diversity
  double beta = 0.0;    // reconstruction

  static LossWeights supervised_defaults() { return {0.001, 10.0, 1.0}; }
  static LossWeights unsupervised_defaults() { return {0.0, 100.0, 10.0}; }
  // ConfigError on any negative weight.
  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

// Binary per-frame keyframe labels.
class GroundTruth {
 public:
  explicit GroundTruth(Mask labels);

  std::size_t frames() const { return labels_.size(); }
  std::size_t keyframe_count() const { return keyframes_; }
  const Mask& labels() const { return labels_; }
  std::vector<std::size_t> keyframe_indices() const;
  std::vector<double> as_reals() const;
  // 0 < keyframes < frames, i.e. usable by the class-balanced loss.
  bool balanced_weights_defined() const { return keyframes_ > 0 && keyframes_ < frames(); }

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;

 private:
  Mask labels_;
  std::size_t keyframes_ = 0;
};

// Median-frequency balancing with two classes (median frequency 0.5):
// keyframes get 0.5 / (|S|/T), background frames 0.5 / (1 - |S|/T).
// DegenerateInputError when |S| is 0 or T.
std::vector<double> class_weights(const GroundTruth& gt);

struct LossValues {
  double classification = 0.0;
  double sparsity = 0.0;
  double diversity = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
};

double supervised_total(const LossValues& parts, const LossWeights& w);
double unsupervised_total(const LossValues& parts, const LossWeights& w);

// -- plain ---------------------------------------------------------------------

double classification_loss(std::span<const double> scores, const GroundTruth& gt);
double sparsity_loss(const Matrix& a);
// Decoder output for the selected frames (|S| x d). EmptySummaryError when
// nothing is selected.
Matrix reconstruct(const Matrix& z_k, const Adjacency& a_k, const Mask& selected,
                   const ModelParams& p);
double reconstruction_loss(const FeatureMatrix& x, const Matrix& recon, const Mask& selected);
// Mean pairwise cosine similarity between distinct rows; 0 for fewer than two.
double diversity_loss(const Matrix& recon);

// -- tape ----------------------------------------------------------------------

namespace ad {

Var classification_loss(Tape& t, Var scores, const GroundTruth& gt);
Var sparsity_loss(Tape& t, Var a);
Var reconstruct(Tape& t, Var z_k, Var a_k, std::span<const std::size_t> selected,
                const ParamVars& p);
Var reconstruction_loss(Tape& t, Var features, Var recon, std::span<const std::size_t> selected);
Var diversity_loss(Tape& t, Var recon);

struct LossParts {
  Var classification;  // invalid in unsupervised mode
  Var sparsity;
  Var diversity;
  Var reconstruction;
};

Var supervised_total(Tape& t, const LossParts& parts, const LossWeights& w);
Var unsupervised_total(Tape& t, const LossParts& parts, const LossWeights& w);

}  // namespace ad

enum class TrainMode { kSupervised, kUnsupervised };

// Everything one video contributes to a training step.
struct Objective {
  Var total;
  ad::LossParts parts;
  TapeForward forward;
  std::vector<std::size_t> selection;  // frames fed to the decoder
  LossValues values;
};

// Builds the full per-video objective on `tape`.
//
// Supervised mode uses the labelled keyframes as the decoder's selection and
// requires `gt`. Unsupervised mode selects frames scoring above 0.5 (falling
// back to the single best-scoring frame when none does) and treats that
// selection as a constant. `fixed_selection` overrides either rule; gradient
// checks use it to hold the selection still under perturbation.
Objective build_objective(Tape& tape, const ParamVars& p, const FeatureMatrix& x,
                          const GroundTruth* gt, TrainMode mode, const LossWeights& w,
                          std::size_t k,
                          std::optional<std::span<const std::size_t>> fixed_selection = {});

}  // namespace sumgraph
