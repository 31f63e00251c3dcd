#include "sumgraph/losses.hpp"

#include <algorithm>
#include <string>

#include "sumgraph/errors.hpp"

namespace sumgraph {

void LossWeights::validate() const {
  if (!(lambda >= 0.0) || !(alpha >= 0.0) || !(beta >= 0.0)) {
    throw ConfigError("loss weights must be non-negative");
  }
}

GroundTruth::GroundTruth(Mask labels) : labels_(std::move(labels)) {
  keyframes_ = static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), true));
}

std::vector<std::size_t> GroundTruth::keyframe_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i]) out.push_back(i);
  return out;
}

std::vector<double> GroundTruth::as_reals() const {
  std::vector<double> out(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) out[i] = labels_[i] ? 1.0 : 0.0;
  return out;
}

std::vector<double> class_weights(const GroundTruth& gt) {
  if (!gt.balanced_weights_defined()) {
    throw DegenerateInputError("class weights need 0 < keyframes < frames, got " +
                               std::to_string(gt.keyframe_count()) + " of " +
                               std::to_string(gt.frames()));
  }
  constexpr double kMedianFreq = 0.5;
  const double freq = static_cast<double>(gt.keyframe_count()) / static_cast<double>(gt.frames());
  const double key_w = kMedianFreq / freq;
  const double bg_w = kMedianFreq / (1.0 - freq);
  std::vector<double> w(gt.frames());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = gt.labels()[i] ? key_w : bg_w;
  return w;
}

double supervised_total(const LossValues& v, const LossWeights& w) {
  return v.classification + w.lambda * v.sparsity + w.alpha * v.diversity +
         w.beta * v.reconstruction;
}

double unsupervised_total(const LossValues& v, const LossWeights& w) {
  return v.sparsity + w.alpha * v.diversity + w.beta * v.reconstruction;
}

namespace ad {

Var classification_loss(Tape& t, Var scores, const GroundTruth& gt) {
  const Matrix& y = t.value(scores);
  if (y.rows() != gt.frames() || y.cols() != 1) {
    throw ShapeError("classification loss: " + std::to_string(y.rows()) + " scores for " +
                     std::to_string(gt.frames()) + " labels");
  }
  const std::vector<double> labels = gt.as_reals();
  const std::vector<double> weights = class_weights(gt);
  return weighted_bce(t, scores, labels, weights);
}

Var sparsity_loss(Tape& t, Var a) {
  const Matrix& v = t.value(a);
  if (v.rows() != v.cols()) throw ShapeError("sparsity loss: adjacency must be square");
  return abs_sum(t, a);
}

Var reconstruct(Tape& t, Var z_k, Var a_k, std::span<const std::size_t> selected,
                const ParamVars& p) {
  if (selected.empty()) throw EmptySummaryError("reconstruction needs at least one keyframe");
  Var z_sub = gather_rows(t, z_k, selected);
  Var a_sub = gather_cols(t, gather_rows(t, a_k, selected), selected);
  Var hidden = gcn(t, z_sub, a_sub, p.w_d1, Activation::kRelu);
  return gcn(t, hidden, a_sub, p.w_d2, Activation::kIdentity);
}

Var reconstruction_loss(Tape& t, Var features, Var recon, std::span<const std::size_t> selected) {
  if (selected.empty()) throw EmptySummaryError("reconstruction loss over an empty summary");
  const Matrix& r = t.value(recon);
  if (r.rows() != selected.size() || r.cols() != t.value(features).cols()) {
    throw ShapeError("reconstruction loss: reconstructed block has wrong shape");
  }
  Var diff = sub(t, gather_rows(t, features, selected), recon);
  return scale(t, sum_squares(t, diff), 1.0 / static_cast<double>(selected.size()));
}

Var diversity_loss(Tape& t, Var recon) {
  const std::size_t n = t.value(recon).rows();
  if (n < 2) return t.constant(Matrix(1, 1, 0.0));
  Var unit = normalize_rows(t, recon);
  Var gram = matmul(t, unit, transpose(t, unit));
  return scale(t, sum_off_diagonal(t, gram), 1.0 / static_cast<double>(n * (n - 1)));
}

Var supervised_total(Tape& t, const LossParts& parts, const LossWeights& w) {
  if (!parts.classification.valid()) {
    throw ContractError("supervised total needs a classification term");
  }
  Var total = parts.classification;
  total = add(t, total, scale(t, parts.sparsity, w.lambda));
  total = add(t, total, scale(t, parts.diversity, w.alpha));
  return add(t, total, scale(t, parts.reconstruction, w.beta));
}

Var unsupervised_total(Tape& t, const LossParts& parts, const LossWeights& w) {
  Var total = parts.sparsity;
  total = add(t, total, scale(t, parts.diversity, w.alpha));
  return add(t, total, scale(t, parts.reconstruction, w.beta));
}

}  // namespace ad

// ---------------------------------------------------------------------------
// Plain wrappers

double classification_loss(std::span<const double> scores, const GroundTruth& gt) {
  Tape t;
  Var y = t.constant(Matrix::column(scores));
  return t.value(ad::classification_loss(t, y, gt))(0, 0);
}

double sparsity_loss(const Matrix& a) {
  Tape t;
  return t.value(ad::sparsity_loss(t, t.constant(a)))(0, 0);
}

namespace {

std::vector<std::size_t> mask_indices(const Mask& m) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) out.push_back(i);
  return out;
}

}  // namespace

Matrix reconstruct(const Matrix& z_k, const Adjacency& a_k, const Mask& selected,
                   const ModelParams& p) {
  if (selected.size() != z_k.rows()) throw ShapeError("reconstruct: mask length mismatch");
  Tape t;
  const ParamVars pv = bind_parameters(t, p, false);
  const auto idx = mask_indices(selected);
  return t.value(ad::reconstruct(t, t.constant(z_k), t.constant(a_k.values), idx, pv));
}

double reconstruction_loss(const FeatureMatrix& x, const Matrix& recon, const Mask& selected) {
  if (selected.size() != x.frames()) throw ShapeError("reconstruction loss: mask length mismatch");
  Tape t;
  const auto idx = mask_indices(selected);
  return t.value(ad::reconstruction_loss(t, t.constant(x.values()), t.constant(recon), idx))(0, 0);
}

double diversity_loss(const Matrix& recon) {
  Tape t;
  return t.value(ad::diversity_loss(t, t.constant(recon)))(0, 0);
}

// ---------------------------------------------------------------------------

Objective build_objective(Tape& tape, const ParamVars& p, const FeatureMatrix& x,
                          const GroundTruth* gt, TrainMode mode, const LossWeights& w,
                          std::size_t k,
                          std::optional<std::span<const std::size_t>> fixed_selection) {
  w.validate();
  if (mode == TrainMode::kSupervised && gt == nullptr) {
    throw ConfigError("supervised objective needs ground-truth labels");
  }
  if (gt != nullptr && gt->frames() != x.frames()) {
    throw ShapeError("label count does not match frame count");
  }

  Objective obj;
  obj.forward = forward(tape, p, x, k);
  const Var z_k = obj.forward.z.back();
  const Var a_k = obj.forward.adjacency.back();

  if (fixed_selection) {
    obj.selection.assign(fixed_selection->begin(), fixed_selection->end());
  } else if (mode == TrainMode::kSupervised) {
    obj.selection = gt->keyframe_indices();
  } else {
    const Matrix& y = tape.value(obj.forward.scores);
    for (std::size_t i = 0; i < y.rows(); ++i)
      if (y(i, 0) > 0.5) obj.selection.push_back(i);
    if (obj.selection.empty()) {
      const auto best = std::max_element(y.data().begin(), y.data().end());
      obj.selection.push_back(static_cast<std::size_t>(best - y.data().begin()));
    }
  }

  ad::LossParts& parts = obj.parts;
  if (mode == TrainMode::kSupervised) {
    parts.classification = ad::classification_loss(tape, obj.forward.scores, *gt);
  }
  parts.sparsity = ad::sparsity_loss(tape, a_k);
  const Var features = tape.constant(x.values());
  const Var recon = ad::reconstruct(tape, z_k, a_k, obj.selection, p);
  parts.reconstruction = ad::reconstruction_loss(tape, features, recon, obj.selection);
  parts.diversity = ad::diversity_loss(tape, recon);

  obj.total = mode == TrainMode::kSupervised ? ad::supervised_total(tape, parts, w)
                                             : ad::unsupervised_total(tape, parts, w);

  auto scalar = [&](Var v) { return v.valid() ? tape.value(v)(0, 0) : 0.0; };
  obj.values = {scalar(parts.classification), scalar(parts.sparsity), scalar(parts.diversity),
                scalar(parts.reconstruction), scalar(obj.total)};
  return obj;
}

}  // namespace sumgraph
