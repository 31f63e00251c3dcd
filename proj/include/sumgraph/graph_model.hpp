#pragma once

// Forward pass of the recursive graph summarizer.
//
//   A0   = cosine affinity of the input frames
//   X0   = relu(N(A0) X W_C)
//   Z^k  = relu(N(A^{k-1}) Z^{k-1} W_R)             k = 1..K, Z^0 = X0
//   dA^k = sym(rowcos(Z^k W_theta, Z^k W_phi))
//   A^k  = A0 + (dA^1 + ... + dA^k)
//   Y    = sigmoid(N(A^K) Z^K W_S)
//
// where N(A) = D^-1/2 (relu(A) + I) D^-1/2 with D the row sums of
// relu(A) + I. W_R, W_theta and W_phi are shared by all K refinement steps.
//
// Every operation exists twice: once on a Tape (used for training) and once
// as a plain function over Matrix values. The plain versions run the tape
// code on a scratch tape, so the two can never drift apart.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "sumgraph/matrix.hpp"
#include "sumgraph/tape.hpp"

namespace sumgraph {

using Mask = std::vector<bool>;

// Guard added to every norm in a cosine denominator.
inline constexpr double kNormEps = 1e-12;

// Per-frame features of one video, T x d. Rejects T < 2, non-finite entries
// and zero-norm rows (cosine affinity is undefined for those).
class FeatureMatrix {
 public:
  explicit FeatureMatrix(Matrix values);

  std::size_t frames() const { return values_.rows(); }
  std::size_t dims() const { return values_.cols(); }
  const Matrix& values() const { return values_; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  Matrix values_;
};

struct Adjacency {
  Matrix values;
  std::size_t iteration = 0;
};

struct ModelDims {
  std::size_t input = 1024;
  std::size_t hidden = 512;
  std::size_t embedding = 256;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct ModelParams {
  static constexpr std::size_t kCount = 7;
  static constexpr std::array<std::string_view, kCount> kNames = {
      "W_C", "W_R", "W_theta", "W_phi", "W_S", "W_D1", "W_D2"};

  Matrix w_c;      // d x h   initial graph convolution
  Matrix w_r;      // h x h   refinement graph convolution
  Matrix w_theta;  // h x e   residual embedding (left)
  Matrix w_phi;    // h x e   residual embedding (right)
  Matrix w_s;      // h x 1   summarization head
  Matrix w_d1;     // h x h   decoder layer 1
  Matrix w_d2;     // h x d   decoder layer 2

  // Glorot-uniform initialization from a seeded portable generator.
  static ModelParams init(const ModelDims& dims, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& other);

  ModelDims dims() const { return {w_c.rows(), w_c.cols(), w_theta.cols()}; }
  // Throws ShapeError when the seven shapes are not mutually consistent.
  void validate() const;

  std::array<Matrix*, kCount> tensors();
  std::array<const Matrix*, kCount> tensors() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Scores in (0, 1) and the derived keyframe mask (score strictly above 0.5).
struct SummaryScores {
  std::vector<double> y;
  Mask selected;

  static SummaryScores from_scores(std::vector<double> y);
  std::vector<std::size_t> selected_indices() const;
};

struct ForwardTrace {
  std::vector<Adjacency> adjacency;  // A^0 .. A^K
  std::vector<Matrix> residuals;     // dA^1 .. dA^K
  Matrix x0;
  std::vector<Matrix> z;  // Z^1 .. Z^K
  SummaryScores scores;
};

enum class Activation { kIdentity, kRelu };

// -- plain operations --------------------------------------------------------

Adjacency cosine_affinity(const FeatureMatrix& x);
Matrix cosine_affinity(const Matrix& x);
Matrix normalize_adjacency(const Matrix& a);
Matrix gcn_forward(const Matrix& features, const Matrix& adjacency, const Matrix& weight,
                   Activation activation);
std::pair<Adjacency, Matrix> initial_construction(const FeatureMatrix& x, const ModelParams& p);

struct RefineStep {
  Matrix z;
  Matrix residual;
  Adjacency adjacency;
};
RefineStep refine_step(const Matrix& z_prev, const Adjacency& a_prev, const ModelParams& p);

struct RefineResult {
  std::vector<Adjacency> adjacency;  // A^0 .. A^K
  std::vector<Matrix> residuals;     // dA^1 .. dA^K
  std::vector<Matrix> z;             // Z^1 .. Z^K
};
RefineResult refine(const Adjacency& a0, const Matrix& x0, std::size_t k, const ModelParams& p);

SummaryScores summarize_head(const Matrix& z_k, const Adjacency& a_k, const ModelParams& p);

ForwardTrace forward(const FeatureMatrix& x, const ModelParams& p, std::size_t k);

// -- tape operations ---------------------------------------------------------

struct ParamVars {
  Var w_c, w_r, w_theta, w_phi, w_s, w_d1, w_d2;

  std::array<Var, ModelParams::kCount> all() const {
    return {w_c, w_r, w_theta, w_phi, w_s, w_d1, w_d2};
  }
};

// trainable=false records the weights as constants.
ParamVars bind_parameters(Tape& tape, const ModelParams& p, bool trainable);
// Reads d(loss)/d(param) for each weight after Tape::backward.
ModelParams collect_gradients(const Tape& tape, const ParamVars& vars);

struct TapeForward {
  std::vector<Var> adjacency;
  std::vector<Var> residuals;
  Var x0;
  std::vector<Var> z;
  Var scores;  // T x 1
};

namespace ad {

Var normalize_adjacency(Tape& t, Var a);
// Rows divided by (norm + kNormEps).
Var normalize_rows(Tape& t, Var a);
Var gcn(Tape& t, Var features, Var adjacency, Var weight, Activation activation);
// Symmetrized cosine residual for one refinement step.
Var residual(Tape& t, Var z, const ParamVars& p);

}  // namespace ad

TapeForward forward(Tape& tape, const ParamVars& p, const FeatureMatrix& x, std::size_t k);

// Checks A^k == A^0 + (dA^1 + ... + dA^k) bitwise and symmetry of every A^k
// within 1e-9; throws InvariantError. forward() runs this automatically when
// SUMGRAPH_INVARIANT_CHECKS is defined.
void check_refinement_invariants(std::span<const Matrix> adjacency,
                                 std::span<const Matrix> residuals);

}  // namespace sumgraph
