#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sumgraph/errors.hpp"
#include "sumgraph/losses.hpp"
#include "sumgraph/random.hpp"

namespace sumgraph {
namespace {

ModelDims small_dims() { return {5, 4, 3}; }

FeatureMatrix random_features(std::size_t t, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  return FeatureMatrix(oracle::random_matrix(t, d, rng));
}

Mask mask_of(std::size_t t, std::initializer_list<std::size_t> on) {
  Mask m(t, false);
  for (std::size_t i : on) m[i] = true;
  return m;
}

TEST(ClassWeightsTest, Balanced) {
  const auto w = class_weights(GroundTruth(mask_of(4, {0, 3})));
  for (double v : w) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(ClassWeightsTest, QuarterKeyframes) {
  const auto w = class_weights(GroundTruth(mask_of(8, {1, 5})));
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(w[i], (i == 1 || i == 5) ? 2.0 : 2.0 / 3.0, 1e-15);
  }
}

TEST(ClassWeightsTest, DegenerateLabelsRejected) {
  EXPECT_THROW(class_weights(GroundTruth(Mask(5, false))), DegenerateInputError);
  EXPECT_THROW(class_weights(GroundTruth(Mask(5, true))), DegenerateInputError);
}

TEST(GroundTruthTest, Accessors) {
  const GroundTruth gt(mask_of(5, {1, 4}));
  EXPECT_EQ(gt.keyframe_count(), 2u);
  EXPECT_EQ(gt.keyframe_indices(), (std::vector<std::size_t>{1, 4}));
  EXPECT_EQ(gt.as_reals(), (std::vector<double>{0, 1, 0, 0, 1}));
  EXPECT_TRUE(gt.balanced_weights_defined());
  EXPECT_FALSE(GroundTruth(Mask(3, false)).balanced_weights_defined());
}

TEST(ClassificationLossTest, HalfScoresGiveLogTwo) {
  const std::vector<double> y(6, 0.5);
  EXPECT_NEAR(classification_loss(y, GroundTruth(mask_of(6, {0, 2, 4}))), std::log(2.0), 1e-15);
}

TEST(ClassificationLossTest, PerfectScoresNearZero) {
  const std::vector<double> y{1.0, 0.0, 0.0, 1.0};
  const double l = classification_loss(y, GroundTruth(mask_of(4, {0, 3})));
  EXPECT_GE(l, 0.0);
  EXPECT_LT(l, 1e-11);
}

TEST(ClassificationLossTest, MatchesHandSum) {
  const std::vector<double> y{0.9, 0.2, 0.4, 0.3};
  const GroundTruth gt(mask_of(4, {0}));
  const double kw = 0.5 / 0.25, bw = 0.5 / 0.75;
  const double expected = -(kw * std::log(0.9) + bw * (std::log(0.8) + std::log(0.6) + std::log(0.7))) / 4;
  EXPECT_NEAR(classification_loss(y, gt), expected, 1e-14);
}

TEST(ClassificationLossTest, LengthMismatchThrows) {
  const std::vector<double> y(3, 0.5);
  EXPECT_THROW(classification_loss(y, GroundTruth(mask_of(4, {0}))), ShapeError);
}

TEST(ClassificationLossTest, PermutationEquivariant) {
  Rng rng(2);
  std::vector<double> y(10);
  for (double& v : y) v = rng.uniform(0.05, 0.95);
  const Mask labels = mask_of(10, {1, 2, 7});
  std::vector<std::size_t> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<double> py(10);
  Mask pl(10);
  for (std::size_t i = 0; i < 10; ++i) {
    py[i] = y[perm[i]];
    pl[i] = labels[perm[i]];
  }
  EXPECT_NEAR(classification_loss(y, GroundTruth(labels)), classification_loss(py, GroundTruth(pl)),
              1e-14);
}

TEST(SparsityLossTest, Examples) {
  EXPECT_EQ(sparsity_loss(Matrix::zeros(3, 3)), 0.0);
  EXPECT_EQ(sparsity_loss(Matrix(3, 3, 1.0)), 9.0);
}

TEST(SparsityLossTest, MatchesLoopAndScalesLinearly) {
  Rng rng(6);
  const Matrix a = oracle::random_matrix(7, 7, rng, -2, 2);
  double loop = 0;
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) loop += std::abs(a(i, j));
  EXPECT_NEAR(sparsity_loss(a), loop, 1e-12);
  EXPECT_NEAR(sparsity_loss(a * -3.5), 3.5 * sparsity_loss(a), 1e-12);
}

Matrix reconstruct_oracle(const Matrix& z, const Matrix& a, const std::vector<std::size_t>& sel,
                          const ModelParams& p) {
  Matrix zs(sel.size(), z.cols()), as(sel.size(), sel.size());
  for (std::size_t i = 0; i < sel.size(); ++i) {
    for (std::size_t c = 0; c < z.cols(); ++c) zs(i, c) = z(sel[i], c);
    for (std::size_t j = 0; j < sel.size(); ++j) as(i, j) = a(sel[i], sel[j]);
  }
  return oracle::gcn(oracle::gcn(zs, as, p.w_d1, true), as, p.w_d2, false);
}

TEST(ReconstructTest, MatchesSubgraphOracle) {
  const FeatureMatrix x = random_features(8, 5, 4);
  const ModelParams p = ModelParams::init(small_dims(), 4);
  const ForwardTrace tr = forward(x, p, 2);
  const Mask sel = mask_of(8, {0, 3, 6, 7});
  const Matrix r = reconstruct(tr.z.back(), tr.adjacency.back(), sel, p);
  ASSERT_EQ(r.rows(), 4u);
  ASSERT_EQ(r.cols(), 5u);
  EXPECT_LE(max_abs_diff(r, reconstruct_oracle(tr.z.back(), tr.adjacency.back().values,
                                               {0, 3, 6, 7}, p)),
            1e-12);
}

TEST(ReconstructTest, SingleAndFullSelections) {
  const FeatureMatrix x = random_features(6, 5, 8);
  const ModelParams p = ModelParams::init(small_dims(), 8);
  const ForwardTrace tr = forward(x, p, 1);
  const Matrix one = reconstruct(tr.z.back(), tr.adjacency.back(), mask_of(6, {2}), p);
  EXPECT_EQ(one.rows(), 1u);
  EXPECT_EQ(one.cols(), 5u);
  const Matrix all = reconstruct(tr.z.back(), tr.adjacency.back(), Mask(6, true), p);
  const Matrix full = gcn_forward(gcn_forward(tr.z.back(), tr.adjacency.back().values, p.w_d1,
                                              Activation::kRelu),
                                  tr.adjacency.back().values, p.w_d2, Activation::kIdentity);
  EXPECT_LE(max_abs_diff(all, full), 1e-14);
}

TEST(ReconstructTest, EmptySelectionSignalled) {
  const FeatureMatrix x = random_features(4, 5, 1);
  const ModelParams p = ModelParams::init(small_dims(), 1);
  const ForwardTrace tr = forward(x, p, 1);
  EXPECT_THROW(reconstruct(tr.z.back(), tr.adjacency.back(), Mask(4, false), p), EmptySummaryError);
}

TEST(ReconstructionLossTest, Examples) {
  const FeatureMatrix x(Matrix{{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(reconstruction_loss(x, Matrix{{1, 2}, {5, 6}}, mask_of(3, {0, 2})), 0.0);
  EXPECT_EQ(reconstruction_loss(x, Matrix{{3, 5}}, mask_of(3, {1})), 1.0);
  EXPECT_NEAR(reconstruction_loss(x, Matrix{{0, 2}, {5, 8}}, mask_of(3, {0, 2})), 2.5, 1e-15);
  EXPECT_THROW(reconstruction_loss(x, Matrix(1, 2), mask_of(3, {0, 2})), ShapeError);
  EXPECT_THROW(reconstruction_loss(x, Matrix(0, 2), Mask(3, false)), EmptySummaryError);
}

TEST(DiversityLossTest, Examples) {
  EXPECT_NEAR(diversity_loss(Matrix{{1, 2}, {1, 2}}), 1.0, 1e-11);
  EXPECT_NEAR(diversity_loss(Matrix{{1, 0}, {0, 3}}), 0.0, 1e-15);
  EXPECT_EQ(diversity_loss(Matrix{{1, 2}}), 0.0);
  EXPECT_NEAR(diversity_loss(Matrix{{1, 0}, {-1, 0}}), -1.0, 1e-11);
}

TEST(DiversityLossTest, MeanOfOffDiagonalCosines) {
  Rng rng(12);
  const Matrix r = oracle::random_matrix(5, 4, rng);
  const Matrix c = oracle::cosine(r);
  double acc = 0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      if (i != j) acc += c(i, j);
  const double d = diversity_loss(r);
  EXPECT_NEAR(d, acc / 20.0, 1e-11);
  EXPECT_GE(d, -1.0);
  EXPECT_LE(d, 1.0);
}

TEST(TotalsTest, WeightedSums) {
  const LossValues v{0.7, 12.0, 0.3, 2.5, 0.0};
  EXPECT_EQ(supervised_total(v, {0, 0, 0}), 0.7);
  EXPECT_EQ(unsupervised_total(v, {0, 0, 0}), 12.0);
  EXPECT_NEAR(supervised_total(v, LossWeights::supervised_defaults()),
              0.7 + 0.001 * 12.0 + 10 * 0.3 + 1 * 2.5, 1e-12);
  EXPECT_NEAR(unsupervised_total(v, LossWeights::unsupervised_defaults()),
              12.0 + 100 * 0.3 + 10 * 2.5, 1e-12);
}

TEST(TotalsTest, Defaults) {
  EXPECT_EQ(LossWeights::supervised_defaults(), (LossWeights{0.001, 10.0, 1.0}));
  const LossWeights u = LossWeights::unsupervised_defaults();
  EXPECT_EQ(u.alpha, 100.0);
  EXPECT_EQ(u.beta, 10.0);
  EXPECT_THROW((LossWeights{-1, 0, 0}.validate()), ConfigError);
}

TEST(ObjectiveTest, ValuesAgreeWithPlainLosses) {
  const FeatureMatrix x = random_features(9, 5, 21);
  const ModelParams p = ModelParams::init(small_dims(), 21);
  const GroundTruth gt(mask_of(9, {1, 4, 5}));
  Tape t;
  const ParamVars v = bind_parameters(t, p, true);
  const LossWeights w = LossWeights::supervised_defaults();
  const Objective o = build_objective(t, v, x, &gt, TrainMode::kSupervised, w, 2);

  const ForwardTrace tr = forward(x, p, 2);
  const Matrix recon = reconstruct(tr.z.back(), tr.adjacency.back(), gt.labels(), p);
  EXPECT_EQ(o.selection, gt.keyframe_indices());
  EXPECT_NEAR(o.values.classification, classification_loss(tr.scores.y, gt), 1e-12);
  EXPECT_NEAR(o.values.sparsity, sparsity_loss(tr.adjacency.back().values), 1e-10);
  EXPECT_NEAR(o.values.reconstruction, reconstruction_loss(x, recon, gt.labels()), 1e-12);
  EXPECT_NEAR(o.values.diversity, diversity_loss(recon), 1e-12);
  EXPECT_NEAR(o.values.total, supervised_total(o.values, w), 1e-12);
  EXPECT_EQ(t.value(o.total)(0, 0), o.values.total);
}

TEST(ObjectiveTest, SupervisedNeedsGroundTruth) {
  const FeatureMatrix x = random_features(4, 5, 1);
  Tape t;
  const ParamVars v = bind_parameters(t, ModelParams::init(small_dims(), 1), true);
  EXPECT_ANY_THROW(build_objective(t, v, x, nullptr, TrainMode::kSupervised,
                                   LossWeights::supervised_defaults(), 1));
}

TEST(ObjectiveTest, UnsupervisedFallsBackToTopFrame) {
  const FeatureMatrix x = random_features(6, 5, 3);
  ModelParams p = ModelParams::init(small_dims(), 3);
  p.w_s = Matrix(4, 1, -5.0);
  const ForwardTrace tr = forward(x, p, 1);
  ASSERT_TRUE(tr.scores.selected_indices().empty());
  const auto best = static_cast<std::size_t>(
      std::max_element(tr.scores.y.begin(), tr.scores.y.end()) - tr.scores.y.begin());
  Tape t;
  const ParamVars v = bind_parameters(t, p, true);
  const Objective o = build_objective(t, v, x, nullptr, TrainMode::kUnsupervised,
                                      LossWeights::unsupervised_defaults(), 1);
  EXPECT_EQ(o.selection, (std::vector<std::size_t>{best}));
  EXPECT_EQ(o.values.diversity, 0.0);
}

// Full objective gradient w.r.t. every parameter, selection held fixed.
class ObjectiveGradientTest : public ::testing::TestWithParam<TrainMode> {};

TEST_P(ObjectiveGradientTest, MatchesFiniteDifferences) {
  const TrainMode mode = GetParam();
  const FeatureMatrix x = random_features(7, 5, 40);
  ModelParams p = ModelParams::init(small_dims(), 40);
  const GroundTruth gt(mask_of(7, {0, 3, 4}));
  const std::vector<std::size_t> sel{0, 3, 4};
  const LossWeights w = mode == TrainMode::kSupervised ? LossWeights::supervised_defaults()
                                                       : LossWeights::unsupervised_defaults();
  auto value = [&](Tape& t, const ParamVars& v) {
    return build_objective(t, v, x, &gt, mode, w, 2, std::span<const std::size_t>(sel)).total;
  };
  Tape t;
  const ParamVars vars = bind_parameters(t, p, true);
  t.backward(value(t, vars));
  const ModelParams g = collect_gradients(t, vars);

  auto tensors = p.tensors();
  const auto grads = g.tensors();
  for (std::size_t i = 0; i < ModelParams::kCount; ++i) {
    const Matrix numeric = oracle::finite_difference(*tensors[i], [&] {
      Tape ft;
      return ft.value(value(ft, bind_parameters(ft, p, false)))(0, 0);
    });
    EXPECT_LE(oracle::max_relative_error(*grads[i], numeric), 1e-4) << ModelParams::kNames[i];
  }
}

INSTANTIATE_TEST_SUITE_P(Modes, ObjectiveGradientTest,
                         ::testing::Values(TrainMode::kSupervised, TrainMode::kUnsupervised),
                         [](const auto& info) {
                           return info.param == TrainMode::kSupervised ? "Supervised"
                                                                       : "Unsupervised";
                         });

TEST(LossGradientTest, EachTermSeparately) {
  const FeatureMatrix x = random_features(6, 5, 50);
  ModelParams p = ModelParams::init(small_dims(), 50);
  const GroundTruth gt(mask_of(6, {1, 2}));
  const std::vector<std::size_t> sel{1, 2};
  const LossWeights unit[] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (const LossWeights& w : unit) {
    auto value = [&](Tape& t, const ParamVars& v) {
      Objective o = build_objective(t, v, x, &gt, TrainMode::kSupervised, w, 1,
                                    std::span<const std::size_t>(sel));
      if (w.lambda == 0 && w.alpha == 0 && w.beta == 0) return o.total;
      return ad::sub(t, o.total, o.parts.classification);
    };
    Tape t;
    const ParamVars vars = bind_parameters(t, p, true);
    t.backward(value(t, vars));
    const ModelParams g = collect_gradients(t, vars);
    auto tensors = p.tensors();
    const auto grads = g.tensors();
    for (std::size_t i = 0; i < ModelParams::kCount; ++i) {
      const Matrix numeric = oracle::finite_difference(*tensors[i], [&] {
        Tape ft;
        return ft.value(value(ft, bind_parameters(ft, p, false)))(0, 0);
      });
      EXPECT_LE(oracle::max_relative_error(*grads[i], numeric), 1e-4)
          << ModelParams::kNames[i] << " lambda=" << w.lambda << " alpha=" << w.alpha
          << " beta=" << w.beta;
    }
  }
}

}  // namespace
}  // namespace sumgraph
