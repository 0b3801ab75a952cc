#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "setmetric/mining.hpp"
#include "setmetric/set_distance.hpp"
#include "setmetric/types.hpp"

namespace setmetric {

/// Margin and the four term weights [ce, ctri_hm, ctri_hpsc, stri_hm].
struct LossWeights {
  double eta = 0.3;
  std::array<double, 4> lambdas{1.0, 0.5, 0.5, 0.5};
};

/// Value and gradients of a single loss term on one batch. Gradient
/// containers always mirror the batch shape; unused parts stay zero.
struct LossTerm {
  double value = 0.0;
  std::size_t active = 0;                     // hinge terms with positive value
  std::vector<Vector> d_clip_features;        // one per clip
  std::vector<std::vector<Vector>> d_frames;  // [clip][frame]
  Matrix d_prototypes;                        // head-shaped, CE only
  std::vector<std::int64_t> signature;        // discrete selections made while evaluating
};

/// Zero-valued term shaped like `batch` (and `head`, when given).
LossTerm zero_term(const Batch& batch, const ClassifierHead* head = nullptr);

/// Mean over anchors of max(0, d(a, p) - d(a, n) + eta) on clip features.
LossTerm clip_triplet_loss_hm(const Batch& batch, std::span<const TripletIndices> triplets, const LossWeights& w,
                              BaseMetric m = BaseMetric::euclidean);

/// Mean over anchors of max(0, D+ - D- + eta) on frame sets. Gradients reach
/// only the frames realizing the selected min/max pairs.
LossTerm set_triplet_loss_hm(const Batch& batch, std::span<const TripletIndices> triplets, const LossWeights& w,
                             SetLossKind kind, BaseMetric m = BaseMetric::euclidean);

/// Numerically stable softmax.
Vector softmax(const Vector& logits);

/// Mean negative log-likelihood of softmax(W^T x) at the true class. The
/// returned term is sized to `features` (d_clip_features) and the head.
LossTerm softmax_cross_entropy(std::span<const Vector> features, std::span<const int> classes,
                               const ClassifierHead& head);

/// Same, with features and classes taken from the batch.
LossTerm softmax_cross_entropy(const Batch& batch, const ClassifierHead& head);

/// Mean over hard positive pairs of max(0, d(a_i, a_hat) - d(a_i, a_neg) + eta),
/// where a_neg is the nearest clip of another label. Gradient reaches the
/// anchor and the negative. The selected frames receive it through the mean.
LossTerm hpsc_triplet_loss(std::span<const HardPositivePair> pairs, const Batch& batch, const LossWeights& w,
                           BaseMetric m = BaseMetric::euclidean);

struct LossReport {
  double total = 0.0;
  double ce = 0.0;
  double ctri_hm = 0.0;
  double ctri_hpsc = 0.0;
  double stri_hm = 0.0;
  std::array<std::size_t, 4> active_counts{};  // same order as the lambdas
};

/// Weighted sum of the four term values.
LossReport total_loss(double ce, double ctri_hm, double ctri_hpsc, double stri_hm, const LossWeights& w);

/// Which terms run and how, for one step.
struct LossConfig {
  LossWeights weights;
  BaseMetric metric = BaseMetric::euclidean;
  SetLossKind set_kind = SetLossKind::hybrid;
  bool use_stri = true;
  bool use_hpsc = true;
  int T = 4;  // size of the constructed hard positive set
};

struct GradientBundle {
  std::vector<std::vector<Vector>> d_frames;  // [clip][frame]
  Matrix d_prototypes;
};

struct LossEvaluation {
  LossReport report;
  GradientBundle grad;
  std::vector<std::int64_t> signature;  // concatenated selections of all terms
  std::array<LossTerm, 4> terms;        // unweighted, same order as the lambdas
};

/// Mines the batch, evaluates every enabled term and folds the weighted
/// gradients onto frames (clip-level gradients spread as 1/T through the
/// mean) and prototypes. Mining choices are constants of the step.
LossEvaluation total_loss_grad(const Batch& batch, const ClassifierHead& head, const LossConfig& cfg);

}  // namespace setmetric
