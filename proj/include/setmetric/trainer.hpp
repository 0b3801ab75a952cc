#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "setmetric/encoder.hpp"
#include "setmetric/evaluation.hpp"
#include "setmetric/losses.hpp"
#include "setmetric/mining.hpp"
#include "setmetric/types.hpp"

namespace setmetric {

/// Encoder plus classifier head: everything the optimizer updates.
struct Model {
  EncoderParams encoder;
  ClassifierHead head;
};

struct ModelGrad {
  EncoderGrad encoder;
  Matrix head;

  static ModelGrad zeros_like(const Model& m);
};

/// Adam state. Moment accumulators are allocated lazily on the first step and
/// mirror the parameter blocks of the model.
struct OptimizerState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// Applies one bias-corrected Adam update to every parameter block.
void adam_update(Model& model, const ModelGrad& grad, OptimizerState& opt);

struct TrainConfig {
  BatchSpec batch;
  LossWeights weights;
  BaseMetric metric = BaseMetric::euclidean;
  SetLossKind set_kind = SetLossKind::hybrid;
  bool use_stri = true;
  bool use_hpsc = true;

  EncoderLayout layout = EncoderLayout::linear;
  int embedding_dim = 64;
  int hidden_dim = 64;

  int epochs = 100;
  int steps_per_epoch = 0;  // 0: num_identities / P
  double learning_rate = 1e-3;
  double lr_decay = 0.1;
  std::vector<int> lr_milestones{40, 80};
  int eval_interval = 10;  // 0 disables intermediate evaluation
  std::size_t cmc_depth = kDefaultCmcDepth;
  std::uint64_t seed = 0;

  void validate() const;
  LossConfig loss_config() const;
  /// Learning rate in effect during (0-based) epoch `epoch`.
  double learning_rate_at(int epoch) const;
};

Model init_model(Eigen::Index input_dim, int num_classes, const TrainConfig& cfg, std::mt19937_64& rng);

/// Loss, gradients and the discrete selections made, without updating.
struct ModelLoss {
  LossEvaluation loss;
  ModelGrad grad;
  std::vector<std::int64_t> signature;  // mining, hinge and ReLU decisions
};

/// Forward and backward pass on a batch of raw clips.
ModelLoss model_loss(const Model& model, const Batch& raw_batch, const TrainConfig& cfg);

struct StepResult {
  LossReport report;
};

/// encode -> aggregate -> mine -> loss + gradients -> Adam. Throws
/// NumericalError naming the term if anything non-finite shows up.
StepResult train_step(Model& model, OptimizerState& opt, const Batch& raw_batch, const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double learning_rate = 0.0;
  LossReport mean_loss;  // averaged over the steps of the epoch
  std::optional<RetrievalResult> retrieval;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::vector<double> epoch_seconds;  // wall clock, kept apart from the numbers
};

struct TrainResult {
  Model model;
  TrainLog log;
  RetrievalResult initial;  // before the first step
  RetrievalResult final;
};

TrainResult train(const Dataset& dataset, const TrainConfig& cfg);

struct FdOptions {
  std::size_t sample_size = 64;
  double step = 1e-4;
  double jitter = 1e-6;
  int max_attempts = 10;
  double denominator_floor = 1e-6;
  std::uint64_t seed = 0;
  /// Test hook: applied to the analytic gradient before comparison.
  std::function<void(ModelGrad&)> corrupt;
};

struct FdReport {
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  std::size_t coordinates = 0;
  int attempts = 0;
};

/// Compares analytic parameter gradients with central differences on a random
/// subset of coordinates. When a perturbation changes any discrete selection
/// the batch is re-jittered and the subset redrawn.
FdReport finite_difference_check(const Model& model, const Batch& raw_batch, const TrainConfig& cfg,
                                 const FdOptions& opts = {});

/// Flat views over the model's parameter blocks, in a fixed order.
std::vector<Matrix*> parameter_blocks(Model& model);
std::vector<const Matrix*> parameter_blocks(const ModelGrad& grad);
std::vector<Matrix*> parameter_blocks(ModelGrad& grad);

}  // namespace setmetric
