#include "setmetric/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "setmetric/error.hpp"

namespace setmetric {
namespace {

constexpr std::array<const char*, 4> kTermNames{"ce", "ctri_hm", "ctri_hpsc", "stri_hm"};

bool all_finite(const LossTerm& t) {
  if (!std::isfinite(t.value)) return false;
  for (const auto& v : t.d_clip_features) {
    if (!v.allFinite()) return false;
  }
  for (const auto& clip : t.d_frames) {
    for (const auto& v : clip) {
      if (!v.allFinite()) return false;
    }
  }
  return t.d_prototypes.size() == 0 || t.d_prototypes.allFinite();
}

Batch encode_batch(const EncoderParams& enc, const Batch& raw) {
  std::vector<FrameSet> clips;
  clips.reserve(raw.size());
  for (const auto& c : raw.clips) clips.push_back(encode(enc, c));
  Batch b = make_batch(std::move(clips), raw.labels, raw.identities);
  b.source_clips = raw.source_clips;
  return b;
}

void accumulate(LossReport& acc, const LossReport& r) {
  acc.total += r.total;
  acc.ce += r.ce;
  acc.ctri_hm += r.ctri_hm;
  acc.ctri_hpsc += r.ctri_hpsc;
  acc.stri_hm += r.stri_hm;
  for (std::size_t k = 0; k < 4; ++k) acc.active_counts[k] += r.active_counts[k];
}

}  // namespace

ModelGrad ModelGrad::zeros_like(const Model& m) {
  ModelGrad g;
  g.encoder = EncoderGrad::zeros_like(m.encoder);
  g.head = Matrix::Zero(m.head.prototypes.rows(), m.head.prototypes.cols());
  return g;
}

std::vector<Matrix*> parameter_blocks(Model& model) {
  if (model.encoder.layout == EncoderLayout::linear) return {&model.encoder.projection, &model.head.prototypes};
  return {&model.encoder.hidden_in, &model.encoder.hidden_out, &model.head.prototypes};
}

std::vector<Matrix*> parameter_blocks(ModelGrad& grad) {
  if (grad.encoder.hidden_in.size() == 0) return {&grad.encoder.projection, &grad.head};
  return {&grad.encoder.hidden_in, &grad.encoder.hidden_out, &grad.head};
}

std::vector<const Matrix*> parameter_blocks(const ModelGrad& grad) {
  auto blocks = parameter_blocks(const_cast<ModelGrad&>(grad));
  return {blocks.begin(), blocks.end()};
}

void adam_update(Model& model, const ModelGrad& grad, OptimizerState& opt) {
  auto params = parameter_blocks(model);
  auto grads = parameter_blocks(grad);
  if (params.size() != grads.size()) throw InputError("gradient does not match model layout");
  if (opt.first_moment.empty()) {
    for (const Matrix* p : params) {
      opt.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      opt.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++opt.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    Matrix& p = *params[b];
    const Matrix& g = *grads[b];
    Matrix& m = opt.first_moment[b];
    Matrix& v = opt.second_moment[b];
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const double m_hat = m(k) / c1;
      const double v_hat = v(k) / c2;
      p(k) -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  }
}

void TrainConfig::validate() const {
  batch.validate();
  if (!(learning_rate > 0.0)) throw InputError("train.learning_rate must be > 0");
  if (epochs < 0) throw InputError("train.epochs must be >= 0");
  if (steps_per_epoch < 0) throw InputError("train.steps_per_epoch must be >= 0");
  if (embedding_dim < 1) throw InputError("train.embedding_dim must be >= 1");
  if (layout == EncoderLayout::hidden && hidden_dim < 1) throw InputError("train.hidden_dim must be >= 1");
  if (!(weights.eta >= 0.0)) throw InputError("train.eta must be >= 0");
  for (double l : weights.lambdas) {
    if (!(l >= 0.0)) throw InputError("train.lambdas must be nonnegative");
  }
  for (std::size_t i = 1; i < lr_milestones.size(); ++i) {
    if (lr_milestones[i] <= lr_milestones[i - 1]) throw InputError("train.lr_milestones must be strictly increasing");
  }
  if (!(lr_decay > 0.0)) throw InputError("train.lr_decay must be > 0");
  if (eval_interval < 0) throw InputError("train.eval_interval must be >= 0");
  if (cmc_depth < 1) throw InputError("eval.cmc_depth must be >= 1");
}

LossConfig TrainConfig::loss_config() const {
  LossConfig lc;
  lc.weights = weights;
  lc.metric = metric;
  lc.set_kind = set_kind;
  lc.use_stri = use_stri;
  lc.use_hpsc = use_hpsc;
  lc.T = batch.T;
  return lc;
}

double TrainConfig::learning_rate_at(int epoch) const {
  double lr = learning_rate;
  for (int m : lr_milestones) {
    if (epoch >= m) lr *= lr_decay;
  }
  return lr;
}

Model init_model(Eigen::Index input_dim, int num_classes, const TrainConfig& cfg, std::mt19937_64& rng) {
  Model m;
  m.encoder = EncoderParams::init(input_dim, cfg.embedding_dim, cfg.layout, cfg.hidden_dim, rng);
  m.head.prototypes.resize(cfg.embedding_dim, num_classes);
  glorot_uniform(m.head.prototypes, rng);
  return m;
}

ModelLoss model_loss(const Model& model, const Batch& raw_batch, const TrainConfig& cfg) {
  const Batch batch = encode_batch(model.encoder, raw_batch);
  ModelLoss out;
  out.loss = total_loss_grad(batch, model.head, cfg.loss_config());
  for (std::size_t k = 0; k < 4; ++k) {
    if (!all_finite(out.loss.terms[k])) {
      throw NumericalError(std::string("non-finite value in loss term '") + kTermNames[k] + "'");
    }
  }
  if (!std::isfinite(out.loss.report.total)) throw NumericalError("non-finite total loss");

  out.grad = ModelGrad::zeros_like(model);
  out.grad.head = out.loss.grad.d_prototypes;
  out.signature = out.loss.signature;
  for (std::size_t i = 0; i < raw_batch.size(); ++i) {
    for (std::size_t f = 0; f < raw_batch.clips[i].size(); ++f) {
      const Vector& x = raw_batch.clips[i].frames[f];
      encoder_backward(model.encoder, x, out.loss.grad.d_frames[i][f], out.grad.encoder);
      if (model.encoder.layout == EncoderLayout::hidden) {
        const Vector pre = model.encoder.hidden_in.transpose() * x;
        for (Eigen::Index k = 0; k < pre.size(); ++k) out.signature.push_back(pre[k] > 0.0);
      }
    }
  }
  for (const Matrix* g : parameter_blocks(out.grad)) {
    if (!g->allFinite()) throw NumericalError("non-finite parameter gradient");
  }
  return out;
}

StepResult train_step(Model& model, OptimizerState& opt, const Batch& raw_batch, const TrainConfig& cfg) {
  ModelLoss ml = model_loss(model, raw_batch, cfg);
  adam_update(model, ml.grad, opt);
  return {ml.loss.report};
}

TrainResult train(const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  result.model = init_model(dataset.dim, dataset.num_identities, cfg, rng);
  result.initial = evaluate(result.model.encoder, dataset, cfg.metric, cfg.cmc_depth);

  OptimizerState opt;
  opt.learning_rate = cfg.learning_rate;
  const int steps = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : std::max(1, dataset.num_identities / cfg.batch.P);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    opt.learning_rate = cfg.learning_rate_at(epoch);
    EpochLog entry;
    entry.epoch = epoch;
    entry.learning_rate = opt.learning_rate;
    for (int s = 0; s < steps; ++s) {
      const Batch raw = sample_batch(dataset, cfg.batch, rng);
      accumulate(entry.mean_loss, train_step(result.model, opt, raw, cfg).report);
    }
    const double inv = 1.0 / steps;
    entry.mean_loss.total *= inv;
    entry.mean_loss.ce *= inv;
    entry.mean_loss.ctri_hm *= inv;
    entry.mean_loss.ctri_hpsc *= inv;
    entry.mean_loss.stri_hm *= inv;
    if (cfg.eval_interval > 0 && (epoch + 1) % cfg.eval_interval == 0) {
      entry.retrieval = evaluate(result.model.encoder, dataset, cfg.metric, cfg.cmc_depth);
    }
    result.log.epochs.push_back(std::move(entry));
    result.log.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  result.final = evaluate(result.model.encoder, dataset, cfg.metric, cfg.cmc_depth);
  return result;
}

FdReport finite_difference_check(const Model& model, const Batch& raw_batch, const TrainConfig& cfg,
                                 const FdOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> jitter(-opts.jitter, opts.jitter);

  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    Batch batch = raw_batch;
    if (attempt > 0) {
      for (auto& clip : batch.clips) {
        for (auto& f : clip.frames) {
          for (Eigen::Index k = 0; k < f.size(); ++k) f[k] += jitter(rng);
        }
      }
    }
    const ModelLoss base = model_loss(model, batch, cfg);
    ModelGrad analytic = base.grad;
    if (opts.corrupt) opts.corrupt(analytic);

    Model probe = model;
    auto blocks = parameter_blocks(probe);
    auto grads = parameter_blocks(analytic);
    std::vector<std::pair<std::size_t, Eigen::Index>> coords;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (Eigen::Index k = 0; k < blocks[b]->size(); ++k) coords.emplace_back(b, k);
    }
    std::shuffle(coords.begin(), coords.end(), rng);
    if (coords.size() > opts.sample_size) coords.resize(opts.sample_size);

    FdReport rep;
    rep.attempts = attempt + 1;
    bool tie = false;
    double sum = 0.0;
    for (const auto& [b, k] : coords) {
      double& p = (*blocks[b])(k);
      const double saved = p;
      p = saved + opts.step;
      const ModelLoss plus = model_loss(probe, batch, cfg);
      p = saved - opts.step;
      const ModelLoss minus = model_loss(probe, batch, cfg);
      p = saved;
      if (plus.signature != base.signature || minus.signature != base.signature) {
        tie = true;
        break;
      }
      const double fd = (plus.loss.report.total - minus.loss.report.total) / (2.0 * opts.step);
      const double a = (*grads[b])(k);
      const double denom = std::max({std::abs(a), std::abs(fd), opts.denominator_floor});
      const double rel = std::abs(a - fd) / denom;
      rep.max_rel_error = std::max(rep.max_rel_error, rel);
      sum += rel;
    }
    if (tie) continue;
    rep.coordinates = coords.size();
    rep.mean_rel_error = coords.empty() ? 0.0 : sum / static_cast<double>(coords.size());
    return rep;
  }
  throw NumericalError("selection ties persisted after " + std::to_string(opts.max_attempts) +
                       " resamples; increase the jitter");
}

}  // namespace setmetric
