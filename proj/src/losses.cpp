#include "setmetric/losses.hpp"

#include <algorithm>

#include <cmath>

#include "setmetric/error.hpp"

namespace setmetric {
namespace {

void add_pair_grad(LossTerm& term, std::size_t a, std::size_t b, const Vector& ga, double scale) {
  term.d_clip_features[a] += scale * ga;
  term.d_clip_features[b] -= scale * ga;
}

void add_frame_pair_grad(LossTerm& term, FrameRef a, FrameRef b, const Vector& ga, double scale) {
  term.d_frames[a.clip][a.frame] += scale * ga;
  term.d_frames[b.clip][b.frame] -= scale * ga;
}

}  // namespace

LossTerm zero_term(const Batch& batch, const ClassifierHead* head) {
  LossTerm t;
  t.d_clip_features.reserve(batch.size());
  t.d_frames.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::Index dim = batch.clip_features[i].size();
    t.d_clip_features.push_back(Vector::Zero(dim));
    t.d_frames[i].assign(batch.clips[i].size(), Vector::Zero(dim));
  }
  if (head) t.d_prototypes = Matrix::Zero(head->dim(), head->num_classes());
  return t;
}

LossTerm clip_triplet_loss_hm(const Batch& batch, std::span<const TripletIndices> triplets, const LossWeights& w,
                              BaseMetric m) {
  LossTerm term = zero_term(batch);
  if (triplets.empty()) return term;
  const double scale = 1.0 / static_cast<double>(triplets.size());
  double sum = 0.0;
  for (const auto& t : triplets) {
    const Vector& xa = batch.clip_features[t.anchor];
    const Vector& xp = batch.clip_features[t.positive];
    const Vector& xn = batch.clip_features[t.negative];
    const double arg = base_distance(xa, xp, m) - base_distance(xa, xn, m) + w.eta;
    const bool active = arg > 0.0;
    term.signature.insert(term.signature.end(), {static_cast<std::int64_t>(t.positive),
                                                 static_cast<std::int64_t>(t.negative), active});
    if (!active) continue;
    sum += arg;
    ++term.active;
    add_pair_grad(term, t.anchor, t.positive, base_distance_grad(xa, xp, m), scale);
#if SETMETRIC_MUTANT != 3
    add_pair_grad(term, t.anchor, t.negative, base_distance_grad(xa, xn, m), -scale);
#endif
  }
  term.value = sum * scale;
  return term;
}

LossTerm set_triplet_loss_hm(const Batch& batch, std::span<const TripletIndices> triplets, const LossWeights& w,
                             SetLossKind kind, BaseMetric m) {
  LossTerm term = zero_term(batch);
  if (triplets.empty()) return term;
  const double scale = 1.0 / static_cast<double>(triplets.size());
  double sum = 0.0;
  for (const auto& t : triplets) {
    const FrameSet& A = batch.clips[t.anchor];
    const FrameSet& P = batch.clips[t.positive];
    const FrameSet& N = batch.clips[t.negative];
    const SetDistanceWitness pos = set_distance_witness(A, P, positive_kind(kind), m);
    const SetDistanceWitness neg = set_distance_witness(A, N, negative_kind(kind), m);
    const double arg = pos.value - neg.value + w.eta;
    const bool active = arg > 0.0;
    term.signature.insert(term.signature.end(),
                          {static_cast<std::int64_t>(t.positive), static_cast<std::int64_t>(t.negative),
                           static_cast<std::int64_t>(pos.a_index), static_cast<std::int64_t>(pos.b_index),
                           static_cast<std::int64_t>(neg.a_index), static_cast<std::int64_t>(neg.b_index), active});
    if (!active) continue;
    sum += arg;
    ++term.active;
    const FrameRef ap{t.anchor, pos.a_index}, pp{t.positive, pos.b_index};
    const FrameRef an{t.anchor, neg.a_index}, nn{t.negative, neg.b_index};
    add_frame_pair_grad(term, ap, pp, base_distance_grad(A.frames[ap.frame], P.frames[pp.frame], m), scale);
    add_frame_pair_grad(term, an, nn, base_distance_grad(A.frames[an.frame], N.frames[nn.frame], m), -scale);
  }
  term.value = sum * scale;
  return term;
}

Vector softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  Vector p = (logits.array() - mx).exp().matrix();
  return p / p.sum();
}

LossTerm softmax_cross_entropy(std::span<const Vector> features, std::span<const int> classes,
                               const ClassifierHead& head) {
  if (features.size() != classes.size()) throw InputError("feature and class counts differ");
  LossTerm term;
  term.d_prototypes = Matrix::Zero(head.dim(), head.num_classes());
  term.d_clip_features.reserve(features.size());
  if (features.empty()) return term;
  const double scale = 1.0 / static_cast<double>(features.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const int c = classes[i];
    if (c < 0 || c >= head.num_classes()) {
      throw InputError("label " + std::to_string(c) + " out of range for head with " +
                       std::to_string(head.num_classes()) + " classes");
    }
    const Vector logits = head.prototypes.transpose() * features[i];
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    sum += lse - logits[c];

    Vector g = softmax(logits);
    g[c] -= 1.0;
    g *= scale;
    term.d_clip_features.push_back(head.prototypes * g);
    term.d_prototypes.noalias() += features[i] * g.transpose();
  }
  term.value = sum * scale;
  return term;
}

LossTerm softmax_cross_entropy(const Batch& batch, const ClassifierHead& head) {
  std::vector<int> classes;
  classes.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) classes.push_back(batch.identity_of(i));
  LossTerm ce = softmax_cross_entropy(batch.clip_features, classes, head);
  LossTerm term = zero_term(batch, &head);
  term.value = ce.value;
  term.d_clip_features = std::move(ce.d_clip_features);
  term.d_prototypes = std::move(ce.d_prototypes);
  return term;
}

LossTerm hpsc_triplet_loss(std::span<const HardPositivePair> pairs, const Batch& batch, const LossWeights& w,
                           BaseMetric m) {
  LossTerm term = zero_term(batch);
  if (pairs.empty()) return term;
  const double scale = 1.0 / static_cast<double>(pairs.size());
  double sum = 0.0;
  for (const auto& p : pairs) {
    const Vector& xa = batch.clip_features[p.anchor];
    const std::size_t neg = mine_hard_negative_clip(xa, batch, p.label, m);
    const Vector& xn = batch.clip_features[neg];
    const double arg = base_distance(xa, p.constructed_feature, m) - base_distance(xa, xn, m) + w.eta;
    const bool active = arg > 0.0;
    term.signature.push_back(static_cast<std::int64_t>(neg));
    // Only which frames were chosen matters to the gradient, not their rank.
    std::vector<std::size_t> chosen = p.selected_indices;
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t r : chosen) term.signature.push_back(static_cast<std::int64_t>(r));
    term.signature.push_back(active);
    if (!active) continue;
    sum += arg;
    ++term.active;

    const Vector g_pos = base_distance_grad(xa, p.constructed_feature, m);
    const Vector g_neg = base_distance_grad(xa, xn, m);
    term.d_clip_features[p.anchor] += scale * (g_pos - g_neg);
    term.d_clip_features[neg] += scale * g_neg;
    // The constructed feature is the mean of the selected frames.
    const double share = scale / static_cast<double>(p.selected_frames.size());
    for (const FrameRef& f : p.selected_frames) term.d_frames[f.clip][f.frame] -= share * g_pos;
  }
  term.value = sum * scale;
  return term;
}

LossReport total_loss(double ce, double ctri_hm, double ctri_hpsc, double stri_hm, const LossWeights& w) {
  LossReport r;
  r.ce = ce;
  r.ctri_hm = ctri_hm;
  r.ctri_hpsc = ctri_hpsc;
  r.stri_hm = stri_hm;
  r.total = w.lambdas[0] * ce + w.lambdas[1] * ctri_hm + w.lambdas[2] * ctri_hpsc + w.lambdas[3] * stri_hm;
  return r;
}

LossEvaluation total_loss_grad(const Batch& batch, const ClassifierHead& head, const LossConfig& cfg) {
  LossEvaluation ev;
  ev.terms[0] = softmax_cross_entropy(batch, head);

  const auto clip_triplets = hard_mine_clip_triplets(batch, cfg.metric);
  ev.terms[1] = clip_triplet_loss_hm(batch, clip_triplets, cfg.weights, cfg.metric);

  if (cfg.use_hpsc) {
    const auto pairs = build_hard_positive_pairs(batch, head, cfg.T);
    ev.terms[2] = hpsc_triplet_loss(pairs, batch, cfg.weights, cfg.metric);
  } else {
    ev.terms[2] = zero_term(batch);
  }

  if (cfg.use_stri) {
    const auto set_triplets = hard_mine_set_triplets(batch, cfg.metric, cfg.set_kind);
    ev.terms[3] = set_triplet_loss_hm(batch, set_triplets, cfg.weights, cfg.set_kind, cfg.metric);
  } else {
    ev.terms[3] = zero_term(batch);
  }

  ev.report = total_loss(ev.terms[0].value, ev.terms[1].value, ev.terms[2].value, ev.terms[3].value, cfg.weights);
  for (std::size_t k = 0; k < 4; ++k) ev.report.active_counts[k] = ev.terms[k].active;

  ev.grad.d_frames = zero_term(batch).d_frames;
  ev.grad.d_prototypes = cfg.weights.lambdas[0] * ev.terms[0].d_prototypes;
  for (std::size_t k = 0; k < 4; ++k) {
    const double lambda = cfg.weights.lambdas[k];
    const LossTerm& t = ev.terms[k];
    ev.signature.insert(ev.signature.end(), t.signature.begin(), t.signature.end());
    if (lambda == 0.0) continue;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double share = lambda / static_cast<double>(batch.clips[i].size());
      for (std::size_t f = 0; f < batch.clips[i].size(); ++f) {
        ev.grad.d_frames[i][f] += share * t.d_clip_features[i] + lambda * t.d_frames[i][f];
      }
    }
  }
  return ev;
}

}  // namespace setmetric
