#include "setmetric/mining.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "setmetric/error.hpp"

namespace setmetric {

void BatchSpec::validate() const {
  if (P < 2) throw InputError("batch P must be >= 2 (got " + std::to_string(P) + ")");
  if (K < 2) throw InputError("batch K must be >= 2 (got " + std::to_string(K) + ")");
  if (T < 1) throw InputError("batch T must be >= 1 (got " + std::to_string(T) + ")");
}

Batch make_batch(std::vector<FrameSet> clips, std::vector<int> labels, std::vector<int> identities) {
  if (clips.size() != labels.size()) throw InputError("batch clip and label counts differ");
  Batch b;
  b.clip_features.reserve(clips.size());
  for (const auto& c : clips) b.clip_features.push_back(aggregate(c));
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= identities.size()) {
      throw InputError("batch label " + std::to_string(l) + " has no identity mapping");
    }
  }
  b.clips = std::move(clips);
  b.labels = std::move(labels);
  b.identities = std::move(identities);
  return b;
}

Batch sample_batch(const Dataset& dataset, const BatchSpec& spec, Rng& rng) {
  spec.validate();
  std::map<int, std::vector<std::size_t>> by_identity;
  for (std::size_t i = 0; i < dataset.clips.size(); ++i) by_identity[dataset.clips[i].identity].push_back(i);
  if (by_identity.size() < static_cast<std::size_t>(spec.P)) {
    throw InputError("dataset has " + std::to_string(by_identity.size()) + " identities, batch needs P=" +
                     std::to_string(spec.P) + " (short by " +
                     std::to_string(spec.P - static_cast<int>(by_identity.size())) + ")");
  }

  std::vector<int> ids;
  ids.reserve(by_identity.size());
  for (const auto& [id, _] : by_identity) ids.push_back(id);
  // Partial Fisher-Yates: the first P entries become the chosen identities.
  for (int i = 0; i < spec.P; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), ids.size() - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[pick(rng)]);
  }
  ids.resize(static_cast<std::size_t>(spec.P));
  std::sort(ids.begin(), ids.end());

  std::vector<FrameSet> clips;
  std::vector<int> labels;
  std::vector<std::size_t> sources;
  std::vector<std::string> warnings;
  for (int label = 0; label < spec.P; ++label) {
    const int id = ids[static_cast<std::size_t>(label)];
    std::vector<std::size_t> pool = by_identity[id];
    std::vector<std::size_t> chosen;
    if (pool.size() >= static_cast<std::size_t>(spec.K)) {
      for (int i = 0; i < spec.K; ++i) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), pool.size() - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
      }
      chosen.assign(pool.begin(), pool.begin() + spec.K);
      std::sort(chosen.begin(), chosen.end());
    } else {
      warnings.push_back("identity " + std::to_string(id) + " has " + std::to_string(pool.size()) +
                         " clips < K=" + std::to_string(spec.K) + "; sampled with replacement");
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (int i = 0; i < spec.K; ++i) chosen.push_back(pool[pick(rng)]);
    }

    for (std::size_t src : chosen) {
      const FrameSet& raw = dataset.clips[src];
      FrameSet clip;
      clip.identity = raw.identity;
      clip.clip_id = raw.clip_id;
      const std::size_t n = raw.frames.size();
      const auto T = static_cast<std::size_t>(spec.T);
      if (n == T) {
        clip.frames = raw.frames;
      } else if (n > T) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < T; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, n - 1);
          std::swap(idx[i], idx[pick(rng)]);
        }
        idx.resize(T);
        std::sort(idx.begin(), idx.end());
        for (std::size_t k : idx) clip.frames.push_back(raw.frames[k]);
      } else {
        warnings.push_back("clip " + std::to_string(raw.clip_id) + " has " + std::to_string(n) +
                           " frames < T=" + std::to_string(spec.T) + "; frames sampled with replacement");
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t i = 0; i < T; ++i) clip.frames.push_back(raw.frames[pick(rng)]);
      }
      clips.push_back(std::move(clip));
      labels.push_back(label);
      sources.push_back(src);
    }
  }

  Batch b = make_batch(std::move(clips), std::move(labels), std::move(ids));
  b.source_clips = std::move(sources);
  b.warnings = std::move(warnings);
  return b;
}

std::string to_string(SetLossKind k) {
  switch (k) {
    case SetLossKind::ordinary: return "ordinary";
    case SetLossKind::hausdorff: return "hausdorff";
    case SetLossKind::hybrid: return "hybrid";
  }
  return "?";
}

SetLossKind parse_set_loss_kind(std::string_view name) {
  if (name == "ordinary") return SetLossKind::ordinary;
  if (name == "hausdorff") return SetLossKind::hausdorff;
  if (name == "hybrid") return SetLossKind::hybrid;
  throw InputError("unknown set loss kind '" + std::string(name) + "' (expected ordinary|hausdorff|hybrid)");
}

SetDistanceKind positive_kind(SetLossKind k) {
  switch (k) {
    case SetLossKind::ordinary: return SetDistanceKind::ordinary;
    case SetLossKind::hausdorff: return SetDistanceKind::hausdorff;
    case SetLossKind::hybrid: return SetDistanceKind::hybrid_positive;
  }
  return SetDistanceKind::hybrid_positive;
}

SetDistanceKind negative_kind(SetLossKind k) {
  switch (k) {
    case SetLossKind::ordinary: return SetDistanceKind::ordinary;
    case SetLossKind::hausdorff: return SetDistanceKind::hausdorff;
    case SetLossKind::hybrid: return SetDistanceKind::hybrid_negative;
  }
  return SetDistanceKind::hybrid_negative;
}

namespace {

template <typename Dist>
std::vector<TripletIndices> mine_batch_hard(const Batch& batch, Dist&& pos_dist, Dist&& neg_dist) {
  const std::size_t n = batch.size();
  std::vector<TripletIndices> out;
  out.reserve(n);
  for (std::size_t a = 0; a < n; ++a) {
    bool have_pos = false, have_neg = false;
    double best_pos = 0.0, best_neg = 0.0;
    TripletIndices t{a, a, a};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      if (batch.labels[j] == batch.labels[a]) {
        const double d = pos_dist(a, j);
        if (!have_pos || d > best_pos) {
          best_pos = d;
          t.positive = j;
          have_pos = true;
        }
      } else {
        const double d = neg_dist(a, j);
        if (!have_neg || d < best_neg) {
          best_neg = d;
          t.negative = j;
          have_neg = true;
        }
      }
    }
    if (!have_pos || !have_neg) {
      throw InputError("anchor " + std::to_string(a) + " has no valid positive or negative in the batch");
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace

std::vector<TripletIndices> hard_mine_clip_triplets(const Batch& batch, BaseMetric m) {
  auto d = [&](std::size_t i, std::size_t j) {
    return base_distance(batch.clip_features[i], batch.clip_features[j], m);
  };
  return mine_batch_hard(batch, d, d);
}

std::vector<TripletIndices> hard_mine_set_triplets(const Batch& batch, BaseMetric m, SetLossKind kind) {
  const SetDistanceKind pk = positive_kind(kind);
  const SetDistanceKind nk = negative_kind(kind);
  using Fn = std::function<double(std::size_t, std::size_t)>;
  Fn pos = [&](std::size_t i, std::size_t j) { return set_distance(batch.clips[i], batch.clips[j], pk, m); };
  Fn neg = [&](std::size_t i, std::size_t j) { return set_distance(batch.clips[i], batch.clips[j], nk, m); };
  return mine_batch_hard(batch, pos, neg);
}

double class_probability(const FrameEmbedding& x, int c, const ClassifierHead& head) {
  if (c < 0 || c >= head.num_classes()) {
    throw InputError("class " + std::to_string(c) + " not covered by classifier head with " +
                     std::to_string(head.num_classes()) + " classes");
  }
  if (x.size() != head.dim()) {
    throw InputError("dimension mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(head.dim()));
  }
  const Vector logits = head.prototypes.transpose() * x;
  const double mx = logits.maxCoeff();
  double denom = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) denom += std::exp(logits[k] - mx);
  return std::exp(logits[c] - mx) / denom;
}

HardPositiveSelection construct_hard_positive_set(std::span<const FrameEmbedding> class_frames, int c,
                                                  const ClassifierHead& head, int t) {
  if (t < 1 || static_cast<std::size_t>(t) > class_frames.size()) {
    throw InputError("hard positive set needs T=" + std::to_string(t) + " frames but only " +
                     std::to_string(class_frames.size()) + " are available");
  }
  HardPositiveSelection sel;
  sel.probabilities.reserve(class_frames.size());
  for (const auto& f : class_frames) sel.probabilities.push_back(class_probability(f, c, head));

  std::vector<std::size_t> order(class_frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sel.probabilities[x] < sel.probabilities[y]; });
  sel.selected_indices.assign(order.begin(), order.begin() + t);

  FrameSet hard;
  for (std::size_t r : sel.selected_indices) hard.frames.push_back(class_frames[r]);
  sel.feature = aggregate(hard);
  return sel;
}

std::vector<HardPositivePair> build_hard_positive_pairs(const Batch& batch, const ClassifierHead& head, int t) {
  std::vector<HardPositivePair> pairs;
  for (int label = 0; label < static_cast<int>(batch.identities.size()); ++label) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch.labels[i] == label) members.push_back(i);
    }
    if (members.empty()) continue;

    std::vector<FrameEmbedding> merged;
    std::vector<FrameRef> refs;
    for (std::size_t clip : members) {
      for (std::size_t f = 0; f < batch.clips[clip].size(); ++f) {
        merged.push_back(batch.clips[clip].frames[f]);
        refs.push_back({clip, f});
      }
    }
    const int cls = batch.identities[static_cast<std::size_t>(label)];
    HardPositiveSelection sel = construct_hard_positive_set(merged, cls, head, t);

    std::vector<FrameRef> chosen;
    for (std::size_t r : sel.selected_indices) chosen.push_back(refs[r]);
    for (std::size_t clip : members) {
      HardPositivePair p;
      p.anchor = clip;
      p.anchor_feature = batch.clip_features[clip];
      p.constructed_feature = sel.feature;
      p.label = label;
      p.selected_indices = sel.selected_indices;
      p.selected_frames = chosen;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

std::size_t mine_hard_negative_clip(const FrameEmbedding& anchor_feature, const Batch& batch, int anchor_label,
                                    BaseMetric m) {
  bool found = false;
  double best = std::numeric_limits<double>::infinity();
  std::size_t idx = 0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (batch.labels[j] == anchor_label) continue;
    const double d = base_distance(anchor_feature, batch.clip_features[j], m);
    if (!found || d < best) {
      best = d;
      idx = j;
      found = true;
    }
  }
  if (!found) throw InputError("no clip of another class in the batch for label " + std::to_string(anchor_label));
  return idx;
}

}  // namespace setmetric
