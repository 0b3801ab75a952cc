#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "setmetric/set_distance.hpp"
#include "setmetric/types.hpp"

namespace setmetric {

using Rng = std::mt19937_64;

/// P identities x K clips x T frames.
struct BatchSpec {
  int P = 4;
  int K = 4;
  int T = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// The mining universe for one step. `labels` are batch-local (0..P-1);
/// `identities[label]` maps back to the dataset identity, which is also the
/// classifier column.
struct Batch {
  std::vector<FrameSet> clips;
  std::vector<FrameEmbedding> clip_features;
  std::vector<int> labels;
  std::vector<int> identities;
  std::vector<std::size_t> source_clips;  // dataset clip index per batch clip
  std::vector<std::string> warnings;

  std::size_t size() const { return clips.size(); }
  int identity_of(std::size_t clip) const { return identities[static_cast<std::size_t>(labels[clip])]; }
};

/// Assembles a batch from already-encoded clips, filling `clip_features` by
/// uniform aggregation and checking the label invariants.
Batch make_batch(std::vector<FrameSet> clips, std::vector<int> labels, std::vector<int> identities);

/// Draws P distinct identities and K clips each (T frames per clip) from
/// `dataset`. Identities with fewer than K clips are sampled with replacement
/// and a warning is recorded on the batch.
Batch sample_batch(const Dataset& dataset, const BatchSpec& spec, Rng& rng);

struct TripletIndices {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  bool operator==(const TripletIndices&) const = default;
};

/// Set metric used by the set-aware triplet loss for both pair roles.
/// `hybrid` means D^{hd+} for anchor-positive and D^{hd-} for anchor-negative.
enum class SetLossKind { ordinary, hausdorff, hybrid };

std::string to_string(SetLossKind k);
SetLossKind parse_set_loss_kind(std::string_view name);
SetDistanceKind positive_kind(SetLossKind k);
SetDistanceKind negative_kind(SetLossKind k);

/// Batch-hard mining on aggregated clip features: per anchor, the farthest
/// same-label clip and the nearest other-label clip.
std::vector<TripletIndices> hard_mine_clip_triplets(const Batch& batch, BaseMetric m = BaseMetric::euclidean);

/// Batch-hard mining on frame sets with the chosen set metric.
std::vector<TripletIndices> hard_mine_set_triplets(const Batch& batch, BaseMetric m = BaseMetric::euclidean,
                                                   SetLossKind kind = SetLossKind::hybrid);

/// Softmax probability of class `c` under the head, for one embedding.
double class_probability(const FrameEmbedding& x, int c, const ClassifierHead& head);

/// Result of selecting the T least-confident frames of a class.
struct HardPositiveSelection {
  std::vector<std::size_t> selected_indices;  // into the merged frame list, ascending probability
  std::vector<double> probabilities;          // one per merged frame
  FrameEmbedding feature;                     // aggregate of the selected frames
};

/// Picks the `t` frames with the lowest probability of class `c` (stable, so
/// ties go to the lowest index) and aggregates them.
HardPositiveSelection construct_hard_positive_set(std::span<const FrameEmbedding> class_frames, int c,
                                                  const ClassifierHead& head, int t);

/// Location of a frame inside a batch.
struct FrameRef {
  std::size_t clip = 0;
  std::size_t frame = 0;
};

struct HardPositivePair {
  std::size_t anchor = 0;  // batch clip index of a_i
  FrameEmbedding anchor_feature;
  FrameEmbedding constructed_feature;
  int label = 0;  // batch-local
  std::vector<std::size_t> selected_indices;
  std::vector<FrameRef> selected_frames;
};

/// Runs hard positive set construction for every label in the batch, merging
/// all of that label's clips, and forms one pair per clip of the label.
std::vector<HardPositivePair> build_hard_positive_pairs(const Batch& batch, const ClassifierHead& head, int t);

/// Nearest clip of a different label to `anchor_feature`.
std::size_t mine_hard_negative_clip(const FrameEmbedding& anchor_feature, const Batch& batch, int anchor_label,
                                    BaseMetric m = BaseMetric::euclidean);

}  // namespace setmetric
