#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "setmetric/encoder.hpp"
#include "setmetric/set_distance.hpp"
#include "setmetric/types.hpp"

namespace setmetric {

struct RetrievalResult {
  std::vector<double> cmc;  // cmc[k-1] is rank-k accuracy
  double map = 0.0;
  std::size_t num_queries = 0;
  std::size_t num_gallery = 0;

  double rank(std::size_t k) const { return cmc.at(k - 1); }
  bool operator==(const RetrievalResult&) const = default;
};

inline constexpr std::size_t kDefaultCmcDepth = 20;

/// Non-interpolated AP of a ranked relevance list: the mean over relevant
/// positions of the precision at that position. Zero when nothing is relevant.
double average_precision(const std::vector<bool>& ranked_relevance);

/// Ranks the gallery for every query by ascending distance (stable, so equal
/// distances keep gallery order) and scores CMC up to `k_max` and mAP.
RetrievalResult score_retrieval(std::span<const Vector> query, std::span<const int> query_labels,
                                std::span<const Vector> gallery, std::span<const int> gallery_labels,
                                BaseMetric m = BaseMetric::euclidean, std::size_t k_max = kDefaultCmcDepth);

/// Encodes and mean-pools every clip, splits by pseudo-camera and scores
/// camera-0 queries against the camera-1 gallery.
RetrievalResult evaluate(const EncoderParams& params, const Dataset& dataset, BaseMetric m = BaseMetric::euclidean,
                         std::size_t k_max = kDefaultCmcDepth);

/// Writes encoded frame embeddings in the embedding text format.
void dump_embeddings(const EncoderParams& params, const Dataset& dataset, const std::filesystem::path& path);

}  // namespace setmetric
