#include "setmetric/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "setmetric/error.hpp"
#include "setmetric/synthdata.hpp"

namespace setmetric {

double average_precision(const std::vector<bool>& ranked_relevance) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < ranked_relevance.size(); ++r) {
    if (!ranked_relevance[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

RetrievalResult score_retrieval(std::span<const Vector> query, std::span<const int> query_labels,
                                std::span<const Vector> gallery, std::span<const int> gallery_labels, BaseMetric m,
                                std::size_t k_max) {
  if (query.empty()) throw InputError("retrieval needs at least one query");
  if (gallery.empty()) throw InputError("retrieval needs a nonempty gallery");
  if (query.size() != query_labels.size() || gallery.size() != gallery_labels.size()) {
    throw InputError("retrieval feature and label counts differ");
  }
  if (k_max == 0) throw InputError("CMC depth must be >= 1");

  RetrievalResult res;
  res.num_queries = query.size();
  res.num_gallery = gallery.size();
  std::vector<std::size_t> first_hit_counts(k_max, 0);
  double ap_sum = 0.0;

  std::vector<double> dist(gallery.size());
  std::vector<std::size_t> order(gallery.size());
  for (std::size_t q = 0; q < query.size(); ++q) {
    for (std::size_t g = 0; g < gallery.size(); ++g) dist[g] = base_distance(query[q], gallery[g], m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    std::vector<bool> ranked(gallery.size());
    std::size_t first = gallery.size();
    for (std::size_t r = 0; r < order.size(); ++r) {
      ranked[r] = gallery_labels[order[r]] == query_labels[q];
      if (ranked[r] && first == gallery.size()) first = r;
    }
    if (first < k_max) ++first_hit_counts[first];
    ap_sum += average_precision(ranked);
  }

  res.cmc.resize(k_max);
  std::size_t cum = 0;
  for (std::size_t k = 0; k < k_max; ++k) {
    cum += first_hit_counts[k];
    res.cmc[k] = static_cast<double>(cum) / static_cast<double>(query.size());
  }
  res.map = ap_sum / static_cast<double>(query.size());
  return res;
}

RetrievalResult evaluate(const EncoderParams& params, const Dataset& dataset, BaseMetric m, std::size_t k_max) {
  const QueryGallerySplit split = split_query_gallery(dataset);
  auto features = [&](const std::vector<std::size_t>& idx, std::vector<Vector>& out, std::vector<int>& labels) {
    for (std::size_t i : idx) {
      out.push_back(aggregate(encode(params, dataset.clips[i])));
      labels.push_back(dataset.clips[i].identity);
    }
  };
  std::vector<Vector> q, g;
  std::vector<int> ql, gl;
  features(split.query, q, ql);
  features(split.gallery, g, gl);
  return score_retrieval(q, ql, g, gl, m, k_max);
}

void dump_embeddings(const EncoderParams& params, const Dataset& dataset, const std::filesystem::path& path) {
  Dataset encoded;
  encoded.num_identities = dataset.num_identities;
  encoded.dim = params.output_dim();
  encoded.cameras = dataset.cameras;
  encoded.clips.reserve(dataset.clips.size());
  for (const auto& c : dataset.clips) encoded.clips.push_back(encode(params, c));
  write_embeddings(encoded, path);
}

}  // namespace setmetric
