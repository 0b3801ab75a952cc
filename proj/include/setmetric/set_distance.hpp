#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "setmetric/types.hpp"

namespace setmetric {

/// Element-level metric d(a, b). `squared_euclidean` is symmetric and zero on
/// identical points but does not satisfy the triangle inequality.
enum class BaseMetric { euclidean, squared_euclidean };

/// The four set-to-set distances.
///  - ordinary:         min over all pairs
///  - hausdorff:        max of the two directed sup-inf distances
///  - hybrid_positive:  max over all pairs (anchor-positive role)
///  - hybrid_negative:  min over all pairs (anchor-negative role)
enum class SetDistanceKind { ordinary, hausdorff, hybrid_positive, hybrid_negative };

std::string to_string(BaseMetric m);
std::string to_string(SetDistanceKind k);
BaseMetric parse_base_metric(std::string_view name);
SetDistanceKind parse_set_distance_kind(std::string_view name);

double base_distance(const Vector& a, const Vector& b, BaseMetric m = BaseMetric::euclidean);

/// Gradient of d(a, b) with respect to `a`. For euclidean the gradient at
/// a == b is defined as the zero vector.
Vector base_distance_grad(const Vector& a, const Vector& b, BaseMetric m = BaseMetric::euclidean);

/// Entry (i, j) is base_distance(A.frames[i], B.frames[j], m).
using DistanceMatrix = Matrix;

DistanceMatrix pairwise_matrix(const FrameSet& a, const FrameSet& b, BaseMetric m = BaseMetric::euclidean);

/// A set distance together with the element pair realizing it. Ties resolve
/// to the lowest row-major index.
struct SetDistanceWitness {
  double value = 0.0;
  std::size_t a_index = 0;
  std::size_t b_index = 0;
};

SetDistanceWitness set_distance_witness(const FrameSet& a, const FrameSet& b, SetDistanceKind kind,
                                        BaseMetric m = BaseMetric::euclidean);

double ordinary_distance(const FrameSet& a, const FrameSet& b, BaseMetric m = BaseMetric::euclidean);
double hausdorff_distance(const FrameSet& a, const FrameSet& b, BaseMetric m = BaseMetric::euclidean);
double hybrid_positive_distance(const FrameSet& a, const FrameSet& p, BaseMetric m = BaseMetric::euclidean);
double hybrid_negative_distance(const FrameSet& a, const FrameSet& n, BaseMetric m = BaseMetric::euclidean);

double set_distance(const FrameSet& a, const FrameSet& b, SetDistanceKind kind,
                    BaseMetric m = BaseMetric::euclidean);

/// Weights for clip aggregation. Empty means uniform 1/t (average pooling).
/// The nonlinearity applied after the weighted sum is fixed to identity.
struct AggregationConfig {
  std::vector<double> weights;
};

/// Weighted mean of the frames. Each coordinate is reduced by a pairwise tree
/// over its terms sorted by value, so the result is bit-identical under any
/// permutation of the frames.
FrameEmbedding aggregate(const FrameSet& s, const AggregationConfig& cfg = {});

/// Pairwise (tree) sum of `values` after sorting ascending. Order-independent.
double sorted_tree_sum(std::vector<double> values);

}  // namespace setmetric
