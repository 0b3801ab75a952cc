#include "setmetric/set_distance.hpp"

#include <algorithm>
#include <cmath>

#include "setmetric/error.hpp"

namespace setmetric {
namespace {

void require_nonempty(const FrameSet& s, const char* role) {
  if (s.frames.empty()) {
    throw InputError(std::string("set distance undefined for empty set (") + role + ")");
  }
}

void require_same_dim(Eigen::Index da, Eigen::Index db) {
  if (da != db) {
    throw InputError("dimension mismatch: " + std::to_string(da) + " vs " + std::to_string(db));
  }
}

double tree_sum(const double* v, std::size_t n) {
  if (n == 0) return 0.0;
  if (n == 1) return v[0];
  const std::size_t half = n / 2;
  return tree_sum(v, half) + tree_sum(v + half, n - half);
}

// Witness of the min (or max) over every entry, lowest row-major index on ties.
SetDistanceWitness extreme_entry(const DistanceMatrix& d, bool take_max) {
  SetDistanceWitness w{d(0, 0), 0, 0};
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      const double v = d(i, j);
      if (take_max ? v > w.value : v < w.value) {
        w = {v, static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
      }
    }
  }
  return w;
}

SetDistanceWitness hausdorff_witness(const DistanceMatrix& d) {
  // A -> B: sup over rows of the row minimum.
  SetDistanceWitness ab{-1.0, 0, 0};
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < d.cols(); ++j) {
      if (d(i, j) < d(i, best)) best = j;
    }
    if (d(i, best) > ab.value) ab = {d(i, best), static_cast<std::size_t>(i), static_cast<std::size_t>(best)};
  }
#if SETMETRIC_MUTANT == 2
  return ab;
#else
  // B -> A: sup over columns of the column minimum.
  SetDistanceWitness ba{-1.0, 0, 0};
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < d.rows(); ++i) {
      if (d(i, j) < d(best, j)) best = i;
    }
    if (d(best, j) > ba.value) ba = {d(best, j), static_cast<std::size_t>(best), static_cast<std::size_t>(j)};
  }
  return ba.value > ab.value ? ba : ab;
#endif
}

}  // namespace

std::string to_string(BaseMetric m) {
  switch (m) {
    case BaseMetric::euclidean: return "euclidean";
    case BaseMetric::squared_euclidean: return "squared_euclidean";
  }
  return "?";
}

std::string to_string(SetDistanceKind k) {
  switch (k) {
    case SetDistanceKind::ordinary: return "ordinary";
    case SetDistanceKind::hausdorff: return "hausdorff";
    case SetDistanceKind::hybrid_positive: return "hybrid_positive";
    case SetDistanceKind::hybrid_negative: return "hybrid_negative";
  }
  return "?";
}

BaseMetric parse_base_metric(std::string_view name) {
  if (name == "euclidean") return BaseMetric::euclidean;
  if (name == "squared_euclidean") return BaseMetric::squared_euclidean;
  throw InputError("unknown base metric '" + std::string(name) + "' (expected euclidean|squared_euclidean)");
}

SetDistanceKind parse_set_distance_kind(std::string_view name) {
  if (name == "ordinary") return SetDistanceKind::ordinary;
  if (name == "hausdorff") return SetDistanceKind::hausdorff;
  if (name == "hybrid_positive") return SetDistanceKind::hybrid_positive;
  if (name == "hybrid_negative") return SetDistanceKind::hybrid_negative;
  throw InputError("unknown set distance kind '" + std::string(name) +
                   "' (expected ordinary|hausdorff|hybrid_positive|hybrid_negative)");
}

double base_distance(const Vector& a, const Vector& b, BaseMetric m) {
  require_same_dim(a.size(), b.size());
  double sq = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    sq += diff * diff;
  }
  return m == BaseMetric::euclidean ? std::sqrt(sq) : sq;
}

Vector base_distance_grad(const Vector& a, const Vector& b, BaseMetric m) {
  require_same_dim(a.size(), b.size());
  Vector diff = a - b;
  if (m == BaseMetric::squared_euclidean) return 2.0 * diff;
  const double d = base_distance(a, b, m);
  if (d == 0.0) return Vector::Zero(a.size());
  return diff / d;
}

DistanceMatrix pairwise_matrix(const FrameSet& a, const FrameSet& b, BaseMetric m) {
  DistanceMatrix d(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = base_distance(a.frames[i], b.frames[j], m);
    }
  }
  return d;
}

SetDistanceWitness set_distance_witness(const FrameSet& a, const FrameSet& b, SetDistanceKind kind, BaseMetric m) {
  require_nonempty(a, "first");
  require_nonempty(b, "second");
  const DistanceMatrix d = pairwise_matrix(a, b, m);
  switch (kind) {
    case SetDistanceKind::ordinary: return extreme_entry(d, false);
    case SetDistanceKind::hausdorff: return hausdorff_witness(d);
    case SetDistanceKind::hybrid_positive: return extreme_entry(d, true);
    case SetDistanceKind::hybrid_negative:
#if SETMETRIC_MUTANT == 1
      return extreme_entry(d, true);
#else
      return extreme_entry(d, false);
#endif
  }
  throw InputError("unknown set distance kind");
}

double ordinary_distance(const FrameSet& a, const FrameSet& b, BaseMetric m) {
  return set_distance_witness(a, b, SetDistanceKind::ordinary, m).value;
}

double hausdorff_distance(const FrameSet& a, const FrameSet& b, BaseMetric m) {
  return set_distance_witness(a, b, SetDistanceKind::hausdorff, m).value;
}

double hybrid_positive_distance(const FrameSet& a, const FrameSet& p, BaseMetric m) {
  return set_distance_witness(a, p, SetDistanceKind::hybrid_positive, m).value;
}

double hybrid_negative_distance(const FrameSet& a, const FrameSet& n, BaseMetric m) {
  return set_distance_witness(a, n, SetDistanceKind::hybrid_negative, m).value;
}

double set_distance(const FrameSet& a, const FrameSet& b, SetDistanceKind kind, BaseMetric m) {
  return set_distance_witness(a, b, kind, m).value;
}

double sorted_tree_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return tree_sum(values.data(), values.size());
}

FrameEmbedding aggregate(const FrameSet& s, const AggregationConfig& cfg) {
  if (s.frames.empty()) throw InputError("cannot aggregate an empty frame set");
  const Eigen::Index dim = s.dim();
  for (const auto& f : s.frames) require_same_dim(dim, f.size());

  const bool uniform = cfg.weights.empty();
  if (!uniform) {
    if (cfg.weights.size() != s.frames.size()) {
      throw InputError("aggregation weight count " + std::to_string(cfg.weights.size()) +
                       " does not match set size " + std::to_string(s.frames.size()));
    }
    for (double w : cfg.weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("aggregation weights must be finite and nonnegative");
    }
    if (std::abs(sorted_tree_sum(cfg.weights) - 1.0) > 1e-12) {
      throw InputError("aggregation weights must sum to 1");
    }
  }

  FrameEmbedding out(dim);
  std::vector<double> terms(s.frames.size());
  for (Eigen::Index k = 0; k < dim; ++k) {
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      terms[i] = uniform ? s.frames[i][k] : cfg.weights[i] * s.frames[i][k];
    }
    const double total = sorted_tree_sum(terms);
    out[k] = uniform ? total / static_cast<double>(s.frames.size()) : total;
  }
  return out;
}

}  // namespace setmetric
