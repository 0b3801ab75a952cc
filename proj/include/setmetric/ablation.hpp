#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "setmetric/evaluation.hpp"
#include "setmetric/mining.hpp"
#include "setmetric/trainer.hpp"

namespace setmetric {

/// One ablation configuration: a loss-weight vector and the set metric used by
/// the set-aware term. Terms with zero weight are switched off entirely.
struct AblationOverride {
  std::string label;
  std::array<double, 4> lambdas{1.0, 0.5, 0.5, 0.5};
  SetLossKind set_kind = SetLossKind::hybrid;

  TrainConfig apply(TrainConfig cfg) const;
};

struct AblationRow {
  std::string label;
  std::vector<std::uint64_t> seeds;
  std::vector<RetrievalResult> results;  // one per seed, same order
  double mean_map = 0.0;
  double std_map = 0.0;
  double mean_rank1 = 0.0;
  double std_rank1 = 0.0;
};

/// Trains and evaluates one model per (row, seed). Cells may run on up to
/// `jobs` threads; results are stored in declared order either way.
std::vector<AblationRow> run_ablation(const Dataset& dataset, const TrainConfig& base,
                                      std::span<const AblationOverride> rows, std::span<const std::uint64_t> seeds,
                                      int jobs = 1);

enum class AblationSuite { set_metric, hpsc, loss_weights };

std::string to_string(AblationSuite s);
AblationSuite parse_ablation_suite(std::string_view name);

/// set_metric:   baseline, SATL w/ D^o, SATL w/ D^h, SATL w/ D^hd
/// hpsc:         baseline, +HPSC
/// loss_weights: rows (i)..(vi) of the lambda grid
/// The baseline is CE plus the clip-level hard-mined triplet loss.
std::vector<AblationOverride> suite_rows(AblationSuite s);

}  // namespace setmetric
