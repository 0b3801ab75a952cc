#include "setmetric/ablation.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "setmetric/error.hpp"

namespace setmetric {
namespace {

void summarize(AblationRow& row) {
  const auto n = static_cast<double>(row.results.size());
  if (row.results.empty()) return;
  double sm = 0.0, s1 = 0.0;
  for (const auto& r : row.results) {
    sm += r.map;
    s1 += r.rank(1);
  }
  row.mean_map = sm / n;
  row.mean_rank1 = s1 / n;
  if (row.results.size() < 2) return;
  double vm = 0.0, v1 = 0.0;
  for (const auto& r : row.results) {
    vm += (r.map - row.mean_map) * (r.map - row.mean_map);
    v1 += (r.rank(1) - row.mean_rank1) * (r.rank(1) - row.mean_rank1);
  }
  row.std_map = std::sqrt(vm / (n - 1.0));
  row.std_rank1 = std::sqrt(v1 / (n - 1.0));
}

}  // namespace

TrainConfig AblationOverride::apply(TrainConfig cfg) const {
  cfg.weights.lambdas = lambdas;
  cfg.set_kind = set_kind;
  cfg.use_hpsc = lambdas[2] != 0.0;
  cfg.use_stri = lambdas[3] != 0.0;
  return cfg;
}

std::vector<AblationRow> run_ablation(const Dataset& dataset, const TrainConfig& base,
                                      std::span<const AblationOverride> rows, std::span<const std::uint64_t> seeds,
                                      int jobs) {
  std::vector<AblationRow> out(rows.size());
  if (rows.empty()) return out;
  if (seeds.empty()) throw InputError("ablation needs at least one seed");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out[r].label = rows[r].label;
    out[r].seeds.assign(seeds.begin(), seeds.end());
    out[r].results.resize(seeds.size());
    rows[r].apply(base).validate();
  }

  const std::size_t cells = rows.size() * seeds.size();
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      const std::size_t r = c / seeds.size();
      const std::size_t s = c % seeds.size();
      try {
        TrainConfig cfg = rows[r].apply(base);
        cfg.seed = seeds[s];
        out[r].results[s] = train(dataset, cfg).final;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const auto n_threads = static_cast<std::size_t>(std::max(1, jobs));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, cells); ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  for (auto& row : out) summarize(row);
  return out;
}

std::string to_string(AblationSuite s) {
  switch (s) {
    case AblationSuite::set_metric: return "set_metric";
    case AblationSuite::hpsc: return "hpsc";
    case AblationSuite::loss_weights: return "loss_weights";
  }
  return "?";
}

AblationSuite parse_ablation_suite(std::string_view name) {
  if (name == "set_metric") return AblationSuite::set_metric;
  if (name == "hpsc") return AblationSuite::hpsc;
  if (name == "loss_weights") return AblationSuite::loss_weights;
  throw InputError("unknown ablation suite '" + std::string(name) + "' (expected set_metric|hpsc|loss_weights)");
}

std::vector<AblationOverride> suite_rows(AblationSuite s) {
  const AblationOverride baseline{"baseline", {1.0, 0.5, 0.0, 0.0}, SetLossKind::hybrid};
  switch (s) {
    case AblationSuite::set_metric:
      return {baseline,
              {"SATL w/ D^o", {1.0, 0.5, 0.0, 0.5}, SetLossKind::ordinary},
              {"SATL w/ D^h", {1.0, 0.5, 0.0, 0.5}, SetLossKind::hausdorff},
              {"SATL w/ D^hd", {1.0, 0.5, 0.0, 0.5}, SetLossKind::hybrid}};
    case AblationSuite::hpsc:
      return {baseline, {"HPSC", {1.0, 0.5, 0.5, 0.0}, SetLossKind::hybrid}};
    case AblationSuite::loss_weights:
      return {{"(i) [1,0,0,0]", {1.0, 0.0, 0.0, 0.0}, SetLossKind::hybrid},
              {"(ii) [1,0.5,0,0]", {1.0, 0.5, 0.0, 0.0}, SetLossKind::hybrid},
              {"(iii) [1,0,0.5,0]", {1.0, 0.0, 0.5, 0.0}, SetLossKind::hybrid},
              {"(iv) [1,0,0,0.5]", {1.0, 0.0, 0.0, 0.5}, SetLossKind::hybrid},
              {"(v) [1,0.5,0.5,0]", {1.0, 0.5, 0.5, 0.0}, SetLossKind::hybrid},
              {"(vi) [1,0.5,0.5,0.5]", {1.0, 0.5, 0.5, 0.5}, SetLossKind::hybrid}};
  }
  return {};
}

}  // namespace setmetric
