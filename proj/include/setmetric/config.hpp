#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "setmetric/ablation.hpp"
#include "setmetric/synthdata.hpp"
#include "setmetric/trainer.hpp"

namespace setmetric {

/// Everything a CLI run needs. Every field has a default; a config file only
/// lists what it changes.
struct RunConfig {
  std::uint64_t seed = 0;
  GeneratorConfig generator;
  std::string data_path;  // when set, load embeddings instead of generating
  TrainConfig train;
  int ablation_seeds = 5;
  int jobs = 1;
  std::string metrics_path = "metrics.json";
  std::string curves_csv_path;

  /// Generator and trainer seeds are derived from `seed` on separate streams.
  GeneratorConfig resolved_generator() const;
  TrainConfig resolved_train(std::uint64_t run_seed) const;
  std::vector<std::uint64_t> ablation_seed_list() const;
};

/// splitmix64 of (seed, stream); distinct streams give unrelated seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

nlohmann::json to_json(const RunConfig& cfg);

/// Strict conversion: unknown keys and wrong types raise InputError naming the
/// key path. `source_text`, when given, is used to report the line of the key.
RunConfig run_config_from_json(const nlohmann::json& doc, const std::string& source_text = {});

/// Loads `path` (empty means all defaults), applies SETMETRIC_SEED from the
/// environment, then `overrides` of the form {"train.epochs", "5"}.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});

nlohmann::json to_json(const LossReport& r);
nlohmann::json to_json(const RetrievalResult& r);
nlohmann::json to_json(const TrainLog& log);
nlohmann::json to_json(const AblationRow& row);

}  // namespace setmetric
