#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "setmetric/ablation.hpp"
#include "setmetric/config.hpp"
#include "setmetric/error.hpp"

using namespace setmetric;

namespace {

std::filesystem::path write_config(const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / "setmetric_test_config.json";
  std::ofstream(path) << text;
  return path;
}

std::string error_of(const std::string& text, const std::vector<std::pair<std::string, std::string>>& ov = {}) {
  try {
    load_run_config(write_config(text), ov);
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults round trip through json") {
  const RunConfig def;
  const RunConfig back = run_config_from_json(to_json(def));
  CHECK(to_json(back) == to_json(def));
  CHECK(to_json(def)["train"]["lambdas"] == nlohmann::json::array({1.0, 0.5, 0.5, 0.5}));
}

TEST_CASE("file values and overrides") {
  unsetenv("SETMETRIC_SEED");
  const auto path = write_config(R"({"seed": 3, "train": {"epochs": 7, "set_kind": "hausdorff"}})");
  RunConfig c = load_run_config(path);
  CHECK(c.seed == 3);
  CHECK(c.train.epochs == 7);
  CHECK(c.train.set_kind == SetLossKind::hausdorff);
  c = load_run_config(path, {{"train.epochs", "2"}, {"generator.occlusion_mode", "uniform_noise"}});
  CHECK(c.train.epochs == 2);
  CHECK(c.generator.occlusion_mode == OcclusionMode::uniform_noise);

  setenv("SETMETRIC_SEED", "42", 1);
  CHECK(load_run_config(path).seed == 42);
  unsetenv("SETMETRIC_SEED");
}

TEST_CASE("strict errors name the key") {
  CHECK(error_of(R"({"train": {"epoch": 3}})").find("train.epoch") != std::string::npos);
  CHECK(error_of("{\n  \"generator\": {\n    \"occlusion_prob\": 2\n  }\n}").find("generator.occlusion_prob") !=
        std::string::npos);
  CHECK(error_of("{\n  \"generator\": {\n    \"occlusion_prob\": 2\n  }\n}").find("line 3") != std::string::npos);
  CHECK(error_of(R"({"train": {"epochs": "many"}})").find("train.epochs") != std::string::npos);
  CHECK(error_of(R"({"train": {"set_kind": "chamfer"}})").find("set_kind") != std::string::npos);
  CHECK_FALSE(error_of("{not json").empty());
  CHECK_FALSE(error_of("{}", {{"nope.key", "1"}}).empty());
}

TEST_CASE("derived seeds are distinct per stream") {
  CHECK(derive_seed(0, 0) != derive_seed(0, 1));
  CHECK(derive_seed(0, 1) != derive_seed(1, 1));
  RunConfig c;
  c.ablation_seeds = 5;
  const auto seeds = c.ablation_seed_list();
  CHECK(seeds.size() == 5);
  CHECK(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == 5);
  CHECK(c.resolved_train(c.seed).seed == seeds[0]);
}

TEST_CASE("ablation suites") {
  const auto table3 = suite_rows(AblationSuite::set_metric);
  REQUIRE(table3.size() == 4);
  CHECK(table3[0].label == "baseline");
  CHECK(table3[1].set_kind == SetLossKind::ordinary);
  CHECK(table3[2].set_kind == SetLossKind::hausdorff);
  CHECK(table3[3].set_kind == SetLossKind::hybrid);
  CHECK(suite_rows(AblationSuite::hpsc).size() == 2);
  const auto table5 = suite_rows(AblationSuite::loss_weights);
  REQUIRE(table5.size() == 6);
  CHECK(table5[0].lambdas == std::array<double, 4>{1, 0, 0, 0});
  CHECK(table5[5].lambdas == std::array<double, 4>{1, 0.5, 0.5, 0.5});
  CHECK_THROWS_AS(parse_ablation_suite("table9"), InputError);

  const TrainConfig off = table5[0].apply(TrainConfig{});
  CHECK_FALSE(off.use_hpsc);
  CHECK_FALSE(off.use_stri);
}

TEST_CASE("ablation runs cells in declared order regardless of jobs") {
  GeneratorConfig g;
  g.num_identities = 8;
  const Dataset ds = generate(g);
  TrainConfig base;
  base.epochs = 2;
  base.eval_interval = 0;
  const auto rows = suite_rows(AblationSuite::hpsc);
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto serial = run_ablation(ds, base, rows, seeds, 1);
  const auto parallel = run_ablation(ds, base, rows, seeds, 3);
  REQUIRE(serial.size() == 2);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(serial[r].label == rows[r].label);
    CHECK(serial[r].results == parallel[r].results);
    CHECK(serial[r].mean_map == parallel[r].mean_map);
  }
  CHECK(run_ablation(ds, base, std::span<const AblationOverride>{}, seeds).empty());
}
