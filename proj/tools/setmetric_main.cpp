// setmetric command-line driver.
//
// Every command that takes a config also accepts `--<key.path>=<value>`
// overrides, e.g. `setmetric train --config run.json --train.epochs=5`.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "setmetric/ablation.hpp"
#include "setmetric/config.hpp"
#include "setmetric/error.hpp"
#include "setmetric/evaluation.hpp"
#include "setmetric/set_distance.hpp"
#include "setmetric/synthdata.hpp"
#include "setmetric/trainer.hpp"
#include "setmetric/verify.hpp"

namespace sm = setmetric;
using nlohmann::json;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

using Overrides = std::vector<std::pair<std::string, std::string>>;

Overrides parse_overrides(const std::vector<std::string>& extras) {
  Overrides out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() < 3) {
      throw sm::InputError("unexpected argument '" + arg + "'");
    }
    const auto eq = arg.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(arg.substr(2, eq - 2), arg.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      out.emplace_back(arg.substr(2), extras[++i]);
    } else {
      throw sm::InputError("override '" + arg + "' has no value");
    }
  }
  return out;
}

sm::Dataset load_dataset(const sm::RunConfig& cfg) {
  if (!cfg.data_path.empty()) return sm::load_embeddings(cfg.data_path);
  return sm::generate(cfg.resolved_generator());
}

json document_header(const sm::RunConfig& cfg, const std::string& command) {
  return json{{"command", command}, {"version", SETMETRIC_VERSION}, {"seed", cfg.seed}, {"config", sm::to_json(cfg)}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sm::InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw sm::InputError("write failed for '" + path + "'");
}

std::string g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_curves(const std::string& path, const sm::TrainLog& log) {
  std::ostringstream out;
  out << "epoch,learning_rate,total,ce,ctri_hm,ctri_hpsc,stri_hm,map,rank1\n";
  for (const auto& e : log.epochs) {
    const auto& l = e.mean_loss;
    out << e.epoch << ',' << g17(e.learning_rate) << ',' << g17(l.total) << ',' << g17(l.ce) << ',' << g17(l.ctri_hm)
        << ',' << g17(l.ctri_hpsc) << ',' << g17(l.stri_hm) << ',';
    if (e.retrieval) out << g17(e.retrieval->map) << ',' << g17(e.retrieval->rank(1));
    else out << ',';
    out << '\n';
  }
  write_text(path, out.str());
}

// Numbers of a training run; everything except wall-clock timing.
json train_numbers(const sm::RunConfig& cfg, sm::TrainResult& result_out) {
  const sm::Dataset data = load_dataset(cfg);
  result_out = sm::train(data, cfg.resolved_train(cfg.seed));
  return json{{"dataset", {{"clips", data.clips.size()}, {"identities", data.num_identities},
                           {"dim", data.dim}, {"occluded_frames", data.occluded_frames}}},
              {"train_log", sm::to_json(result_out.log)},
              {"initial", sm::to_json(result_out.initial)},
              {"final", sm::to_json(result_out.final)}};
}

int cmd_train(const sm::RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  sm::TrainResult result;
  json doc = document_header(cfg, "train");
  doc["results"] = train_numbers(cfg, result);
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  doc["timing"] = {{"total_seconds", total}, {"epoch_seconds", result.log.epoch_seconds}};
  write_text(cfg.metrics_path, doc.dump(2) + "\n");
  if (!cfg.curves_csv_path.empty()) write_curves(cfg.curves_csv_path, result.log);
  const auto& f = result.final;
  std::printf("final mAP %.4f  R-1 %.4f  R-5 %.4f  (initial mAP %.4f)\n", f.map, f.rank(1),
              f.cmc.size() >= 5 ? f.rank(5) : f.cmc.back(), result.initial.map);
  std::printf("metrics written to %s\n", cfg.metrics_path.c_str());
  return 0;
}

int cmd_ablate(const sm::RunConfig& cfg, const std::string& suite_name) {
  const auto suite = sm::parse_ablation_suite(suite_name);
  const auto start = std::chrono::steady_clock::now();
  const sm::Dataset data = load_dataset(cfg);
  const auto rows = sm::suite_rows(suite);
  const auto seeds = cfg.ablation_seed_list();
  const auto results = sm::run_ablation(data, cfg.resolved_train(cfg.seed), rows, seeds, cfg.jobs);

  json doc = document_header(cfg, "ablate");
  doc["suite"] = sm::to_string(suite);
  json table = json::array();
  std::printf("%-28s %9s %9s %9s %9s\n", "row", "mAP", "std", "R-1", "std");
  for (const auto& r : results) {
    table.push_back(sm::to_json(r));
    std::printf("%-28s %9.4f %9.4f %9.4f %9.4f\n", r.label.c_str(), r.mean_map, r.std_map, r.mean_rank1, r.std_rank1);
  }
  doc["results"] = {{"rows", table}};
  doc["timing"] = {{"total_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
  write_text(cfg.metrics_path, doc.dump(2) + "\n");
  std::printf("metrics written to %s\n", cfg.metrics_path.c_str());
  return 0;
}

int cmd_verify(std::uint64_t seed) {
  const auto checks = sm::run_verification(seed);
  int failed = 0;
  for (const auto& c : checks) {
    std::printf("%-4s %-34s %s\n", c.passed ? "ok" : "FAIL", c.name.c_str(), c.detail.c_str());
    failed += c.passed ? 0 : 1;
  }
  std::printf("%zu checks, %d failed\n", checks.size(), failed);
  return failed == 0 ? 0 : kExitNumerical;
}

// A set file is either the embedding text format holding exactly one clip, or
// plain rows of comma-separated coordinates (one frame per row).
sm::FrameSet read_set_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sm::InputError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (text.find("# dim=") != std::string::npos) {
    std::istringstream is(text);
    sm::Dataset d = sm::read_embeddings(is, path);
    if (d.clips.size() != 1) throw sm::InputError(path + ": expected exactly one clip, found " + std::to_string(d.clips.size()));
    return d.clips.front();
  }
  sm::FrameSet s;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> v;
    std::stringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0) throw sm::InputError(path + ":" + std::to_string(lineno) + ": non-numeric value '" + field + "'");
      v.push_back(x);
    }
    if (!s.frames.empty() && static_cast<Eigen::Index>(v.size()) != s.dim()) {
      throw sm::InputError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(s.dim()) + " values");
    }
    s.frames.push_back(Eigen::Map<const sm::Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  if (s.frames.empty()) throw sm::InputError(path + ": no frames");
  return s;
}

int cmd_dist(const std::string& a_path, const std::string& b_path, const std::string& kind, const std::string& metric) {
  const sm::FrameSet a = read_set_file(a_path), b = read_set_file(b_path);
  if (a.dim() != b.dim()) throw sm::InputError("sets have different dimensions");
  const double d = sm::set_distance(a, b, sm::parse_set_distance_kind(kind), sm::parse_base_metric(metric));
  std::printf("%.17g\n", d);
  return 0;
}

int cmd_dump(const sm::RunConfig& cfg, const std::string& out_path) {
  const sm::Dataset data = load_dataset(cfg);
  const sm::TrainResult result = sm::train(data, cfg.resolved_train(cfg.seed));
  sm::dump_embeddings(result.model.encoder, data, out_path);
  std::printf("embeddings of %zu clips written to %s\n", data.clips.size(), out_path.c_str());
  return 0;
}

int cmd_replay(const std::string& doc_path) {
  std::ifstream in(doc_path);
  if (!in) throw sm::InputError("cannot open '" + doc_path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw sm::InputError(doc_path + ": " + e.what());
  }
  if (doc.value("command", "") != "train") throw sm::InputError(doc_path + ": only train documents can be replayed");
  const sm::RunConfig cfg = sm::run_config_from_json(doc.at("config"));
  sm::TrainResult result;
  const json again = train_numbers(cfg, result);
  if (again != doc.at("results")) {
    std::printf("replay MISMATCH: results differ from %s\n", doc_path.c_str());
    return kExitNumerical;
  }
  std::printf("replay ok: results reproduced bit-for-bit\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-aware triplet losses for clip retrieval"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SETMETRIC_VERSION);

  std::string config_path, out_path, suite, kind = "ordinary", metric = "euclidean", a_path, b_path, doc_path;
  std::uint64_t verify_seed = 0;
  int jobs = 0;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->allow_extras();
    return sub;
  };
  auto* gen = with_config(app.add_subcommand("gen-data", "generate a synthetic dataset"));
  gen->add_option("-o,--out", out_path, "output embedding file")->required();
  auto* tr = with_config(app.add_subcommand("train", "train and evaluate one model"));
  tr->add_option("-o,--out", out_path, "metrics JSON path (overrides output.metrics)");
  auto* ab = with_config(app.add_subcommand("ablate", "run an ablation suite"));
  ab->add_option("-s,--suite", suite, "set_metric | hpsc | loss_weights")->required();
  ab->add_option("-j,--jobs", jobs, "parallel training runs")->check(CLI::PositiveNumber);
  ab->add_option("-o,--out", out_path, "metrics JSON path");
  auto* ver = app.add_subcommand("verify", "run the invariant and oracle checks");
  ver->add_option("--seed", verify_seed, "seed for the random instances");
  auto* dist = app.add_subcommand("dist", "print a set distance between two set files");
  dist->add_option("a", a_path)->required()->check(CLI::ExistingFile);
  dist->add_option("b", b_path)->required()->check(CLI::ExistingFile);
  dist->add_option("-k,--kind", kind, "ordinary | hausdorff | hybrid_positive | hybrid_negative");
  dist->add_option("-m,--metric", metric, "euclidean | squared_euclidean");
  auto* dump = with_config(app.add_subcommand("dump-embeddings", "train, then write frame embeddings"));
  dump->add_option("-o,--out", out_path, "output embedding file")->required();
  auto* rep = app.add_subcommand("replay", "re-run a train metrics document and compare");
  rep->add_option("document", doc_path)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*ver) return cmd_verify(verify_seed);
    if (*dist) return cmd_dist(a_path, b_path, kind, metric);
    if (*rep) return cmd_replay(doc_path);

    CLI::App* sub = app.get_subcommands().front();
    sm::RunConfig cfg = sm::load_run_config(config_path, parse_overrides(sub->remaining()));
    if (*gen) {
      sm::write_embeddings(load_dataset(cfg), out_path);
      return 0;
    }
    if (*dump) return cmd_dump(cfg, out_path);
    if (!out_path.empty()) cfg.metrics_path = out_path;
    if (*tr) return cmd_train(cfg);
    if (jobs > 0) cfg.jobs = jobs;
    return cmd_ablate(cfg, suite);
  } catch (const sm::InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const sm::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
}
