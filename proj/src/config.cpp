#include "setmetric/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "setmetric/error.hpp"

namespace setmetric {

using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

GeneratorConfig RunConfig::resolved_generator() const {
  GeneratorConfig g = generator;
  g.seed = derive_seed(seed, 0);
  return g;
}

TrainConfig RunConfig::resolved_train(std::uint64_t run_seed) const {
  TrainConfig t = train;
  t.seed = derive_seed(run_seed, 1);
  return t;
}

std::vector<std::uint64_t> RunConfig::ablation_seed_list() const {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < ablation_seeds; ++i) out.push_back(derive_seed(seed + static_cast<std::uint64_t>(i), 1));
  return out;
}

json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  return json{
      {"seed", c.seed},
      {"generator",
       {{"num_identities", c.generator.num_identities},
        {"clips_per_identity", c.generator.clips_per_identity},
        {"frames_per_clip", c.generator.frames_per_clip},
        {"input_dim", c.generator.input_dim},
        {"sigma_between", c.generator.sigma_between},
        {"sigma_within", c.generator.sigma_within},
        {"occlusion_prob", c.generator.occlusion_prob},
        {"occlusion_mode", to_string(c.generator.occlusion_mode)}}},
      {"data", {{"path", c.data_path}}},
      {"train",
       {{"P", t.batch.P},
        {"K", t.batch.K},
        {"T", t.batch.T},
        {"eta", t.weights.eta},
        {"lambdas", t.weights.lambdas},
        {"metric", to_string(t.metric)},
        {"set_kind", to_string(t.set_kind)},
        {"use_stri", t.use_stri},
        {"use_hpsc", t.use_hpsc},
        {"encoder", to_string(t.layout)},
        {"embedding_dim", t.embedding_dim},
        {"hidden_dim", t.hidden_dim},
        {"epochs", t.epochs},
        {"steps_per_epoch", t.steps_per_epoch},
        {"learning_rate", t.learning_rate},
        {"lr_decay", t.lr_decay},
        {"lr_milestones", t.lr_milestones},
        {"eval_interval", t.eval_interval}}},
      {"eval", {{"cmc_depth", t.cmc_depth}}},
      {"ablation", {{"seeds", c.ablation_seeds}, {"jobs", c.jobs}}},
      {"output", {{"metrics", c.metrics_path}, {"curves_csv", c.curves_csv_path}}},
  };
}

namespace {

std::string line_hint(const std::string& source_text, const std::string& path) {
  if (source_text.empty()) return {};
  const std::string key = "\"" + path.substr(path.rfind('.') == std::string::npos ? 0 : path.rfind('.') + 1) + "\"";
  const auto pos = source_text.find(key);
  if (pos == std::string::npos) return {};
  const auto line = 1 + std::count(source_text.begin(), source_text.begin() + static_cast<long>(pos), '\n');
  return " (line " + std::to_string(line) + ")";
}

// Overlays `user` onto `base`, rejecting keys `base` does not have.
void merge_strict(json& base, const json& user, const std::string& prefix, const std::string& source_text) {
  if (!user.is_object()) {
    throw InputError("config" + (prefix.empty() ? std::string() : " key '" + prefix + "'") + ": expected an object" +
                     line_hint(source_text, prefix));
  }
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw InputError("config: unknown key '" + path + "'" + line_hint(source_text, path));
    if (base[key].is_object()) {
      merge_strict(base[key], value, path, source_text);
    } else {
      base[key] = value;
    }
  }
}

class Reader {
 public:
  Reader(const json& doc, const std::string& source_text) : doc_(doc), text_(source_text) {}

  template <typename T>
  T get(const std::string& path) const {
    const json* node = &doc_;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      node = &node->at(path.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    try {
      if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!node->is_number_integer()) throw std::invalid_argument("integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (node->is_number_unsigned()) return node->get<T>();
          if (node->get<long long>() < 0) throw std::invalid_argument("nonnegative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!node->is_number()) throw std::invalid_argument("number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!node->is_boolean()) throw std::invalid_argument("boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!node->is_string()) throw std::invalid_argument("string");
      }
      return node->get<T>();
    } catch (const std::invalid_argument& e) {
      throw InputError("config key '" + path + "': expected " + e.what() + line_hint(text_, path));
    } catch (const json::exception&) {
      throw InputError("config key '" + path + "': wrong type" + line_hint(text_, path));
    }
  }

  template <typename Fn>
  auto parse(const std::string& path, Fn&& fn) const {
    try {
      return fn(get<std::string>(path));
    } catch (const InputError& e) {
      throw InputError("config key '" + path + "': " + e.what() + line_hint(text_, path));
    }
  }

  std::string hint(const std::string& path) const { return line_hint(text_, path); }

 private:
  const json& doc_;
  const std::string& text_;
};

}  // namespace

RunConfig run_config_from_json(const json& user, const std::string& source_text) {
  json doc = to_json(RunConfig{});
  merge_strict(doc, user, "", source_text);
  const Reader r(doc, source_text);

  RunConfig c;
  c.seed = r.get<std::uint64_t>("seed");
  GeneratorConfig& g = c.generator;
  g.num_identities = r.get<int>("generator.num_identities");
  g.clips_per_identity = r.get<int>("generator.clips_per_identity");
  g.frames_per_clip = r.get<int>("generator.frames_per_clip");
  g.input_dim = r.get<int>("generator.input_dim");
  g.sigma_between = r.get<double>("generator.sigma_between");
  g.sigma_within = r.get<double>("generator.sigma_within");
  g.occlusion_prob = r.get<double>("generator.occlusion_prob");
  g.occlusion_mode = r.parse("generator.occlusion_mode", [](const std::string& s) { return parse_occlusion_mode(s); });
  c.data_path = r.get<std::string>("data.path");

  TrainConfig& t = c.train;
  t.batch.P = r.get<int>("train.P");
  t.batch.K = r.get<int>("train.K");
  t.batch.T = r.get<int>("train.T");
  t.weights.eta = r.get<double>("train.eta");
  const auto lambdas = doc.at("train").at("lambdas");
  if (!lambdas.is_array() || lambdas.size() != 4) {
    throw InputError("config key 'train.lambdas': expected an array of 4 numbers" + r.hint("train.lambdas"));
  }
  for (std::size_t k = 0; k < 4; ++k) {
    if (!lambdas[k].is_number()) throw InputError("config key 'train.lambdas': expected numbers" + r.hint("train.lambdas"));
    t.weights.lambdas[k] = lambdas[k].get<double>();
  }
  t.metric = r.parse("train.metric", [](const std::string& s) { return parse_base_metric(s); });
  t.set_kind = r.parse("train.set_kind", [](const std::string& s) { return parse_set_loss_kind(s); });
  t.use_stri = r.get<bool>("train.use_stri");
  t.use_hpsc = r.get<bool>("train.use_hpsc");
  t.layout = r.parse("train.encoder", [](const std::string& s) { return parse_encoder_layout(s); });
  t.embedding_dim = r.get<int>("train.embedding_dim");
  t.hidden_dim = r.get<int>("train.hidden_dim");
  t.epochs = r.get<int>("train.epochs");
  t.steps_per_epoch = r.get<int>("train.steps_per_epoch");
  t.learning_rate = r.get<double>("train.learning_rate");
  t.lr_decay = r.get<double>("train.lr_decay");
  const auto milestones = doc.at("train").at("lr_milestones");
  if (!milestones.is_array()) throw InputError("config key 'train.lr_milestones': expected an array" + r.hint("train.lr_milestones"));
  t.lr_milestones.clear();
  for (const auto& m : milestones) {
    if (!m.is_number_integer()) throw InputError("config key 'train.lr_milestones': expected integers" + r.hint("train.lr_milestones"));
    t.lr_milestones.push_back(m.get<int>());
  }
  t.eval_interval = r.get<int>("train.eval_interval");
  t.cmc_depth = r.get<std::size_t>("eval.cmc_depth");
  c.ablation_seeds = r.get<int>("ablation.seeds");
  c.jobs = r.get<int>("ablation.jobs");
  c.metrics_path = r.get<std::string>("output.metrics");
  c.curves_csv_path = r.get<std::string>("output.curves_csv");

  auto with_prefix = [&](const char* prefix, auto&& fn) {
    try {
      fn();
    } catch (const InputError& e) {
      const std::string msg = e.what();
      const auto colon = msg.find(':');
      const std::string key = std::string(prefix) + msg.substr(0, colon);
      const std::string why = colon == std::string::npos ? msg : msg.substr(colon + 2);
      throw InputError("config key '" + key + "': " + why + r.hint(key));
    }
  };
  with_prefix("generator.", [&] { g.validate(); });
  t.validate();
  if (c.ablation_seeds < 1) throw InputError("config key 'ablation.seeds': must be >= 1" + r.hint("ablation.seeds"));
  if (c.jobs < 1) throw InputError("config key 'ablation.jobs': must be >= 1" + r.hint("ablation.jobs"));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::string text;
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw InputError("config '" + path.string() + "': " + e.what());
    }
  }
  if (const char* env = std::getenv("SETMETRIC_SEED"); env && *env) {
    try {
      doc["seed"] = std::stoull(env);
    } catch (const std::exception&) {
      throw InputError(std::string("SETMETRIC_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  for (const auto& [key, raw] : overrides) {
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw InputError("malformed override key '" + key + "'");
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      if (!node->contains(part)) (*node)[part] = json::object();
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return run_config_from_json(doc, text);
}

json to_json(const LossReport& r) {
  return json{{"total", r.total},
              {"ce", r.ce},
              {"ctri_hm", r.ctri_hm},
              {"ctri_hpsc", r.ctri_hpsc},
              {"stri_hm", r.stri_hm},
              {"active_counts", r.active_counts}};
}

json to_json(const RetrievalResult& r) {
  return json{{"cmc", r.cmc},
              {"map", r.map},
              {"rank1", r.cmc.empty() ? 0.0 : r.cmc[0]},
              {"num_queries", r.num_queries},
              {"num_gallery", r.num_gallery}};
}

json to_json(const TrainLog& log) {
  json out = json::array();
  for (const auto& e : log.epochs) {
    out.push_back({{"epoch", e.epoch},
                   {"learning_rate", e.learning_rate},
                   {"loss", to_json(e.mean_loss)},
                   {"retrieval", e.retrieval ? to_json(*e.retrieval) : json(nullptr)}});
  }
  return out;
}

json to_json(const AblationRow& row) {
  json results = json::array();
  for (const auto& r : row.results) results.push_back(to_json(r));
  return json{{"label", row.label},     {"seeds", row.seeds},         {"results", results},
              {"mean_map", row.mean_map}, {"std_map", row.std_map},     {"mean_rank1", row.mean_rank1},
              {"std_rank1", row.std_rank1}};
}

}  // namespace setmetric
