// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Tolerances are fixed below; nothing here is tuned per run.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "oracles.hpp"
#include "setmetric/ablation.hpp"
#include "setmetric/error.hpp"
#include "setmetric/config.hpp"
#include "setmetric/evaluation.hpp"
#include "setmetric/losses.hpp"
#include "setmetric/mining.hpp"
#include "setmetric/synthdata.hpp"
#include "setmetric/trainer.hpp"

using namespace setmetric;

namespace {

constexpr double kTriangleSlack = 1e-9;
constexpr double kGradRelTol = 1e-4;
constexpr double kHandTol = 1e-12;
constexpr double kAlgebraSeconds = 5.0;
constexpr double kGradientSeconds = 30.0;
constexpr double kTable3Seconds = 600.0;
constexpr double kMinHybridGain = 0.02;
constexpr int kMinSeedWins = 4;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

const std::array<SetDistanceKind, 4> kKinds{SetDistanceKind::ordinary, SetDistanceKind::hausdorff,
                                            SetDistanceKind::hybrid_positive, SetDistanceKind::hybrid_negative};

std::pair<FrameSet, FrameSet> random_pair(std::mt19937_64& rng) {
  const int dims[] = {1, 2, 8};
  std::uniform_int_distribution<int> dim(0, 2), size(1, 6);
  const int d = dims[dim(rng)];
  return {oracle::random_set(rng, d, size(rng)), oracle::random_set(rng, d, size(rng))};
}

Outcome set_algebra() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000 && out.pass; ++i) {
    const auto [a, b] = random_pair(rng);
    const FrameSet c = oracle::random_set(rng, static_cast<int>(a.dim()), 1 + i % 6);
    const double o = ordinary_distance(a, b), h = hausdorff_distance(a, b), hp = hybrid_positive_distance(a, b);
    if (!(o <= h && h <= hp)) out.fail("ordering violated on instance " + std::to_string(i));
    if (hybrid_negative_distance(a, b) != o) out.fail("hybrid-negative != ordinary on instance " + std::to_string(i));
    for (auto k : kKinds) {
      if (set_distance(a, b, k) != set_distance(b, a, k)) out.fail(to_string(k) + " asymmetric");
    }
    if (hausdorff_distance(a, c) > hausdorff_distance(a, b) + hausdorff_distance(b, c) + kTriangleSlack) {
      out.fail("triangle inequality violated on instance " + std::to_string(i));
    }
  }
  const double t = seconds_since(start);
  if (t >= kAlgebraSeconds) out.fail("took " + std::to_string(t) + " s");
  if (out.pass) out.detail = "1000 pairs in " + std::to_string(t) + " s";
  return out;
}

Outcome oracle_equivalence() {
  Outcome out;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000 && out.pass; ++i) {
    const auto [a, b] = random_pair(rng);
    if (ordinary_distance(a, b) != oracle::ordinary(a, b) || hausdorff_distance(a, b) != oracle::hausdorff(a, b) ||
        hybrid_positive_distance(a, b) != oracle::hybrid_positive(a, b) ||
        hybrid_negative_distance(a, b) != oracle::ordinary(a, b)) {
      out.fail("set distance differs from oracle on instance " + std::to_string(i));
    }
  }
  GeneratorConfig g;
  g.num_identities = 6;
  g.clips_per_identity = 4;
  g.frames_per_clip = 3;
  g.input_dim = 2;
  const Dataset ds = generate(g);
  Rng brng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 200 && out.pass; ++i) {
    const Batch b = sample_batch(ds, BatchSpec{3, 3, 3, 0}, brng);
    auto clip_d = [&](std::size_t x, std::size_t y) { return oracle::l2(b.clip_features[x], b.clip_features[y]); };
    auto hp = [&](std::size_t x, std::size_t y) { return oracle::hybrid_positive(b.clips[x], b.clips[y]); };
    auto o = [&](std::size_t x, std::size_t y) { return oracle::ordinary(b.clips[x], b.clips[y]); };
    auto h = [&](std::size_t x, std::size_t y) { return oracle::hausdorff(b.clips[x], b.clips[y]); };
    if (hard_mine_clip_triplets(b) != oracle::mine(b, clip_d, clip_d)) out.fail("clip mining, batch " + std::to_string(i));
    if (hard_mine_set_triplets(b, BaseMetric::euclidean, SetLossKind::hybrid) != oracle::mine(b, hp, o) ||
        hard_mine_set_triplets(b, BaseMetric::euclidean, SetLossKind::ordinary) != oracle::mine(b, o, o) ||
        hard_mine_set_triplets(b, BaseMetric::euclidean, SetLossKind::hausdorff) != oracle::mine(b, h, h)) {
      out.fail("set mining, batch " + std::to_string(i));
    }
    ClassifierHead head{Matrix(2, 6)};
    for (Eigen::Index k = 0; k < head.prototypes.size(); ++k) head.prototypes(k) = n(brng);
    std::vector<Vector> frames;
    std::vector<int> cls;
    for (std::size_t c = 0; c < b.size(); ++c) {
      if (b.labels[c] != 0) continue;
      for (const auto& f : b.clips[c].frames) frames.push_back(f);
    }
    const int c = b.identities[0];
    std::vector<double> probs;
    for (const auto& f : frames) {
      const Vector z = head.prototypes.transpose() * f;
      probs.push_back(std::exp(z[c]) / z.array().exp().sum());
    }
    const auto sel = construct_hard_positive_set(frames, c, head, 3);
    if (sel.selected_indices != oracle::lowest_t(probs, 3)) out.fail("hard positive selection, batch " + std::to_string(i));
  }
  if (out.pass) out.detail = "1000 distance instances, 200 batches (clip, 3 set kinds, selection)";
  return out;
}

Outcome gradients() {
  Outcome out;
  const auto start = Clock::now();
  GeneratorConfig g;
  g.num_identities = 6;
  g.clips_per_identity = 3;
  g.frames_per_clip = 3;
  g.input_dim = 8;
  const Dataset ds = generate(g);
  const std::array<std::array<double, 4>, 5> weights{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1},
                                                      {1, 0.5, 0.5, 0.5}}};
  const char* names[] = {"ce", "ctri_hm", "ctri_hpsc", "stri_hm", "composite"};
  double worst = 0.0;
  int checked = 0, skipped = 0;
  Rng rng(4);
  // A batch whose selections stay tied under jitter is not tie-free; it is
  // skipped and another drawn.
  for (int drawn = 0; checked < 20 && drawn < 200; ++drawn) {
    TrainConfig cfg;
    cfg.batch = {3, 3, 3, 0};
    cfg.embedding_dim = 4;
    cfg.hidden_dim = 5;
    cfg.layout = drawn % 2 == 0 ? EncoderLayout::linear : EncoderLayout::hidden;
    cfg.weights.eta = 5.0;  // keeps the hinges active so their gradients are exercised
    std::mt19937_64 init(static_cast<std::uint64_t>(drawn));
    const Model model = init_model(ds.dim, ds.num_identities, cfg, init);
    const Batch b = sample_batch(ds, cfg.batch, rng);
    std::vector<FdReport> reports;
    try {
      for (std::size_t w = 0; w < weights.size(); ++w) {
        cfg.weights.lambdas = weights[w];
        FdOptions opts;
        opts.sample_size = 64;
        opts.seed = static_cast<std::uint64_t>(drawn * 10 + static_cast<int>(w));
        reports.push_back(finite_difference_check(model, b, cfg, opts));
      }
    } catch (const NumericalError&) {
      ++skipped;
      continue;
    }
    for (std::size_t w = 0; w < reports.size(); ++w) {
      worst = std::max(worst, reports[w].max_rel_error);
      if (reports[w].max_rel_error >= kGradRelTol) {
        out.fail(std::string(names[w]) + " on batch " + std::to_string(drawn) + ": " +
                 std::to_string(reports[w].max_rel_error));
      }
    }
    ++checked;
  }
  if (checked < 20) out.fail("only " + std::to_string(checked) + " tie-free batches");
  const double t = seconds_since(start);
  if (t >= kGradientSeconds) out.fail("took " + std::to_string(t) + " s");
  char buf[160];
  std::snprintf(buf, sizeof buf, "worst relative error %.3g over %d tie-free batches x 5 configs (%d tied skipped), %.2f s",
                worst, checked, skipped, t);
  if (out.pass) out.detail = buf;
  return out;
}

Outcome hand_values() {
  Outcome out;
  const FrameSet a = make_set_1d({0, 2}), b = make_set_1d({1, 5});
  if (ordinary_distance(a, b) != 1.0 || hausdorff_distance(a, b) != 3.0 || hybrid_positive_distance(a, b) != 5.0) {
    out.fail("worked example");
  }
  const ClassifierHead head{Matrix::Zero(1, 2)};
  const std::vector<Vector> x{Vector::Ones(1)};
  const std::vector<int> c{0};
  if (std::abs(softmax_cross_entropy(x, c, head).value - std::log(2.0)) > kHandTol) out.fail("CE on uniform logits");
  const Batch t = make_batch({make_set_1d({0.0}), make_set_1d({0.5}), make_set_1d({0.6}), make_set_1d({9.0})},
                             {0, 0, 1, 1}, {0, 1});
  const std::vector<TripletIndices> trip{{0, 1, 2}};
  if (std::abs(clip_triplet_loss_hm(t, trip, LossWeights{}).value - 0.2) > kHandTol) out.fail("triplet term");
  if (out.pass) out.detail = "1/3/5, ln 2, 0.2";
  return out;
}

struct AblationInputs {
  Dataset data;
  TrainConfig base;
  std::vector<std::uint64_t> seeds;
};

AblationInputs default_inputs() {
  const RunConfig cfg;
  return {generate(cfg.resolved_generator()), cfg.resolved_train(cfg.seed), cfg.ablation_seed_list()};
}

std::vector<RetrievalResult> g_all_results;

std::vector<AblationRow> run_suite(const AblationInputs& in, AblationSuite s) {
  const auto rows = suite_rows(s);
  auto out = run_ablation(in.data, in.base, rows, in.seeds, 1);
  for (const auto& r : out) g_all_results.insert(g_all_results.end(), r.results.begin(), r.results.end());
  return out;
}

std::string fmt_map(const std::vector<AblationRow>& rows) {
  std::string s;
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s%s=%.4f", s.empty() ? "" : ", ", r.label.c_str(), r.mean_map);
    s += buf;
  }
  return s;
}

Outcome table3(const AblationInputs& in) {
  Outcome out;
  const auto start = Clock::now();
  const auto rows = run_suite(in, AblationSuite::set_metric);
  const double base = rows[0].mean_map, o = rows[1].mean_map, h = rows[2].mean_map, hd = rows[3].mean_map;
  if (!(base < o)) out.fail("baseline !< D^o");
  if (!(o <= h)) out.fail("D^o !<= D^h");
  if (!(h <= hd)) out.fail("D^h !<= D^hd");
  if (!(hd - base >= kMinHybridGain)) out.fail("D^hd gain below 2 points");
  const double t = seconds_since(start);
  if (t >= kTable3Seconds) out.fail("took " + std::to_string(t) + " s");
  out.detail = (out.pass ? "" : out.detail + "; ") + fmt_map(rows) + "; " + std::to_string(t) + " s";
  return out;
}

Outcome tables45(const AblationInputs& in) {
  Outcome out;
  const auto hpsc = run_suite(in, AblationSuite::hpsc);
  int hpsc_wins = 0;
  for (std::size_t s = 0; s < in.seeds.size(); ++s) hpsc_wins += hpsc[1].results[s].map > hpsc[0].results[s].map;
  const auto grid = run_suite(in, AblationSuite::loss_weights);
  int full_best = 0;
  for (std::size_t s = 0; s < in.seeds.size(); ++s) {
    bool best = true;
    for (std::size_t r = 0; r + 1 < grid.size(); ++r) best = best && grid.back().results[s].map > grid[r].results[s].map;
    full_best += best;
  }
  if (hpsc_wins < kMinSeedWins) out.fail("HPSC better in only " + std::to_string(hpsc_wins) + "/5 seeds");
  if (full_best < kMinSeedWins) out.fail("full weights best in only " + std::to_string(full_best) + "/5 seeds");
  out.detail = (out.pass ? "" : out.detail + "; ") + "HPSC wins " + std::to_string(hpsc_wins) + "/5, full best " +
               std::to_string(full_best) + "/5; " + fmt_map(grid);
  return out;
}

Outcome retrieval_sanity() {
  Outcome out;
  GeneratorConfig g;
  g.occlusion_prob = 0.0;
  g.sigma_within = 1e-6;
  const Dataset sep = generate(g);
  const RetrievalResult perfect = evaluate(EncoderParams::identity(sep.dim), sep);
  g_all_results.push_back(perfect);
  if (perfect.rank(1) != 1.0 || perfect.map != 1.0) out.fail("separable data not perfect");

  // Random embeddings: 32 identities, 2 gallery clips each, so chance R-1 is 1/32.
  const int ids = 32, trials = 100;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  double hits = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::vector<Vector> q, gal;
    std::vector<int> ql, gl;
    for (int id = 0; id < ids; ++id) {
      for (int k = 0; k < 2; ++k) {
        q.push_back(Vector::NullaryExpr(8, [&] { return n(rng); }));
        ql.push_back(id);
        gal.push_back(Vector::NullaryExpr(8, [&] { return n(rng); }));
        gl.push_back(id);
      }
    }
    const RetrievalResult r = score_retrieval(q, ql, gal, gl);
    g_all_results.push_back(r);
    hits += r.rank(1) * static_cast<double>(q.size());
  }
  const double count = trials * ids * 2.0, p = 1.0 / ids, r1 = hits / count;
  const double se = std::sqrt(p * (1 - p) / count);
  if (std::abs(r1 - p) > 3 * se) out.fail("random R-1 " + std::to_string(r1) + " vs chance " + std::to_string(p));

  for (const auto& r : g_all_results) {
    for (std::size_t k = 1; k < r.cmc.size(); ++k) {
      if (r.cmc[k] < r.cmc[k - 1] || r.cmc[k] < 0.0 || r.cmc[k] > 1.0) out.fail("CMC not monotone in [0,1]");
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "separable R-1=mAP=1; random R-1 %.4f (chance %.4f, 3 SE %.4f); %zu CMC curves checked",
                r1, p, 3 * se, g_all_results.size());
  if (out.pass) out.detail = buf;
  return out;
}

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  Outcome out;
  const auto dir = std::filesystem::temp_directory_path() / "setmetric_acceptance";
  std::filesystem::create_directories(dir);
  const auto metrics = dir / "metrics.json";
  const std::string train = std::string(SETMETRIC_CLI) + " train -o " + metrics.string() + " > /dev/null";
  std::string docs[2];
  for (auto& doc : docs) {
    if (run(train) != 0) out.fail("train exited nonzero");
    nlohmann::json j = nlohmann::json::parse(slurp(metrics));
    if (!j.contains("timing")) out.fail("no timing field");
    j.erase("timing");
    doc = j.dump(2);
  }
  if (docs[0] != docs[1]) out.fail("metrics documents differ");
  if (run(std::string(SETMETRIC_CLI) + " replay " + metrics.string() + " > /dev/null") != 0) out.fail("replay mismatch");

  if (run(std::string(SETMETRIC_CLI) + " verify > /dev/null") != 0) out.fail("verify fails on the pristine build");
  const char* mutants[] = {SETMETRIC_MUTANT1_CLI, SETMETRIC_MUTANT2_CLI, SETMETRIC_MUTANT3_CLI};
  std::string codes;
  for (const char* m : mutants) {
    const int code = run(std::string(m) + " verify > /dev/null");
    codes += (codes.empty() ? "" : "/") + std::to_string(code);
    if (code == 0) out.fail(std::string("mutant passed verify: ") + m);
  }
  std::filesystem::remove_all(dir);
  if (out.pass) out.detail = "two train runs identical apart from timing; verify exits 0, mutants exit " + codes;
  return out;
}

}  // namespace

int main() {
  const AblationInputs inputs = default_inputs();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"set-distance algebra", set_algebra},
      {"oracle equivalence", oracle_equivalence},
      {"gradient correctness", gradients},
      {"hand-checkable values", hand_values},
      {"set metric ablation direction", [&] { return table3(inputs); }},
      {"hpsc and loss weight ablation direction", [&] { return tables45(inputs); }},
      {"retrieval sanity", retrieval_sanity},
      {"reproducibility and mutation tests", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::printf("criterion %zu %-42s %s  %s\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
