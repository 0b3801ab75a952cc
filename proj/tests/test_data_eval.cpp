#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "setmetric/error.hpp"
#include "setmetric/evaluation.hpp"
#include "setmetric/synthdata.hpp"

using namespace setmetric;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_embeddings(in, "test.csv");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("setmetric_test_" + name);
}

}  // namespace

TEST_CASE("generator defaults and determinism") {
  const GeneratorConfig g;
  const Dataset a = generate(g), b = generate(g);
  CHECK(a == b);
  CHECK(a.clips.size() == 128);
  CHECK(a.num_identities == 32);
  CHECK(a.dim == 32);
  for (const auto& c : a.clips) CHECK(c.size() == 4);
  GeneratorConfig other = g;
  other.seed = 1;
  CHECK_FALSE(generate(other) == a);
}

TEST_CASE("generator validation names the key") {
  GeneratorConfig g;
  g.occlusion_prob = 1.5;
  CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("occlusion_prob"), InputError);
  g = {};
  g.sigma_within = 4.0;
  CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("sigma"), InputError);
}

TEST_CASE("noise-free frames sit on their identity centre") {
  GeneratorConfig g;
  g.occlusion_prob = 0.0;
  g.sigma_within = 1e-300;
  g.num_identities = 4;
  const Dataset ds = generate(g);
  for (const auto& c : ds.clips) {
    for (const auto& f : c.frames) CHECK((f - c.frames[0]).norm() < 1e-250);
  }
}

TEST_CASE("occlusion counter") {
  GeneratorConfig g;
  g.occlusion_prob = 1.0;
  g.occlusion_mode = OcclusionMode::uniform_noise;
  const Dataset all = generate(g);
  CHECK(all.occluded_frames == 128 * 4);

  g.occlusion_prob = 0.25;
  g.num_identities = 100;
  g.occlusion_mode = OcclusionMode::swap_identity;
  const Dataset some = generate(g);
  const double n = 100.0 * 4 * 4;
  const double se = std::sqrt(0.25 * 0.75 / n);
  CHECK(std::abs(static_cast<double>(some.occluded_frames) / n - 0.25) < 3 * se);
}

TEST_CASE("within-identity distances are smaller than between-identity ones") {
  GeneratorConfig g;
  g.occlusion_prob = 0.0;
  g.num_identities = 63;  // 63 x 4 x 4 frames, at least 1000
  const Dataset ds = generate(g);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, ds.clips.size() - 1), frame(0, 3);
  double within = 0.0, between = 0.0;
  int nw = 0, nb = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& a = ds.clips[pick(rng)];
    const auto& b = ds.clips[pick(rng)];
    const double d = oracle::l2(a.frames[frame(rng)], b.frames[frame(rng)]);
    if (a.identity == b.identity) {
      within += d;
      ++nw;
    } else {
      between += d;
      ++nb;
    }
  }
  REQUIRE(nw > 0);
  CHECK(within / nw + 3.0 * g.sigma_within < between / nb);
}

TEST_CASE("embedding text round trip is bit exact") {
  GeneratorConfig g;
  g.num_identities = 5;
  const Dataset ds = generate(g);
  std::ostringstream out;
  write_embeddings(ds, out);
  Dataset back = parse(out.str());
  back.occluded_frames = ds.occluded_frames;
  CHECK(back == ds);

  const auto path = temp_file("roundtrip.csv");
  write_embeddings(ds, path);
  Dataset from_file = load_embeddings(path);
  from_file.occluded_frames = ds.occluded_frames;
  CHECK(from_file == ds);
  std::filesystem::remove(path);
}

TEST_CASE("embedding parser") {
  const Dataset one = parse("# dim=2\n# a comment\n7,3,0,1.5,2\n7,3,1,-1,0\n");
  REQUIRE(one.clips.size() == 1);
  CHECK(one.clips[0].size() == 2);
  CHECK(one.clips[0].identity == 0);
  CHECK(one.dim == 2);

  CHECK(error_of("# dim=2\n1,0,0,1.0\n").find("test.csv:2") != std::string::npos);
  CHECK(error_of("# dim=2\n1,0,0,1.0,abc\n").find("test.csv:2") != std::string::npos);
  CHECK(error_of("# dim=1\n1,0,0,1\n1,0,0,2\n").find("test.csv:3") != std::string::npos);
  CHECK_FALSE(error_of("").empty());
  CHECK_FALSE(error_of("1,0,0,1\n").empty());
  CHECK_THROWS_AS(load_embeddings("/nonexistent/file.csv"), InputError);
}

TEST_CASE("query gallery split") {
  GeneratorConfig g;
  g.num_identities = 2;
  g.clips_per_identity = 2;
  const auto small = split_query_gallery(generate(g));
  CHECK(small.query.size() == 2);
  CHECK(small.gallery.size() == 2);
  g.num_identities = 100;
  g.clips_per_identity = 4;
  const auto big = split_query_gallery(generate(g));
  CHECK(big.query.size() == 200);
  CHECK(big.gallery.size() == 200);

  g.num_identities = 3;
  g.clips_per_identity = 1;
  CHECK_THROWS_WITH_AS(split_query_gallery(generate(g)), doctest::Contains("identities"), InputError);
}

TEST_CASE("average precision") {
  CHECK(average_precision({true}) == 1.0);
  CHECK(average_precision({true, false, true}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
  CHECK(average_precision({false, false}) == 0.0);
}

TEST_CASE("retrieval against brute force") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vector> q, g;
    std::vector<int> ql, gl;
    for (int i = 0; i < 6; ++i) {
      q.push_back(Vector::NullaryExpr(2, [&] { return n(rng); }));
      ql.push_back(i % 3);
    }
    for (int i = 0; i < 9; ++i) {
      g.push_back(Vector::NullaryExpr(2, [&] { return n(rng); }));
      gl.push_back(i % 3);
    }
    const RetrievalResult r = score_retrieval(q, ql, g, gl, BaseMetric::euclidean, 9);
    double map = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<std::pair<double, std::size_t>> order;
      for (std::size_t j = 0; j < g.size(); ++j) order.emplace_back(oracle::l2(q[i], g[j]), j);
      std::sort(order.begin(), order.end());
      std::vector<bool> rel;
      for (const auto& [d, j] : order) rel.push_back(gl[j] == ql[i]);
      map += oracle::average_precision(rel);
    }
    CHECK(r.map == doctest::Approx(map / 6.0).epsilon(1e-15));
    for (std::size_t k = 1; k < r.cmc.size(); ++k) CHECK(r.cmc[k] >= r.cmc[k - 1]);
    CHECK(r.cmc.back() == 1.0);

    // Shuffle the gallery: with distinct distances the result is unchanged.
    std::vector<std::size_t> perm(g.size());
    for (std::size_t j = 0; j < perm.size(); ++j) perm[j] = j;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Vector> g2;
    std::vector<int> gl2;
    for (std::size_t j : perm) {
      g2.push_back(g[j]);
      gl2.push_back(gl[j]);
    }
    const RetrievalResult r2 = score_retrieval(q, ql, g2, gl2, BaseMetric::euclidean, 9);
    CHECK(r2.cmc == r.cmc);
    CHECK(r2.map == doctest::Approx(r.map).epsilon(1e-15));
  }
}

TEST_CASE("retrieval edge cases") {
  const std::vector<Vector> q{Vector::Constant(1, 0.0)}, g{Vector::Constant(1, 0.1), Vector::Constant(1, 5.0)};
  const std::vector<int> ql{0}, gl{0, 1};
  const RetrievalResult r = score_retrieval(q, ql, g, gl);
  CHECK(r.rank(1) == 1.0);
  CHECK(r.map == 1.0);
  const std::vector<Vector> none;
  const std::vector<int> no_labels;
  CHECK_THROWS_AS(score_retrieval(none, no_labels, g, gl), InputError);
  CHECK_THROWS_AS(score_retrieval(q, ql, none, no_labels), InputError);
}

TEST_CASE("perfectly separated clusters retrieve perfectly") {
  GeneratorConfig g;
  g.occlusion_prob = 0.0;
  g.sigma_within = 1e-4;
  const Dataset ds = generate(g);
  const RetrievalResult r = evaluate(EncoderParams::identity(ds.dim), ds);
  CHECK(r.rank(1) == 1.0);
  CHECK(r.map == 1.0);
}

TEST_CASE("dumped embeddings reload bit for bit") {
  GeneratorConfig g;
  g.num_identities = 3;
  const Dataset ds = generate(g);
  std::mt19937_64 rng(2);
  const EncoderParams p = EncoderParams::init(ds.dim, 5, EncoderLayout::linear, 0, rng);
  const auto path = temp_file("dump.csv");
  dump_embeddings(p, ds, path);
  const Dataset back = load_embeddings(path);
  CHECK(back.dim == 5);
  REQUIRE(back.clips.size() == ds.clips.size());
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    const FrameSet enc = encode(p, ds.clips[i]);
    for (std::size_t f = 0; f < enc.size(); ++f) CHECK(back.clips[i].frames[f] == enc.frames[f]);
  }

  dump_embeddings(p, Dataset{}, path);
  std::ifstream in(path);
  std::string all((std::istreambuf_iterator<char>(in)), {});
  CHECK(all == "# dim=5\n");
  std::filesystem::remove(path);
}
