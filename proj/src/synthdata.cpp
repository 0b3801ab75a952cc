#include "setmetric/synthdata.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "setmetric/error.hpp"

namespace setmetric {

bool Dataset::operator==(const Dataset& other) const {
  if (num_identities != other.num_identities || dim != other.dim || cameras != other.cameras ||
      clips.size() != other.clips.size()) {
    return false;
  }
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const FrameSet& a = clips[i];
    const FrameSet& b = other.clips[i];
    if (a.identity != b.identity || a.clip_id != b.clip_id || a.frames.size() != b.frames.size()) return false;
    for (std::size_t f = 0; f < a.frames.size(); ++f) {
      if (a.frames[f].size() != b.frames[f].size() || a.frames[f] != b.frames[f]) return false;
    }
  }
  return true;
}

std::string to_string(OcclusionMode m) {
  return m == OcclusionMode::swap_identity ? "swap_identity" : "uniform_noise";
}

OcclusionMode parse_occlusion_mode(std::string_view name) {
  if (name == "swap_identity") return OcclusionMode::swap_identity;
  if (name == "uniform_noise") return OcclusionMode::uniform_noise;
  throw InputError("unknown occlusion mode '" + std::string(name) + "' (expected swap_identity|uniform_noise)");
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) { throw InputError(key + ": " + why); };
  if (num_identities < 1) fail("num_identities", "must be >= 1");
  if (clips_per_identity < 1) fail("clips_per_identity", "must be >= 1");
  if (frames_per_clip < 1) fail("frames_per_clip", "must be >= 1");
  if (input_dim < 1) fail("input_dim", "must be >= 1");
  if (!(sigma_within > 0.0)) fail("sigma_within", "must be > 0");
  if (!(sigma_between > sigma_within)) fail("sigma_between", "must exceed sigma_within");
  if (!(occlusion_prob >= 0.0 && occlusion_prob <= 1.0)) fail("occlusion_prob", "must lie in [0, 1]");
  if (occlusion_mode == OcclusionMode::swap_identity && occlusion_prob > 0.0 && num_identities < 2) {
    fail("occlusion_mode", "swap_identity needs at least 2 identities");
  }
}

Dataset generate(const GeneratorConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double box = 3.0 * cfg.sigma_between;
  std::uniform_real_distribution<double> noise(-box, box);
  const Eigen::Index d = cfg.input_dim;

  std::vector<Vector> centers;
  centers.reserve(static_cast<std::size_t>(cfg.num_identities));
  for (int i = 0; i < cfg.num_identities; ++i) {
    Vector c(d);
    for (Eigen::Index k = 0; k < d; ++k) c[k] = cfg.sigma_between * unit(rng);
    centers.push_back(std::move(c));
  }

  Dataset ds;
  ds.num_identities = cfg.num_identities;
  ds.dim = d;
  int clip_id = 0;
  for (int id = 0; id < cfg.num_identities; ++id) {
    for (int k = 0; k < cfg.clips_per_identity; ++k) {
      FrameSet clip;
      clip.identity = id;
      clip.clip_id = clip_id++;
      for (int t = 0; t < cfg.frames_per_clip; ++t) {
        const bool occluded = coin(rng) < cfg.occlusion_prob;
        Vector f(d);
        if (occluded && cfg.occlusion_mode == OcclusionMode::uniform_noise) {
          for (Eigen::Index j = 0; j < d; ++j) f[j] = noise(rng);
        } else {
          int source = id;
          if (occluded) {
            std::uniform_int_distribution<int> other(0, cfg.num_identities - 2);
            source = other(rng);
            if (source >= id) ++source;
          }
          for (Eigen::Index j = 0; j < d; ++j) f[j] = centers[static_cast<std::size_t>(source)][j] + cfg.sigma_within * unit(rng);
        }
        if (occluded) ++ds.occluded_frames;
        clip.frames.push_back(std::move(f));
      }
      ds.clips.push_back(std::move(clip));
      ds.cameras.push_back(k % 2);
    }
  }
  return ds;
}

void write_embeddings(const Dataset& dataset, std::ostream& out) {
  out << "# dim=" << dataset.dim << '\n';
  char buf[32];
  for (const auto& clip : dataset.clips) {
    for (std::size_t f = 0; f < clip.frames.size(); ++f) {
      out << clip.clip_id << ',' << clip.identity << ',' << f;
      for (Eigen::Index k = 0; k < clip.frames[f].size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", clip.frames[f][k]);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

void write_embeddings(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  write_embeddings(dataset, out);
  out.flush();
  if (!out) throw InputError("write to '" + path.string() + "' failed");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  field = trim(field);
  if (field.empty()) return false;
  const char* first = field.data();
  if constexpr (std::is_floating_point_v<T>) {
    if (*first == '+') ++first;
  }
  const auto res = std::from_chars(first, field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

}  // namespace

Dataset read_embeddings(std::istream& in, const std::string& source) {
  auto fail = [&](std::size_t line, const std::string& why) {
    throw InputError(source + ":" + std::to_string(line) + ": " + why);
  };

  struct RawClip {
    int identity;
    std::map<int, Vector> frames;
  };
  std::vector<int> clip_order;
  std::map<int, RawClip> clips;
  Eigen::Index dim = -1;

  std::string line;
  std::size_t lineno = 0;
  bool any_content = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    any_content = true;
    if (text.front() == '#') {
      const std::string_view body = trim(text.substr(1));
      if (body.rfind("dim=", 0) == 0) {
        long long d = 0;
        if (!parse_number(body.substr(4), d) || d < 1) fail(lineno, "invalid dimension header");
        if (dim >= 0 && d != dim) fail(lineno, "conflicting dimension header");
        dim = static_cast<Eigen::Index>(d);
      }
      continue;
    }
    if (dim < 0) fail(lineno, "data row before '# dim=<d>' header");

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = text.find(',', start);
      fields.push_back(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != static_cast<std::size_t>(dim) + 3) {
      fail(lineno, "expected " + std::to_string(dim + 3) + " fields (3 + dim=" + std::to_string(dim) + "), got " +
                       std::to_string(fields.size()));
    }
    int clip_id = 0, identity = 0, frame_index = 0;
    if (!parse_number(fields[0], clip_id)) fail(lineno, "non-integer clip_id");
    if (!parse_number(fields[1], identity) || identity < 0) fail(lineno, "invalid identity");
    if (!parse_number(fields[2], frame_index) || frame_index < 0) fail(lineno, "invalid frame_index");
    Vector v(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      double x = 0.0;
      if (!parse_number(fields[static_cast<std::size_t>(k) + 3], x) || !std::isfinite(x)) {
        fail(lineno, "non-numeric or non-finite value in column " + std::to_string(k + 3));
      }
      v[k] = x;
    }

    auto [it, inserted] = clips.try_emplace(clip_id, RawClip{identity, {}});
    if (inserted) {
      clip_order.push_back(clip_id);
    } else if (it->second.identity != identity) {
      fail(lineno, "clip " + std::to_string(clip_id) + " changes identity");
    }
    if (!it->second.frames.emplace(frame_index, std::move(v)).second) {
      fail(lineno, "duplicate (clip_id, frame_index) = (" + std::to_string(clip_id) + ", " +
                       std::to_string(frame_index) + ")");
    }
  }
  if (!any_content) throw InputError(source + ":1: empty file");
  if (dim < 0) throw InputError(source + ":" + std::to_string(lineno) + ": missing '# dim=<d>' header");

  std::set<int> raw_ids;
  for (const auto& [_, c] : clips) raw_ids.insert(c.identity);
  std::map<int, int> dense;
  for (int id : raw_ids) dense.emplace(id, static_cast<int>(dense.size()));

  Dataset ds;
  ds.dim = dim;
  ds.num_identities = static_cast<int>(dense.size());
  std::map<int, int> seen_per_identity;
  for (int cid : clip_order) {
    const RawClip& rc = clips.at(cid);
    FrameSet fs;
    fs.clip_id = cid;
    fs.identity = dense.at(rc.identity);
    for (const auto& [_, v] : rc.frames) fs.frames.push_back(v);
    ds.cameras.push_back(seen_per_identity[fs.identity]++ % 2);
    ds.clips.push_back(std::move(fs));
  }
  return ds;
}

Dataset load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return read_embeddings(in, path.string());
}

QueryGallerySplit split_query_gallery(const Dataset& dataset) {
  QueryGallerySplit split;
  std::set<int> in_query, in_gallery, all;
  for (std::size_t i = 0; i < dataset.clips.size(); ++i) {
    const int id = dataset.clips[i].identity;
    all.insert(id);
    if (dataset.cameras[i] == 0) {
      split.query.push_back(i);
      in_query.insert(id);
    } else {
      split.gallery.push_back(i);
      in_gallery.insert(id);
    }
  }
  std::string missing;
  for (int id : all) {
    if (!in_query.count(id) || !in_gallery.count(id)) {
      missing += (missing.empty() ? "" : ", ") + std::to_string(id) + (in_query.count(id) ? " (no camera 1)" : " (no camera 0)");
    }
  }
  if (!missing.empty()) throw InputError("identities missing from a camera: " + missing);
  return split;
}

}  // namespace setmetric
