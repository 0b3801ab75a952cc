#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "setmetric/types.hpp"

namespace setmetric {

enum class OcclusionMode { swap_identity, uniform_noise };

std::string to_string(OcclusionMode m);
OcclusionMode parse_occlusion_mode(std::string_view name);

/// Gaussian identity clusters with per-frame occlusion. Defaults are the toy
/// benchmark used by the ablation suites.
struct GeneratorConfig {
  int num_identities = 32;
  int clips_per_identity = 4;
  int frames_per_clip = 4;
  int input_dim = 32;
  double sigma_between = 3.0;
  double sigma_within = 1.0;
  double occlusion_prob = 0.25;
  OcclusionMode occlusion_mode = OcclusionMode::swap_identity;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Identity centers ~ N(0, sigma_between^2 I); frames = center + N(0, sigma_within^2 I).
/// An occluded frame is drawn around another identity's center (swap_identity)
/// or uniformly from [-3 sigma_between, 3 sigma_between]^d (uniform_noise).
/// Clip k of an identity is tagged with pseudo-camera k % 2.
Dataset generate(const GeneratorConfig& cfg);

/// Line format: a `# dim=<d>` header, then `clip_id,identity,frame_index,v0,...,v{d-1}`.
/// Values are written with 17 significant digits so a reload is bit-exact.
void write_embeddings(const Dataset& dataset, std::ostream& out);
void write_embeddings(const Dataset& dataset, const std::filesystem::path& path);

/// Parses the embedding text format. Identities are remapped to a dense range
/// in ascending order and cameras are assigned alternately per identity in
/// order of first appearance. Errors carry the offending line number.
Dataset read_embeddings(std::istream& in, const std::string& source = "<stream>");
Dataset load_embeddings(const std::filesystem::path& path);

struct QueryGallerySplit {
  std::vector<std::size_t> query;    // camera-0 clip indices
  std::vector<std::size_t> gallery;  // camera-1 clip indices
};

QueryGallerySplit split_query_gallery(const Dataset& dataset);

}  // namespace setmetric
