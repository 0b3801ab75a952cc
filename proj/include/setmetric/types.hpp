#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace setmetric {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One frame-level embedding.
using FrameEmbedding = Vector;

/// A clip treated as an unordered set of frame embeddings. `frames` is
/// storage order only; no set operation depends on it.
struct FrameSet {
  std::vector<FrameEmbedding> frames;
  int identity = 0;
  int clip_id = 0;

  std::size_t size() const { return frames.size(); }
  Eigen::Index dim() const { return frames.empty() ? 0 : frames.front().size(); }
};

/// Builds a FrameSet of 1-D points; used mostly by tests and the CLI.
inline FrameSet make_set_1d(std::initializer_list<double> values, int identity = 0, int clip_id = 0) {
  FrameSet s;
  s.identity = identity;
  s.clip_id = clip_id;
  for (double v : values) s.frames.push_back(Vector::Constant(1, v));
  return s;
}

}  // namespace setmetric

namespace setmetric {

/// Final linear classifier; column c of `prototypes` is the prototype w_c of
/// class c. Logits are W^T x with no bias.
struct ClassifierHead {
  Matrix prototypes;  // embedding_dim x num_classes

  Eigen::Index num_classes() const { return prototypes.cols(); }
  Eigen::Index dim() const { return prototypes.rows(); }
};

/// A collection of raw (pre-encoder) clips. Identities are dense in
/// [0, num_identities). `cameras[i]` is the pseudo-camera (0 or 1) of clip i.
struct Dataset {
  std::vector<FrameSet> clips;
  std::vector<int> cameras;
  int num_identities = 0;
  Eigen::Index dim = 0;
  std::size_t occluded_frames = 0;

  bool operator==(const Dataset& other) const;
};

}  // namespace setmetric
