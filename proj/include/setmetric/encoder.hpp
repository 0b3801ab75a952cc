#pragma once

#include <random>
#include <string>
#include <vector>

#include "setmetric/types.hpp"

namespace setmetric {

enum class EncoderLayout { linear, hidden };

std::string to_string(EncoderLayout l);
EncoderLayout parse_encoder_layout(std::string_view name);

/// Frame encoder standing in for a CNN backbone.
///   linear: y = P^T x                  (P is d_in x d_emb)
///   hidden: y = W2^T max(0, W1^T x)    (W1 is d_in x h, W2 is h x d_emb)
struct EncoderParams {
  EncoderLayout layout = EncoderLayout::linear;
  Matrix projection;
  Matrix hidden_in;
  Matrix hidden_out;

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;

  /// Glorot-uniform initialization: entries ~ U[-a, a], a = sqrt(6 / (fan_in + fan_out)).
  static EncoderParams init(Eigen::Index d_in, Eigen::Index d_emb, EncoderLayout layout, Eigen::Index hidden_dim,
                            std::mt19937_64& rng);
  static EncoderParams identity(Eigen::Index d);
};

/// Fills `m` with U[-a, a], a = sqrt(6 / (rows + cols)).
void glorot_uniform(Matrix& m, std::mt19937_64& rng);

FrameEmbedding encode(const EncoderParams& params, const FrameEmbedding& raw);
FrameSet encode(const EncoderParams& params, const FrameSet& raw);

/// Gradient of a scalar loss with respect to the encoder parameters.
struct EncoderGrad {
  Matrix projection;
  Matrix hidden_in;
  Matrix hidden_out;

  static EncoderGrad zeros_like(const EncoderParams& p);
};

/// Accumulates dL/dparams for one frame given dL/dy.
void encoder_backward(const EncoderParams& params, const FrameEmbedding& raw, const Vector& d_out, EncoderGrad& grad);

}  // namespace setmetric
