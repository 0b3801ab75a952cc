#include "setmetric/encoder.hpp"

#include <cmath>

#include "setmetric/error.hpp"

namespace setmetric {

std::string to_string(EncoderLayout l) { return l == EncoderLayout::linear ? "linear" : "hidden"; }

EncoderLayout parse_encoder_layout(std::string_view name) {
  if (name == "linear") return EncoderLayout::linear;
  if (name == "hidden") return EncoderLayout::hidden;
  throw InputError("unknown encoder layout '" + std::string(name) + "' (expected linear|hidden)");
}

Eigen::Index EncoderParams::input_dim() const {
  return layout == EncoderLayout::linear ? projection.rows() : hidden_in.rows();
}

Eigen::Index EncoderParams::output_dim() const {
  return layout == EncoderLayout::linear ? projection.cols() : hidden_out.cols();
}

void glorot_uniform(Matrix& m, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> u(-a, a);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  }
}

EncoderParams EncoderParams::init(Eigen::Index d_in, Eigen::Index d_emb, EncoderLayout layout,
                                  Eigen::Index hidden_dim, std::mt19937_64& rng) {
  if (d_in < 1 || d_emb < 1) throw InputError("encoder dimensions must be >= 1");
  EncoderParams p;
  p.layout = layout;
  if (layout == EncoderLayout::linear) {
    p.projection.resize(d_in, d_emb);
    glorot_uniform(p.projection, rng);
  } else {
    if (hidden_dim < 1) throw InputError("encoder hidden_dim must be >= 1");
    p.hidden_in.resize(d_in, hidden_dim);
    p.hidden_out.resize(hidden_dim, d_emb);
    glorot_uniform(p.hidden_in, rng);
    glorot_uniform(p.hidden_out, rng);
  }
  return p;
}

EncoderParams EncoderParams::identity(Eigen::Index d) {
  EncoderParams p;
  p.projection = Matrix::Identity(d, d);
  return p;
}

FrameEmbedding encode(const EncoderParams& params, const FrameEmbedding& raw) {
  if (raw.size() != params.input_dim()) {
    throw InputError("dimension mismatch: encoder expects " + std::to_string(params.input_dim()) + ", got " +
                     std::to_string(raw.size()));
  }
  if (params.layout == EncoderLayout::linear) return params.projection.transpose() * raw;
  const Vector h = (params.hidden_in.transpose() * raw).cwiseMax(0.0);
  return params.hidden_out.transpose() * h;
}

FrameSet encode(const EncoderParams& params, const FrameSet& raw) {
  FrameSet out;
  out.identity = raw.identity;
  out.clip_id = raw.clip_id;
  out.frames.reserve(raw.frames.size());
  for (const auto& f : raw.frames) out.frames.push_back(encode(params, f));
  return out;
}

EncoderGrad EncoderGrad::zeros_like(const EncoderParams& p) {
  EncoderGrad g;
  g.projection = Matrix::Zero(p.projection.rows(), p.projection.cols());
  g.hidden_in = Matrix::Zero(p.hidden_in.rows(), p.hidden_in.cols());
  g.hidden_out = Matrix::Zero(p.hidden_out.rows(), p.hidden_out.cols());
  return g;
}

void encoder_backward(const EncoderParams& params, const FrameEmbedding& raw, const Vector& d_out, EncoderGrad& grad) {
  if (params.layout == EncoderLayout::linear) {
    grad.projection.noalias() += raw * d_out.transpose();
    return;
  }
  const Vector pre = params.hidden_in.transpose() * raw;
  const Vector h = pre.cwiseMax(0.0);
  grad.hidden_out.noalias() += h * d_out.transpose();
  Vector d_h = params.hidden_out * d_out;
  for (Eigen::Index k = 0; k < d_h.size(); ++k) {
    if (pre[k] <= 0.0) d_h[k] = 0.0;
  }
  grad.hidden_in.noalias() += raw * d_h.transpose();
}

}  // namespace setmetric
