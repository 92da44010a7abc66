#pragma once

#include <span>

#include "pmcqa/linalg.hpp"

namespace pmcqa {

struct DenseLayer {
  Matrix weight;  // out x in
  Vec bias;

  DenseLayer() = default;
  DenseLayer(std::size_t out_dim, std::size_t in_dim)
      : weight(out_dim, in_dim), bias(out_dim, 0.0) {}

  std::size_t in_dim() const { return weight.cols; }
  std::size_t out_dim() const { return weight.rows; }
};

// Two-layer perceptron: hidden affine -> ReLU -> dropout -> output affine,
// output multiplied by output_scale. Dropout has two regimes: during training
// the hidden activation is multiplied by an externally supplied binary mask;
// at inference it is multiplied by the constant (1 - dropout_rate).
struct MlpParams {
  DenseLayer hidden;
  DenseLayer output;
  double dropout_rate = 0.5;
  double output_scale = 1.0;

  MlpParams() = default;
  MlpParams(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
            double dropout, double scale)
      : hidden(hidden_dim, in_dim),
        output(out_dim, hidden_dim),
        dropout_rate(dropout),
        output_scale(scale) {}

  std::size_t in_dim() const { return hidden.in_dim(); }
  std::size_t hidden_dim() const { return hidden.out_dim(); }
  std::size_t out_dim() const { return output.out_dim(); }
};

// Forward intermediates needed by the backward pass. Caches only pair with
// the params that produced them; shapes are validated on use.
struct MlpCache {
  Vec input;
  Vec hidden_pre;   // before ReLU
  Vec hidden_post;  // after ReLU and mask/scale
  Vec drop_factor;  // per-unit multiplier actually applied (mask or constant)
};

// `mask` must be a binary vector of hidden_dim length when training and null
// at inference. Pass `cache` to enable a later backward call.
Vec mlp_forward(const MlpParams& params, std::span<const double> input,
                const Vec* mask, bool training, MlpCache* cache = nullptr);

// Accumulates parameter gradients into `grads` (an MlpParams of identical
// shape used as a plain container) and returns d loss / d input.
Vec mlp_backward(const MlpParams& params, const MlpCache& cache,
                 std::span<const double> grad_output, MlpParams& grads);

}  // namespace pmcqa
