#include "pmcqa/mlp.hpp"

#include "pmcqa/errors.hpp"

namespace pmcqa {

Vec mlp_forward(const MlpParams& params, std::span<const double> input,
                const Vec* mask, bool training, MlpCache* cache) {
  if (input.size() != params.in_dim())
    throw ArgumentError("mlp_forward: input dimension " + std::to_string(input.size()) +
                        ", expected " + std::to_string(params.in_dim()));
  if (training && mask == nullptr)
    throw ArgumentError("mlp_forward: training requires a dropout mask");
  if (!training && mask != nullptr)
    throw ArgumentError("mlp_forward: inference must not receive a dropout mask");
  if (mask && mask->size() != params.hidden_dim())
    throw ArgumentError("mlp_forward: mask length " + std::to_string(mask->size()) +
                        ", expected " + std::to_string(params.hidden_dim()));

  Vec pre = matvec(params.hidden.weight, input);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += params.hidden.bias[i];

  const double keep = 1.0 - params.dropout_rate;
  Vec post(pre.size());
  Vec factor(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    double act = pre[i] > 0.0 ? pre[i] : 0.0;
    double f = training ? (*mask)[i] : keep;
    factor[i] = f;
    post[i] = act * f;
  }

  Vec out = matvec(params.output.weight, post);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (out[i] + params.output.bias[i]) * params.output_scale;

  if (cache) {
    cache->input.assign(input.begin(), input.end());
    cache->hidden_pre = std::move(pre);
    cache->hidden_post = post;
    cache->drop_factor = std::move(factor);
  }
  return out;
}

Vec mlp_backward(const MlpParams& params, const MlpCache& cache,
                 std::span<const double> grad_output, MlpParams& grads) {
  if (cache.input.size() != params.in_dim() || cache.hidden_pre.size() != params.hidden_dim() ||
      cache.hidden_post.size() != params.hidden_dim() ||
      cache.drop_factor.size() != params.hidden_dim())
    throw ContractError("mlp_backward: cache does not match parameter shapes");
  if (grad_output.size() != params.out_dim())
    throw ArgumentError("mlp_backward: grad_output dimension " +
                        std::to_string(grad_output.size()) + ", expected " +
                        std::to_string(params.out_dim()));
  if (grads.hidden.weight.rows != params.hidden_dim() ||
      grads.hidden.weight.cols != params.in_dim() ||
      grads.output.weight.rows != params.out_dim() ||
      grads.output.weight.cols != params.hidden_dim())
    throw ContractError("mlp_backward: grads buffer does not match parameter shapes");

  Vec d_out(grad_output.size());
  for (std::size_t i = 0; i < d_out.size(); ++i) d_out[i] = grad_output[i] * params.output_scale;

  outer_acc(grads.output.weight, d_out, cache.hidden_post);
  axpy(1.0, d_out, grads.output.bias);

  Vec d_post(params.hidden_dim(), 0.0);
  matvec_transpose_acc(params.output.weight, d_out, d_post);

  Vec d_pre(params.hidden_dim());
  for (std::size_t i = 0; i < d_pre.size(); ++i) {
    double relu_grad = cache.hidden_pre[i] > 0.0 ? 1.0 : 0.0;
    d_pre[i] = d_post[i] * cache.drop_factor[i] * relu_grad;
  }

  outer_acc(grads.hidden.weight, d_pre, cache.input);
  axpy(1.0, d_pre, grads.hidden.bias);

  Vec d_input(params.in_dim(), 0.0);
  matvec_transpose_acc(params.hidden.weight, d_pre, d_input);
  return d_input;
}

}  // namespace pmcqa
