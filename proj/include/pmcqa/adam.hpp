#pragma once

#include <string>
#include <vector>

#include "pmcqa/linalg.hpp"

namespace pmcqa {

// Named view over a flat chunk of parameters (or their gradients). Models
// expose their trainable state as an ordered list of these; Adam, the
// checkpoint writer and the gradient checker all walk the same order.
struct ParamBlock {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Vec> m;
  std::vector<Vec> v;

  void init(const std::vector<ParamBlock>& params);
};

// One bias-corrected Adam update over every block. `params` and `grads` must
// be aligned block-for-block; non-finite gradients raise NumericError naming
// the offending block.
void adam_step(AdamState& state, const std::vector<ParamBlock>& params,
               const std::vector<ParamBlock>& grads, double lr);

}  // namespace pmcqa
