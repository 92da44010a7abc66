#include "pmcqa/adam.hpp"

#include <cmath>

#include "pmcqa/errors.hpp"

namespace pmcqa {

void AdamState::init(const std::vector<ParamBlock>& params) {
  step = 0;
  m.clear();
  v.clear();
  for (const ParamBlock& b : params) {
    m.emplace_back(b.size, 0.0);
    v.emplace_back(b.size, 0.0);
  }
}

void adam_step(AdamState& state, const std::vector<ParamBlock>& params,
               const std::vector<ParamBlock>& grads, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ArgumentError("adam_step: block lists are not aligned");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size != grads[b].size || params[b].size != state.m[b].size())
      throw ArgumentError("adam_step: size mismatch in block '" + params[b].name + "'");
    double* p = params[b].data;
    const double* g = grads[b].data;
    Vec& mb = state.m[b];
    Vec& vb = state.v[b];
    for (std::size_t i = 0; i < params[b].size; ++i) {
      if (!std::isfinite(g[i]))
        throw NumericError("non-finite gradient in block '" + params[b].name + "'");
      mb[i] = state.beta1 * mb[i] + (1.0 - state.beta1) * g[i];
      vb[i] = state.beta2 * vb[i] + (1.0 - state.beta2) * g[i] * g[i];
      double mhat = mb[i] / bc1;
      double vhat = vb[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace pmcqa
