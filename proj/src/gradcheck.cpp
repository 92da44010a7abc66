#include "pmcqa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pmcqa/errors.hpp"

namespace pmcqa {

double grad_check(const std::function<double(std::span<const double>)>& loss,
                  std::vector<double>& params, std::span<const double> analytic,
                  double step) {
  if (params.size() != analytic.size())
    throw ArgumentError("grad_check: gradient length does not match parameter count");
  if (!(step > 0.0)) throw ArgumentError("grad_check: step must be positive");

  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    double up = loss(params);
    params[i] = saved - step;
    double down = loss(params);
    params[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("grad_check: loss is non-finite near coordinate " + std::to_string(i));
    double numeric = (up - down) / (2.0 * step);
    // the 1e-4 floor absorbs cancellation noise on coordinates whose true
    // gradient is exactly zero (softmax logits are shift-invariant, so some
    // bias gradients vanish identically); any absolute error above the noise
    // scale still registers
    double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-4});
    max_rel = std::max(max_rel, std::abs(numeric - analytic[i]) / denom);
  }
  return max_rel;
}

}  // namespace pmcqa
