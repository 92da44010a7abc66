#pragma once

#include <functional>
#include <span>
#include <vector>

namespace pmcqa {

// Central-difference check of `analytic` against `loss` evaluated around the
// current content of `params`. `loss` must be deterministic in `params`
// (fix dropout masks and data before calling). Returns the maximum relative
// error over coordinates, with denominators floored at 1e-4 so that exact
// zero gradients compare by absolute error. `params` is restored on return.
double grad_check(const std::function<double(std::span<const double>)>& loss,
                  std::vector<double>& params, std::span<const double> analytic,
                  double step = 1e-5);

}  // namespace pmcqa
