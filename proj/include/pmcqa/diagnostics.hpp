#pragma once

#include <cstdint>

#include "pmcqa/model.hpp"
#include "pmcqa/objective.hpp"

namespace pmcqa {

// End-to-end gradient verification: builds a tiny randomized task (dims <= 8,
// universe <= 6, dropout disabled), runs one training batch of the given
// family under the given weighting rule, and compares the analytic gradient
// of every parameter against central finite differences. Returns the maximum
// relative error. cls ignores the weighting rule.
double gradcheck_model(ModelFamily family, WeightKind kind, std::uint64_t seed,
                       double step = 1e-5);

}  // namespace pmcqa
