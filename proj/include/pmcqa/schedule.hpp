#pragma once

#include <cmath>

namespace pmcqa {

// Learning rate halves every decay_epochs: lr(t) = 0.5^(t / decay_epochs) * base.
struct LrSchedule {
  double base_lr = 0.001;
  int decay_epochs = 15;
};

inline double lr_at_epoch(const LrSchedule& s, int epoch) {
  return std::pow(0.5, static_cast<double>(epoch) / static_cast<double>(s.decay_epochs)) *
         s.base_lr;
}

}  // namespace pmcqa
