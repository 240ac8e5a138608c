#pragma once

#include <cstdint>
#include <vector>

#include "tsregen/tensor.hpp"

namespace tsregen::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over an explicit parameter list. step() consumes the
// gradients currently stored on the parameters; the update is deterministic
// given parameter values, gradients, and optimizer state.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void step();
  void zero_grad();
  std::uint64_t steps() const { return step_count_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig cfg_;
  std::uint64_t step_count_ = 0;
};

}  // namespace tsregen::ad
