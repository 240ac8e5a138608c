#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include "tsregen/tensor.hpp"

namespace tsregen::ad {

enum class GradMode { enabled, disabled };

// Records primitive operations in execution order; backward replays them in
// reverse, which is a valid reverse topological order because every output
// tensor is created strictly after its inputs.
//
// Gradients accumulate into Tensor::grad and are not cleared here. A tape
// runs backward once; build a fresh tape (and zero parameter grads) for the
// next pass. Double backward is unsupported.
class Tape {
 public:
  explicit Tape(GradMode mode = GradMode::enabled) : mode_(mode) {}

  bool recording() const { return mode_ == GradMode::enabled; }

  // True when this op application should be recorded: tape is recording and
  // at least one input carries requires_grad.
  bool wants(std::initializer_list<Tensor> inputs) const;

  // Marks `output` as grad-carrying and registers its pull-back closure.
  void record(const Tensor& output, std::function<void()> pull);

  // Seeds d(output)=1 and pulls gradients back to every requires_grad tensor
  // reachable from `output`. `output` must be a scalar produced on this tape.
  void backward(const Tensor& output);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor output;
    std::function<void()> pull;
  };
  std::vector<Node> nodes_;
  GradMode mode_;
  bool used_ = false;
};

}  // namespace tsregen::ad
