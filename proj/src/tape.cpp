#include "tsregen/tape.hpp"

#include <stdexcept>

namespace tsregen::ad {

bool Tape::wants(std::initializer_list<Tensor> inputs) const {
  if (!recording()) return false;
  for (const Tensor& t : inputs)
    if (t.defined() && t.requires_grad()) return true;
  return false;
}

void Tape::record(const Tensor& output, std::function<void()> pull) {
  output.set_requires_grad(true);
  output.grad();  // allocate so downstream closures can accumulate into it
  nodes_.push_back(Node{output, std::move(pull)});
}

void Tape::backward(const Tensor& output) {
  if (!recording()) throw std::logic_error("Tape::backward: tape has gradients disabled");
  if (used_) throw std::logic_error("Tape::backward: tape already consumed; zero grads and rebuild the graph");
  if (output.size() != 1)
    throw std::invalid_argument("Tape::backward: output must be scalar, got shape " +
                                shape_to_string(output.shape()));
  bool on_tape = false;
  for (const Node& n : nodes_) {
    if (n.output.same_storage(output)) {
      on_tape = true;
      break;
    }
  }
  if (!on_tape) throw std::invalid_argument("Tape::backward: output was not produced on this tape");

  used_ = true;
  output.grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->pull();
}

}  // namespace tsregen::ad
