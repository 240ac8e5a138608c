#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace tsregen::ad {

std::string shape_to_string(const std::vector<std::size_t>& shape);

// Dense row-major tensor of 64-bit floats with optional gradient storage.
// Tensor is a shared handle: copies alias the same storage, which lets
// optimizer updates and tape closures observe the same buffers.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double fill, bool requires_grad = false);
  static Tensor of(std::vector<std::size_t> shape, std::vector<double> values,
                   bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return static_cast<bool>(st_); }

  const std::vector<std::size_t>& shape() const;
  std::size_t rank() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::vector<double>& value() const;

  bool requires_grad() const;
  void set_requires_grad(bool enabled) const;

  // Gradient buffer, zero-initialised to the tensor's size on first use.
  std::vector<double>& grad() const;
  bool has_grad() const;
  void zero_grad() const;

  // Value of a one-element tensor.
  double item() const;

  bool same_storage(const Tensor& other) const { return st_ == other.st_; }

 private:
  struct Storage {
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> st_;
  explicit Tensor(std::shared_ptr<Storage> st) : st_(std::move(st)) {}
};

}  // namespace tsregen::ad
