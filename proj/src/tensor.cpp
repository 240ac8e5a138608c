#include "tsregen/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace tsregen::ad {

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {
std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("Tensor: zero dimension in shape " + shape_to_string(shape));
    n *= d;
  }
  return n;
}
}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  auto st = std::make_shared<Storage>();
  std::size_t n = shape_size(shape);
  st->shape = std::move(shape);
  st->value.assign(n, 0.0);
  st->requires_grad = requires_grad;
  return Tensor(std::move(st));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double fill, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.value()) v = fill;
  return t;
}

Tensor Tensor::of(std::vector<std::size_t> shape, std::vector<double> values, bool requires_grad) {
  auto st = std::make_shared<Storage>();
  std::size_t n = shape_size(shape);
  if (n != values.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_to_string(shape) + " needs " +
                                std::to_string(n) + " values, got " + std::to_string(values.size()));
  }
  st->shape = std::move(shape);
  st->value = std::move(values);
  st->requires_grad = requires_grad;
  return Tensor(std::move(st));
}

Tensor Tensor::scalar(double v) { return of({1}, {v}); }

const std::vector<std::size_t>& Tensor::shape() const { return st_->shape; }
std::size_t Tensor::rank() const { return st_->shape.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= st_->shape.size())
    throw std::invalid_argument("Tensor::dim: axis out of range for shape " + shape_to_string(st_->shape));
  return st_->shape[axis];
}

std::size_t Tensor::size() const { return st_->value.size(); }

std::vector<double>& Tensor::value() const { return st_->value; }

bool Tensor::requires_grad() const { return st_ && st_->requires_grad; }

void Tensor::set_requires_grad(bool enabled) const { st_->requires_grad = enabled; }

std::vector<double>& Tensor::grad() const {
  if (st_->grad.empty()) st_->grad.assign(st_->value.size(), 0.0);
  return st_->grad;
}

bool Tensor::has_grad() const { return st_ && !st_->grad.empty(); }

void Tensor::zero_grad() const {
  if (!st_->grad.empty()) st_->grad.assign(st_->value.size(), 0.0);
}

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("Tensor::item: tensor has shape " + shape_to_string(st_->shape) +
                                ", expected a single element");
  return st_->value[0];
}

}  // namespace tsregen::ad
