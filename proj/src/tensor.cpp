#include "recorrupt/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace recorrupt {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (numel(shape_) != data_.size()) {
    throw std::invalid_argument("Tensor: shape " + to_string(shape_) + " holds " + std::to_string(numel(shape_)) +
                                " elements but " + std::to_string(data_.size()) + " were given");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw std::out_of_range("Tensor::dim: axis " + std::to_string(axis) + " of shape " + to_string(shape_));
  }
  return shape_[axis];
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
  return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
  return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
}

double Tensor::item() const {
  if (data_.size() != 1) throw std::logic_error("Tensor::item: tensor of shape " + to_string(shape_) + " is not a scalar");
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != data_.size()) {
    throw std::invalid_argument("reshape: cannot view " + to_string(shape_) + " as " + to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                to_string(b.shape()));
  }
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor operator*(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (double& v : out.storage()) v *= s;
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape("dot", a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const Tensor& a) { return std::accumulate(a.storage().begin(), a.storage().end(), 0.0); }

double mean(const Tensor& a) { return a.empty() ? 0.0 : sum(a) / static_cast<double>(a.size()); }

double mse(const Tensor& a, const Tensor& b) {
  require_same_shape("mse", a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return a.empty() ? 0.0 : acc / static_cast<double>(a.size());
}

Tensor slice_batch(const Tensor& batch, std::size_t first, std::size_t count) {
  if (batch.rank() == 0 || first + count > batch.dim(0)) {
    throw std::out_of_range("slice_batch: range [" + std::to_string(first) + ", " + std::to_string(first + count) +
                            ") outside " + to_string(batch.shape()));
  }
  Shape shape = batch.shape();
  const std::size_t stride = batch.size() / shape[0];
  shape[0] = count;
  std::vector<double> data(batch.storage().begin() + static_cast<std::ptrdiff_t>(first * stride),
                           batch.storage().begin() + static_cast<std::ptrdiff_t>((first + count) * stride));
  return Tensor(std::move(shape), std::move(data));
}

Tensor stack_batch(const std::vector<Tensor>& items) {
  if (items.empty()) throw std::invalid_argument("stack_batch: no items");
  Shape shape = items.front().shape();
  if (shape.empty()) throw std::invalid_argument("stack_batch: items must have a leading axis");
  std::vector<double> data;
  data.reserve(items.front().size() * items.size());
  std::size_t total = 0;
  for (const Tensor& t : items) {
    require_same_shape("stack_batch", items.front(), t);
    data.insert(data.end(), t.storage().begin(), t.storage().end());
    total += t.dim(0);
  }
  shape[0] = total;
  return Tensor(std::move(shape), std::move(data));
}

} // namespace recorrupt
