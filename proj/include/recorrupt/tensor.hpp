#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace recorrupt {

/// Extents of a tensor, outermost first. An empty shape denotes a scalar.
using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// The only invariant is numel(shape) == data.size(); everything else
/// (finiteness, value ranges) is the business of the operation producing it.
class Tensor {
public:
  Tensor() : shape_{0} {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{}, value); }
  static Tensor like(const Tensor& other, double fill = 0.0) { return Tensor(other.shape_, fill); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Element of a rank-4 (N, C, H, W) tensor.
  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x);
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const;

  /// Value of a single-element tensor; throws otherwise.
  double item() const;

  Tensor reshaped(Shape shape) const;
  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
  Shape shape_;
  std::vector<double> data_;
};

// Plain value arithmetic, used by validators and the training loop outside
// of any graph. Shapes must match exactly.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double mean(const Tensor& a);
double mse(const Tensor& a, const Tensor& b);

template <class F>
Tensor map(const Tensor& a, F&& f) {
  Tensor out = Tensor::like(a);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

/// Copy of images [first, first + count) of an (N, ...) tensor.
Tensor slice_batch(const Tensor& batch, std::size_t first, std::size_t count);
/// Stacks equally-shaped (1, ...) tensors along the leading axis.
Tensor stack_batch(const std::vector<Tensor>& items);

void require_same_shape(const char* op, const Tensor& a, const Tensor& b);

} // namespace recorrupt
