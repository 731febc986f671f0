#pragma once

#include <functional>
#include <string>
#include <vector>

#include "recorrupt/tensor.hpp"

namespace recorrupt {

/// A named trainable leaf. Gradients accumulate across backward passes until
/// zero_grad() is called.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid for the lifetime of the graph.
class Var {
public:
  Var() = default;

  const Tensor& value() const;
  /// Gradient left on this node by the last backward pass (zeros if untouched).
  Tensor grad() const;
  const Shape& shape() const { return value().shape(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only tape for reverse-mode differentiation.
///
/// Nodes are recorded in evaluation order, so the node list is already a
/// topological order; backward() walks it once from the output down. One
/// graph is built per loss evaluation and dropped afterwards.
class Graph {
public:
  /// Receives the graph and the id of the node whose gradient is ready.
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Differentiable leaf that is not a Parameter; read its gradient via Var::grad().
  Var input(Tensor value);
  /// Leaf bound to a Parameter; backward() accumulates into p.grad.
  Var parameter(Parameter& p);

  /// Records an op result. `backward` is only invoked when some input needs a gradient.
  Var record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Seeds d(output) = seed and propagates to every leaf. Output must hold one element.
  void backward(Var output, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }

  // Accessors for op implementations.
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t input_id(std::size_t id, std::size_t k) const { return nodes_[id].inputs[k]; }
  /// Gradient buffer of node `id`, zero-initialised on first use.
  Tensor& grad_buffer(std::size_t id);

private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

/// Graph-level primitives. Binary element-wise ops require identical shapes;
/// use broadcast_to for anything else.
namespace ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

/// (m, k) x (k, n) -> (m, n).
Var matmul(Var a, Var b);
/// (m, n) -> (n, m).
Var transpose(Var a);
/// x: (N, C, H, W), kernel: (O, C, kh, kw) with odd kh, kw. Stride 1, zero padding, same-size output.
Var conv2d(Var x, Var kernel);

Var sum(Var a);
Var mean(Var a);
Var dot(Var a, Var b);

Var square(Var a);
Var sqrt(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var sigmoid(Var a);
Var relu(Var a);
/// Element-wise clamp; zero gradient where the bound is active.
Var clamp(Var a, double lo, double hi);

/// Numpy-style broadcast (right-aligned, size-1 axes expand).
Var broadcast_to(Var a, Shape shape);
Var reshape(Var a, Shape shape);
Var slice(Var a, std::size_t axis, std::size_t start, std::size_t length);
Var concat(const std::vector<Var>& parts, std::size_t axis);

/// Forward identity; no gradient flows to the argument's ancestors.
Var stop_gradient(Var a);

} // namespace ad

inline Var operator+(Var a, Var b) { return ad::add(a, b); }
inline Var operator-(Var a, Var b) { return ad::sub(a, b); }
inline Var operator*(Var a, Var b) { return ad::mul(a, b); }
inline Var operator/(Var a, Var b) { return ad::div(a, b); }
inline Var operator-(Var a) { return ad::neg(a); }
inline Var operator*(double s, Var a) { return ad::scale(a, s); }
inline Var operator*(Var a, double s) { return ad::scale(a, s); }
inline Var operator+(Var a, double s) { return ad::add_scalar(a, s); }
inline Var operator-(Var a, double s) { return ad::add_scalar(a, -s); }

/// Plain value convolution with the same conventions as ad::conv2d.
Tensor conv2d(const Tensor& x, const Tensor& kernel);

} // namespace recorrupt
