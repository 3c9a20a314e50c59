#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hsr {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Transform applied in-place to a node's fully-accumulated incoming gradient,
// once per backward pass, before it propagates to the node's inputs.
using GradHook = std::function<void(std::vector<double>& grad, const Shape& shape)>;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // accumulated across backward() calls
  GradHook hook;

  std::vector<std::shared_ptr<Node>> parents;
  // Scatters this node's incoming flow into the parents' flow buffers.
  std::function<void(Node& self, const std::vector<double>& flow)> backprop;

  // Per-backward-pass scratch; valid only while backward() runs.
  std::vector<double> flow;
  bool on_tape = false;

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
};

}  // namespace detail

// Dense N-d array participating in a define-by-run autodiff tape. Value
// semantics: copies share the underlying node. Data is immutable once a node
// feeds a graph; parameter tensors are mutated only between tapes (optimizer
// steps).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int dim(int axis) const;
  int ndim() const;
  std::int64_t size() const;

  const std::vector<double>& data() const;
  std::vector<double>& data();
  double item() const;  // requires size() == 1

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  void set_grad_hook(GradHook hook);
  void clear_grad_hook();

  // New leaf holding a copy of the data, disconnected from any graph.
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// --- elementwise ---------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor div_scalar(const Tensor& a, double s);
Tensor abs_elem(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);
Tensor log_elem(const Tensor& a);
Tensor clamp_elem(const Tensor& a, double lo, double hi);

// Broadcast against a 1-element tensor (the only broadcasting allowed).
Tensor mul_bcast(const Tensor& a, const Tensor& scalar);
Tensor div_bcast(const Tensor& a, const Tensor& scalar);

// --- linear algebra ------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);

// 2-D cross-correlation, zero padding (k-1)/2, odd k. Output spatial size is
// preserved for stride 1 and floor((d-1)/stride)+1 otherwise.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              int stride = 1);

// --- reductions ----------------------------------------------------------
// axes empty means reduce over all axes (result shape {1}).
Tensor reduce_sum(const Tensor& a, const std::vector<int>& axes = {});
Tensor reduce_mean(const Tensor& a, const std::vector<int>& axes = {});
Tensor frobenius(const Tensor& a);

// --- shape ---------------------------------------------------------------
Tensor reshape(const Tensor& a, Shape new_shape);
Tensor transpose2d(const Tensor& a);
Tensor slice_rows(const Tensor& a, int row_begin, int row_end);
Tensor concat_rows(const Tensor& a, const Tensor& b);

// --- softmax -------------------------------------------------------------
// Row-wise softmax on [r x n], stabilized by row-max subtraction.
Tensor softmax_rows(const Tensor& w);

// --- autodiff ------------------------------------------------------------
// Reverse-mode pass from a scalar loss. Populates grad on every
// requires_grad node reachable from the loss; applies each node's hook to
// its fully-accumulated flow exactly once. Repeatable: a second call on the
// same graph accumulates into the same grad buffers.
void backward(const Tensor& loss);

}  // namespace hsr
