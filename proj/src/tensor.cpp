#include "hsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace hsr {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_defined(const Tensor& t, const char* what) {
  if (!t.defined()) fail(std::string(what) + ": undefined tensor");
}

NodePtr make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return n;
}

// Creates the output node of an op. Edges and the backprop closure are only
// recorded when some input needs gradients; pure-value paths stay leaf-free.
NodePtr make_result(Shape shape, std::vector<double> data,
                    std::vector<NodePtr> parents,
                    std::function<void(Node&, const std::vector<double>&)> backprop) {
  bool needs = false;
  for (const auto& p : parents)
    if (p->requires_grad) needs = true;
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = needs;
  if (needs) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// --- Tensor --------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (int d : shape)
    if (d <= 0) fail("tensor shape entries must be positive, got " + shape_str(shape));
  std::vector<double> data(static_cast<size_t>(numel(shape)), value);
  return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  for (int d : shape)
    if (d <= 0) fail("tensor shape entries must be positive, got " + shape_str(shape));
  if (static_cast<std::int64_t>(data.size()) != numel(shape))
    fail("data length " + std::to_string(data.size()) + " does not match shape " +
         shape_str(shape));
  return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  check_defined(*this, "shape");
  return node_->shape;
}

int Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    fail("dim: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }

std::int64_t Tensor::size() const {
  check_defined(*this, "size");
  return node_->size();
}

const std::vector<double>& Tensor::data() const {
  check_defined(*this, "data");
  return node_->data;
}

std::vector<double>& Tensor::data() {
  check_defined(*this, "data");
  return node_->data;
}

double Tensor::item() const {
  check_defined(*this, "item");
  if (node_->data.size() != 1)
    fail("item: tensor has " + std::to_string(node_->data.size()) + " elements");
  return node_->data[0];
}

bool Tensor::requires_grad() const {
  check_defined(*this, "requires_grad");
  return node_->requires_grad;
}

void Tensor::set_requires_grad(bool value) {
  check_defined(*this, "set_requires_grad");
  node_->requires_grad = value;
}

bool Tensor::has_grad() const {
  check_defined(*this, "has_grad");
  return !node_->grad.empty();
}

const std::vector<double>& Tensor::grad() const {
  check_defined(*this, "grad");
  if (node_->grad.empty()) fail("grad: no gradient present (run backward first)");
  return node_->grad;
}

void Tensor::zero_grad() {
  check_defined(*this, "zero_grad");
  node_->grad.clear();
}

void Tensor::set_grad_hook(GradHook hook) {
  check_defined(*this, "set_grad_hook");
  node_->hook = std::move(hook);
}

void Tensor::clear_grad_hook() {
  check_defined(*this, "clear_grad_hook");
  node_->hook = nullptr;
}

Tensor Tensor::detach() const {
  check_defined(*this, "detach");
  return Tensor(make_leaf(node_->shape, node_->data, false));
}

// --- elementwise ---------------------------------------------------------

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
         shape_str(b.shape()));
}

Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name,
                          double (*fwd)(double, double), double da_coeff,
                          double db_coeff) {
  // Covers add/sub only (constant input gradients).
  check_same_shape(a, b, name);
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i], b.data()[i]);
  NodePtr an = a.node(), bn = b.node();
  return Tensor(make_result(
      a.shape(), std::move(out), {an, bn},
      [an, bn, da_coeff, db_coeff](Node&, const std::vector<double>& flow) {
        if (an->requires_grad)
          for (size_t i = 0; i < flow.size(); ++i) an->flow[i] += da_coeff * flow[i];
        if (bn->requires_grad)
          for (size_t i = 0; i < flow.size(); ++i) bn->flow[i] += db_coeff * flow[i];
      }));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, "add", [](double x, double y) { return x + y; }, 1.0, 1.0);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, "sub", [](double x, double y) { return x - y; }, 1.0, -1.0);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  NodePtr an = a.node(), bn = b.node();
  return Tensor(make_result(a.shape(), std::move(out), {an, bn},
                            [an, bn](Node&, const std::vector<double>& flow) {
                              if (an->requires_grad)
                                for (size_t i = 0; i < flow.size(); ++i)
                                  an->flow[i] += bn->data[i] * flow[i];
                              if (bn->requires_grad)
                                for (size_t i = 0; i < flow.size(); ++i)
                                  bn->flow[i] += an->data[i] * flow[i];
                            }));
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const Tensor& a, Fwd fwd, Bwd bwd) {
  // bwd(i, flow_i) returns the contribution to a's flow at index i.
  check_defined(a, "unary op");
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i]);
  NodePtr an = a.node();
  return Tensor(make_result(a.shape(), std::move(out), {an},
                            [an, bwd](Node& self, const std::vector<double>& flow) {
                              for (size_t i = 0; i < flow.size(); ++i)
                                an->flow[i] += bwd(an->data[i], self.data[i], flow[i]);
                            }));
}

}  // namespace

Tensor add_scalar(const Tensor& a, double s) {
  return unary_elementwise(
      a, [s](double x) { return x + s; },
      [](double, double, double g) { return g; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_elementwise(
      a, [s](double x) { return x * s; },
      [s](double, double, double g) { return s * g; });
}

Tensor div_scalar(const Tensor& a, double s) {
  if (s == 0.0) fail("div_scalar: division by zero");
  return unary_elementwise(
      a, [s](double x) { return x / s; },
      [s](double, double, double g) { return g / s; });
}

Tensor abs_elem(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return std::fabs(x); },
      [](double x, double, double g) { return x > 0 ? g : (x < 0 ? -g : 0.0); });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary_elementwise(
      a, [slope](double x) { return x >= 0 ? x : slope * x; },
      [slope](double x, double, double g) { return x >= 0 ? g : slope * g; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elementwise(
      a,
      [](double x) {
        // Split by sign so exp never overflows.
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y, double g) { return y * (1.0 - y) * g; });
}

Tensor log_elem(const Tensor& a) {
  for (double v : a.data())
    if (v <= 0.0) fail("log_elem: non-positive input " + std::to_string(v));
  return unary_elementwise(
      a, [](double x) { return std::log(x); },
      [](double x, double, double g) { return g / x; });
}

Tensor clamp_elem(const Tensor& a, double lo, double hi) {
  if (lo > hi) fail("clamp_elem: lo > hi");
  return unary_elementwise(
      a, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
      [lo, hi](double x, double, double g) { return (x >= lo && x <= hi) ? g : 0.0; });
}

namespace {

Tensor scalar_bcast(const Tensor& a, const Tensor& s, bool divide) {
  check_defined(a, "scalar broadcast");
  check_defined(s, "scalar broadcast");
  if (s.size() != 1) fail("scalar broadcast: scale tensor must have 1 element, got " +
                          shape_str(s.shape()));
  const double sv = s.data()[0];
  if (divide && sv == 0.0) fail("div_bcast: division by zero scalar");
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = divide ? a.data()[i] / sv : a.data()[i] * sv;
  NodePtr an = a.node(), sn = s.node();
  return Tensor(make_result(
      a.shape(), std::move(out), {an, sn},
      [an, sn, divide](Node& self, const std::vector<double>& flow) {
        const double sv = sn->data[0];
        if (an->requires_grad) {
          for (size_t i = 0; i < flow.size(); ++i)
            an->flow[i] += divide ? flow[i] / sv : flow[i] * sv;
        }
        if (sn->requires_grad) {
          double acc = 0.0;
          if (divide) {
            // d(a/s)/ds = -a/s^2 = -y/s
            for (size_t i = 0; i < flow.size(); ++i) acc -= self.data[i] / sv * flow[i];
          } else {
            for (size_t i = 0; i < flow.size(); ++i) acc += an->data[i] * flow[i];
          }
          sn->flow[0] += acc;
        }
      }));
}

}  // namespace

Tensor mul_bcast(const Tensor& a, const Tensor& scalar) { return scalar_bcast(a, scalar, false); }
Tensor div_bcast(const Tensor& a, const Tensor& scalar) { return scalar_bcast(a, scalar, true); }

// --- matmul --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.ndim() != 2 || b.ndim() != 2)
    fail("matmul: expects 2-D operands, got " + shape_str(a.shape()) + " and " +
         shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    fail("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
         shape_str(b.shape()));
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (int i = 0; i < m; ++i) {
    double* orow = out.data() + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ad[static_cast<size_t>(i) * k + p];
      const double* brow = bd + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  NodePtr an = a.node(), bn = b.node();
  return Tensor(make_result(
      {m, n}, std::move(out), {an, bn},
      [an, bn, m, k, n](Node&, const std::vector<double>& flow) {
        const double* g = flow.data();
        if (an->requires_grad) {
          // a_grad = g . b^T
          double* ag = an->flow.data();
          const double* bd = bn->data.data();
          for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
              const double* grow = g + static_cast<size_t>(i) * n;
              const double* brow = bd + static_cast<size_t>(p) * n;
              double acc = 0.0;
              for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ag[static_cast<size_t>(i) * k + p] += acc;
            }
        }
        if (bn->requires_grad) {
          // b_grad = a^T . g
          double* bg = bn->flow.data();
          const double* ad = an->data.data();
          for (int p = 0; p < k; ++p)
            for (int i = 0; i < m; ++i) {
              const double av = ad[static_cast<size_t>(i) * k + p];
              const double* grow = g + static_cast<size_t>(i) * n;
              double* brow = bg + static_cast<size_t>(p) * n;
              for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
            }
        }
      }));
}

// --- conv2d --------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              int stride) {
  check_defined(input, "conv2d");
  check_defined(kernels, "conv2d");
  check_defined(bias, "conv2d");
  if (input.ndim() != 3) fail("conv2d: input must be [c x h x w], got " + shape_str(input.shape()));
  if (kernels.ndim() != 4)
    fail("conv2d: kernels must be [co x ci x k x k], got " + shape_str(kernels.shape()));
  const int ci = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int co = kernels.dim(0), kci = kernels.dim(1), k = kernels.dim(2);
  if (kernels.dim(3) != k) fail("conv2d: kernels must be square");
  if (k % 2 == 0) fail("conv2d: kernel size must be odd, got " + std::to_string(k));
  if (kci != ci)
    fail("conv2d: channel mismatch, input has " + std::to_string(ci) +
         " channels but kernels expect " + std::to_string(kci));
  if (bias.ndim() != 1 || bias.dim(0) != co)
    fail("conv2d: bias must be [co], got " + shape_str(bias.shape()));
  if (stride < 1) fail("conv2d: stride must be >= 1");

  const int p = (k - 1) / 2;
  const int oh = (h - 1) / stride + 1;
  const int ow = (w - 1) / stride + 1;

  std::vector<double> out(static_cast<size_t>(co) * oh * ow);
  const double* in = input.data().data();
  const double* ker = kernels.data().data();
  const double* bs = bias.data().data();

  for (int oc = 0; oc < co; ++oc) {
    double* oplane = out.data() + static_cast<size_t>(oc) * oh * ow;
    std::fill(oplane, oplane + static_cast<size_t>(oh) * ow, bs[oc]);
    for (int ic = 0; ic < ci; ++ic) {
      const double* iplane = in + static_cast<size_t>(ic) * h * w;
      const double* kbase = ker + (static_cast<size_t>(oc) * ci + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double wt = kbase[ky * k + kx];
          if (wt == 0.0) continue;
          const int off = kx - p;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ky - p;
            if (iy < 0 || iy >= h) continue;
            const double* irow = iplane + static_cast<size_t>(iy) * w;
            double* orow = oplane + static_cast<size_t>(oy) * ow;
            if (stride == 1) {
              const int x0 = std::max(0, -off);
              const int x1 = std::min(ow, w - off);
              for (int x = x0; x < x1; ++x) orow[x] += wt * irow[x + off];
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride + off;
                if (ix >= 0 && ix < w) orow[ox] += wt * irow[ix];
              }
            }
          }
        }
      }
    }
  }

  NodePtr in_n = input.node(), ker_n = kernels.node(), b_n = bias.node();
  return Tensor(make_result(
      {co, oh, ow}, std::move(out), {in_n, ker_n, b_n},
      [in_n, ker_n, b_n, ci, h, w, co, k, p, stride, oh,
       ow](Node&, const std::vector<double>& flow) {
        const double* g = flow.data();
        if (b_n->requires_grad) {
          double* bg = b_n->flow.data();
          for (int oc = 0; oc < co; ++oc) {
            const double* gp = g + static_cast<size_t>(oc) * oh * ow;
            double acc = 0.0;
            for (int i = 0; i < oh * ow; ++i) acc += gp[i];
            bg[oc] += acc;
          }
        }
        const double* in = in_n->data.data();
        const double* ker = ker_n->data.data();
        for (int oc = 0; oc < co; ++oc) {
          const double* gplane = g + static_cast<size_t>(oc) * oh * ow;
          for (int ic = 0; ic < ci; ++ic) {
            const double* iplane = in + static_cast<size_t>(ic) * h * w;
            const size_t kofs = (static_cast<size_t>(oc) * ci + ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int off = kx - p;
                const double wt = ker[kofs + ky * k + kx];
                double kacc = 0.0;
                for (int oy = 0; oy < oh; ++oy) {
                  const int iy = oy * stride + ky - p;
                  if (iy < 0 || iy >= h) continue;
                  const double* grow = gplane + static_cast<size_t>(oy) * ow;
                  const double* irow = iplane + static_cast<size_t>(iy) * w;
                  if (stride == 1) {
                    const int x0 = std::max(0, -off);
                    const int x1 = std::min(ow, w - off);
                    if (ker_n->requires_grad)
                      for (int x = x0; x < x1; ++x) kacc += grow[x] * irow[x + off];
                    if (in_n->requires_grad) {
                      double* drow = in_n->flow.data() +
                                     static_cast<size_t>(ic) * h * w +
                                     static_cast<size_t>(iy) * w;
                      for (int x = x0; x < x1; ++x) drow[x + off] += wt * grow[x];
                    }
                  } else {
                    double* drow = in_n->requires_grad
                                       ? in_n->flow.data() + static_cast<size_t>(ic) * h * w +
                                             static_cast<size_t>(iy) * w
                                       : nullptr;
                    for (int ox = 0; ox < ow; ++ox) {
                      const int ix = ox * stride + off;
                      if (ix < 0 || ix >= w) continue;
                      if (ker_n->requires_grad) kacc += grow[ox] * irow[ix];
                      if (drow) drow[ix] += wt * grow[ox];
                    }
                  }
                }
                if (ker_n->requires_grad) ker_n->flow[kofs + ky * k + kx] += kacc;
              }
            }
          }
        }
      }));
}

// --- reductions ----------------------------------------------------------

namespace {

void check_axes(const Tensor& a, const std::vector<int>& axes) {
  for (int ax : axes)
    if (ax < 0 || ax >= a.ndim())
      fail("reduce: invalid axis " + std::to_string(ax) + " for " + shape_str(a.shape()));
}

// Maps every flat input index to the flat index of the reduced output.
struct ReducePlan {
  Shape out_shape;
  std::vector<std::int64_t> out_index;  // per input element
  std::int64_t group_size = 1;
};

ReducePlan plan_reduce(const Tensor& a, const std::vector<int>& axes) {
  ReducePlan plan;
  const Shape& s = a.shape();
  std::vector<bool> reduced(s.size(), axes.empty());
  for (int ax : axes) reduced[ax] = true;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!reduced[i])
      plan.out_shape.push_back(s[i]);
    else
      plan.group_size *= s[i];
  }
  if (plan.out_shape.empty()) plan.out_shape = {1};

  const std::int64_t n = numel(s);
  plan.out_index.resize(static_cast<size_t>(n));
  std::vector<std::int64_t> strides(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i)
    strides[i] = strides[i + 1] * s[i + 1];
  for (std::int64_t flat = 0; flat < n; ++flat) {
    std::int64_t rem = flat, out = 0;
    for (size_t i = 0; i < s.size(); ++i) {
      const std::int64_t coord = rem / strides[i];
      rem %= strides[i];
      if (!reduced[i]) out = out * s[i] + coord;
    }
    plan.out_index[static_cast<size_t>(flat)] = out;
  }
  return plan;
}

Tensor reduce_impl(const Tensor& a, const std::vector<int>& axes, bool mean) {
  check_defined(a, "reduce");
  check_axes(a, axes);
  ReducePlan plan = plan_reduce(a, axes);
  std::vector<double> out(static_cast<size_t>(numel(plan.out_shape)), 0.0);
  const auto& ad = a.data();
  for (size_t i = 0; i < ad.size(); ++i) out[static_cast<size_t>(plan.out_index[i])] += ad[i];
  const double scale = mean ? 1.0 / static_cast<double>(plan.group_size) : 1.0;
  if (mean)
    for (double& v : out) v *= scale;
  NodePtr an = a.node();
  auto out_index = std::make_shared<std::vector<std::int64_t>>(std::move(plan.out_index));
  return Tensor(make_result(plan.out_shape, std::move(out), {an},
                            [an, out_index, scale](Node&, const std::vector<double>& flow) {
                              const auto& idx = *out_index;
                              for (size_t i = 0; i < idx.size(); ++i)
                                an->flow[i] += scale * flow[static_cast<size_t>(idx[i])];
                            }));
}

}  // namespace

Tensor reduce_sum(const Tensor& a, const std::vector<int>& axes) {
  return reduce_impl(a, axes, false);
}

Tensor reduce_mean(const Tensor& a, const std::vector<int>& axes) {
  return reduce_impl(a, axes, true);
}

Tensor frobenius(const Tensor& a) {
  check_defined(a, "frobenius");
  double ssq = 0.0;
  for (double v : a.data()) ssq += v * v;
  const double norm = std::sqrt(ssq);
  NodePtr an = a.node();
  return Tensor(make_result({1}, {norm}, {an},
                            [an](Node& self, const std::vector<double>& flow) {
                              const double norm = self.data[0];
                              if (norm == 0.0) return;  // subgradient 0 at the origin
                              const double c = flow[0] / norm;
                              for (size_t i = 0; i < an->flow.size(); ++i)
                                an->flow[i] += c * an->data[i];
                            }));
}

// --- shape ops -----------------------------------------------------------

Tensor reshape(const Tensor& a, Shape new_shape) {
  check_defined(a, "reshape");
  if (numel(new_shape) != a.size())
    fail("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(new_shape));
  NodePtr an = a.node();
  return Tensor(make_result(std::move(new_shape), a.data(), {an},
                            [an](Node&, const std::vector<double>& flow) {
                              for (size_t i = 0; i < flow.size(); ++i) an->flow[i] += flow[i];
                            }));
}

Tensor transpose2d(const Tensor& a) {
  check_defined(a, "transpose2d");
  if (a.ndim() != 2) fail("transpose2d: expects 2-D, got " + shape_str(a.shape()));
  const int r = a.dim(0), c = a.dim(1);
  std::vector<double> out(a.data().size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<size_t>(j) * r + i] = a.data()[static_cast<size_t>(i) * c + j];
  NodePtr an = a.node();
  return Tensor(make_result({c, r}, std::move(out), {an},
                            [an, r, c](Node&, const std::vector<double>& flow) {
                              for (int i = 0; i < r; ++i)
                                for (int j = 0; j < c; ++j)
                                  an->flow[static_cast<size_t>(i) * c + j] +=
                                      flow[static_cast<size_t>(j) * r + i];
                            }));
}

Tensor slice_rows(const Tensor& a, int row_begin, int row_end) {
  check_defined(a, "slice_rows");
  if (a.ndim() != 2) fail("slice_rows: expects 2-D, got " + shape_str(a.shape()));
  const int r = a.dim(0), c = a.dim(1);
  if (row_begin < 0 || row_end > r || row_begin >= row_end)
    fail("slice_rows: invalid range [" + std::to_string(row_begin) + ", " +
         std::to_string(row_end) + ") for " + std::to_string(r) + " rows");
  const int nr = row_end - row_begin;
  std::vector<double> out(a.data().begin() + static_cast<size_t>(row_begin) * c,
                          a.data().begin() + static_cast<size_t>(row_end) * c);
  NodePtr an = a.node();
  return Tensor(make_result({nr, c}, std::move(out), {an},
                            [an, row_begin, c](Node&, const std::vector<double>& flow) {
                              double* dst = an->flow.data() + static_cast<size_t>(row_begin) * c;
                              for (size_t i = 0; i < flow.size(); ++i) dst[i] += flow[i];
                            }));
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  check_defined(a, "concat_rows");
  check_defined(b, "concat_rows");
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
    fail("concat_rows: incompatible shapes " + shape_str(a.shape()) + " and " +
         shape_str(b.shape()));
  const int c = a.dim(1);
  std::vector<double> out;
  out.reserve(a.data().size() + b.data().size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  NodePtr an = a.node(), bn = b.node();
  const size_t asz = a.data().size();
  return Tensor(make_result({a.dim(0) + b.dim(0), c}, std::move(out), {an, bn},
                            [an, bn, asz](Node&, const std::vector<double>& flow) {
                              if (an->requires_grad)
                                for (size_t i = 0; i < asz; ++i) an->flow[i] += flow[i];
                              if (bn->requires_grad)
                                for (size_t i = asz; i < flow.size(); ++i)
                                  bn->flow[i - asz] += flow[i];
                            }));
}

// --- softmax -------------------------------------------------------------

Tensor softmax_rows(const Tensor& w) {
  check_defined(w, "softmax_rows");
  if (w.ndim() != 2) fail("softmax_rows: expects 2-D, got " + shape_str(w.shape()));
  for (double v : w.data())
    if (std::isnan(v)) fail("softmax_rows: NaN input");
  const int r = w.dim(0), n = w.dim(1);
  std::vector<double> out(w.data().size());
  for (int i = 0; i < r; ++i) {
    const double* row = w.data().data() + static_cast<size_t>(i) * n;
    double* orow = out.data() + static_cast<size_t>(i) * n;
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (int j = 0; j < n; ++j) orow[j] /= sum;
  }
  NodePtr wn = w.node();
  return Tensor(make_result(
      w.shape(), std::move(out), {wn},
      [wn, r, n](Node& self, const std::vector<double>& flow) {
        // dL/dx_j = y_j * (g_j - sum_k g_k y_k), per row
        for (int i = 0; i < r; ++i) {
          const double* y = self.data.data() + static_cast<size_t>(i) * n;
          const double* g = flow.data() + static_cast<size_t>(i) * n;
          double dot = 0.0;
          for (int j = 0; j < n; ++j) dot += g[j] * y[j];
          double* dst = wn->flow.data() + static_cast<size_t>(i) * n;
          for (int j = 0; j < n; ++j) dst[j] += y[j] * (g[j] - dot);
        }
      }));
}

// --- backward ------------------------------------------------------------

void backward(const Tensor& loss) {
  check_defined(loss, "backward");
  if (loss.size() != 1)
    fail("backward: loss must be scalar, got " + shape_str(loss.shape()));
  NodePtr root = loss.node();
  if (!root->requires_grad) return;  // nothing reachable needs gradients

  // Reverse post-order DFS over parent edges: every node appears before the
  // nodes it consumes, so flows are fully accumulated before the hook runs.
  std::vector<Node*> order;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  root->on_tape = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !parent->on_tape) {
        parent->on_tape = true;
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  std::reverse(order.begin(), order.end());

  for (Node* node : order) node->flow.assign(node->data.size(), 0.0);
  root->flow[0] = 1.0;

  for (Node* node : order) {
    if (node->hook) node->hook(node->flow, node->shape);
    if (node->grad.empty()) node->grad.assign(node->data.size(), 0.0);
    for (size_t i = 0; i < node->flow.size(); ++i) node->grad[i] += node->flow[i];
    if (node->backprop) node->backprop(*node, node->flow);
  }

  for (Node* node : order) {
    node->flow.clear();
    node->flow.shrink_to_fit();
    node->on_tape = false;
  }
}

}  // namespace hsr
