#include "hsr/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace hsr {

namespace {

std::vector<double> he_normal(std::int64_t n, double fan_in, double gain, Rng& rng) {
  const double stddev = gain * std::sqrt(2.0 / fan_in);
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.normal(0.0, stddev);
  return v;
}

}  // namespace

Conv2d::Conv2d(int in_ch, int out_ch, int ksize, Rng& rng, int stride_,
               double weight_gain)
    : stride(stride_) {
  const std::int64_t n = static_cast<std::int64_t>(out_ch) * in_ch * ksize * ksize;
  weight = Tensor::from_data({out_ch, in_ch, ksize, ksize},
                             he_normal(n, static_cast<double>(in_ch) * ksize * ksize,
                                       weight_gain, rng),
                             true);
  bias = Tensor::zeros({out_ch}, true);
}

void Conv2d::zero_init() {
  std::fill(weight.data().begin(), weight.data().end(), 0.0);
  std::fill(bias.data().begin(), bias.data().end(), 0.0);
}

void Conv2d::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Linear::Linear(int in_features, int out_features, Rng& rng, double weight_gain) {
  const std::int64_t n = static_cast<std::int64_t>(in_features) * out_features;
  weight = Tensor::from_data({in_features, out_features},
                             he_normal(n, in_features, weight_gain, rng), true);
  bias = Tensor::zeros({1, out_features}, true);
}

void Linear::zero_init() {
  std::fill(weight.data().begin(), weight.data().end(), 0.0);
  std::fill(bias.data().begin(), bias.data().end(), 0.0);
}

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.ndim() != 3)
    throw std::invalid_argument("global_avg_pool: expects [c x h x w], got " +
                                shape_str(x.shape()));
  Tensor pooled = reduce_mean(x, {1, 2});  // [c]
  return reshape(pooled, {1, x.dim(0)});
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
    throw std::invalid_argument("concat_channels: incompatible shapes " +
                                shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int h = a.dim(1), w = a.dim(2);
  Tensor a2 = reshape(a, {a.dim(0), h * w});
  Tensor b2 = reshape(b, {b.dim(0), h * w});
  return reshape(concat_rows(a2, b2), {a.dim(0) + b.dim(0), h, w});
}

void zero_grads(std::vector<NamedTensor>& params) {
  for (auto& [name, p] : params) p.zero_grad();
}

void set_params_trainable(std::vector<NamedTensor>& params, bool trainable) {
  for (auto& [name, p] : params) p.set_requires_grad(trainable);
}

}  // namespace hsr
