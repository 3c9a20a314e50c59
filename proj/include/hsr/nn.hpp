#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hsr/rng.hpp"
#include "hsr/tensor.hpp"

namespace hsr {

using NamedTensor = std::pair<std::string, Tensor>;

// Square-kernel conv layer, zero padding (k-1)/2.
struct Conv2d {
  Tensor weight;  // [out_ch x in_ch x k x k]
  Tensor bias;    // [out_ch]
  int stride = 1;

  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int ksize, Rng& rng, int stride = 1,
         double weight_gain = 1.0);

  Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, stride); }

  void zero_init();
  void collect(const std::string& prefix, std::vector<NamedTensor>& out);
};

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [1 x out]

  Linear() = default;
  Linear(int in_features, int out_features, Rng& rng, double weight_gain = 1.0);

  // x is [1 x in]
  Tensor forward(const Tensor& x) const { return add(matmul(x, weight), bias); }

  void zero_init();
  void collect(const std::string& prefix, std::vector<NamedTensor>& out);
};

// Mean over the spatial axes of [c x h x w], reshaped to [1 x c].
Tensor global_avg_pool(const Tensor& x);

// Channel concatenation of two [c x h x w] maps with equal spatial size.
Tensor concat_channels(const Tensor& a, const Tensor& b);

void zero_grads(std::vector<NamedTensor>& params);
void set_params_trainable(std::vector<NamedTensor>& params, bool trainable);

}  // namespace hsr
