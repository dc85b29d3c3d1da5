#include "sexwes/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace sexwes {

Mlp Mlp::create(const std::vector<std::size_t>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::runtime_error("mlp needs >= 2 layer sizes");
  Mlp net;
  net.sizes_ = sizes;
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    net.w_offset_.push_back(total);
    total += sizes[l + 1] * sizes[l];
    net.b_offset_.push_back(total);
    total += sizes[l + 1];
  }
  net.params_.assign(total, 0.0);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double scale = std::sqrt(2.0 / static_cast<double>(sizes[l]));
    double* w = net.params_.data() + net.w_offset_[l];
    const std::size_t n = sizes[l + 1] * sizes[l];
    for (std::size_t i = 0; i < n; ++i) w[i] = scale * rng.normal();
    // small nonzero biases keep degenerate inputs off the relu kinks
    double* b = net.params_.data() + net.b_offset_[l];
    for (std::size_t i = 0; i < sizes[l + 1]; ++i) b[i] = rng.uniform(-0.01, 0.01);
  }
  return net;
}

Mlp MlpSerde::from_params(const std::vector<std::size_t>& sizes, Vec params) {
  Rng rng(0);
  Mlp net = Mlp::create(sizes, rng);
  if (params.size() != net.params_.size())
    throw std::runtime_error("mlp parameter count mismatch");
  net.params_ = std::move(params);
  return net;
}

Vec Mlp::forward(std::span<const double> in, MlpCache* cache, Rng* dropout_rng,
                 double dropout) const {
  if (in.size() != in_dim()) throw std::runtime_error("mlp input size mismatch");
  const std::size_t L = layer_count();
  if (cache) {
    cache->input.assign(in.begin(), in.end());
    cache->pre.assign(L, {});
    cache->post.assign(L, {});
    cache->mask.assign(L, {});
  }

  Vec h(in.begin(), in.end());
  const double keep = 1.0 - dropout;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t rows = sizes_[l + 1];
    const std::size_t cols = sizes_[l];
    const double* w = params_.data() + w_offset_[l];
    const double* b = params_.data() + b_offset_[l];
    Vec z(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* wrow = w + r * cols;
      double acc = b[r];
      for (std::size_t c = 0; c < cols; ++c) acc += wrow[c] * h[c];
      z[r] = acc;
    }
    if (cache) cache->pre[l] = z;

    if (l + 1 < L) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
      if (dropout_rng && dropout > 0.0) {
        Vec mask(rows, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
          mask[r] = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
          z[r] *= mask[r];
        }
        if (cache) cache->mask[l] = std::move(mask);
      }
    }
    if (cache) cache->post[l] = z;
    h = std::move(z);
  }
  return h;
}

Vec Mlp::backward(const MlpCache& cache, std::span<const double> dout,
                  Vec& grads) const {
  if (grads.size() != params_.size()) grads.assign(params_.size(), 0.0);
  const std::size_t L = layer_count();
  Vec dpost(dout.begin(), dout.end());

  for (std::size_t l = L; l-- > 0;) {
    const std::size_t rows = sizes_[l + 1];
    const std::size_t cols = sizes_[l];

    // linear output layer; hidden layers go through dropout mask and relu
    Vec dpre = std::move(dpost);
    if (l + 1 < L) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double mask = cache.mask[l].empty() ? 1.0 : cache.mask[l][r];
        dpre[r] *= mask * (cache.pre[l][r] > 0.0 ? 1.0 : 0.0);
      }
    }

    const Vec& in = l == 0 ? cache.input : cache.post[l - 1];
    double* gw = grads.data() + w_offset_[l];
    double* gb = grads.data() + b_offset_[l];
    const double* w = params_.data() + w_offset_[l];

    Vec din(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double dr = dpre[r];
      gb[r] += dr;
      double* gwrow = gw + r * cols;
      const double* wrow = w + r * cols;
      if (dr != 0.0) {
        for (std::size_t c = 0; c < cols; ++c) {
          gwrow[c] += dr * in[c];
          din[c] += dr * wrow[c];
        }
      }
    }
    dpost = std::move(din);
  }
  return dpost;
}

}  // namespace sexwes
