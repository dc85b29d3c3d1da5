// Minimal feed-forward network with ReLU hidden layers, a linear output and
// hand-written backprop. Parameters live in one flat vector so optimizers,
// snapshots and finite-difference checks stay trivial.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sexwes/linalg.hpp"
#include "sexwes/rng.hpp"

namespace sexwes {

struct MlpCache {
  Vec input;
  std::vector<Vec> pre;    // pre-activations per layer
  std::vector<Vec> post;   // layer outputs (after relu and dropout)
  std::vector<Vec> mask;   // dropout masks per hidden layer; empty when off
};

class Mlp {
 public:
  Mlp() = default;

  // sizes = {in, hidden..., out}; He-scaled uniform init.
  static Mlp create(const std::vector<std::size_t>& sizes, Rng& rng);

  std::size_t in_dim() const { return sizes_.front(); }
  std::size_t out_dim() const { return sizes_.back(); }
  std::size_t layer_count() const { return sizes_.size() - 1; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  // Forward pass. With dropout_rng set, hidden activations are dropped at
  // the given rate (inverted scaling); the cache records masks for backward.
  Vec forward(std::span<const double> in, MlpCache* cache = nullptr,
              Rng* dropout_rng = nullptr, double dropout = 0.0) const;

  // Backpropagates d(loss)/d(output); accumulates parameter gradients into
  // grads (same layout as params) and returns d(loss)/d(input).
  Vec backward(const MlpCache& cache, std::span<const double> dout,
               Vec& grads) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> w_offset_, b_offset_;
  Vec params_;

  friend struct MlpSerde;
};

// Exposes layout for persistence.
struct MlpSerde {
  static std::vector<std::size_t> sizes(const Mlp& m) { return m.sizes_; }
  static Mlp from_params(const std::vector<std::size_t>& sizes, Vec params);
};

}  // namespace sexwes
