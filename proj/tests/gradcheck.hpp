#pragma once

// Finite-difference gradient checking shared by the unit tests and the
// acceptance suite. A random weighted sum of the layer output serves as
// the scalar loss; plain summation would be degenerate for softmax
// (rows always sum to one).

#include <cstdint>
#include <vector>

#include "oracle.hpp"
#include "statecnn/layers.hpp"

namespace gradcheck {

using statecnn::Layer;
using statecnn::Phase;
using statecnn::Tensor;

// Worst relative error between analytic and finite-difference gradients,
// over the layer input and every trainable parameter. The layer's random
// stream is rewound before each forward so repeated evaluations see the
// same dropout mask. Near-zero gradient pairs are compared against a
// 1e-3 floor so finite-difference noise on masked elements cannot
// dominate the ratio.
inline double check_layer(Layer<double>& layer, Tensor<double>& x,
                          uint64_t seed, double h = 1e-6) {
  auto out_shape = layer.output_shape(x.shape);
  auto w = Tensor<double>::uniform(out_shape, -1.0, 1.0, statecnn::mix_seed(seed, 0x10551055ull));
  auto loss = [&]() {
    layer.reset_stream();
    auto y = layer.forward(x, Phase::training);
    double acc = 0;
    for (int64_t i = 0; i < y.size(); ++i) acc += w.data[i] * y.data[i];
    return acc;
  };

  layer.reset_stream();
  layer.forward(x, Phase::training);
  auto dx = layer.backward(w);

  double worst = 0;
  {
    std::vector<double> analytic(dx.data.begin(), dx.data.end());
    auto numeric = oracle::fd_gradient(x, loss, h);
    worst = std::max(worst, oracle::max_rel_err(analytic, numeric, 1e-3));
  }
  for (auto* slot : layer.params()) {
    if (!slot->trainable) continue;
    std::vector<double> analytic(slot->grad.data.begin(), slot->grad.data.end());
    auto numeric = oracle::fd_gradient(slot->value, loss, h);
    worst = std::max(worst, oracle::max_rel_err(analytic, numeric, 1e-3));
  }
  return worst;
}

// Uniform input with a margin away from zero, for kinds whose gradient is
// discontinuous at the origin (relu).
inline Tensor<double> away_from_zero(const statecnn::Shape& s, uint64_t seed,
                                     double margin = 2e-4) {
  auto x = Tensor<double>::uniform(s, -1.0, 1.0, seed);
  for (auto& v : x.data) {
    if (v >= 0 && v < margin) v += margin;
    if (v < 0 && v > -margin) v -= margin;
  }
  return x;
}

// Shuffled evenly spaced values; windows never contain near-ties, which
// keeps maxpool finite differences one-sided.
inline Tensor<double> distinct_values(const statecnn::Shape& s, uint64_t seed) {
  Tensor<double> x(s);
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i)
    x.data[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
  statecnn::seeded_shuffle(x.data.begin(), x.data.end(), seed);
  return x;
}

}  // namespace gradcheck
