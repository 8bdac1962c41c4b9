#include "mifprop/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mifprop/simd.hpp"

namespace mifprop {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Matrix init_weights(std::size_t rows, std::size_t cols, std::size_t fan_in, std::uint64_t seed) {
  if (fan_in == 0) throw std::invalid_argument("init_weights: fan_in must be >= 1");
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  Rng rng(seed);
  Matrix w(rows, cols);
  for (double& x : w.data) x = (2.0 * rng.uniform01() - 1.0) * bound;
  return w;
}

void init_network(Network& net, std::uint64_t seed) {
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l)
    layers[l] = init_weights(layers[l].rows, layers[l].cols, layers[l].cols, derive_seed(seed, l));
}

AdamState AdamState::for_network(const Network& net, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& w : net.layers()) {
    s.m.emplace_back(w.rows, w.cols);
    s.u.emplace_back(w.rows, w.cols);
  }
  return s;
}

void adam_step(std::vector<Matrix>& weights, const std::vector<Matrix>& grads, AdamState& state) {
  if (weights.size() != grads.size() || weights.size() != state.m.size() ||
      weights.size() != state.u.size())
    throw std::invalid_argument("adam_step: layer count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].same_shape(grads[l]) || !weights[l].same_shape(state.m[l]) ||
        !weights[l].same_shape(state.u[l]))
      throw std::invalid_argument("adam_step: shape mismatch in layer " + std::to_string(l));
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const simd::AdamCoeffs c{state.config.lr,
                           state.config.beta1,
                           state.config.beta2,
                           state.config.eps,
                           1.0 - std::pow(state.config.beta1, t),
                           1.0 - std::pow(state.config.beta2, t)};
  const auto& k = simd::kernels();
  for (std::size_t l = 0; l < weights.size(); ++l)
    k.adam_update(weights[l].data.data(), grads[l].data.data(), state.m[l].data.data(),
                  state.u[l].data.data(), weights[l].size(), c);
}

}  // namespace mifprop
