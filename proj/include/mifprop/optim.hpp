#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "mifprop/matrix.hpp"
#include "mifprop/network.hpp"

namespace mifprop {

// Portable seeded generator: std::mt19937_64 (fully specified by the C++
// standard) with hand-rolled distributions, since the standard library's
// distributions are implementation-defined.
//   uniform01():   top 53 bits of one draw, times 2^-53  -> [0, 1)
//   below(n):      rejection sampling on one draw        -> [0, n)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finaliser of (seed, stream); used to derive independent seeds
// for each layer and each epoch from one user seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// rows x cols matrix with entries uniform in [-sqrt(1/fan_in), sqrt(1/fan_in)).
// Throws std::invalid_argument when fan_in == 0.
Matrix init_weights(std::size_t rows, std::size_t cols, std::size_t fan_in, std::uint64_t seed);

// Layer l is drawn with derive_seed(seed, l) and its column count as fan-in.
void init_network(Network& net, std::uint64_t seed);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t t = 0;
  std::vector<Matrix> m;  // first moment
  std::vector<Matrix> u;  // second moment (raw, not bias-corrected)

  static AdamState for_network(const Network& net, AdamConfig config = {});

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One bias-corrected Adam update of every weight matrix in place:
//   m <- b1 m + (1-b1) g,  u <- b2 u + (1-b2) g^2,  t <- t + 1
//   w <- w - lr * (m / (1-b1^t)) / (sqrt(u / (1-b2^t)) + eps)
// Throws std::invalid_argument on a shape mismatch.
void adam_step(std::vector<Matrix>& weights, const std::vector<Matrix>& grads, AdamState& state);

}  // namespace mifprop
