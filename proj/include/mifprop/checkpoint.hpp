#pragma once

// Binary training checkpoint.
//
// Layout (all integers and floats little-endian):
//   "MIFP"            4 bytes magic
//   u32 version       currently 1
//   u32 array_count
//   array_count x { u32 name_len; name bytes; u64 count; count x f64 }
//
// Arrays, in this order: arch.widths, mif.params, weights.<l>...,
// adam.hyper (lr, beta1, beta2, eps), adam.t, adam.m.<l>..., adam.u.<l>...,
// rng.seed (high and low 32-bit halves), progress (epoch, batch within the
// epoch, global iteration). Integers are stored as exactly representable
// doubles.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mifprop/network.hpp"
#include "mifprop/optim.hpp"

namespace mifprop {

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::vector<std::size_t> widths;
  MifParams mif;
  std::vector<Matrix> weights;
  AdamState adam;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;           // completed epochs
  std::uint64_t batch_in_epoch = 0;  // batches already applied in `epoch`
  std::uint64_t iteration = 0;       // global optimizer steps

  static Checkpoint capture(const Network& net, const AdamState& adam, std::uint64_t seed,
                            std::uint64_t epoch, std::uint64_t batch_in_epoch,
                            std::uint64_t iteration);
  Network network() const;

  std::vector<std::uint8_t> serialize() const;
  // Throws std::runtime_error on malformed input.
  static Checkpoint deserialize(std::span<const std::uint8_t> bytes);

  // Writes to a temporary sibling and renames it into place.
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

}  // namespace mifprop
