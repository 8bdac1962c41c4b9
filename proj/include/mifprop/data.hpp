#pragma once

// MNIST / Fashion-MNIST in the IDX container: big-endian header, magic
// 0x00000803 for 3-d uint8 image tensors and 0x00000801 for 1-d labels.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mifprop/bptt.hpp"

namespace mifprop {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;
inline constexpr int kClassCount = 10;

enum class IdxErrorCode {
  bad_magic,
  truncated,
  wrong_dimensions,
  label_out_of_range,
  io,
};

class IdxError : public std::runtime_error {
 public:
  IdxError(IdxErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  IdxErrorCode code() const { return code_; }

 private:
  IdxErrorCode code_;
};

enum class Split { train, test };

struct Dataset {
  std::vector<double> images;        // count x 784, each pixel in [0,1]
  std::vector<std::uint8_t> labels;  // count entries in 0..9
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::span<const double> image(std::size_t i) const {
    return {images.data() + i * kImagePixels, kImagePixels};
  }
  BatchView view() const { return {images, labels, kImagePixels}; }
  // Gathers the given sample indices into a contiguous copy.
  Dataset subset(std::span<const std::size_t> indices) const;
  // First n samples (all if n == 0 or n >= size()).
  Dataset head(std::size_t n) const;
};

// Pixels divided by 255, row-major. Throws IdxError; never returns a
// partial tensor.
std::vector<double> parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

// Inverse of the parsers; pixels are rounded to the nearest of 0..255.
std::vector<std::uint8_t> serialize_idx_images(std::span<const double> images);
std::vector<std::uint8_t> serialize_idx_labels(std::span<const std::uint8_t> labels);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Reads {train,t10k}-{images-idx3,labels-idx1}-ubyte from `dir`.
// `limit` > 0 keeps only the first `limit` samples.
Dataset load_dataset(const std::filesystem::path& dir, Split split, std::size_t limit = 0);

// Seeded permutation of 0..n-1 cut into batches of `batch_size`; the last
// batch may be short. Throws std::invalid_argument when batch_size == 0.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed);

}  // namespace mifprop
