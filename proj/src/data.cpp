#include "mifprop/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "mifprop/optim.hpp"

namespace mifprop {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

std::vector<double> parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw IdxError(IdxErrorCode::truncated, "idx images: missing header");
  if (read_be32(bytes, 0) != kIdxImageMagic)
    throw IdxError(IdxErrorCode::bad_magic, "idx images: bad magic");
  if (bytes.size() < 16) throw IdxError(IdxErrorCode::truncated, "idx images: truncated header");
  const std::size_t n = read_be32(bytes, 4);
  const std::uint32_t rows = read_be32(bytes, 8);
  const std::uint32_t cols = read_be32(bytes, 12);
  if (rows != kImageSide || cols != kImageSide)
    throw IdxError(IdxErrorCode::wrong_dimensions,
                   "idx images: expected 28x28, got " + std::to_string(rows) + "x" + std::to_string(cols));
  if (bytes.size() - 16 < n * kImagePixels)
    throw IdxError(IdxErrorCode::truncated, "idx images: header claims " + std::to_string(n) +
                                                " images but payload is short");
  std::vector<double> out(n * kImagePixels);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bytes[16 + i] / 255.0;
  return out;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw IdxError(IdxErrorCode::truncated, "idx labels: missing header");
  if (read_be32(bytes, 0) != kIdxLabelMagic)
    throw IdxError(IdxErrorCode::bad_magic, "idx labels: bad magic");
  if (bytes.size() < 8) throw IdxError(IdxErrorCode::truncated, "idx labels: truncated header");
  const std::size_t n = read_be32(bytes, 4);
  if (bytes.size() - 8 < n) throw IdxError(IdxErrorCode::truncated, "idx labels: payload is short");
  std::vector<std::uint8_t> out(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(n));
  for (std::size_t i = 0; i < n; ++i)
    if (out[i] >= kClassCount)
      throw IdxError(IdxErrorCode::label_out_of_range,
                     "idx labels: label " + std::to_string(out[i]) + " at index " + std::to_string(i));
  return out;
}

std::vector<std::uint8_t> serialize_idx_images(std::span<const double> images) {
  if (images.size() % kImagePixels != 0)
    throw std::invalid_argument("serialize_idx_images: size is not a multiple of 784");
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.size());
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.size() / kImagePixels));
  write_be32(out, kImageSide);
  write_be32(out, kImageSide);
  for (double p : images) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("serialize_idx_images: pixel outside [0,1]");
    out.push_back(static_cast<std::uint8_t>(std::lround(p * 255.0)));
  }
  return out;
}

std::vector<std::uint8_t> serialize_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxErrorCode::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset d;
  d.split = split;
  d.images.reserve(indices.size() * kImagePixels);
  d.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto img = image(i);
    d.images.insert(d.images.end(), img.begin(), img.end());
    d.labels.push_back(labels[i]);
  }
  return d;
}

Dataset Dataset::head(std::size_t n) const {
  if (n == 0 || n >= size()) return *this;
  Dataset d;
  d.split = split;
  d.images.assign(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(n * kImagePixels));
  d.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  return d;
}

Dataset load_dataset(const std::filesystem::path& dir, Split split, std::size_t limit) {
  const std::string prefix = split == Split::train ? "train" : "t10k";
  Dataset d;
  d.split = split;
  d.images = parse_idx_images(read_file(dir / (prefix + "-images-idx3-ubyte")));
  d.labels = parse_idx_labels(read_file(dir / (prefix + "-labels-idx1-ubyte")));
  if (d.images.size() != d.labels.size() * kImagePixels)
    throw IdxError(IdxErrorCode::wrong_dimensions, "image and label counts differ in " + dir.string());
  return limit > 0 ? d.head(limit) : d;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size)
    batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return batches;
}

}  // namespace mifprop
