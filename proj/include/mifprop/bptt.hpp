#pragma once

// Reverse-mode differentiation through the unrolled network.
//
// forward_record() runs the batch and keeps what the adjoint pass needs;
// backward() walks the steps in reverse applying the exact adjoint of every
// forward operation (the MIF logistics are differentiated analytically, the
// only non-smooth point is ReLU at 0 whose subgradient is taken as 0).
//
// Loss convention: sum over steps 1..t_total of step_loss, mean over the
// batch (or divided by TapeOptions::normalizer when set).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mifprop/matrix.hpp"
#include "mifprop/network.hpp"

namespace mifprop {

// Non-owning view of `count` samples of width `width`.
struct BatchView {
  std::span<const double> images;  // count x width, row-major
  std::span<const std::uint8_t> labels;
  std::size_t width = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const double> image(std::size_t i) const { return images.subspan(i * width, width); }
  BatchView slice(std::size_t begin, std::size_t count) const {
    return {images.subspan(begin * width, count * width), labels.subspan(begin, count), width};
  }
};

enum class TapeMode {
  full,       // every MIF state of every step is stored
  recompute,  // states stored every `segment` steps, the rest recomputed
};

struct TapeOptions {
  TapeMode mode = TapeMode::full;
  int segment = 100;
  // Loss divisor; 0 means the batch size. Sharded runs pass the size of the
  // whole batch so shard gradients add up to the batch gradient.
  double normalizer = 0.0;
};

struct Tape {
  int steps = 0;
  std::size_t batch = 0;
  std::size_t n_out = 0;
  std::size_t width = 0;
  TapeMode mode = TapeMode::full;
  int stride = 1;  // distance between stored MIF states
  double normalizer = 1.0;
  std::uint64_t fingerprint = 0;
  SpikeSchedule schedule;

  std::vector<double> images;
  std::vector<std::uint8_t> labels;

  // Per sample: stored_per_sample() snapshots of n_out states.
  std::vector<MifState> states;
  // Per sample, per injection, per layer: pre-activations then
  // post-activations, concatenated (dense_stride values per injection).
  std::vector<double> dense;
  std::size_t dense_stride = 0;

  // Number of simulated steps, i.e. per-step records.
  std::size_t record_count() const { return static_cast<std::size_t>(steps); }
  std::size_t stored_per_sample() const { return static_cast<std::size_t>(steps / stride) + 1; }
  std::size_t bytes() const;

  // Stored MIF states for snapshot `k` (step k * stride) of a sample.
  std::span<const MifState> snapshot(std::size_t sample, std::size_t k) const {
    return {states.data() + (sample * stored_per_sample() + k) * n_out, n_out};
  }

  friend bool operator==(const Tape&, const Tape&) = default;

};

struct Gradients {
  std::vector<Matrix> layers;

  static Gradients zeros_like(const Network& net);
  std::size_t size() const;
  double flat(std::size_t index) const;
  bool all_finite() const;
  Gradients& operator+=(const Gradients& other);

  friend bool operator==(const Gradients&, const Gradients&) = default;
};

struct ForwardResult {
  Tape tape;
  double loss = 0.0;
  std::vector<int> predictions;  // argmax of time-summed potentials per sample
};

class StaleTapeError : public std::logic_error {
 public:
  StaleTapeError() : std::logic_error("network weights changed since the tape was recorded") {}
};

// Throws std::invalid_argument on an empty batch, t_total < 1, or a sample
// width that differs from the network input width.
ForwardResult forward_record(const Network& net, const BatchView& batch,
                             const SpikeSchedule& schedule, int t_total,
                             const TapeOptions& options = {});

// d(loss)/dW for every weight matrix. Throws StaleTapeError if `net` is not
// the network the tape was recorded on.
Gradients backward(const Tape& tape, const Network& net);

// Loss only, same convention as forward_record (mean over batch).
double batch_loss(const Network& net, const BatchView& batch, const SpikeSchedule& schedule,
                  int t_total);

// (f(x + h) - f(x - h)) / 2h.
double central_difference(const std::function<double(double)>& f, double x, double h);

// Central difference of batch_loss with respect to one flat weight index.
double finite_difference_grad(const Network& net, const BatchView& batch,
                              const SpikeSchedule& schedule, int t_total,
                              std::size_t weight_index, double h);

struct ShardOptions {
  std::size_t shards = 1;
  std::size_t threads = 1;
  TapeOptions tape;
};

struct BatchGradient {
  Gradients gradients;
  double loss = 0.0;
  std::vector<int> predictions;
};

// Splits the batch into contiguous shards, runs forward_record + backward on
// each (possibly in parallel) and adds the shard results in shard order, so
// the outcome depends on the shard count but never on thread scheduling.
BatchGradient compute_gradients(const Network& net, const BatchView& batch,
                                const SpikeSchedule& schedule, int t_total,
                                const ShardOptions& options = {});

using GradientFn = std::function<Gradients(const Network&, const BatchView&,
                                           const SpikeSchedule&, int)>;

// The default analytic route: forward_record followed by backward.
Gradients analytic_gradients(const Network& net, const BatchView& batch,
                             const SpikeSchedule& schedule, int t_total);

struct GradcheckEntry {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  bool ok = false;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;  // entry furthest outside (or closest to) its bound
  bool passed = true;
};

// Compares `gradient_fn` against central differences for every weight. An
// entry passes when |analytic - numeric| <= max(rel_tol * |numeric|, abs_tol).
GradcheckReport gradient_check(const Network& net, const BatchView& batch,
                               const SpikeSchedule& schedule, int t_total, double rel_tol,
                               double abs_tol, double h,
                               const GradientFn& gradient_fn = analytic_gradients);

}  // namespace mifprop
