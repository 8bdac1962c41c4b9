#pragma once

// Dense ReLU stack feeding a population of MIF output neurons, plus the
// membrane-potential loss and the prediction rule.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mifprop/matrix.hpp"
#include "mifprop/mif_model.hpp"
#include "mifprop/schedule.hpp"

namespace mifprop {

class Network {
 public:
  // widths = {input, hidden..., outputs}; at least two entries. Every layer
  // but the last is followed by ReLU; the last layer's output drives the
  // alpha synapses of the MIF population. Weights start at zero, no biases.
  explicit Network(std::vector<std::size_t> widths, MifParams params = {});

  // 784 -> 100 -> 10 -> 10 MIF.
  static Network default_architecture(MifParams params = {});

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }
  std::size_t layer_count() const { return layers_.size(); }

  // layers()[l] has shape widths[l+1] x widths[l].
  std::vector<Matrix>& layers() { return layers_; }
  const std::vector<Matrix>& layers() const { return layers_; }

  const MifParams& params() const { return params_; }

  // Flat view across layers in order, row-major within each layer.
  std::size_t weight_count() const;
  double& weight(std::size_t flat_index);
  double weight(std::size_t flat_index) const;

  // FNV-1a over the raw weight bytes; detects any mutation.
  std::uint64_t fingerprint() const;

  // Throws std::domain_error on a non-finite weight.
  void check_finite() const;

 private:
  std::vector<std::size_t> widths_;
  std::vector<Matrix> layers_;
  MifParams params_;
};

// Pre-activations of every layer for one input vector. post(l) is
// ReLU(pre[l]) for hidden layers and pre[l] itself for the last layer.
struct DenseTrace {
  std::vector<std::vector<double>> pre;
};

// Returns the synaptic drive s = W_L ReLU(... ReLU(W_1 x)). Throws
// std::invalid_argument when x has the wrong width.
std::vector<double> dense_forward(const Network& net, std::span<const double> x,
                                  DenseTrace* trace = nullptr);

struct StepOutput {
  std::vector<MifState> states;
  std::vector<double> potentials;
};

// Advances every output neuron by one step. An empty `input` means the
// network sees nothing this step (all dense activations are zero).
StepOutput network_step(const Network& net, std::span<const double> input,
                        std::span<const MifState> states);

// -log softmax(potentials)[target], computed with max subtraction.
double step_loss(std::span<const double> potentials, int target);

// Numerically stable softmax into `out` (same length as `potentials`).
void softmax(std::span<const double> potentials, std::span<double> out);

// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> values);

struct SampleResult {
  double loss = 0.0;                 // sum over steps 1..t_total (0 if no target)
  std::vector<double> summed_potentials;  // sum over steps 1..t_total
};

// Runs one image through t_total steps. `target` < 0 skips the loss.
SampleResult run_sample(const Network& net, std::span<const double> image, int target,
                        const SpikeSchedule& schedule, int t_total);

double total_loss(const Network& net, std::span<const double> image, int target,
                  const SpikeSchedule& schedule, int t_total);

// argmax of the time-summed membrane potentials.
int predict(const Network& net, std::span<const double> image,
            const SpikeSchedule& schedule, int t_total);

}  // namespace mifprop
