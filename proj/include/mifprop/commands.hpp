#pragma once

// The CLI subcommands as library calls, so tests can drive them directly.

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "mifprop/bptt.hpp"
#include "mifprop/config.hpp"
#include "mifprop/training.hpp"

namespace mifprop {

struct TrainOutcome {
  Checkpoint final_checkpoint;
  std::filesystem::path metrics_path;
  std::filesystem::path final_path;
};

// Trains per `config`, writing into config.out_dir:
//   metrics.csv      appended every train.metrics_every iterations
//   checkpoint.mifp  initial state, then refreshed per train.checkpoint_every / epoch
//   final.mifp       state after the last epoch
// With `resume`, training continues from that checkpoint and metrics are
// appended to the existing log. The run directory is guarded by a lock file.
TrainOutcome cmd_train(const ExperimentConfig& config,
                       const std::optional<std::filesystem::path>& resume, std::ostream& log);

// Accuracy on the test split; writes confusion.csv into config.out_dir.
EvalResult cmd_eval(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                    std::ostream& log);

// Single-neuron waveform into config.out_dir/waveform.csv; returns the path.
std::filesystem::path cmd_simulate(const ExperimentConfig& config, std::ostream& log);

struct GradcheckSummary {
  bool passed = true;
  double max_rel_err = 0.0;
  std::size_t failing_seed = 0;
  std::size_t failing_index = 0;
  std::size_t weights_checked = 0;
};

// Backward vs central differences on gradcheck.* networks, one random
// network and batch per seed. `gradient_fn` is swappable for negative
// controls. Throws std::invalid_argument if tolerance <= 0 or the network
// exceeds gradcheck.max_weights.
GradcheckSummary cmd_gradcheck(const ExperimentConfig& config, double tolerance, std::ostream& log,
                               const GradientFn& gradient_fn = analytic_gradients);

// Random gradcheck fixture for one seed (exposed for tests).
struct GradcheckFixture {
  Network net;
  std::vector<double> images;
  std::vector<std::uint8_t> labels;
  BatchView view() const { return {images, labels, net.input_width()}; }
};
GradcheckFixture make_gradcheck_fixture(const ExperimentConfig& config, std::size_t seed_index);

}  // namespace mifprop
