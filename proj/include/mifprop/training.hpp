#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "mifprop/checkpoint.hpp"
#include "mifprop/config.hpp"
#include "mifprop/data.hpp"
#include "mifprop/network.hpp"
#include "mifprop/optim.hpp"

namespace mifprop {

struct EvalResult {
  std::size_t count = 0;
  std::size_t correct = 0;
  std::size_t classes = 0;
  std::vector<std::size_t> confusion;  // classes x classes, row = true label, col = prediction

  double accuracy() const { return count == 0 ? 0.0 : static_cast<double>(correct) / count; }
  std::size_t at(std::size_t truth, std::size_t predicted) const { return confusion[truth * classes + predicted]; }
};

// Deterministic accuracy and confusion matrix. Throws std::invalid_argument
// when the network input width is not 784.
EvalResult evaluate(const Network& net, const Dataset& data, const SpikeSchedule& schedule, int t_total);

// CSV: header `true\pred,0,...,9`, one row per true class.
void write_confusion_csv(std::ostream& os, const EvalResult& r);

struct MetricsRow {
  std::uint64_t iteration = 0;
  std::uint64_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

inline constexpr const char* kMetricsVersionLine = "# mifprop metrics v1";
inline constexpr const char* kMetricsHeader = "iteration,epoch,train_loss,train_acc,test_acc";
void write_metrics_row(std::ostream& os, const MetricsRow& row);

// Mini-batch training: forward_record -> backward -> adam_step per batch.
// The batch order of epoch e comes from derive_seed(seed, 1'000'000 + e), so
// a run resumed from any checkpoint replays exactly the same updates.
class Trainer {
 public:
  Trainer(ExperimentConfig config, Dataset train, Dataset test);

  // Fresh weights from config.seed.
  void initialize();
  // Continue from a checkpoint; throws std::invalid_argument when its
  // architecture differs from the configuration.
  void resume(const Checkpoint& ckpt);

  // Runs until config.epochs are complete.
  void run(const std::function<void(const MetricsRow&)>& on_metrics,
           const std::function<void(const Checkpoint&)>& on_checkpoint);

  Checkpoint checkpoint() const;
  const Network& network() const { return net_; }
  const ExperimentConfig& config() const { return config_; }

 private:
  ExperimentConfig config_;
  Dataset train_;
  Dataset test_;
  Network net_;
  AdamState adam_;
  std::uint64_t epoch_ = 0;
  std::uint64_t batch_in_epoch_ = 0;
  std::uint64_t iteration_ = 0;
};

}  // namespace mifprop
