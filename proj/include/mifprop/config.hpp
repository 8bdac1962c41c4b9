#pragma once

// Experiment configuration: a flat `key = value` text file, `#` comments.
// `mifprop config init` prints every key with its default; the defaults are
// the full-scale training protocol (784-100-10-10, 1000 steps, injections at
// 0/400/800, batch 200, 40 epochs, Adam lr 1e-4).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mifprop/bptt.hpp"
#include "mifprop/mif_model.hpp"
#include "mifprop/optim.hpp"
#include "mifprop/schedule.hpp"

namespace mifprop {

struct ExperimentConfig {
  // dataset
  std::string data_dir;            // empty: $MIFPROP_DATA_DIR
  std::string dataset_name = "mnist";
  std::size_t train_limit = 0;     // 0: all samples
  std::size_t test_limit = 0;

  // model
  std::vector<std::size_t> widths{784, 100, 10, 10};
  MifParams mif;

  // simulation
  int t_total = 1000;
  SpikeSchedule schedule = SpikeSchedule::training_default();

  // training
  std::size_t batch_size = 200;
  std::size_t epochs = 40;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t metrics_every = 10;    // iterations between metrics rows
  std::size_t checkpoint_every = 0;  // iterations; 0: end of each epoch only
  std::size_t eval_limit = 0;        // test samples used for the periodic metric; 0: all
  std::size_t shards = 1;
  std::size_t threads = 1;
  TapeMode tape_mode = TapeMode::full;
  int tape_segment = 100;

  // output
  std::string out_dir = "runs/default";

  // single-neuron simulation
  int sim_t_total = 1000;
  SpikeSchedule sim_schedule = SpikeSchedule({{100, 500.0}});

  // gradient check
  std::vector<std::size_t> gc_widths{4, 3, 2, 2};
  int gc_t_total = 50;
  SpikeSchedule gc_schedule = SpikeSchedule::at_steps({0, 10, 20});
  std::size_t gc_batch = 2;
  std::size_t gc_seeds = 5;
  std::size_t gc_max_weights = 64;
  double gc_h = 1e-5;
  double gc_abs_tol = 1e-8;

  // Sets one key; throws std::invalid_argument on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  // "key=value"
  void apply_override(const std::string& assignment);
  // Throws std::invalid_argument if an invariant is violated.
  void validate() const;

  // Resolved dataset directory (data_dir or $MIFPROP_DATA_DIR).
  std::filesystem::path dataset_dir() const;

  std::map<std::string, std::string> to_map() const;
  void write(std::ostream& os) const;

  static ExperimentConfig parse(std::istream& is);
  static ExperimentConfig load(const std::filesystem::path& path);

  ShardOptions shard_options() const;
};

}  // namespace mifprop
