#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mifprop {

// One input injection: at `step` the input vector, multiplied by `scale`,
// is presented to the network (or, for a lone neuron, `scale` is the
// weighted input itself).
struct Injection {
  int step = 0;
  double scale = 1.0;

  friend bool operator==(const Injection&, const Injection&) = default;
};

// Sparse input timing. Steps are strictly increasing; validity against a
// horizon is checked by validate().
class SpikeSchedule {
 public:
  SpikeSchedule() = default;
  explicit SpikeSchedule(std::vector<Injection> injections);

  // Steps with unit scale.
  static SpikeSchedule at_steps(std::initializer_list<int> steps, double scale = 1.0);
  static SpikeSchedule at_steps(const std::vector<int>& steps, double scale = 1.0);

  // Default training schedule: steps 0, 400, 800 with scale 1.
  static SpikeSchedule training_default();

  // Parses "0,400,800" or "100:500,300:20" (step[:scale]).
  static SpikeSchedule parse(std::string_view text);
  std::string to_string() const;

  // Throws std::invalid_argument if any step is negative or >= t_total.
  void validate(int t_total) const;

  bool empty() const { return injections_.empty(); }
  std::size_t size() const { return injections_.size(); }
  const std::vector<Injection>& injections() const { return injections_; }

  // Scale per step for 0..t_total-1, zero where nothing is injected.
  std::vector<double> dense(int t_total) const;

  friend bool operator==(const SpikeSchedule&, const SpikeSchedule&) = default;

 private:
  std::vector<Injection> injections_;
};

}  // namespace mifprop
