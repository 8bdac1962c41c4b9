#include "mifprop/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mifprop/simd.hpp"

namespace mifprop {

Network::Network(std::vector<std::size_t> widths, MifParams params)
    : widths_(std::move(widths)), params_(params) {
  if (widths_.size() < 2) throw std::invalid_argument("network needs at least input and output widths");
  for (std::size_t w : widths_)
    if (w == 0) throw std::invalid_argument("network layer width must be positive");
  params_.validate();
  layers_.reserve(widths_.size() - 1);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) layers_.emplace_back(widths_[l + 1], widths_[l]);
}

Network Network::default_architecture(MifParams params) { return Network({784, 100, 10, 10}, params); }

std::size_t Network::weight_count() const {
  std::size_t n = 0;
  for (const auto& m : layers_) n += m.size();
  return n;
}

double& Network::weight(std::size_t flat_index) {
  for (auto& m : layers_) {
    if (flat_index < m.size()) return m.data[flat_index];
    flat_index -= m.size();
  }
  throw std::out_of_range("weight index out of range");
}

double Network::weight(std::size_t flat_index) const {
  return const_cast<Network*>(this)->weight(flat_index);
}

std::uint64_t Network::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& m : layers_) {
    mix(m.rows);
    mix(m.cols);
    for (double w : m.data) mix(std::bit_cast<std::uint64_t>(w));
  }
  return h;
}

void Network::check_finite() const {
  for (const auto& m : layers_)
    for (double w : m.data)
      if (!std::isfinite(w)) throw std::domain_error("network has a non-finite weight");
}

std::vector<double> dense_forward(const Network& net, std::span<const double> x, DenseTrace* trace) {
  if (x.size() != net.input_width())
    throw std::invalid_argument("input width " + std::to_string(x.size()) + " does not match network input " +
                                std::to_string(net.input_width()));
  const auto& layers = net.layers();
  if (trace != nullptr) trace->pre.assign(layers.size(), {});

  std::vector<double> act(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Matrix& w = layers[l];
    std::vector<double> pre(w.rows);
    simd::gemv(w.data, w.rows, w.cols, act, pre);
    if (trace != nullptr) trace->pre[l] = pre;
    if (l + 1 < layers.size())
      for (double& z : pre) z = z > 0.0 ? z : 0.0;
    act = std::move(pre);
  }
  return act;
}

StepOutput network_step(const Network& net, std::span<const double> input,
                        std::span<const MifState> states) {
  const std::size_t n_out = net.output_width();
  if (states.size() != n_out) throw std::invalid_argument("state count does not match output width");
  std::vector<double> drive = input.empty() ? std::vector<double>(n_out, 0.0) : dense_forward(net, input);

  StepOutput out;
  out.states.resize(n_out);
  out.potentials.resize(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    out.states[k] = mif_step(states[k], drive[k], net.params());
    out.potentials[k] = out.states[k].v;
  }
  return out;
}

void softmax(std::span<const double> potentials, std::span<double> out) {
  const double hi = *std::max_element(potentials.begin(), potentials.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < potentials.size(); ++k) {
    out[k] = std::exp(potentials[k] - hi);
    sum += out[k];
  }
  for (double& p : out) p /= sum;
}

double step_loss(std::span<const double> potentials, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= potentials.size())
    throw std::invalid_argument("step_loss: target out of range");
  const double hi = *std::max_element(potentials.begin(), potentials.end());
  double sum = 0.0;
  for (double v : potentials) sum += std::exp(v - hi);
  return std::log(sum) - (potentials[static_cast<std::size_t>(target)] - hi);
}

int argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[best]) best = k;
  return static_cast<int>(best);
}

SampleResult run_sample(const Network& net, std::span<const double> image, int target,
                        const SpikeSchedule& schedule, int t_total) {
  if (image.size() != net.input_width()) throw std::invalid_argument("sample width does not match network input");
  const std::vector<double> scale = schedule.dense(t_total);
  const std::size_t n_out = net.output_width();

  std::vector<MifState> states(n_out, initial_state(net.params()));
  std::vector<double> x(image.size());
  std::vector<double> v(n_out);
  SampleResult r;
  r.summed_potentials.assign(n_out, 0.0);
  for (int t = 0; t < t_total; ++t) {
    const double sc = scale[static_cast<std::size_t>(t)];
    std::span<const double> in;
    if (sc != 0.0) {
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = sc * image[j];
      in = x;
    }
    StepOutput step = network_step(net, in, states);
    states = std::move(step.states);
    for (std::size_t k = 0; k < n_out; ++k) r.summed_potentials[k] += step.potentials[k];
    if (target >= 0) r.loss += step_loss(step.potentials, target);
  }
  return r;
}

double total_loss(const Network& net, std::span<const double> image, int target,
                  const SpikeSchedule& schedule, int t_total) {
  if (target < 0) throw std::invalid_argument("total_loss: target required");
  return run_sample(net, image, target, schedule, t_total).loss;
}

int predict(const Network& net, std::span<const double> image, const SpikeSchedule& schedule,
            int t_total) {
  return argmax(run_sample(net, image, -1, schedule, t_total).summed_potentials);
}

}  // namespace mifprop
