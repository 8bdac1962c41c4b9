#include "mifprop/schedule.hpp"

#include <charconv>
#include <string>
#include <stdexcept>

namespace mifprop {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

SpikeSchedule::SpikeSchedule(std::vector<Injection> injections)
    : injections_(std::move(injections)) {
  for (std::size_t i = 0; i < injections_.size(); ++i) {
    if (injections_[i].step < 0) throw std::invalid_argument("schedule: negative step");
    if (i > 0 && injections_[i].step <= injections_[i - 1].step)
      throw std::invalid_argument("schedule: steps must be strictly increasing");
  }
}

SpikeSchedule SpikeSchedule::at_steps(std::initializer_list<int> steps, double scale) {
  return at_steps(std::vector<int>(steps), scale);
}

SpikeSchedule SpikeSchedule::at_steps(const std::vector<int>& steps, double scale) {
  std::vector<Injection> inj;
  inj.reserve(steps.size());
  for (int s : steps) inj.push_back({s, scale});
  return SpikeSchedule(std::move(inj));
}

SpikeSchedule SpikeSchedule::training_default() { return at_steps({0, 400, 800}); }

SpikeSchedule SpikeSchedule::parse(std::string_view text) {
  std::vector<Injection> inj;
  text = trim(text);
  while (!text.empty()) {
    const auto comma = text.find(',');
    std::string_view item = trim(text.substr(0, comma));
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) throw std::invalid_argument("schedule: empty entry");
    Injection entry;
    const auto colon = item.find(':');
    const std::string_view step_txt = trim(item.substr(0, colon));
    auto [p, ec] = std::from_chars(step_txt.data(), step_txt.data() + step_txt.size(), entry.step);
    if (ec != std::errc{} || p != step_txt.data() + step_txt.size())
      throw std::invalid_argument("schedule: bad step '" + std::string(step_txt) + "'");
    if (colon != std::string_view::npos) {
      const std::string scale_txt(trim(item.substr(colon + 1)));
      std::size_t used = 0;
      entry.scale = std::stod(scale_txt, &used);
      if (used != scale_txt.size())
        throw std::invalid_argument("schedule: bad scale '" + scale_txt + "'");
    }
    inj.push_back(entry);
  }
  return SpikeSchedule(std::move(inj));
}

std::string SpikeSchedule::to_string() const {
  std::string out;
  char buf[40];
  for (std::size_t i = 0; i < injections_.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(injections_[i].step);
    if (injections_[i].scale != 1.0) {
      const auto r = std::to_chars(buf, buf + sizeof buf, injections_[i].scale);
      out += ':';
      out.append(buf, r.ptr);
    }
  }
  return out;
}

void SpikeSchedule::validate(int t_total) const {
  if (t_total < 0) throw std::invalid_argument("t_total must be >= 0");
  for (const auto& i : injections_) {
    if (i.step >= t_total)
      throw std::invalid_argument("schedule step " + std::to_string(i.step) +
                                  " is not below t_total=" + std::to_string(t_total));
  }
}

std::vector<double> SpikeSchedule::dense(int t_total) const {
  validate(t_total);
  std::vector<double> out(static_cast<std::size_t>(t_total), 0.0);
  for (const auto& i : injections_) out[static_cast<std::size_t>(i.step)] = i.scale;
  return out;
}

}  // namespace mifprop
