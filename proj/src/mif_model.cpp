#include "mifprop/mif_model.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>

namespace mifprop {

void MifParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("MifParams: ") + what);
  };
  const double all[] = {e_rest, e_reset, c,      k_th,   v_on1,  v_on2, v_off1, v_off2,
                        r_on1,  r_on2,   r_off1, r_off2, tau1,   tau2,  tau_syn};
  for (double x : all) require(std::isfinite(x), "all parameters must be finite");
  require(r_on1 > 0.0 && r_on2 > 0.0 && r_off1 > 0.0 && r_off2 > 0.0,
          "resistances must be positive");
  require(r_on1 < r_off1 && r_on2 < r_off2, "r_on must be below r_off");
  require(tau1 >= 1.0 && tau2 >= 1.0 && tau_syn >= 1.0, "time constants must be >= 1 step");
  require(k_th > 0.0, "k_th must be positive");
  require(c > 0.0, "c must be positive");
}

MifState initial_state(const MifParams& p) { return MifState{p.e_rest, 0.0, 0.0, 0.0, 0.0}; }

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double memductance(double x, double r_on, double r_off) {
  constexpr double kTol = 1e-12;
  if (!(x >= -kTol && x <= 1.0 + kTol))
    throw std::domain_error("memductance: state " + std::to_string(x) + " outside [0,1]");
  return x / r_on + (1.0 - x) / r_off;
}

std::pair<double, double> memductances(double x1, double x2, const MifParams& p) {
  const double g1 = memductance(x1, p.r_on1, p.r_off1);
  if (!p.literal_g2) return {g1, memductance(x2, p.r_on2, p.r_off2)};
  memductance(x2, p.r_on2, p.r_off2);  // domain check only
  return {g1, x1 / p.r_on2 + (1.0 - x2) / p.r_off2};
}

std::pair<double, double> alpha_step(double a, double i, double weighted_input,
                                     const MifParams& p, double dt) {
  const double a_next = dt * (-a / p.tau_syn) + a + weighted_input;
  const double i_next = dt * ((a - i) / p.tau_syn) + i;
  return {a_next, i_next};
}

double x_step(double x, double v, double e_ref, double v_on, double v_off,
              double k_th, double tau, double dt) {
  const double u = v - e_ref;
  const double growth = (1.0 - x) * logistic((u - v_on) / k_th);
  const double decay = x * logistic((v_off - u) / k_th);
  return (dt / tau) * (growth - decay) + x;
}

double v_step(double v, double i, double g1, double g2, const MifParams& p, double dt) {
  const double drive = (i - g1 * (v - p.e_rest) - g2 * (v - p.e_reset)) / p.c;
  return dt * drive + v;
}

MifState mif_step(const MifState& s, double weighted_input, const MifParams& p, double dt) {
  MifState n;
  std::tie(n.a, n.i) = alpha_step(s.a, s.i, weighted_input, p, dt);
  n.x1 = x_step(s.x1, s.v, p.e_rest, p.v_on1, p.v_off1, p.k_th, p.tau1, dt);
  n.x2 = x_step(s.x2, s.v, p.e_reset, p.v_on2, p.v_off2, p.k_th, p.tau2, dt);
  const auto [g1, g2] = memductances(s.x1, s.x2, p);
  n.v = v_step(s.v, s.i, g1, g2, p, dt);
  return n;
}

Trajectory simulate_neuron(const MifParams& p, const SpikeSchedule& schedule, int t_total) {
  return reference_integrate(p, schedule, t_total, 1);
}

Trajectory reference_integrate(const MifParams& p, const SpikeSchedule& schedule,
                               int t_total, int substeps) {
  if (substeps < 1) throw std::invalid_argument("reference_integrate: substeps must be >= 1");
  p.validate();
  const std::vector<double> drive = schedule.dense(t_total);
  const double dt = 1.0 / substeps;

  Trajectory out;
  out.reserve(static_cast<std::size_t>(t_total) + 1);
  MifState s = initial_state(p);
  out.push_back(s);
  for (int t = 0; t < t_total; ++t) {
    s = mif_step(s, drive[static_cast<std::size_t>(t)], p, dt);
    for (int k = 1; k < substeps; ++k) s = mif_step(s, 0.0, p, dt);
    out.push_back(s);
  }
  return out;
}

void write_waveform_csv(std::ostream& os, const Trajectory& trajectory) {
  os << "step,v,x1,x2,i,a\n";
  char buf[160];
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const MifState& s = trajectory[t];
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", t, s.v, s.x1, s.x2, s.i,
                  s.a);
    os << buf;
  }
}

}  // namespace mifprop
