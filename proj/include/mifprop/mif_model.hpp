#pragma once

// Memristive integrate-and-fire (MIF) neuron with an alpha-shaped synaptic
// current, in the explicit forward-Euler form used for training.
//
// Units: mV, kOhm (so conductances are mS and currents uA). `c` is the
// per-step divisor applied to the membrane update; the time step is one
// "step" (dt = 1) everywhere except in reference_integrate().

#include <iosfwd>
#include <utility>
#include <vector>

#include "mifprop/schedule.hpp"

namespace mifprop {

struct MifParams {
  double e_rest = 0.0;
  double e_reset = 50.0;
  double c = 100.0;
  double k_th = 15.0;
  double v_on1 = 110.0;
  double v_on2 = 110.0;
  double v_off1 = 5.0;
  double v_off2 = 5.0;
  double r_on1 = 1.0;
  double r_on2 = 1.0;
  double r_off1 = 100.0;
  double r_off2 = 100.0;
  double tau1 = 100.0;
  double tau2 = 100.0;
  double tau_syn = 100.0;
  // Mixed-state second memductance G2 = x1/R_on2 + (1-x2)/R_off2 instead
  // of the symmetric G2 = x2/R_on2 + (1-x2)/R_off2.
  bool literal_g2 = false;

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;

  friend bool operator==(const MifParams&, const MifParams&) = default;
};

struct MifState {
  double v = 0.0;   // membrane potential, mV
  double x1 = 0.0;  // memristor M1 state, [0,1]
  double x2 = 0.0;  // memristor M2 state, [0,1]
  double i = 0.0;   // synaptic current
  double a = 0.0;   // alpha-synapse internal state

  friend bool operator==(const MifState&, const MifState&) = default;
};

using Trajectory = std::vector<MifState>;

// v = E_rest, everything else zero.
MifState initial_state(const MifParams& p);

// 1 / (1 + exp(-z)), never exponentiating a positive argument.
double logistic(double z);

// x / r_on + (1 - x) / r_off. Throws std::domain_error if x is outside
// [0,1] by more than 1e-12.
double memductance(double x, double r_on, double r_off);

// (G1, G2) for the given memristor states, honouring p.literal_g2.
std::pair<double, double> memductances(double x1, double x2, const MifParams& p);

// Alpha synapse update. The weighted input enters `a` directly (no
// 1/tau_syn factor). Returns (a_next, i_next).
std::pair<double, double> alpha_step(double a, double i, double weighted_input,
                                     const MifParams& p, double dt = 1.0);

// Memristor state update for a device referenced to `e_ref`.
double x_step(double x, double v, double e_ref, double v_on, double v_off,
              double k_th, double tau, double dt = 1.0);

// Membrane update from the pre-update current and memductances.
double v_step(double v, double i, double g1, double g2, const MifParams& p,
              double dt = 1.0);

// One full step. x, G and v updates all read v[t]; v[t+1] uses I[t] and the
// memductances derived from x[t].
MifState mif_step(const MifState& s, double weighted_input, const MifParams& p,
                  double dt = 1.0);

// Drives a single neuron whose synapse receives `scale` at each scheduled
// step. Returns t_total + 1 states, starting with initial_state().
Trajectory simulate_neuron(const MifParams& p, const SpikeSchedule& schedule,
                           int t_total);

// Same dynamics integrated with step 1/substeps; the injection lands on the
// first substep of its step. Records one state per whole step, so the output
// is directly comparable with simulate_neuron(), and bit-identical to it at
// substeps == 1.
Trajectory reference_integrate(const MifParams& p, const SpikeSchedule& schedule,
                               int t_total, int substeps);

// CSV with header `step,v,x1,x2,i,a`, 9 significant digits.
void write_waveform_csv(std::ostream& os, const Trajectory& trajectory);

}  // namespace mifprop
