#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "mifprop/network.hpp"
#include "mifprop/optim.hpp"

namespace {

using mifprop::Network;
using mifprop::SpikeSchedule;

std::vector<double> random_image(std::mt19937_64& g, std::size_t n) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(g);
  return v;
}

}  // namespace

TEST(Loss, UniformPotentialsGiveLogClassCount) {
  const std::vector<double> v(10, 3.25);
  EXPECT_NEAR(mifprop::step_loss(v, 4), std::log(10.0), 1e-12);
}

TEST(Loss, OneHotPotentials) {
  std::vector<double> v(10, 0.0);
  v[0] = 1.0;
  const double want = std::log(std::exp(1.0) + 9.0) - 1.0;
  EXPECT_NEAR(mifprop::step_loss(v, 0), want, 1e-12);
  EXPECT_NEAR(want, 1.46115, 1e-5);
  v[0] = 1e4;
  EXPECT_NEAR(mifprop::step_loss(v, 0), 0.0, 1e-12);
  EXPECT_NEAR(mifprop::step_loss(v, 1), 1e4, 1e-6);
}

TEST(Loss, ShiftInvariantAndNonNegative) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> d(-300.0, 300.0);
  for (int k = 0; k < 500; ++k) {
    std::vector<double> v(10);
    for (auto& x : v) x = d(g);
    const int t = static_cast<int>(g() % 10);
    const double base = mifprop::step_loss(v, t);
    EXPECT_GE(base, 0.0);
    const double c = d(g);
    for (auto& x : v) x += c;
    EXPECT_NEAR(mifprop::step_loss(v, t), base, 1e-9 * std::max(1.0, base));
  }
}

TEST(Loss, SoftmaxSumsToOne) {
  std::vector<double> v = {1000.0, -1000.0, 999.0, 0.0};
  std::vector<double> p(4);
  mifprop::softmax(v, p);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-15);
  EXPECT_GT(p[0], p[2]);
  EXPECT_THROW(mifprop::step_loss(v, 4), std::invalid_argument);
}

TEST(Prediction, TiesGoToLowestIndex) {
  std::vector<double> v(10, 0.0);
  v[2] = 5.0;
  v[7] = 5.0;
  EXPECT_EQ(mifprop::argmax(v), 2);
}

TEST(Prediction, InvariantUnderMonotoneTransform) {
  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> v(10), w(10);
    for (auto& x : v) x = d(g);
    std::transform(v.begin(), v.end(), w.begin(), [](double x) { return std::exp(x) * 3.0 + 1.0; });
    EXPECT_EQ(mifprop::argmax(v), mifprop::argmax(w));
  }
}

TEST(Network, ShapesAndFlatIndexing) {
  Network net({4, 3, 2});
  EXPECT_EQ(net.layer_count(), 2u);
  EXPECT_EQ(net.layers()[0].rows, 3u);
  EXPECT_EQ(net.layers()[0].cols, 4u);
  EXPECT_EQ(net.weight_count(), 12u + 6u);
  net.weight(13) = 2.5;
  EXPECT_EQ(net.layers()[1](0, 1), 2.5);
  EXPECT_THROW(Network({4}), std::invalid_argument);
  EXPECT_EQ(Network::default_architecture().widths(), (std::vector<std::size_t>{784, 100, 10, 10}));
}

TEST(Network, FingerprintTracksWeights) {
  Network net({4, 3, 2});
  const auto f0 = net.fingerprint();
  net.weight(5) = 1e-300;
  EXPECT_NE(net.fingerprint(), f0);
  net.weight(5) = 0.0;
  EXPECT_EQ(net.fingerprint(), f0);
}

TEST(Network, ReluClampsNegativePreActivations) {
  Network net({2, 2, 1});
  // Hidden unit 0 sees x0 - x1, hidden unit 1 sees x1 - x0.
  net.layers()[0](0, 0) = 1.0;
  net.layers()[0](0, 1) = -1.0;
  net.layers()[0](1, 0) = -1.0;
  net.layers()[0](1, 1) = 1.0;
  net.layers()[1](0, 0) = 1.0;
  net.layers()[1](0, 1) = 1.0;
  mifprop::DenseTrace tr;
  const std::vector<double> x = {0.8, 0.3};
  const auto s = mifprop::dense_forward(net, x, &tr);
  EXPECT_NEAR(s[0], 0.5, 1e-15);
  EXPECT_NEAR(tr.pre[0][1], -0.5, 1e-15);
  // Making the dead unit more negative changes nothing downstream.
  net.layers()[0](1, 0) = -10.0;
  EXPECT_EQ(mifprop::dense_forward(net, x)[0], s[0]);
  EXPECT_THROW(mifprop::dense_forward(net, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Network, ZeroWeightsDriveEveryOutputLikeALoneNeuron) {
  Network net({6, 4, 3});
  std::mt19937_64 g(1);
  const auto img = random_image(g, 6);
  std::vector<mifprop::MifState> st(3, mifprop::initial_state(net.params()));
  mifprop::MifState lone = mifprop::initial_state(net.params());
  for (int t = 0; t < 50; ++t) {
    auto out = mifprop::network_step(net, t % 10 == 0 ? std::span<const double>(img) : std::span<const double>(), st);
    lone = mifprop::mif_step(lone, 0.0, net.params());
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out.states[j], lone);
    st = out.states;
  }
}

TEST(Network, ZeroWeightLossIsStepsTimesLogClassCount) {
  const Network net({8, 5, 10});
  std::mt19937_64 g(2);
  const auto img = random_image(g, 8);
  for (int t : {1, 7, 40}) {
    EXPECT_NEAR(mifprop::total_loss(net, img, 3, SpikeSchedule::at_steps({0}), t), t * std::log(10.0), 1e-9);
  }
}

TEST(Network, DrivenOutputWinsPrediction) {
  Network net({3, 4});
  for (std::size_t c = 0; c < 3; ++c) net.layers()[0](2, c) = 50.0;
  const std::vector<double> img = {1.0, 1.0, 1.0};
  EXPECT_EQ(mifprop::predict(net, img, SpikeSchedule::at_steps({0, 20}), 60), 2);
  // With no input every output follows the same trajectory: lowest index wins.
  EXPECT_EQ(mifprop::predict(net, img, SpikeSchedule{}, 60), 0);
}

TEST(Network, LossGrowsAffinelyOnceDynamicsSettle) {
  mifprop::MifParams p;
  p.c = 2.0;
  p.tau_syn = 2.0;
  p.tau1 = p.tau2 = 2.0;
  Network net({5, 4, 3}, p);
  mifprop::init_network(net, 17);
  std::mt19937_64 g(4);
  const auto img = random_image(g, 5);
  const auto s = SpikeSchedule::at_steps({0});
  const double l1 = mifprop::total_loss(net, img, 1, s, 4000);
  const double l2 = mifprop::total_loss(net, img, 1, s, 8000);
  const double l3 = mifprop::total_loss(net, img, 1, s, 12000);
  EXPECT_NEAR(l3 - l2, l2 - l1, 1e-9 * l3);
}

TEST(Network, RunSampleSumsPotentialsOverSteps) {
  Network net({4, 3, 2});
  mifprop::init_network(net, 3);
  std::mt19937_64 g(8);
  const auto img = random_image(g, 4);
  const auto sched = SpikeSchedule::at_steps({0, 5});
  const auto r = mifprop::run_sample(net, img, 1, sched, 12);
  std::vector<mifprop::MifState> st(2, mifprop::initial_state(net.params()));
  std::vector<double> sum(2, 0.0);
  double loss = 0.0;
  for (int t = 0; t < 12; ++t) {
    const bool inj = t == 0 || t == 5;
    auto out = mifprop::network_step(net, inj ? std::span<const double>(img) : std::span<const double>(), st);
    for (int j = 0; j < 2; ++j) sum[j] += out.potentials[j];
    loss += mifprop::step_loss(out.potentials, 1);
    st = out.states;
  }
  EXPECT_NEAR(r.loss, loss, 1e-12);
  EXPECT_NEAR(r.summed_potentials[0], sum[0], 1e-12);
  EXPECT_NEAR(r.summed_potentials[1], sum[1], 1e-12);
}
