#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mifprop/bptt.hpp"
#include "mifprop/optim.hpp"

namespace {

using mifprop::BatchView;
using mifprop::Network;
using mifprop::SpikeSchedule;
using mifprop::TapeMode;
using mifprop::TapeOptions;

struct Fixture {
  std::vector<double> images;
  std::vector<std::uint8_t> labels;
  std::size_t width = 0;
  BatchView view() const { return {images, labels, width}; }
};

Fixture make_fixture(std::size_t n, std::size_t width, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  Fixture f;
  f.width = width;
  f.images.resize(n * width);
  for (auto& x : f.images) x = d(g);
  for (std::size_t i = 0; i < n; ++i) f.labels.push_back(static_cast<std::uint8_t>(g() % classes));
  return f;
}

Network small_net(std::uint64_t seed, mifprop::MifParams p = {}) {
  Network net({4, 3, 2, 2}, p);
  mifprop::init_network(net, seed);
  return net;
}

// Mean per-sample loss through the plain forward path, no tape involved.
double oracle_loss(const Network& net, const Fixture& f, const SpikeSchedule& s, int t) {
  double sum = 0.0;
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    sum += mifprop::total_loss(net, std::span<const double>(f.images).subspan(i * f.width, f.width),
                               f.labels[i], s, t);
  }
  return sum / static_cast<double>(f.labels.size());
}

double oracle_fd(Network net, const Fixture& f, const SpikeSchedule& s, int t, std::size_t idx, double h) {
  const double w0 = net.weight(idx);
  net.weight(idx) = w0 + h;
  const double up = oracle_loss(net, f, s, t);
  net.weight(idx) = w0 - h;
  const double dn = oracle_loss(net, f, s, t);
  return (up - dn) / (2 * h);
}

void expect_matches_fd(const Network& net, const Fixture& f, const SpikeSchedule& s, int t, double rel) {
  const auto fr = mifprop::forward_record(net, f.view(), s, t);
  const auto g = mifprop::backward(fr.tape, net);
  for (std::size_t k = 0; k < net.weight_count(); ++k) {
    const double num = oracle_fd(net, f, s, t, k, 1e-5);
    EXPECT_LE(std::abs(g.flat(k) - num), std::max(rel * std::abs(num), 1e-8))
        << "weight " << k << " analytic " << g.flat(k) << " numeric " << num;
  }
}

}  // namespace

TEST(Tape, RecordsOneEntryPerStep) {
  const Network net = small_net(1);
  const auto f = make_fixture(1, 4, 2, 1);
  const auto fr = mifprop::forward_record(net, f.view(), SpikeSchedule::at_steps({0}), 1);
  EXPECT_EQ(fr.tape.record_count(), 1u);
  EXPECT_EQ(fr.tape.stored_per_sample(), 2u);
}

TEST(Tape, LossMatchesPlainForward) {
  const Network net = small_net(2);
  const auto f = make_fixture(5, 4, 2, 2);
  const auto s = SpikeSchedule::at_steps({0, 10, 20});
  const auto fr = mifprop::forward_record(net, f.view(), s, 30);
  EXPECT_NEAR(fr.loss, oracle_loss(net, f, s, 30), 1e-12);
  EXPECT_NEAR(mifprop::batch_loss(net, f.view(), s, 30), fr.loss, 1e-12);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(fr.predictions[i], mifprop::predict(net, f.view().image(i), s, 30));
  }
}

TEST(Tape, ReplayIsIdentical) {
  const Network net = small_net(3);
  const auto f = make_fixture(3, 4, 2, 3);
  const auto s = SpikeSchedule::at_steps({0, 10});
  EXPECT_EQ(mifprop::forward_record(net, f.view(), s, 25).tape,
            mifprop::forward_record(net, f.view(), s, 25).tape);
}

TEST(Tape, DuplicatedBatchKeepsMeanLoss) {
  const Network net = small_net(4);
  auto f = make_fixture(3, 4, 2, 4);
  const auto s = SpikeSchedule::at_steps({0, 10});
  const double once = mifprop::batch_loss(net, f.view(), s, 25);
  f.images.insert(f.images.end(), f.images.begin(), f.images.end());
  f.labels.insert(f.labels.end(), f.labels.begin(), f.labels.end());
  EXPECT_NEAR(mifprop::batch_loss(net, f.view(), s, 25), once, 1e-12);
}

TEST(Tape, ZeroWeightLoss) {
  const Network net({4, 3, 2, 10});
  const auto f = make_fixture(4, 4, 10, 5);
  const auto fr = mifprop::forward_record(net, f.view(), SpikeSchedule::at_steps({0}), 17);
  EXPECT_NEAR(fr.loss, 17 * std::log(10.0), 1e-9);
}

TEST(Tape, MemoryGrowsLinearly) {
  const Network net = small_net(6);
  auto bytes = [&](std::size_t n, int t) {
    const auto f = make_fixture(n, 4, 2, 6);
    return static_cast<double>(mifprop::forward_record(net, f.view(), SpikeSchedule::at_steps({0}), t).tape.bytes());
  };
  const double base = bytes(2, 200);
  EXPECT_NEAR(bytes(2, 400) / base, 2.0, 0.2);
  EXPECT_NEAR(bytes(4, 200) / base, 2.0, 0.2);
  EXPECT_NEAR(bytes(8, 800) / base, 16.0, 1.6);
}

TEST(Tape, RecomputeModeStoresLess) {
  const Network net = small_net(6);
  const auto f = make_fixture(2, 4, 2, 6);
  const auto s = SpikeSchedule::at_steps({0});
  const auto full = mifprop::forward_record(net, f.view(), s, 500);
  const auto seg = mifprop::forward_record(net, f.view(), s, 500, {TapeMode::recompute, 50, 0.0});
  EXPECT_LT(seg.tape.bytes() * 5, full.tape.bytes());
  EXPECT_EQ(seg.loss, full.loss);
}

TEST(Tape, InvalidInputs) {
  const Network net = small_net(7);
  const auto f = make_fixture(2, 4, 2, 7);
  const auto s = SpikeSchedule::at_steps({0});
  EXPECT_THROW(mifprop::forward_record(net, BatchView{{}, {}, 4}, s, 10), std::invalid_argument);
  EXPECT_THROW(mifprop::forward_record(net, f.view(), s, 0), std::invalid_argument);
  const auto wide = make_fixture(2, 5, 2, 7);
  EXPECT_THROW(mifprop::forward_record(net, wide.view(), s, 10), std::invalid_argument);
  EXPECT_THROW(mifprop::forward_record(net, f.view(), SpikeSchedule::at_steps({10}), 10), std::invalid_argument);
}

TEST(Backward, MatchesFiniteDifferencesOnSmallNets) {
  const auto s = SpikeSchedule::at_steps({0, 10, 20});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Network net = small_net(100 + seed);
    const auto f = make_fixture(2, 4, 2, 200 + seed);
    expect_matches_fd(net, f, s, 50, 1e-4);
  }
}

// Large injections push the potentials through the memristor switching
// region, where the logistic gates matter.
TEST(Backward, MatchesFiniteDifferencesInSwitchingRegime) {
  const auto s = SpikeSchedule::parse("0:800,15:800");
  Network net = small_net(11);
  for (std::size_t k = 0; k < net.weight_count(); ++k) net.weight(k) = std::abs(net.weight(k));
  // One inhibitory output path so the two potentials separate.
  net.layers()[2](1, 0) = -net.layers()[2](1, 0);
  const auto f = make_fixture(2, 4, 2, 12);

  std::vector<mifprop::MifState> st(2, mifprop::initial_state(net.params()));
  double vmax = 0.0;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x;
    if (t == 0 || t == 15) {
      x.assign(f.images.begin(), f.images.begin() + 4);
      for (auto& e : x) e *= 800.0;
    }
    st = mifprop::network_step(net, x, st).states;
    for (const auto& m : st) vmax = std::max(vmax, m.v);
  }
  ASSERT_GT(vmax, 110.0) << "fixture no longer reaches the switching threshold";
  ASSERT_LT(vmax, 1000.0);

  expect_matches_fd(net, f, s, 200, 1e-4);
}

TEST(Backward, MatchesFiniteDifferencesWithLiteralSecondMemductance) {
  mifprop::MifParams p;
  p.literal_g2 = true;
  const Network net = small_net(13, p);
  const auto f = make_fixture(2, 4, 2, 14);
  expect_matches_fd(net, f, SpikeSchedule::parse("0:300,20:300"), 120, 1e-4);
}

TEST(Backward, DirectionalDerivative) {
  const Network net = small_net(21);
  const auto f = make_fixture(3, 4, 2, 22);
  const auto s = SpikeSchedule::at_steps({0, 10, 20});
  const auto g = mifprop::backward(mifprop::forward_record(net, f.view(), s, 40).tape, net);
  std::mt19937_64 r(23);
  std::normal_distribution<double> nd;
  std::vector<double> dir(net.weight_count());
  double analytic = 0.0;
  for (std::size_t k = 0; k < dir.size(); ++k) {
    dir[k] = nd(r);
    analytic += dir[k] * g.flat(k);
  }
  auto along = [&](double eps) {
    Network n2 = net;
    for (std::size_t k = 0; k < dir.size(); ++k) n2.weight(k) += eps * dir[k];
    return oracle_loss(n2, f, s, 40);
  };
  const double h = 1e-5;
  const double numeric = (along(h) - along(-h)) / (2 * h);
  EXPECT_NEAR(analytic, numeric, 1e-5 * std::max(1.0, std::abs(numeric)));
}

TEST(Backward, DeadHiddenUnitHasExactlyZeroGradient) {
  Network net = small_net(31);
  // Non-negative inputs and a non-positive row keep hidden unit 1 at zero.
  for (std::size_t c = 0; c < 4; ++c) net.layers()[0](1, c) = -std::abs(net.layers()[0](1, c)) - 0.01;
  const auto f = make_fixture(3, 4, 2, 32);
  const auto g = mifprop::backward(mifprop::forward_record(net, f.view(), SpikeSchedule::at_steps({0, 10}), 30).tape, net);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(g.layers[0](1, c), 0.0);
  for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(g.layers[1](r, 1), 0.0);
}

TEST(Backward, SymmetricHiddenPathsGetEqualGradients) {
  Network net = small_net(41);
  // Second hidden layer units 0 and 1 compute the same thing.
  for (std::size_t c = 0; c < 3; ++c) net.layers()[1](1, c) = net.layers()[1](0, c);
  const auto f = make_fixture(3, 4, 2, 42);
  const auto g = mifprop::backward(mifprop::forward_record(net, f.view(), SpikeSchedule::at_steps({0, 10}), 30).tape, net);
  for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(g.layers[2](r, 0), g.layers[2](r, 1));
}

TEST(Backward, ZeroWeightsGiveZeroHiddenGradients) {
  const Network net({4, 3, 2, 2});
  const auto f = make_fixture(2, 4, 2, 43);
  const auto g = mifprop::backward(mifprop::forward_record(net, f.view(), SpikeSchedule::at_steps({0}), 20).tape, net);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(g.flat(k), 0.0);
}

TEST(Backward, RepeatableAndFinite) {
  const Network net = small_net(51);
  const auto f = make_fixture(3, 4, 2, 52);
  const auto fr = mifprop::forward_record(net, f.view(), SpikeSchedule::at_steps({0, 10}), 30);
  const auto g1 = mifprop::backward(fr.tape, net);
  const auto g2 = mifprop::backward(fr.tape, net);
  EXPECT_EQ(g1, g2);
  EXPECT_TRUE(g1.all_finite());
}

TEST(Backward, RejectsStaleTape) {
  Network net = small_net(61);
  const auto f = make_fixture(2, 4, 2, 62);
  const auto fr = mifprop::forward_record(net, f.view(), SpikeSchedule::at_steps({0}), 10);
  net.weight(3) += 1e-12;
  EXPECT_THROW(mifprop::backward(fr.tape, net), mifprop::StaleTapeError);
}

TEST(Backward, RecomputeModeIsBitIdentical) {
  const Network net = small_net(71);
  const auto f = make_fixture(3, 4, 2, 72);
  const auto s = SpikeSchedule::at_steps({0, 37, 80});
  const auto full = mifprop::backward(mifprop::forward_record(net, f.view(), s, 120).tape, net);
  for (int seg : {1, 7, 50, 120, 500}) {
    const auto fr = mifprop::forward_record(net, f.view(), s, 120, {TapeMode::recompute, seg, 0.0});
    EXPECT_EQ(mifprop::backward(fr.tape, net), full) << "segment " << seg;
  }
}

TEST(Shards, ThreadCountDoesNotChangeResult) {
  const Network net = small_net(81);
  const auto f = make_fixture(7, 4, 2, 82);
  const auto s = SpikeSchedule::at_steps({0, 10});
  const auto one = mifprop::compute_gradients(net, f.view(), s, 30, {3, 1, {}});
  const auto many = mifprop::compute_gradients(net, f.view(), s, 30, {3, 3, {}});
  EXPECT_EQ(one.gradients, many.gradients);
  EXPECT_EQ(one.loss, many.loss);
  EXPECT_EQ(one.predictions, many.predictions);

  const auto whole = mifprop::compute_gradients(net, f.view(), s, 30);
  const auto direct = mifprop::backward(mifprop::forward_record(net, f.view(), s, 30).tape, net);
  EXPECT_EQ(whole.gradients, direct);
  for (std::size_t k = 0; k < direct.size(); ++k) {
    EXPECT_NEAR(one.gradients.flat(k), direct.flat(k), 1e-12 * std::max(1.0, std::abs(direct.flat(k))));
  }
  EXPECT_NEAR(one.loss, whole.loss, 1e-12);
}

TEST(FiniteDifference, CentralDifferenceIsExactOnQuadratics) {
  EXPECT_NEAR(mifprop::central_difference([](double w) { return w * w; }, 3.0, 1e-3), 6.0, 1e-9);
  EXPECT_EQ(mifprop::central_difference([](double) { return 4.0; }, 3.0, 1e-3), 0.0);
}

TEST(FiniteDifference, LibraryRouteAgreesWithOracle) {
  const Network net = small_net(91);
  const auto f = make_fixture(2, 4, 2, 92);
  const auto s = SpikeSchedule::at_steps({0, 10});
  for (std::size_t k : {0u, 7u, 15u, 19u}) {
    EXPECT_NEAR(mifprop::finite_difference_grad(net, f.view(), s, 30, k, 1e-5), oracle_fd(net, f, s, 30, k, 1e-5),
                1e-9);
  }
}

TEST(Gradcheck, ReportsAndLocatesErrors) {
  const Network net = small_net(101);
  const auto f = make_fixture(2, 4, 2, 102);
  const auto s = SpikeSchedule::at_steps({0, 10, 20});
  const auto good = mifprop::gradient_check(net, f.view(), s, 50, 1e-4, 1e-8, 1e-5);
  EXPECT_TRUE(good.passed);
  EXPECT_EQ(good.entries.size(), net.weight_count());

  const std::size_t bad = 9;
  auto buggy = [&](const Network& n, const BatchView& b, const SpikeSchedule& sc, int t) {
    auto g = mifprop::analytic_gradients(n, b, sc, t);
    g.layers[0].data[bad] += 0.5;
    return g;
  };
  const auto rep = mifprop::gradient_check(net, f.view(), s, 50, 1e-4, 1e-8, 1e-5, buggy);
  EXPECT_FALSE(rep.passed);
  EXPECT_EQ(rep.worst_index, bad);
  EXPECT_FALSE(rep.entries[bad].ok);

  EXPECT_TRUE(mifprop::gradient_check(net, f.view(), s, 50, INFINITY, 1e-8, 1e-5, buggy).passed);
  EXPECT_THROW(mifprop::gradient_check(net, f.view(), s, 50, 0.0, 1e-8, 1e-5), std::invalid_argument);
  EXPECT_THROW(mifprop::gradient_check(net, f.view(), s, 50, -1.0, 1e-8, 1e-5), std::invalid_argument);
}
