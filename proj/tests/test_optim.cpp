#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "mifprop/optim.hpp"

namespace {

using mifprop::AdamConfig;
using mifprop::AdamState;
using mifprop::Matrix;

Matrix filled(std::size_t r, std::size_t c, double v) {
  Matrix m(r, c);
  for (auto& x : m.data) x = v;
  return m;
}

}  // namespace

TEST(Rng, EngineIsTheStandardMersenneTwister) {
  // The standard pins the 10000th draw of a default-seeded mt19937_64.
  mifprop::Rng r(5489u);
  std::uint64_t x = 0;
  for (int k = 0; k < 10000; ++k) x = r.next();
  EXPECT_EQ(x, 9981545732273789042ull);
}

TEST(Rng, DistributionsStayInRange) {
  mifprop::Rng r(1);
  for (int k = 0; k < 100000; ++k) {
    const double u = r.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.below(7), 7u);
  }
  EXPECT_EQ(r.below(1), 0u);
  EXPECT_THROW(r.below(0), std::invalid_argument);
}

TEST(Rng, BelowIsRoughlyUniform) {
  mifprop::Rng r(2);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int k = 0; k < n; ++k) ++counts[r.below(10)];
  // Chi-square with 9 dof; 27.9 is the 0.1% critical value.
  double chi = 0.0;
  for (int c : counts) chi += (c - n / 10.0) * (c - n / 10.0) / (n / 10.0);
  EXPECT_LT(chi, 27.9);
}

TEST(Rng, DerivedSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 50; ++s)
    for (std::uint64_t k = 0; k < 50; ++k) seen.insert(mifprop::derive_seed(s, k));
  EXPECT_EQ(seen.size(), 2500u);
}

TEST(Init, BoundsFollowFanIn) {
  const Matrix w = mifprop::init_weights(100, 784, 784, 3);
  const double bound = 1.0 / 28.0;
  double lo = 1.0, hi = -1.0;
  for (double x : w.data) {
    ASSERT_GE(x, -bound);
    ASSERT_LT(x, bound);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  // 78400 draws fill the interval.
  EXPECT_LT(lo, -0.99 * bound);
  EXPECT_GT(hi, 0.99 * bound);

  const Matrix one = mifprop::init_weights(1, 1000, 1, 4);
  for (double x : one.data) {
    ASSERT_GE(x, -1.0);
    ASSERT_LT(x, 1.0);
  }
  EXPECT_THROW(mifprop::init_weights(2, 2, 0, 1), std::invalid_argument);
}

TEST(Init, SeededAndLayerwiseIndependent) {
  mifprop::Network a({784, 100, 10, 10}), b({784, 100, 10, 10}), c({784, 100, 10, 10});
  mifprop::init_network(a, 42);
  mifprop::init_network(b, 42);
  mifprop::init_network(c, 43);
  EXPECT_EQ(a.layers(), b.layers());
  EXPECT_NE(a.layers()[0], c.layers()[0]);
  EXPECT_EQ(a.layers()[1], mifprop::init_weights(10, 100, 100, mifprop::derive_seed(42, 1)));
}

TEST(Adam, ZeroGradientLeavesWeightsAlone) {
  std::vector<Matrix> w = {filled(3, 4, 0.25)};
  const auto w0 = w;
  AdamState st = AdamState::for_network(mifprop::Network({4, 3}));
  for (int k = 0; k < 5; ++k) mifprop::adam_step(w, {filled(3, 4, 0.0)}, st);
  EXPECT_EQ(w, w0);
  EXPECT_EQ(st.t, 5u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Matrix> w = {filled(2, 2, 0.0)};
  AdamState st = AdamState::for_network(mifprop::Network({2, 2}));
  mifprop::adam_step(w, {filled(2, 2, 1.0)}, st);
  for (double x : w[0].data) EXPECT_NEAR(x, -1e-4 / (1.0 + 1e-8), 1e-20);
  EXPECT_NEAR(w[0].data[0], -1e-4, 1e-12);
}

TEST(Adam, FirstStepIsScaleInvariant) {
  for (double scale : {1e-3, 1.0, 1e3}) {
    std::vector<Matrix> w = {filled(1, 3, 0.5)};
    AdamState st = AdamState::for_network(mifprop::Network({3, 1}), {1e-3, 0.9, 0.999, 0.0});
    Matrix g(1, 3);
    g.data = {scale, -2 * scale, 0.5 * scale};
    mifprop::adam_step(w, {g}, st);
    EXPECT_NEAR(w[0].data[0], 0.5 - 1e-3, 1e-15);
    EXPECT_NEAR(w[0].data[1], 0.5 + 1e-3, 1e-15);
    EXPECT_NEAR(w[0].data[2], 0.5 - 1e-3, 1e-15);
  }
}

TEST(Adam, MatchesPlainRecurrence) {
  std::mt19937_64 g(5);
  std::normal_distribution<double> nd;
  const AdamConfig cfg{3e-3, 0.8, 0.99, 1e-6};
  std::vector<Matrix> w = {Matrix(4, 5), Matrix(3, 4)};
  for (auto& m : w)
    for (auto& x : m.data) x = nd(g);
  auto ref = w;
  std::vector<Matrix> m = {Matrix(4, 5), Matrix(3, 4)}, u = m;
  AdamState st = AdamState::for_network(mifprop::Network({5, 4, 3}), cfg);
  for (int t = 1; t <= 20; ++t) {
    std::vector<Matrix> grads = {Matrix(4, 5), Matrix(3, 4)};
    for (auto& gm : grads)
      for (auto& x : gm.data) x = nd(g);
    mifprop::adam_step(w, grads, st);
    for (std::size_t l = 0; l < 2; ++l) {
      for (std::size_t k = 0; k < ref[l].data.size(); ++k) {
        const double gk = grads[l].data[k];
        m[l].data[k] = cfg.beta1 * m[l].data[k] + (1 - cfg.beta1) * gk;
        u[l].data[k] = cfg.beta2 * u[l].data[k] + (1 - cfg.beta2) * gk * gk;
        const double mh = m[l].data[k] / (1 - std::pow(cfg.beta1, t));
        const double uh = u[l].data[k] / (1 - std::pow(cfg.beta2, t));
        ref[l].data[k] -= cfg.lr * mh / (std::sqrt(uh) + cfg.eps);
      }
    }
  }
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t k = 0; k < ref[l].data.size(); ++k) {
      EXPECT_NEAR(w[l].data[k], ref[l].data[k], 1e-14);
      EXPECT_NEAR(st.m[l].data[k], m[l].data[k], 1e-14);
      EXPECT_GE(st.u[l].data[k], 0.0);
    }
  }
}

TEST(Adam, LayersUpdateIndependently) {
  std::vector<Matrix> both = {filled(2, 3, 0.1), filled(1, 2, -0.2)};
  std::vector<Matrix> second = {filled(1, 2, -0.2)};
  AdamState s_both = AdamState::for_network(mifprop::Network({3, 2, 1}));
  AdamState s_second = AdamState::for_network(mifprop::Network({2, 1}));
  for (int t = 0; t < 3; ++t) {
    mifprop::adam_step(both, {filled(2, 3, 0.3 * t), filled(1, 2, 1.0 - t)}, s_both);
    mifprop::adam_step(second, {filled(1, 2, 1.0 - t)}, s_second);
  }
  EXPECT_EQ(both[1], second[0]);
}

TEST(Adam, RejectsShapeMismatch) {
  std::vector<Matrix> w = {filled(2, 2, 0.0)};
  AdamState st = AdamState::for_network(mifprop::Network({2, 2}));
  EXPECT_THROW(mifprop::adam_step(w, {filled(2, 3, 0.0)}, st), std::invalid_argument);
  EXPECT_THROW(mifprop::adam_step(w, {}, st), std::invalid_argument);
}
