#include "statecnn/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "oracle.hpp"

using namespace statecnn;

namespace {

// One-hot [N,K] picking class c_n for each row.
template <typename T>
Tensor<T> one_hot(const std::vector<int64_t>& classes, int64_t k) {
  Tensor<T> t({static_cast<int64_t>(classes.size()), k});
  for (size_t i = 0; i < classes.size(); ++i) t.at(static_cast<int64_t>(i), classes[i]) = T(1);
  return t;
}

// Random points on the probability simplex via softmax of uniforms.
Tensor<double> random_simplex(int64_t n, int64_t k, uint64_t seed) {
  auto z = Tensor<double>::uniform({n, k}, -1.5, 1.5, seed);
  for (int64_t i = 0; i < n; ++i) {
    double total = 0;
    for (int64_t j = 0; j < k; ++j) {
      z.at(i, j) = std::exp(z.at(i, j));
      total += z.at(i, j);
    }
    for (int64_t j = 0; j < k; ++j) z.at(i, j) /= total;
  }
  return z;
}

ParamSlot<double> scalar_slot(double value, bool trainable = true) {
  return ParamSlot<double>("w", Tensor<double>({1}, {value}), trainable);
}

void give_grad(ParamSlot<double>& slot, double g) {
  slot.set_grad(Tensor<double>(slot.value.shape, std::vector<double>(slot.value.size(), g)));
}

}  // namespace

TEST(CrossEntropy, PerfectPredictionHasZeroLoss) {
  auto targets = one_hot<double>({0, 2, 1}, 3);
  auto r = categorical_crossentropy(targets, targets);
  EXPECT_DOUBLE_EQ(r.loss, 0.0);
}

TEST(CrossEntropy, SingleSampleDirectFormula) {
  Tensor<double> probs({1, 3}, {0.7, 0.2, 0.1});
  auto targets = one_hot<double>({0}, 3);
  auto r = categorical_crossentropy(probs, targets);
  EXPECT_NEAR(r.loss, -std::log(0.7), 1e-12);
  EXPECT_NEAR(r.loss, 0.356675, 1e-6);
}

TEST(CrossEntropy, LossIsNonnegative) {
  for (uint64_t seed = 0; seed < 30; ++seed) {
    auto probs = random_simplex(4, 7, seed);
    Rng rng(mix_seed(seed, 5));
    std::vector<int64_t> classes;
    for (int i = 0; i < 4; ++i) classes.push_back(static_cast<int64_t>(index_draw(rng, 7)));
    auto r = categorical_crossentropy(probs, one_hot<double>(classes, 7));
    EXPECT_GE(r.loss, 0.0);
  }
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  for (uint64_t seed = 0; seed < 25; ++seed) {
    auto probs = random_simplex(4, 7, mix_seed(seed, 1));
    Rng rng(mix_seed(seed, 2));
    std::vector<int64_t> classes;
    for (int i = 0; i < 4; ++i) classes.push_back(static_cast<int64_t>(index_draw(rng, 7)));
    auto targets = one_hot<double>(classes, 7);

    auto r = categorical_crossentropy(probs, targets);
    auto loss = [&]() { return categorical_crossentropy(probs, targets).loss; };
    auto numeric = oracle::fd_gradient(probs, loss);
    std::vector<double> analytic(r.d_probs.data.begin(), r.d_probs.data.end());
    EXPECT_LE(oracle::max_rel_err(analytic, numeric, 1e-3), 1e-4) << "seed " << seed;
  }
}

TEST(CrossEntropy, RejectsBadInputs) {
  Tensor<double> probs({1, 3}, {0.5, 0.3, 0.2});
  Tensor<double> not_one_hot({1, 3}, {0.5, 0.5, 0.0});
  EXPECT_THROW(categorical_crossentropy(probs, not_one_hot), Error);

  Tensor<double> two_ones({1, 3}, {1.0, 1.0, 0.0});
  EXPECT_THROW(categorical_crossentropy(probs, two_ones), Error);

  Tensor<double> bad_sum({1, 3}, {0.9, 0.3, 0.2});
  EXPECT_THROW(categorical_crossentropy(bad_sum, one_hot<double>({0}, 3)), Error);
}

TEST(Sgd, ZeroGradientLeavesParamsBitIdentical) {
  auto slot = scalar_slot(1.2345);
  auto before = slot.value.data;
  Sgd<double> sgd;
  give_grad(slot, 0.0);
  sgd.step({&slot});
  give_grad(slot, 0.0);
  sgd.step({&slot});
  EXPECT_EQ(slot.value.data, before);
}

TEST(Sgd, TwoStepHandRecurrence) {
  auto slot = scalar_slot(1.0);
  Sgd<double> sgd(SgdOptions<double>{0.1, 0.9, 0.0});

  give_grad(slot, 1.0);
  sgd.step({&slot});
  // v1 = 0.9*0 - 0.1*1 = -0.1 ; w1 = 1 - 0.1 = 0.9
  EXPECT_NEAR(slot.value.data[0], 0.9, 1e-15);

  give_grad(slot, 1.0);
  sgd.step({&slot});
  // v2 = 0.9*(-0.1) - 0.1 = -0.19 ; w2 = 0.9 - 0.19 = 0.71
  EXPECT_NEAR(slot.value.data[0], 0.71, 1e-15);
}

TEST(Sgd, DefaultsMatchContract) {
  SgdOptions<double> opt;
  EXPECT_DOUBLE_EQ(opt.lr, 1e-4);
  EXPECT_DOUBLE_EQ(opt.decay, 1e-6);
  EXPECT_DOUBLE_EQ(opt.momentum, 0.9);
}

TEST(Sgd, NoMomentumNoDecayIsPlainGradientDescent) {
  auto slot = scalar_slot(2.0);
  Sgd<double> sgd(SgdOptions<double>{0.05, 0.0, 0.0});
  give_grad(slot, 3.0);
  sgd.step({&slot});
  EXPECT_DOUBLE_EQ(slot.value.data[0], 2.0 - 0.05 * 3.0);
}

TEST(Sgd, InverseTimeDecaySchedule) {
  Sgd<double> sgd(SgdOptions<double>{0.1, 0.0, 0.5});
  auto slot = scalar_slot(0.0);
  EXPECT_DOUBLE_EQ(sgd.current_lr(), 0.1);  // lr_t = lr at iteration 0
  double prev = sgd.current_lr();
  for (int step = 0; step < 5; ++step) {
    give_grad(slot, 1.0);
    sgd.step({&slot});
    EXPECT_LT(sgd.current_lr(), prev);  // strictly decreasing
    prev = sgd.current_lr();
  }
  EXPECT_EQ(sgd.iteration(), 5);
}

TEST(Rmsprop, DefaultLearningRate) {
  RmspropOptions<double> opt;
  EXPECT_DOUBLE_EQ(opt.lr, 1e-3);
  EXPECT_DOUBLE_EQ(opt.rho, 0.9);
  EXPECT_DOUBLE_EQ(opt.epsilon, 1e-7);
}

TEST(Rmsprop, ZeroGradientLeavesParamsUnchanged) {
  auto slot = scalar_slot(0.5);
  Rmsprop<double> rms;
  for (int i = 0; i < 3; ++i) {
    give_grad(slot, 0.0);
    rms.step({&slot});
  }
  EXPECT_DOUBLE_EQ(slot.value.data[0], 0.5);
}

TEST(Rmsprop, ScalarStepMatchesHandComputation) {
  auto slot = scalar_slot(1.0);
  Rmsprop<double> rms(RmspropOptions<double>{0.001, 0.9, 1e-7});
  give_grad(slot, 2.0);
  rms.step({&slot});
  double avg = 0.1 * 4.0;  // 0.4
  double expected = 1.0 - 0.001 * 2.0 / (std::sqrt(avg) + 1e-7);
  EXPECT_NEAR(slot.value.data[0], expected, 1e-15);
}

TEST(Adam, ZeroGradientFromFreshStateLeavesParamsUnchanged) {
  auto slot = scalar_slot(-0.75);
  Adam<double> adam;
  give_grad(slot, 0.0);
  adam.step({&slot});
  EXPECT_DOUBLE_EQ(slot.value.data[0], -0.75);
}

TEST(Adam, FirstStepIsApproximatelyLearningRate) {
  auto slot = scalar_slot(1.0);
  Adam<double> adam;  // lr 1e-3, beta1 0.9, beta2 0.999, eps 1e-7
  give_grad(slot, 1.0);
  adam.step({&slot});
  // mhat = vhat = 1 after bias correction, so the update is lr/(1+eps).
  EXPECT_NEAR(slot.value.data[0], 1.0 - 1e-3 / (1.0 + 1e-7), 1e-15);
}

TEST(Optimizers, FrozenSlotsAreByteInvariant) {
  for (int which = 0; which < 3; ++which) {
    auto frozen = scalar_slot(0.123456789, false);
    auto live = scalar_slot(1.0, true);
    auto frozen_bytes = frozen.value.data;

    std::unique_ptr<Optimizer<double>> opt;
    if (which == 0) opt = std::make_unique<Sgd<double>>();
    if (which == 1) opt = std::make_unique<Rmsprop<double>>();
    if (which == 2) opt = std::make_unique<Adam<double>>();

    for (int s = 0; s < 10; ++s) {
      give_grad(live, 0.7);
      frozen.grad.data[0] = 42.0;  // even a populated gradient must be ignored
      opt->step({&frozen, &live});
    }
    EXPECT_EQ(frozen.value.data, frozen_bytes);
    EXPECT_NE(live.value.data[0], 1.0);
  }
}

TEST(Optimizers, MissingGradientIsAStateError) {
  auto slot = scalar_slot(1.0);
  Sgd<double> sgd;
  EXPECT_THROW(sgd.step({&slot}), Error);

  give_grad(slot, 1.0);
  sgd.step({&slot});
  // The step consumed the gradient; another step without a new backward fails.
  EXPECT_THROW(sgd.step({&slot}), Error);
}

TEST(Optimizers, AllConvergeOnQuadratic) {
  for (int which = 0; which < 3; ++which) {
    std::unique_ptr<Optimizer<double>> opt;
    if (which == 0) opt = std::make_unique<Sgd<double>>();
    if (which == 1) opt = std::make_unique<Rmsprop<double>>();
    if (which == 2) opt = std::make_unique<Adam<double>>();

    auto slot = scalar_slot(1.0);
    double prev = 1.0;
    for (int s = 0; s < 100; ++s) {
      give_grad(slot, slot.value.data[0]);  // f(w) = w^2/2, f'(w) = w
      opt->step({&slot});
      EXPECT_LE(std::abs(slot.value.data[0]), std::abs(prev) + 1e-12)
          << "optimizer " << which << " step " << s;
      prev = slot.value.data[0];
    }
    EXPECT_LT(std::abs(prev), 1.0);
  }
}
