#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "probout/layers.hpp"
#include "probout/loss.hpp"
#include "probout/training.hpp"
#include "support.hpp"

using namespace probout;

namespace {

Tensor64 uniform_output(std::size_t c) { return Tensor64({c}, 1.0 / static_cast<double>(c)); }

SgdConfig blob_sgd(int epochs) {
  SgdConfig sgd;
  sgd.batch_size = 20;
  sgd.epochs_max = epochs;
  sgd.patience = epochs;
  sgd.seed = 5;
  return sgd;
}

Parameters<float> init(const ModelConfig& config, std::uint64_t seed = 3) {
  RngStream rng(seed);
  return init_parameters<float>(config, rng);
}

}  // namespace

TEST(CrossEntropy, UniformTenClassLiteralFormula) {
  const double expected = -std::log(0.1) - 9.0 * std::log(0.9);
  for (std::size_t label = 0; label < 10; ++label) {
    EXPECT_NEAR(cross_entropy(uniform_output(10), label, LossKind::BinarySum), expected, 1e-12);
  }
  EXPECT_NEAR(expected, 3.25083, 1e-5);
}

TEST(CrossEntropy, UniformTenClassCategorical) {
  EXPECT_NEAR(cross_entropy(uniform_output(10), 4, LossKind::Categorical), 2.302585, 1e-6);
}

TEST(CrossEntropy, PerfectPredictionIsNearZero) {
  const Tensor64 y = one_hot<double>(2, 5);
  EXPECT_LT(cross_entropy(y, y, LossKind::BinarySum), 1e-9);
  EXPECT_LT(cross_entropy(y, y, LossKind::Categorical), 1e-9);
  EXPECT_TRUE(std::isfinite(cross_entropy(y, one_hot<double>(0, 5), LossKind::BinarySum)));
}

TEST(CrossEntropy, RejectsTargetsThatAreNotOneHot) {
  const Tensor64 o = uniform_output(3);
  EXPECT_THROW(cross_entropy(o, Tensor64::vector({0.5, 0.5, 0.0}), LossKind::BinarySum), LabelError);
  EXPECT_THROW(cross_entropy(o, Tensor64::vector({1, 1, 0}), LossKind::Categorical), LabelError);
  EXPECT_THROW(cross_entropy(o, Tensor64::vector({0, 0, 0}), LossKind::Categorical), LabelError);
  EXPECT_THROW(cross_entropy(o, std::size_t{3}, LossKind::Categorical), LabelError);
}

TEST(CrossEntropy, LogitGradientMatchesFiniteDifferences) {
  RngStream rng(31);
  for (LossKind kind : {LossKind::BinarySum, LossKind::Categorical}) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t c = 2 + rng.uniform_index(8);
      const std::size_t label = rng.uniform_index(c);
      Tensor64 logits = random_tensor<double>({c}, rng, 2.0);
      const auto analytic = loss_gradient_logits(softmax(logits), label, kind);
      for (std::size_t i = 0; i < c; ++i) {
        const double numeric =
            oracle::central_difference([&] { return cross_entropy(softmax(logits), label, kind); }, logits[i]);
        EXPECT_LT(oracle::relative_error(analytic[i], numeric, 1e-6), 1e-6) << "class " << i;
      }
    }
  }
}

// A confidently wrong single-precision output rounds the wrong class to 1.
// Reference gradient from logits in long double:
// dL/dz_k = p_k - [k = y] - sum_{j != y} ([k != j] e^{z_k} / sum_{m != j} e^{z_m} - p_k).
TEST(CrossEntropy, BinarySumGradientStaysBoundedWhenAWrongClassSaturates) {
  const std::vector<long double> z{0.0L, 24.0L, 0.5L, -3.0L};
  const std::size_t label = 0, c = z.size();
  long double total = 0;
  for (auto v : z) total += std::exp(v);
  Tensor out({c});
  for (std::size_t i = 0; i < c; ++i) out[i] = static_cast<float>(std::exp(z[i]) / total);
  ASSERT_EQ(out[1], 1.0f);

  const auto grad = loss_gradient_logits(out, label, LossKind::BinarySum);
  for (std::size_t k = 0; k < c; ++k) {
    const long double pk = std::exp(z[k]) / total;
    long double expect = pk - (k == label ? 1.0L : 0.0L);
    for (std::size_t j = 0; j < c; ++j) {
      if (j == label) continue;
      long double rest = 0;
      for (std::size_t m = 0; m < c; ++m) {
        if (m != j) rest += std::exp(z[m]);
      }
      expect -= (k != j ? std::exp(z[k]) / rest : 0.0L) - pk;
    }
    EXPECT_TRUE(std::isfinite(grad[k]));
    EXPECT_NEAR(grad[k], static_cast<double>(expect), 1e-6) << "class " << k;
  }
}

TEST(LambdaSchedule, PublishedEndpointsAndMidpoint) {
  const LambdaSchedule s{{2.0}, 100};
  EXPECT_EQ(lambda_at(s, 0)[0], 2.0);
  EXPECT_DOUBLE_EQ(lambda_at(s, 100)[0], 1.1);
  EXPECT_DOUBLE_EQ(lambda_at(s, 50)[0], 1.55);
}

TEST(LambdaSchedule, NoAnnealingAtOrBelowHalf) {
  const LambdaSchedule s{{0.5, 0.1}, 40};
  for (int e = 0; e <= 40; ++e) {
    EXPECT_EQ(lambda_at(s, e)[0], 0.5);
    EXPECT_EQ(lambda_at(s, e)[1], 0.1);
  }
}

TEST(LambdaSchedule, FloorAppliesToSmallAnnealedValues) {
  const LambdaSchedule s{{0.6}, 10};
  EXPECT_TRUE(s.annealed(0));
  EXPECT_EQ(lambda_at(s, 10)[0], kLambdaFloor);
  EXPECT_EQ(s.final_value(0), kLambdaFloor);
  for (int e = 0; e <= 10; ++e) EXPECT_GE(lambda_at(s, e)[0], kLambdaFloor);
}

TEST(LambdaSchedule, MonotoneAndPiecewiseLinear) {
  RngStream rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const double start = 0.5 + 1e-9 + 4.0 * rng.uniform();
    const int total = 1 + static_cast<int>(rng.uniform_index(200));
    const LambdaSchedule s{{start}, total};
    double prev = lambda_at(s, 0)[0];
    for (int e = 1; e <= total; ++e) {
      const double cur = lambda_at(s, e)[0];
      EXPECT_LE(cur, prev);
      const double linear = start - kAnnealDrop * e / total;
      EXPECT_NEAR(cur, std::max(linear, kLambdaFloor), 1e-12);
      prev = cur;
    }
  }
}

TEST(LambdaSchedule, EpochOutOfRange) {
  const LambdaSchedule s{{2.0}, 10};
  EXPECT_THROW(lambda_at(s, -1), std::out_of_range);
  EXPECT_THROW(lambda_at(s, 11), std::out_of_range);
}

TEST(LambdaSchedule, BuiltFromConfig) {
  const auto s = schedule_from_config(toy_config(), 30);
  EXPECT_EQ(s.initial, (std::vector<double>{1.0, 2.0, 1.5}));
  EXPECT_EQ(s.epochs_total, 30);
}

namespace {

Parameters<double> scalar_params(double v) {
  Parameters<double> p;
  p.layers.push_back({Tensor64::vector({v}), Tensor64::vector({0.0})});
  return p;
}

}  // namespace

TEST(SgdStep, UnitRateNoMomentumSubtractsGradient) {
  auto p = scalar_params(3.0), g = scalar_params(0.75), v = scalar_params(0.0);
  sgd_step(p, g, v, 1.0, 0.0);
  EXPECT_EQ(p.layers[0].weight[0], 2.25);
}

TEST(SgdStep, ZeroGradientLeavesParamsUnchanged) {
  RngStream rng(4);
  auto p = init_parameters<double>(toy_config(), rng);
  const auto before = p;
  auto v = p.zeros_like();
  sgd_step(p, p.zeros_like(), v, 0.3, 0.9);
  EXPECT_EQ(p, before);
}

TEST(SgdStep, TwoStepsMatchScalarRecurrence) {
  const double lr = 0.1, mu = 0.9, g1 = 0.5, g2 = -0.25;
  auto p = scalar_params(1.0), v = scalar_params(0.0);
  sgd_step(p, scalar_params(g1), v, lr, mu);
  sgd_step(p, scalar_params(g2), v, lr, mu);
  double pv = 1.0, vv = 0.0;
  for (double g : {g1, g2}) {
    vv = mu * vv - lr * g;
    pv = pv + vv;
  }
  EXPECT_EQ(p.layers[0].weight[0], pv);
  EXPECT_EQ(v.layers[0].weight[0], vv);
}

TEST(SgdStep, NoMomentumChangeIsExactlyMinusLrGrad) {
  RngStream rng(6);
  auto p = init_parameters<double>(toy_config(), rng);
  const auto before = p;
  auto g = p.zeros_like();
  for (std::size_t i = 0; i < g.parameter_count(); ++i) g.at(i) = rng.normal();
  auto v = p.zeros_like();
  const double lr = 0.037;
  sgd_step(p, g, v, lr, 0.0);
  for (std::size_t i = 0; i < p.parameter_count(); ++i) EXPECT_EQ(p.at(i), before.at(i) - lr * g.at(i));
}

TEST(SgdStep, ShapeMismatch) {
  auto p = scalar_params(1.0), v = scalar_params(0.0);
  Parameters<double> g;
  EXPECT_THROW(sgd_step(p, g, v, 0.1, 0.0), DimensionError);
}

TEST(Train, SeparableBlobsReachFivePercent) {
  const auto t = blob_task();
  const auto r = train(t.config, init(t.config), t.train, t.valid, blob_sgd(30), schedule_from_config(t.config, 30));
  EXPECT_LE(r.best_valid_error, 5.0);
  EXPECT_LE(r.best_epoch, 30);
  EXPECT_GE(r.best_epoch, 1);
}

TEST(Train, TrainLossDecreases) {
  const auto t = blob_task();
  const auto r = train(t.config, init(t.config), t.train, t.valid, blob_sgd(20), schedule_from_config(t.config, 20));
  ASSERT_EQ(r.history.size(), 20u);
  double first = 0, last = 0;
  for (int i = 0; i < 5; ++i) {
    first += r.history[i].train_loss;
    last += r.history[15 + i].train_loss;
  }
  EXPECT_LT(last, first);
}

TEST(Train, SameSeedSameHistory) {
  const auto t = blob_task();
  const auto run = [&] {
    return train(t.config, init(t.config), t.train, t.valid, blob_sgd(4), schedule_from_config(t.config, 4));
  };
  const auto a = run(), b = run();
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  EXPECT_EQ(a.params, b.params);
}

TEST(Train, ThreadCountDoesNotChangeResult) {
  const auto t = blob_task();
  auto sgd = blob_sgd(2);
  const auto a = train(t.config, init(t.config), t.train, t.valid, sgd, schedule_from_config(t.config, 2));
  sgd.threads = 3;
  const auto b = train(t.config, init(t.config), t.train, t.valid, sgd, schedule_from_config(t.config, 2));
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
}

TEST(Train, PatienceZeroStopsAtFirstNonImprovingEpoch) {
  const auto t = blob_task();
  auto sgd = blob_sgd(40);
  sgd.patience = 0;
  const auto r = train(t.config, init(t.config), t.train, t.valid, sgd, schedule_from_config(t.config, 40));
  ASSERT_FALSE(r.history.empty());
  double best = 101.0;
  for (std::size_t i = 0; i + 1 < r.history.size(); ++i) {
    EXPECT_LT(*r.history[i].valid_error, best) << "epoch " << i + 1 << " did not improve but training continued";
    best = *r.history[i].valid_error;
  }
  if (r.history.size() < 40) {
    EXPECT_GE(*r.history.back().valid_error, best);
  }
}

TEST(Train, ReturnsBestEpochParameters) {
  const auto t = blob_task();
  const auto r = train(t.config, init(t.config), t.train, t.valid, blob_sgd(6), schedule_from_config(t.config, 6));
  const auto& best = r.history.at(static_cast<std::size_t>(r.best_epoch - 1));
  EXPECT_EQ(*best.valid_error, r.best_valid_error);
  EXPECT_EQ(layer_lambdas(r.config), best.lambdas);
}

TEST(Train, LambdasFollowTheSchedule) {
  const auto t = blob_task();
  ModelConfig config = t.config;
  config.layers[0].lambda = 2.0;
  const auto schedule = schedule_from_config(config, 5);
  const auto r = train(config, init(config), t.train, t.valid, blob_sgd(5), schedule);
  for (const auto& row : r.history) EXPECT_EQ(row.lambdas, lambda_at(schedule, row.epoch - 1));
}

TEST(Train, EmptyDatasetsRejected) {
  const auto t = blob_task();
  const Dataset empty = slice(t.train, 0, 0);
  const auto s = schedule_from_config(t.config, 1);
  EXPECT_THROW(train(t.config, init(t.config), empty, t.valid, blob_sgd(1), s), DatasetError);
  EXPECT_THROW(train(t.config, init(t.config), t.train, empty, blob_sgd(1), s), DatasetError);
  EXPECT_THROW(retrain_full(t.config, init(t.config), empty, 1, blob_sgd(1), s), DatasetError);
}

TEST(Train, DivergenceReportsEpoch) {
  const auto t = blob_task();
  auto sgd = blob_sgd(3);
  sgd.learning_rate = 1e30;
  try {
    train(t.config, init(t.config), t.train, t.valid, sgd, schedule_from_config(t.config, 3));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.epoch(), 1);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Train, InvalidSgdConfig) {
  SgdConfig sgd;
  sgd.batch_size = 0;
  EXPECT_THROW(sgd.validate(), std::invalid_argument);
  sgd = {};
  sgd.learning_rate = 0;
  EXPECT_THROW(sgd.validate(), std::invalid_argument);
  sgd = {};
  sgd.momentum = 1.0;
  EXPECT_THROW(sgd.validate(), std::invalid_argument);
}

TEST(RetrainFull, ZeroEpochsReturnsInitialParameters) {
  const auto t = blob_task();
  const auto p0 = init(t.config);
  const auto r = retrain_full(t.config, p0, t.train, 0, blob_sgd(1), schedule_from_config(t.config, 1));
  EXPECT_EQ(r.params, p0);
  EXPECT_TRUE(r.history.empty());
}

TEST(RetrainFull, RunsExactlyTheRequestedEpochs) {
  const auto t = blob_task();
  const Dataset full = concatenate(t.train, t.valid);
  auto sgd = blob_sgd(1);
  sgd.patience = 0;
  const auto r = retrain_full(t.config, init(t.config), full, 7, sgd, schedule_from_config(t.config, 7));
  ASSERT_EQ(r.history.size(), 7u);
  EXPECT_EQ(r.best_epoch, 7);
  for (const auto& row : r.history) EXPECT_FALSE(row.valid_error.has_value());
}

TEST(RetrainFull, Deterministic) {
  const auto t = blob_task();
  const auto run = [&] {
    return retrain_full(t.config, init(t.config), t.train, 3, blob_sgd(1), schedule_from_config(t.config, 3));
  };
  EXPECT_EQ(run().params, run().params);
}

TEST(History, CsvLayout) {
  std::vector<HistoryRow> rows{{1, {2.0, 0.5}, 0.25, 12.5}, {2, {1.1, 0.5}, 0.125, std::nullopt}};
  EXPECT_EQ(history_csv(rows),
            "epoch,lambda1,lambda2,train_loss,valid_error\n"
            "1,2.000000,0.500000,0.250000,12.5000\n"
            "2,1.100000,0.500000,0.125000,\n");
}
