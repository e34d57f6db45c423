#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "lpo/errors.hpp"
#include "lpo/fixtures.hpp"
#include "lpo/gradcheck.hpp"
#include "lpo/trainer.hpp"

using namespace lpo;

namespace {

struct CoupledRun {
  ToyTask task = make_coupled_task({});
  TrainConfig config;
  CoupledRun() {
    config.lr = 5.0;
    config.batch_size = 8;
    config.epochs = 2;
    config.seed = 3;
  }
};

void expect_same_metrics(const std::vector<EpochMetrics>& a, const std::vector<EpochMetrics>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].epoch, b[i].epoch);
    EXPECT_EQ(a[i].mean_x1, b[i].mean_x1);
    EXPECT_EQ(a[i].mean_x2, b[i].mean_x2);
    EXPECT_EQ(a[i].mean_loss, b[i].mean_loss);
    EXPECT_EQ(a[i].pref_accuracy, b[i].pref_accuracy);
    EXPECT_EQ(a[i].chosen_logprob_delta, b[i].chosen_logprob_delta);
  }
}

void expect_same_parameters(const Policy& a, const Policy& b) {
  ASSERT_EQ(a.parameters().size(), b.parameters().size());
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    ASSERT_EQ(a.parameters()[i], b.parameters()[i]) << i;
  }
}

}  // namespace

TEST(Trainer, ZeroLearningRateChangesNothing) {
  CoupledRun s;
  s.config.lr = 0.0;
  const TrainResult r = train(*s.task.reference, *s.task.reference, s.task.train, s.config);
  auto prepared = s.task.reference->clone();
  for (const PreferencePair& p : s.task.train) {
    prepared->prepare(p.prompt, p.chosen);
    prepared->prepare(p.prompt, p.rejected);
  }
  expect_same_parameters(*r.policy, *prepared);
  for (const EpochMetrics& m : r.metrics) {
    EXPECT_EQ(m.mean_x1, 0.0);
    EXPECT_EQ(m.mean_x2, 0.0);
    EXPECT_EQ(m.mean_loss, r.metrics[0].mean_loss);
    EXPECT_EQ(m.chosen_logprob_delta, 0.0);
  }
  EXPECT_EQ(r.steps, 2 * 10u);
}

TEST(Trainer, ReferenceStaysFrozen) {
  CoupledRun s;
  const auto ref_before = s.task.reference->clone();
  const TrainResult r = train(*s.task.reference, *s.task.reference, s.task.train, s.config);
  expect_same_parameters(*s.task.reference, *ref_before);
  bool moved = false;
  for (std::size_t i = 0; i < s.task.reference->parameters().size() && !moved; ++i) {
    moved = r.policy->parameters()[i] != s.task.reference->parameters()[i];
  }
  EXPECT_TRUE(moved);
  // Identical policy and reference give zero margins before training.
  EXPECT_EQ(r.metrics[0].mean_x1, 0.0);
  EXPECT_EQ(r.metrics[0].mean_x2, 0.0);
}

TEST(Trainer, MarginBookkeeping) {
  CoupledRun s;
  const TrainResult r = train(*s.task.reference, *s.task.reference, s.task.train, s.config);
  const auto refs = reference_scores(*s.task.reference, s.task.train);
  const auto evals = evaluate_pairs(*r.policy, refs, s.task.train, LossKind::lpo, s.config.params);
  double x1 = 0.0;
  double x2 = 0.0;
  for (std::size_t i = 0; i < s.task.train.size(); ++i) {
    const PreferencePair& p = s.task.train[i];
    const double w = sequence_logprob(*r.policy, p.prompt, p.chosen).logprob;
    const double l = sequence_logprob(*r.policy, p.prompt, p.rejected).logprob;
    const double rw = sequence_logprob(*s.task.reference, p.prompt, p.chosen).logprob;
    const double rl = sequence_logprob(*s.task.reference, p.prompt, p.rejected).logprob;
    const double mx1 = (w - rw) / static_cast<double>(p.chosen.size());
    const double mx2 = (l - rl) / static_cast<double>(p.rejected.size());
    EXPECT_NEAR(evals[i].margins.x1, mx1, 1e-10);
    EXPECT_NEAR(evals[i].margins.x2, mx2, 1e-10);
    x1 += mx1;
    x2 += mx2;
  }
  const double n = static_cast<double>(s.task.train.size());
  EXPECT_NEAR(r.metrics.back().mean_x1, x1 / n, 1e-10);
  EXPECT_NEAR(r.metrics.back().mean_x2, x2 / n, 1e-10);
}

TEST(Trainer, Deterministic) {
  CoupledRun s;
  const TrainResult a = train(*s.task.reference, *s.task.reference, s.task.train, s.config);
  const TrainResult b = train(*s.task.reference, *s.task.reference, s.task.train, s.config);
  expect_same_metrics(a.metrics, b.metrics);
  expect_same_parameters(*a.policy, *b.policy);
  EXPECT_EQ(a.data_order_digest, b.data_order_digest);
  EXPECT_EQ(a.data_order_digest.size(), 64u);
}

TEST(Trainer, SerialAndParallelAgreeBitForBit) {
  CoupledRun s;
  s.config.loss_kind = LossKind::lpo_ste;
  s.config.params.r2 = 0.5;
  s.config.momentum = 0.5;
  const TrainResult a = train(*s.task.reference, *s.task.reference, s.task.train, s.config,
                              &s.task.eval, Execution::serial);
  const TrainResult b = train(*s.task.reference, *s.task.reference, s.task.train, s.config,
                              &s.task.eval, Execution::parallel);
  expect_same_metrics(a.metrics, b.metrics);
  expect_same_parameters(*a.policy, *b.policy);
}

TEST(Trainer, DataOrderIgnoresLossKind) {
  CoupledRun s;
  std::string digest;
  for (LossKind k : {LossKind::dpo, LossKind::lpo, LossKind::lpo_ste}) {
    s.config.loss_kind = k;
    const TrainResult r = train(*s.task.reference, *s.task.reference, s.task.train, s.config);
    if (digest.empty()) digest = r.data_order_digest;
    EXPECT_EQ(r.data_order_digest, digest) << to_string(k);
  }
  s.config.seed = 4;
  EXPECT_NE(train(*s.task.reference, *s.task.reference, s.task.train, s.config).data_order_digest,
            digest);
}

TEST(Trainer, PartialLastBatchAndTrace) {
  CoupledRun s;
  s.config.batch_size = 7;  // 80 pairs: 11 full batches and one of 3
  s.config.epochs = 1;
  s.config.eval_every = 5;
  const TrainResult r = train(*s.task.reference, *s.task.reference, s.task.train, s.config);
  EXPECT_EQ(r.steps, 12u);
  ASSERT_EQ(r.trace.points.size(), 3u);
  EXPECT_EQ(r.trace.points[1].step, 5u);
}

TEST(Trainer, BatchGradientMatchesFiniteDifferences) {
  CoupledRun s;
  auto policy = s.task.reference->clone();
  for (const PreferencePair& p : s.task.train) {
    policy->prepare(p.prompt, p.chosen);
    policy->prepare(p.prompt, p.rejected);
  }
  CounterRng jitter(2);
  for (double& v : policy->parameters()) v += 0.2 * jitter.normal();
  const auto refs = reference_scores(*s.task.reference, s.task.train);
  const std::vector<std::size_t> batch{0, 5, 13, 21};
  LossParams p;
  p.beta = 0.1;
  const BatchGradient bg = batch_gradient(*policy, refs, s.task.train, batch, LossKind::dpo, p);
  CounterRng pick(6);
  for (int k = 0; k < 10; ++k) {
    const std::size_t i = pick.below(policy->parameters().size());
    auto probe = policy->clone();
    const std::vector<double> at{probe->parameters()[i]};
    const auto fd = finite_difference(
        [&](std::span<const double> v) {
          probe->parameters()[i] = v[0];
          const auto evals = evaluate_pairs(*probe, refs, s.task.train, LossKind::dpo, p);
          double total = 0.0;
          for (std::size_t b : batch) total += evals[b].loss;
          return total / static_cast<double>(batch.size());
        },
        at, 1e-5);
    if (bg.grad[i] == 0.0 && fd[0] == 0.0) continue;
    EXPECT_LE(make_report(bg.grad[i], fd[0]).rel_err, 1e-5) << i;
  }
}

TEST(Trainer, SingleEpochSweepEqualsTrain) {
  CoupledRun s;
  s.config.epochs = 1;
  const std::vector<std::size_t> epochs{1};
  const auto sweep = epoch_sweep(*s.task.reference, *s.task.reference, s.task.train, s.config,
                                 epochs);
  const TrainResult r = train(*s.task.reference, *s.task.reference, s.task.train, s.config);
  ASSERT_EQ(sweep.size(), 1u);
  expect_same_metrics(sweep[0].metrics, r.metrics);
  EXPECT_EQ(sweep[0].data_order_digest, r.data_order_digest);
}

TEST(Trainer, R2SweepSharesDataOrder) {
  CoupledRun s;
  s.config.loss_kind = LossKind::lpo_ste;
  s.config.epochs = 1;
  const std::vector<double> r2{0.2, 1.0};
  const auto sweep = r2_train_sweep(*s.task.reference, *s.task.reference, s.task.train, s.config, r2);
  ASSERT_EQ(sweep.size(), 2u);
  EXPECT_EQ(sweep[0].data_order_digest, sweep[1].data_order_digest);
  EXPECT_EQ(sweep[1].value, 1.0);
  EXPECT_LT(sweep[1].metrics.back().mean_x2, sweep[0].metrics.back().mean_x2);
}

TEST(Trainer, ConfigValidation) {
  CoupledRun s;
  TrainConfig c = s.config;
  c.batch_size = 0;
  EXPECT_THROW(train(*s.task.reference, *s.task.reference, s.task.train, c), ConfigError);
  c = s.config;
  c.lr = -1.0;
  EXPECT_THROW(train(*s.task.reference, *s.task.reference, s.task.train, c), ConfigError);
  c = s.config;
  c.momentum = 1.0;
  EXPECT_THROW(train(*s.task.reference, *s.task.reference, s.task.train, c), ConfigError);
  const std::vector<PreferencePair> none;
  EXPECT_THROW(train(*s.task.reference, *s.task.reference, none, s.config), ConfigError);
  const TabularPolicy other(Vocab::numbered(5));
  EXPECT_THROW(train(other, *s.task.reference, s.task.train, s.config), VocabError);
}

TEST(Trainer, NonFiniteLossIsDivergence) {
  CoupledRun s;
  auto broken = s.task.reference->clone();
  const PreferencePair& first = s.task.train.front();
  broken->prepare(first.prompt, first.chosen);
  // Logits of opposite sign near the double limit: log-probs overflow to -inf.
  double sign = 1.0;
  for (double& v : broken->parameters()) {
    v = sign * std::numeric_limits<double>::max();
    sign = -sign;
  }
  try {
    train(*broken, *s.task.reference, s.task.train, s.config);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.last_valid_step(), 0u);
  }
}

TEST(Trainer, MetricsCsvRoundTrip) {
  CoupledRun s;
  const TrainResult r = train(*s.task.reference, *s.task.reference, s.task.train, s.config);
  std::stringstream ss;
  write_metrics_csv(ss, r.metrics);
  EXPECT_EQ(ss.str().rfind("epoch,mean_x1,mean_x2,mean_loss,pref_accuracy,chosen_logprob_delta", 0),
            0u);
  expect_same_metrics(read_metrics_csv(ss), r.metrics);
  std::istringstream bad("a,b\r\n1,2\r\n");
  EXPECT_THROW(read_metrics_csv(bad), std::runtime_error);
}
