#pragma once

// Preference-optimization training of a toy policy against a frozen reference.
//
// Each step draws a batch from a per-epoch seeded shuffle, computes the
// length-normalized margins of every pair from sequence log-probabilities,
// evaluates the configured loss, averages per-example parameter gradients in
// batch order and applies a plain gradient-descent update.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lpo/losses.hpp"
#include "lpo/pairs.hpp"
#include "lpo/parallel.hpp"
#include "lpo/policy.hpp"
#include "lpo/trace.hpp"

namespace lpo {

struct TrainConfig {
  LossKind loss_kind = LossKind::lpo;
  LossParams params;
  double lr = 1e-2;
  std::size_t batch_size = 8;
  std::size_t epochs = 3;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;  // steps between trajectory samples
  double momentum = 0.0;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 0 is the untrained policy
  double mean_x1 = 0.0;
  double mean_x2 = 0.0;
  double mean_loss = 0.0;
  double pref_accuracy = 0.0;
  double chosen_logprob_delta = 0.0;  // length-normalized, relative to epoch 0
};

/// Reference log-probabilities of one pair, computed once.
struct ReferenceScores {
  double chosen = 0.0;
  double rejected = 0.0;
};

std::vector<ReferenceScores> reference_scores(const Policy& ref,
                                              std::span<const PreferencePair> pairs,
                                              Execution exec = Execution::parallel);

struct PairEvaluation {
  MarginPair margins;
  double loss = 0.0;
  double chosen_normalized_logprob = 0.0;  // log pi(chosen) / len
};

std::vector<PairEvaluation> evaluate_pairs(const Policy& policy,
                                           std::span<const ReferenceScores> refs,
                                           std::span<const PreferencePair> pairs,
                                           LossKind kind, const LossParams& params,
                                           Execution exec = Execution::parallel);

struct BatchGradient {
  std::vector<double> grad;  // dense, mean over the batch
  double mean_loss = 0.0;
  double mean_x1 = 0.0;
  double mean_x2 = 0.0;
};

/// Mean loss gradient over pairs[indices[k]]. The policy must have been
/// prepared for every pair. Per-example graphs are independent; the reduction
/// runs in batch order, so serial and parallel results are bit-identical.
BatchGradient batch_gradient(const Policy& policy, std::span<const ReferenceScores> refs,
                             std::span<const PreferencePair> pairs,
                             std::span<const std::size_t> indices, LossKind kind,
                             const LossParams& params, Execution exec = Execution::parallel);

struct TrainResult {
  std::unique_ptr<Policy> policy;
  std::vector<EpochMetrics> metrics;  // epochs 0..E
  TrajectoryTrace trace;              // batch means of (x1, x2, loss) per sampled step
  std::string data_order_digest;      // SHA-256 of the visited example order
  std::size_t steps = 0;
};

/// Trains a copy of `init` against `ref`. Metrics are computed on
/// `eval_pairs` when given, otherwise on the training pairs.
/// Throws DivergenceError (with the step index) on a non-finite loss.
TrainResult train(const Policy& init, const Policy& ref, const std::vector<PreferencePair>& pairs,
                  const TrainConfig& config, const std::vector<PreferencePair>* eval_pairs = nullptr,
                  Execution exec = Execution::parallel);

struct SweepEntry {
  std::string setting;  // e.g. "epochs=3", "r2=0.5"
  double value = 0.0;
  std::vector<EpochMetrics> metrics;
  std::string data_order_digest;
};

std::vector<SweepEntry> epoch_sweep(const Policy& init, const Policy& ref,
                                    const std::vector<PreferencePair>& pairs,
                                    const TrainConfig& base, std::span<const std::size_t> epochs,
                                    const std::vector<PreferencePair>* eval_pairs = nullptr);

std::vector<SweepEntry> r2_train_sweep(const Policy& init, const Policy& ref,
                                       const std::vector<PreferencePair>& pairs,
                                       const TrainConfig& base, std::span<const double> r2_values,
                                       const std::vector<PreferencePair>* eval_pairs = nullptr);

/// `epoch,mean_x1,mean_x2,mean_loss,pref_accuracy,chosen_logprob_delta`
void write_metrics_csv(std::ostream& os, const std::vector<EpochMetrics>& metrics);
std::vector<EpochMetrics> read_metrics_csv(std::istream& is);

}  // namespace lpo
