#include "lpo/trainer.hpp"

#include <cmath>
#include <iterator>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lpo/csv.hpp"
#include "lpo/digest.hpp"
#include "lpo/errors.hpp"
#include "lpo/rng.hpp"

namespace lpo {

void TrainConfig::validate() const {
  params.validate();
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (!(momentum >= 0.0) || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
}

std::vector<ReferenceScores> reference_scores(const Policy& ref,
                                              std::span<const PreferencePair> pairs,
                                              Execution exec) {
  std::vector<ReferenceScores> out(pairs.size());
  for_each_index(pairs.size(), exec, [&](std::size_t i) {
    out[i] = {sequence_logprob(ref, pairs[i].prompt, pairs[i].chosen).logprob,
              sequence_logprob(ref, pairs[i].prompt, pairs[i].rejected).logprob};
  });
  return out;
}

std::vector<PairEvaluation> evaluate_pairs(const Policy& policy,
                                           std::span<const ReferenceScores> refs,
                                           std::span<const PreferencePair> pairs, LossKind kind,
                                           const LossParams& params, Execution exec) {
  std::vector<PairEvaluation> out(pairs.size());
  for_each_index(pairs.size(), exec, [&](std::size_t i) {
    const SequenceLogprob w = sequence_logprob(policy, pairs[i].prompt, pairs[i].chosen);
    const SequenceLogprob l = sequence_logprob(policy, pairs[i].prompt, pairs[i].rejected);
    const MarginPair m =
        length_normalized_margins(w.logprob, refs[i].chosen, w.length, l.logprob, refs[i].rejected, l.length);
    out[i] = {m, evaluate_loss(kind, m, params).total,
              w.logprob / static_cast<double>(w.length)};
  });
  return out;
}

namespace {

struct ExampleGradient {
  std::vector<std::pair<std::size_t, double>> grad;
  double loss = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;
};

ExampleGradient example_gradient(const Policy& policy, const ReferenceScores& ref,
                                 const PreferencePair& pair, LossKind kind,
                                 const LossParams& params) {
  ad::Graph g;
  ParamBinding binding(g, policy.parameters());
  const SequenceLogprobNode w = sequence_logprob(policy, binding, pair.prompt, pair.chosen);
  const SequenceLogprobNode l = sequence_logprob(policy, binding, pair.prompt, pair.rejected);
  const ad::Var x1 = (w.logprob - ref.chosen) / static_cast<double>(w.length);
  const ad::Var x2 = (l.logprob - ref.rejected) / static_cast<double>(l.length);
  const ad::Var loss = build_loss(kind, x1, x2, params);
  g.backward(loss);
  return {binding.gradients(), loss.value(), x1.value(), x2.value()};
}

}  // namespace

BatchGradient batch_gradient(const Policy& policy, std::span<const ReferenceScores> refs,
                             std::span<const PreferencePair> pairs,
                             std::span<const std::size_t> indices, LossKind kind,
                             const LossParams& params, Execution exec) {
  std::vector<ExampleGradient> per_example(indices.size());
  for_each_index(indices.size(), exec, [&](std::size_t k) {
    const std::size_t i = indices[k];
    per_example[k] = example_gradient(policy, refs[i], pairs[i], kind, params);
  });

  BatchGradient out;
  out.grad.assign(policy.parameters().size(), 0.0);
  for (const ExampleGradient& e : per_example) {
    for (const auto& [idx, g] : e.grad) out.grad[idx] += g;
    out.mean_loss += e.loss;
    out.mean_x1 += e.x1;
    out.mean_x2 += e.x2;
  }
  const auto n = static_cast<double>(indices.size());
  if (!indices.empty()) {
    for (double& g : out.grad) g /= n;
    out.mean_loss /= n;
    out.mean_x1 /= n;
    out.mean_x2 /= n;
  }
  return out;
}

namespace {

EpochMetrics summarize(std::size_t epoch, const std::vector<PairEvaluation>& evals,
                       double baseline_chosen) {
  EpochMetrics m;
  m.epoch = epoch;
  if (evals.empty()) return m;
  double chosen = 0.0;
  std::size_t correct = 0;
  for (const PairEvaluation& e : evals) {
    m.mean_x1 += e.margins.x1;
    m.mean_x2 += e.margins.x2;
    m.mean_loss += e.loss;
    chosen += e.chosen_normalized_logprob;
    if (e.margins.x1 > e.margins.x2) ++correct;
  }
  const auto n = static_cast<double>(evals.size());
  m.mean_x1 /= n;
  m.mean_x2 /= n;
  m.mean_loss /= n;
  m.pref_accuracy = static_cast<double>(correct) / n;
  m.chosen_logprob_delta = chosen / n - baseline_chosen;
  return m;
}

double mean_chosen(const std::vector<PairEvaluation>& evals) {
  double s = 0.0;
  for (const PairEvaluation& e : evals) s += e.chosen_normalized_logprob;
  return evals.empty() ? 0.0 : s / static_cast<double>(evals.size());
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  CounterRng rng(derive_seed(seed, "shuffle", epoch));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace

TrainResult train(const Policy& init, const Policy& ref, const std::vector<PreferencePair>& pairs,
                  const TrainConfig& config, const std::vector<PreferencePair>* eval_pairs,
                  Execution exec) {
  config.validate();
  if (pairs.empty()) throw ConfigError("training needs at least one pair");
  if (!(init.vocab() == ref.vocab())) throw VocabError("policy and reference vocabularies differ");
  const std::vector<PreferencePair>& eval = eval_pairs != nullptr ? *eval_pairs : pairs;
  if (eval.empty()) throw ConfigError("evaluation set is empty");
  for (const PreferencePair& p : pairs) validate_pair(p, init.vocab());
  for (const PreferencePair& p : eval) validate_pair(p, init.vocab());

  TrainResult result;
  result.policy = init.clone();
  Policy& policy = *result.policy;
  for (const std::vector<PreferencePair>* set : {&pairs, &eval}) {
    for (const PreferencePair& p : *set) {
      policy.prepare(p.prompt, p.chosen);
      policy.prepare(p.prompt, p.rejected);
    }
  }

  const std::vector<ReferenceScores> train_refs = reference_scores(ref, pairs, exec);
  const std::vector<ReferenceScores> eval_refs = reference_scores(ref, eval, exec);

  const std::vector<PairEvaluation> initial =
      evaluate_pairs(policy, eval_refs, eval, config.loss_kind, config.params, exec);
  const double baseline_chosen = mean_chosen(initial);
  result.metrics.push_back(summarize(0, initial, baseline_chosen));

  Sha256 order_digest;
  std::vector<double> velocity(policy.parameters().size(), 0.0);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_order(pairs.size(), config.seed, epoch);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      for (std::size_t i : batch) order_digest.update_u64(i);

      const BatchGradient bg =
          batch_gradient(policy, train_refs, pairs, batch, config.loss_kind, config.params, exec);
      if (!std::isfinite(bg.mean_loss)) {
        throw DivergenceError("non-finite loss at step " + std::to_string(step),
                              step == 0 ? 0 : step - 1);
      }
      if (step % config.eval_every == 0) {
        result.trace.points.push_back({step, bg.mean_x1, bg.mean_x2, bg.mean_loss});
      }

      std::span<double> theta = policy.parameters();
      for (std::size_t k = 0; k < theta.size(); ++k) {
        double g = bg.grad[k];
        if (config.momentum > 0.0) {
          velocity[k] = config.momentum * velocity[k] + g;
          g = velocity[k];
        }
        theta[k] -= config.lr * g;
      }
      ++step;
    }
    const std::vector<PairEvaluation> evals =
        evaluate_pairs(policy, eval_refs, eval, config.loss_kind, config.params, exec);
    result.metrics.push_back(summarize(epoch, evals, baseline_chosen));
  }
  result.steps = step;
  result.trace.fit_terminal_slopes();
  result.data_order_digest = order_digest.hex_digest();
  return result;
}

std::vector<SweepEntry> epoch_sweep(const Policy& init, const Policy& ref,
                                    const std::vector<PreferencePair>& pairs,
                                    const TrainConfig& base, std::span<const std::size_t> epochs,
                                    const std::vector<PreferencePair>* eval_pairs) {
  std::vector<SweepEntry> out;
  for (std::size_t e : epochs) {
    TrainConfig c = base;
    c.epochs = e;
    TrainResult r = train(init, ref, pairs, c, eval_pairs);
    out.push_back({"epochs=" + std::to_string(e), static_cast<double>(e), std::move(r.metrics),
                   r.data_order_digest});
  }
  return out;
}

std::vector<SweepEntry> r2_train_sweep(const Policy& init, const Policy& ref,
                                       const std::vector<PreferencePair>& pairs,
                                       const TrainConfig& base, std::span<const double> r2_values,
                                       const std::vector<PreferencePair>* eval_pairs) {
  std::vector<SweepEntry> out;
  for (double r2 : r2_values) {
    TrainConfig c = base;
    c.params.r2 = r2;
    TrainResult r = train(init, ref, pairs, c, eval_pairs);
    out.push_back({"r2=" + format_double(r2), r2, std::move(r.metrics), r.data_order_digest});
  }
  return out;
}

void write_metrics_csv(std::ostream& os, const std::vector<EpochMetrics>& metrics) {
  write_csv_row(os, {"epoch", "mean_x1", "mean_x2", "mean_loss", "pref_accuracy",
                     "chosen_logprob_delta"});
  for (const EpochMetrics& m : metrics) {
    write_csv_row(os, {std::to_string(m.epoch), format_double(m.mean_x1), format_double(m.mean_x2),
                       format_double(m.mean_loss), format_double(m.pref_accuracy),
                       format_double(m.chosen_logprob_delta)});
  }
}

std::vector<EpochMetrics> read_metrics_csv(std::istream& is) {
  const std::string text(std::istreambuf_iterator<char>(is), {});
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0].size() != 6 || rows[0][0] != "epoch") {
    throw std::runtime_error("not a metrics CSV");
  }
  std::vector<EpochMetrics> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 6) throw std::runtime_error("metrics CSV row " + std::to_string(r) + " malformed");
    out.push_back({static_cast<std::size_t>(std::stoull(f[0])), std::stod(f[1]), std::stod(f[2]),
                   std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
  }
  return out;
}

}  // namespace lpo
