#pragma once

// Preference-pair construction.
//
//  * LPPC: chosen is the ground truth, rejected is one sample from the SFT
//    policy at temperature 1.0 / top-p 1.0. A sample equal to the ground
//    truth (or truncated) is redrawn, up to a fixed attempt budget.
//  * Triple candidates: three independent samples per prompt, each paired with
//    the ground truth; identical and duplicate pairs are dropped.
//  * Perturbation: the rejected response is the ground truth corrupted by
//    insertion / deletion / repetition edits. Each content position
//    independently triggers an edit with probability eta, so the expected edit
//    count is eta * length.
//
// Every builder derives one random stream per input index from the seed, so
// per-prompt work is independent and output order follows input order.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lpo/parallel.hpp"
#include "lpo/policy.hpp"
#include "lpo/rng.hpp"
#include "lpo/sampling.hpp"

namespace lpo {

struct Example {
  Tokens prompt;
  Tokens response;  // ground truth, ends with EOS
};

enum class PairSource { lppc, perturbation };

std::string_view to_string(PairSource s);

struct PreferencePair {
  Tokens prompt;
  Tokens chosen;
  Tokens rejected;
  PairSource source = PairSource::lppc;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

/// Throws std::invalid_argument if the prompt is empty, either response lacks
/// a final EOS, or chosen == rejected.
void validate_pair(const PreferencePair& pair, const Vocab& vocab);

struct BuildStats {
  std::size_t inputs = 0;
  std::size_t emitted = 0;
  std::size_t dropped_identical = 0;  // candidate equal to the chosen response
  std::size_t dropped_truncated = 0;  // sample hit max_len without EOS
  std::size_t dropped_duplicate = 0;  // same rejected response twice for a prompt
  double mean_edits = 0.0;            // perturbation only
  std::vector<std::string> warnings;
};

struct BuildResult {
  std::vector<PreferencePair> pairs;
  BuildStats stats;
};

struct LppcConfig {
  std::uint64_t seed = 0;
  SamplingParams sampling{1.0, 1.0, 32};
  std::size_t retry_budget = 8;
};

BuildResult build_lppc(const std::vector<Example>& dataset, const Policy& sft_policy,
                       const LppcConfig& config, Execution exec = Execution::parallel);

BuildResult triple_candidates(const std::vector<Example>& dataset, const Policy& sft_policy,
                              const LppcConfig& config, Execution exec = Execution::parallel);

enum class EditOp { insertion, deletion, repetition };

std::string_view to_string(EditOp op);

struct Edit {
  EditOp op = EditOp::insertion;
  std::size_t position = 0;
  TokenId token = 0;  // inserted token (insertion only)
};

/// Applies one edit to a sentence whose last token is EOS. Positions index
/// content tokens; insertion at position == content length goes right before
/// EOS. Repetition duplicates the token at `position` in place. EOS is never
/// removed. Throws std::out_of_range for invalid positions.
void apply_edit(Tokens& sentence, const Edit& edit);

struct PerturbationConfig {
  double eta = 0.1;
  std::array<double, 3> weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};  // insertion, deletion, repetition
  std::uint64_t seed = 0;

  /// Throws ConfigError unless eta in (0, 1] and weights are non-negative
  /// and sum to 1.
  void validate() const;
};

/// Draws the edit list for one sentence (content length `length`) from `rng`.
/// Deletion or repetition on an empty sentence falls back to insertion.
std::vector<Edit> draw_edits(CounterRng& rng, std::size_t length, const PerturbationConfig& config,
                             std::size_t vocab_size);

BuildResult build_perturbed(const std::vector<Example>& dataset, const Vocab& vocab,
                            const PerturbationConfig& config,
                            Execution exec = Execution::parallel);

// ---- JSON Lines -------------------------------------------------------------

nlohmann::ordered_json to_json(const PreferencePair& pair);
PreferencePair pair_from_json(const nlohmann::ordered_json& j);

/// One object per line: prompt, chosen, rejected, source, meta.
void write_pairs_jsonl(std::ostream& os, const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> read_pairs_jsonl(std::istream& is);

/// One object per line: prompt, response.
void write_examples_jsonl(std::ostream& os, const std::vector<Example>& examples);
std::vector<Example> read_examples_jsonl(std::istream& is);

}  // namespace lpo
