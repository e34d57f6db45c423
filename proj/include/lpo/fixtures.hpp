#pragma once

// Seeded toy tasks shipped with the repository (see tools/make_fixtures).
//
//  * Coupled-margin task: per prompt, a chosen response that starts with a
//    low-probability shared prefix followed by tokens the reference policy
//    already prefers, and shorter rejected responses that share the prefix.
//    Held-out pairs reuse the prefix in their chosen responses.
//  * Addition task: prompt [a, +, b, =], chosen [(a + b) mod 10, EOS],
//    rejected a wrong digit.
//  * Sentence corpus: fixed-length random sentences for the perturbation
//    builder.

#include <cstdint>
#include <memory>
#include <vector>

#include "lpo/pairs.hpp"
#include "lpo/tabular_policy.hpp"
#include "lpo/trainer.hpp"

namespace lpo {

struct CoupledTaskConfig {
  std::uint64_t seed = 0;
  std::size_t vocab_size = 12;
  std::size_t prompts = 8;
  std::size_t train_pairs_per_prompt = 10;
  std::size_t eval_pairs_per_prompt = 6;
  std::size_t tail_length = 3;  // preferred tokens after the shared prefix
  double init_scale = 0.5;
  double peak = 3.0;  // reference logit bonus along the preferred tail
};

struct ToyTask {
  std::unique_ptr<TabularPolicy> reference;
  std::vector<PreferencePair> train;
  std::vector<PreferencePair> eval;
};

ToyTask make_coupled_task(const CoupledTaskConfig& config);

struct AdditionTaskConfig {
  std::uint64_t seed = 0;
  std::size_t pairs = 100;
  double init_scale = 0.5;
  double peak = 2.0;  // reference logit bonus for the correct digit
};

/// Vocabulary: digits 0-9, "+", "=", "</s>".
ToyTask make_addition_task(const AdditionTaskConfig& config);

/// `count` examples with single-token prompts and responses of exactly
/// `length` content tokens plus EOS, tokens drawn uniformly from the
/// non-EOS vocabulary.
std::vector<Example> make_sentence_corpus(const Vocab& vocab, std::size_t count,
                                          std::size_t length, std::uint64_t seed);

}  // namespace lpo
