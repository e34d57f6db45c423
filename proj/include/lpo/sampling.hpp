#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lpo/policy.hpp"

namespace lpo {

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 1.0;
  std::size_t max_len = 32;

  /// Throws ConfigError unless temperature > 0, top_p in (0, 1], max_len >= 1.
  void validate() const;
};

struct SampleResult {
  Tokens tokens;
  bool truncated = false;  // max_len reached without EOS
};

/// Next-token distribution after temperature scaling and nucleus truncation.
/// Truncation keeps the smallest set of most-probable tokens (ties broken by
/// lower id) whose mass reaches top_p, then renormalizes; top_p = 1 keeps the
/// full distribution.
std::vector<double> next_token_distribution(std::span<const double> logits, double temperature,
                                            double top_p);

/// Ancestral sampling, one uniform draw per token from CounterRng(seed).
SampleResult sample(const Policy& policy, std::span<const TokenId> prompt,
                    const SamplingParams& params, std::uint64_t seed);

}  // namespace lpo
