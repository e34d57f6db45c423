#include "lpo/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lpo/errors.hpp"
#include "lpo/rng.hpp"

namespace lpo {

void SamplingParams::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (!(top_p > 0.0) || top_p > 1.0) throw ConfigError("top_p must be in (0, 1]");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
}

std::vector<double> next_token_distribution(std::span<const double> logits, double temperature,
                                            double top_p) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - m) / temperature);
    total += p[i];
  }
  for (double& v : p) v /= total;
  if (top_p >= 1.0) return p;

  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&p](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  std::vector<double> kept(p.size(), 0.0);
  double mass = 0.0;
  for (std::size_t idx : order) {
    kept[idx] = p[idx];
    mass += p[idx];
    if (mass >= top_p) break;
  }
  for (double& v : kept) v /= mass;
  return kept;
}

SampleResult sample(const Policy& policy, std::span<const TokenId> prompt,
                    const SamplingParams& params, std::uint64_t seed) {
  params.validate();
  if (prompt.empty()) throw DomainError("prompt must be non-empty");
  policy.vocab().check(prompt);
  CounterRng rng(seed);
  Tokens history(prompt.begin(), prompt.end());
  std::vector<double> z(policy.vocab().size());
  SampleResult out;
  while (out.tokens.size() < params.max_len) {
    policy.logits(history, z);
    const std::vector<double> p = next_token_distribution(z, params.temperature, params.top_p);
    const double u = rng.uniform();
    double acc = 0.0;
    TokenId chosen = -1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] <= 0.0) continue;
      chosen = static_cast<TokenId>(i);
      acc += p[i];
      if (u < acc) break;
    }
    out.tokens.push_back(chosen);
    history.push_back(chosen);
    if (chosen == policy.vocab().eos()) return out;
  }
  out.truncated = true;
  return out;
}

}  // namespace lpo
