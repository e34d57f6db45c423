#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "lpo/policy.hpp"

namespace lpo {

struct TabularConfig {
  std::size_t order = 2;
  std::uint64_t init_seed = 0;
  double init_scale = 0.0;  // 0 gives the uniform policy
};

/// One logit vector per context. A context is the first token of the history
/// (the prompt identifier) together with the last `order` history tokens,
/// padded with -1 on the left. Because it depends only on the history, scoring
/// prompt + (a then b) equals scoring prompt + a, then prompt + a + b.
///
/// Contexts without stored parameters read deterministic default logits,
/// init_scale * N(0, 1) drawn from a stream keyed on (init_seed, context), so
/// the full table is defined before anything is materialized.
class TabularPolicy final : public Policy {
 public:
  using ContextKey = std::vector<TokenId>;

  TabularPolicy(Vocab vocab, TabularConfig config = {});

  std::string_view kind() const override { return "tabular"; }
  std::unique_ptr<Policy> clone() const override;

  void logits(std::span<const TokenId> history, std::span<double> out) const override;
  void logits(std::span<const TokenId> history, ParamBinding& params,
              std::span<ad::Var> out) const override;

  std::span<const double> parameters() const override { return params_; }
  std::span<double> parameters() override { return params_; }

  void prepare(std::span<const TokenId> prompt, std::span<const TokenId> response) override;
  void save(std::ostream& os) const override;
  static std::unique_ptr<TabularPolicy> load_body(std::istream& is, Vocab vocab);

  ContextKey context(std::span<const TokenId> history) const;
  /// Stores logits for a context, materializing it if needed.
  void set_logits(const ContextKey& key, std::span<const double> values);
  /// Materializes a context with its default logits; returns its offset.
  std::size_t materialize(const ContextKey& key);
  bool has_context(const ContextKey& key) const { return offsets_.contains(key); }
  std::size_t context_count() const { return offsets_.size(); }
  const TabularConfig& config() const { return config_; }

  void default_logits(const ContextKey& key, std::span<double> out) const;

 private:
  TabularConfig config_;
  std::map<ContextKey, std::size_t> offsets_;
  std::vector<double> params_;
};

}  // namespace lpo
