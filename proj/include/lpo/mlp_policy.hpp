#pragma once

#include <cstdint>
#include <vector>

#include "lpo/policy.hpp"

namespace lpo {

struct MlpConfig {
  std::size_t order = 2;   // tokens of context fed to the network
  std::size_t embed = 4;   // embedding width
  std::size_t hidden = 8;  // hidden units
  std::uint64_t init_seed = 0;
  double init_scale = 0.5;  // 0 gives the uniform policy
};

/// Single-hidden-layer neural language model:
///   e = [E[t_{-order}], ..., E[t_{-1}]]   (missing positions are zero)
///   h = sigmoid(W e + b)
///   logits = U h + c
class MlpPolicy final : public Policy {
 public:
  MlpPolicy(Vocab vocab, MlpConfig config = {});

  std::string_view kind() const override { return "mlp"; }
  std::unique_ptr<Policy> clone() const override;

  void logits(std::span<const TokenId> history, std::span<double> out) const override;
  void logits(std::span<const TokenId> history, ParamBinding& params,
              std::span<ad::Var> out) const override;

  std::span<const double> parameters() const override { return params_; }
  std::span<double> parameters() override { return params_; }

  void save(std::ostream& os) const override;
  static std::unique_ptr<MlpPolicy> load_body(std::istream& is, Vocab vocab);

  const MlpConfig& config() const { return config_; }

 private:
  std::size_t embedding_offset(TokenId t) const { return static_cast<std::size_t>(t) * config_.embed; }
  std::size_t w_offset() const;
  std::size_t b_offset() const;
  std::size_t u_offset() const;
  std::size_t c_offset() const;
  std::size_t input_width() const { return config_.order * config_.embed; }

  MlpConfig config_;
  std::vector<double> params_;
};

}  // namespace lpo
