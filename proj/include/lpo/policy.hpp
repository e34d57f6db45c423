#pragma once

// Toy autoregressive policies over a small vocabulary.
//
// A policy maps a token history (prompt followed by the response prefix) to a
// vector of next-token logits, either numerically or as graph nodes whose
// parameters are leaves supplied by a ParamBinding. Both paths perform the
// same arithmetic in the same order, so graph forward values equal the
// numeric ones exactly.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lpo/autodiff.hpp"

namespace lpo {

using TokenId = std::int32_t;
using Tokens = std::vector<TokenId>;

/// Ordered symbol table. The last symbol is end-of-sequence.
class Vocab {
 public:
  /// Symbols must be unique, non-empty and whitespace-free; at least two.
  explicit Vocab(std::vector<std::string> symbols);

  /// "t0", "t1", ..., "</s>".
  static Vocab numbered(std::size_t size);

  std::size_t size() const { return symbols_.size(); }
  TokenId eos() const { return static_cast<TokenId>(symbols_.size() - 1); }
  const std::string& symbol(TokenId id) const { return symbols_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  std::optional<TokenId> find(std::string_view symbol) const;

  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < size(); }
  /// Throws VocabError naming the first out-of-range token.
  void check(std::span<const TokenId> tokens) const;

  bool operator==(const Vocab&) const = default;

 private:
  std::vector<std::string> symbols_;
};

/// Lazily creates one graph leaf per policy parameter actually used.
class ParamBinding {
 public:
  ParamBinding(ad::Graph& graph, std::span<const double> params);

  ad::Var operator()(std::size_t index);
  ad::Graph& graph() { return graph_; }
  std::size_t bound_count() const { return order_.size(); }

  /// (parameter index, gradient) for every bound parameter, by index.
  /// Call after backward.
  std::vector<std::pair<std::size_t, double>> gradients() const;

 private:
  ad::Graph& graph_;
  std::span<const double> params_;
  std::vector<std::int32_t> slot_;
  std::vector<std::size_t> order_;
  std::vector<ad::Var> vars_;
};

class Policy {
 public:
  virtual ~Policy() = default;

  const Vocab& vocab() const { return vocab_; }
  virtual std::string_view kind() const = 0;
  virtual std::unique_ptr<Policy> clone() const = 0;

  virtual void logits(std::span<const TokenId> history, std::span<double> out) const = 0;
  virtual void logits(std::span<const TokenId> history, ParamBinding& params,
                      std::span<ad::Var> out) const = 0;

  virtual std::span<const double> parameters() const = 0;
  virtual std::span<double> parameters() = 0;

  /// Gives every context reachable while scoring (prompt, response) its own
  /// parameters. Models with a fixed parameter set ignore this.
  virtual void prepare(std::span<const TokenId> prompt, std::span<const TokenId> response);

  /// Versioned text checkpoint; see docs in README.
  virtual void save(std::ostream& os) const = 0;

 protected:
  explicit Policy(Vocab vocab) : vocab_(std::move(vocab)) {}
  Policy(const Policy&) = default;
  Policy& operator=(const Policy&) = default;

  Vocab vocab_;
};

/// Reads a checkpoint written by Policy::save. Throws std::runtime_error on
/// malformed input.
std::unique_ptr<Policy> load_policy(std::istream& is);
std::unique_ptr<Policy> load_policy_file(const std::string& path);
void save_policy_file(const Policy& policy, const std::string& path);

struct SequenceLogprob {
  double logprob = 0.0;
  long length = 0;  // response tokens, EOS included, prompt excluded
};

/// Sum over response positions of log softmax(logits)[token], each position
/// conditioned on prompt + response prefix. Throws VocabError for unknown
/// tokens and DomainError for an empty prompt.
SequenceLogprob sequence_logprob(const Policy& policy, std::span<const TokenId> prompt,
                                 std::span<const TokenId> response);

struct SequenceLogprobNode {
  ad::Var logprob;
  long length = 0;
};

SequenceLogprobNode sequence_logprob(const Policy& policy, ParamBinding& params,
                                     std::span<const TokenId> prompt,
                                     std::span<const TokenId> response);

/// log softmax of `logits` at `token`: (z_t - max) - log(sum_i exp(z_i - max)).
double log_softmax_at(std::span<const double> logits, TokenId token);
ad::Var log_softmax_at(std::span<const ad::Var> logits, TokenId token);

}  // namespace lpo
