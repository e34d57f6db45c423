#include "lpo/policy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <set>
#include <stdexcept>

#include "lpo/errors.hpp"
#include "lpo/mlp_policy.hpp"
#include "lpo/tabular_policy.hpp"

namespace lpo {

Vocab::Vocab(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < 2) throw ConfigError("vocabulary needs at least two symbols");
  std::set<std::string_view> seen;
  for (const std::string& s : symbols_) {
    if (s.empty()) throw ConfigError("empty vocabulary symbol");
    if (std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); })) {
      throw ConfigError("vocabulary symbol contains whitespace: '" + s + "'");
    }
    if (!seen.insert(s).second) throw ConfigError("duplicate vocabulary symbol '" + s + "'");
  }
}

Vocab Vocab::numbered(std::size_t size) {
  if (size < 2) throw ConfigError("vocabulary needs at least two symbols");
  std::vector<std::string> symbols;
  for (std::size_t i = 0; i + 1 < size; ++i) symbols.push_back("t" + std::to_string(i));
  symbols.emplace_back("</s>");
  return Vocab(std::move(symbols));
}

std::optional<TokenId> Vocab::find(std::string_view symbol) const {
  const auto it = std::find(symbols_.begin(), symbols_.end(), symbol);
  if (it == symbols_.end()) return std::nullopt;
  return static_cast<TokenId>(it - symbols_.begin());
}

void Vocab::check(std::span<const TokenId> tokens) const {
  for (TokenId t : tokens) {
    if (!contains(t)) {
      throw VocabError("token " + std::to_string(t) + " outside vocabulary of size " +
                       std::to_string(size()));
    }
  }
}

// ---- ParamBinding -------------------------------------------------------------

ParamBinding::ParamBinding(ad::Graph& graph, std::span<const double> params)
    : graph_(graph), params_(params), slot_(params.size(), -1) {}

ad::Var ParamBinding::operator()(std::size_t index) {
  std::int32_t& s = slot_.at(index);
  if (s < 0) {
    s = static_cast<std::int32_t>(vars_.size());
    vars_.push_back(graph_.leaf(params_[index]));
    order_.push_back(index);
  }
  return vars_[static_cast<std::size_t>(s)];
}

std::vector<std::pair<std::size_t, double>> ParamBinding::gradients() const {
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(order_.size());
  for (std::size_t k = 0; k < order_.size(); ++k) {
    out.emplace_back(order_[k], graph_.grad(vars_[k]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void Policy::prepare(std::span<const TokenId>, std::span<const TokenId>) {}

// ---- log-softmax ------------------------------------------------------------------

double log_softmax_at(std::span<const double> logits, TokenId token) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  return (logits[static_cast<std::size_t>(token)] - m) - std::log(s);
}

ad::Var log_softmax_at(std::span<const ad::Var> logits, TokenId token) {
  double m = -std::numeric_limits<double>::infinity();
  for (const ad::Var& z : logits) m = std::max(m, z.value());
  std::vector<ad::Var> shifted;
  shifted.reserve(logits.size());
  for (const ad::Var& z : logits) shifted.push_back(ad::exp(z - m));
  return (logits[static_cast<std::size_t>(token)] - m) - ad::log(ad::sum(shifted));
}

// ---- sequence log-probabilities ---------------------------------------------------

namespace {

void check_inputs(const Policy& policy, std::span<const TokenId> prompt,
                  std::span<const TokenId> response) {
  if (prompt.empty()) throw DomainError("prompt must be non-empty");
  policy.vocab().check(prompt);
  policy.vocab().check(response);
}

}  // namespace

SequenceLogprob sequence_logprob(const Policy& policy, std::span<const TokenId> prompt,
                                 std::span<const TokenId> response) {
  check_inputs(policy, prompt, response);
  Tokens history(prompt.begin(), prompt.end());
  history.reserve(prompt.size() + response.size());
  std::vector<double> z(policy.vocab().size());
  SequenceLogprob out;
  for (TokenId t : response) {
    policy.logits(history, z);
    out.logprob += log_softmax_at(z, t);
    history.push_back(t);
  }
  out.length = static_cast<long>(response.size());
  return out;
}

SequenceLogprobNode sequence_logprob(const Policy& policy, ParamBinding& params,
                                     std::span<const TokenId> prompt,
                                     std::span<const TokenId> response) {
  check_inputs(policy, prompt, response);
  if (response.empty()) throw DomainError("response must be non-empty");
  Tokens history(prompt.begin(), prompt.end());
  history.reserve(prompt.size() + response.size());
  std::vector<ad::Var> z(policy.vocab().size());
  std::vector<ad::Var> terms;
  terms.reserve(response.size());
  for (TokenId t : response) {
    policy.logits(history, params, z);
    terms.push_back(log_softmax_at(z, t));
    history.push_back(t);
  }
  // Left fold from 0.0 matches the numeric accumulation order exactly.
  std::vector<ad::Var> folded{params.graph().leaf(0.0)};
  folded.insert(folded.end(), terms.begin(), terms.end());
  return {ad::sum(folded), static_cast<long>(response.size())};
}

// ---- checkpoints ----------------------------------------------------------------------

std::unique_ptr<Policy> load_policy(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "lpo-policy") {
    throw std::runtime_error("not a policy checkpoint");
  }
  if (version != 1) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  std::string key;
  std::string kind;
  std::size_t v = 0;
  if (!(is >> key >> kind) || key != "kind") throw std::runtime_error("checkpoint: expected 'kind'");
  if (!(is >> key >> v) || key != "vocab") throw std::runtime_error("checkpoint: expected 'vocab'");
  std::vector<std::string> symbols(v);
  for (std::string& s : symbols) {
    if (!(is >> s)) throw std::runtime_error("checkpoint: truncated vocabulary");
  }
  Vocab vocab(std::move(symbols));
  if (kind == "tabular") return TabularPolicy::load_body(is, std::move(vocab));
  if (kind == "mlp") return MlpPolicy::load_body(is, std::move(vocab));
  throw std::runtime_error("checkpoint: unknown policy kind '" + kind + "'");
}

std::unique_ptr<Policy> load_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  return load_policy(in);
}

void save_policy_file(const Policy& policy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  policy.save(out);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

}  // namespace lpo
