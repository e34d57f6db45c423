#include "lpo/tabular_policy.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "checkpoint_io.hpp"
#include "lpo/errors.hpp"
#include "lpo/rng.hpp"

namespace lpo {

namespace {

std::uint64_t hash_key(const TabularPolicy::ContextKey& key) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (TokenId t : key) {
    const auto u = static_cast<std::uint32_t>(t);
    for (int b = 0; b < 4; ++b) {
      h ^= (u >> (8 * b)) & 0xFFu;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

}  // namespace

TabularPolicy::TabularPolicy(Vocab vocab, TabularConfig config)
    : Policy(std::move(vocab)), config_(config) {
  if (config_.order < 1) throw ConfigError("context order must be >= 1");
}

std::unique_ptr<Policy> TabularPolicy::clone() const {
  return std::make_unique<TabularPolicy>(*this);
}

TabularPolicy::ContextKey TabularPolicy::context(std::span<const TokenId> history) const {
  ContextKey key(config_.order + 1, -1);
  if (history.empty()) return key;
  key[0] = history.front();
  const std::size_t n = std::min(config_.order, history.size());
  std::copy(history.end() - static_cast<std::ptrdiff_t>(n), history.end(),
            key.end() - static_cast<std::ptrdiff_t>(n));
  return key;
}

void TabularPolicy::default_logits(const ContextKey& key, std::span<double> out) const {
  if (config_.init_scale == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  CounterRng rng(derive_seed(config_.init_seed, "tabular-context", hash_key(key)));
  for (double& z : out) z = config_.init_scale * rng.normal();
}

std::size_t TabularPolicy::materialize(const ContextKey& key) {
  if (key.size() != config_.order + 1) throw std::invalid_argument("context key has wrong width");
  const auto it = offsets_.find(key);
  if (it != offsets_.end()) return it->second;
  const std::size_t offset = params_.size();
  params_.resize(offset + vocab_.size());
  default_logits(key, std::span<double>(params_).subspan(offset, vocab_.size()));
  offsets_.emplace(key, offset);
  return offset;
}

void TabularPolicy::set_logits(const ContextKey& key, std::span<const double> values) {
  if (values.size() != vocab_.size()) throw std::invalid_argument("logit vector has wrong size");
  const std::size_t offset = materialize(key);
  std::copy(values.begin(), values.end(), params_.begin() + static_cast<std::ptrdiff_t>(offset));
}

void TabularPolicy::prepare(std::span<const TokenId> prompt, std::span<const TokenId> response) {
  Tokens history(prompt.begin(), prompt.end());
  for (TokenId t : response) {
    materialize(context(history));
    history.push_back(t);
  }
}

void TabularPolicy::logits(std::span<const TokenId> history, std::span<double> out) const {
  const ContextKey key = context(history);
  const auto it = offsets_.find(key);
  if (it == offsets_.end()) {
    default_logits(key, out);
    return;
  }
  std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>(it->second), vocab_.size(), out.begin());
}

void TabularPolicy::logits(std::span<const TokenId> history, ParamBinding& params,
                           std::span<ad::Var> out) const {
  const auto it = offsets_.find(context(history));
  if (it == offsets_.end()) {
    throw GraphError("tabular context was not prepared before building a graph");
  }
  for (std::size_t j = 0; j < vocab_.size(); ++j) out[j] = params(it->second + j);
}

void TabularPolicy::save(std::ostream& os) const {
  detail::write_header(os, kind(), vocab_);
  os << "order " << config_.order << "\ninit_seed " << config_.init_seed << "\ninit_scale "
     << detail::hexfloat(config_.init_scale) << "\ncontexts " << offsets_.size() << '\n';
  for (const auto& [key, offset] : offsets_) {
    for (TokenId t : key) os << t << ' ';
    for (std::size_t j = 0; j < vocab_.size(); ++j) {
      os << detail::hexfloat(params_[offset + j]) << (j + 1 < vocab_.size() ? ' ' : '\n');
    }
  }
}

std::unique_ptr<TabularPolicy> TabularPolicy::load_body(std::istream& is, Vocab vocab) {
  TabularConfig cfg;
  cfg.order = detail::read_field<std::size_t>(is, "order");
  cfg.init_seed = detail::read_field<std::uint64_t>(is, "init_seed");
  std::string key;
  if (!(is >> key) || key != "init_scale") throw std::runtime_error("checkpoint: expected 'init_scale'");
  cfg.init_scale = detail::read_hexfloat(is);
  const auto count = detail::read_field<std::size_t>(is, "contexts");
  auto policy = std::make_unique<TabularPolicy>(std::move(vocab), cfg);
  std::vector<double> row(policy->vocab().size());
  for (std::size_t c = 0; c < count; ++c) {
    ContextKey ctx(cfg.order + 1);
    for (TokenId& t : ctx) {
      if (!(is >> t)) throw std::runtime_error("checkpoint: truncated context key");
    }
    for (double& z : row) z = detail::read_hexfloat(is);
    policy->set_logits(ctx, row);
  }
  return policy;
}

}  // namespace lpo
