#include "lpo/mlp_policy.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "checkpoint_io.hpp"
#include "lpo/errors.hpp"
#include "lpo/rng.hpp"
#include "lpo/scalar_math.hpp"

namespace lpo {

MlpPolicy::MlpPolicy(Vocab vocab, MlpConfig config) : Policy(std::move(vocab)), config_(config) {
  if (config_.order < 1 || config_.embed < 1 || config_.hidden < 1) {
    throw ConfigError("mlp dimensions must be positive");
  }
  params_.resize(c_offset() + vocab_.size());
  if (config_.init_scale != 0.0) {
    CounterRng rng(derive_seed(config_.init_seed, "mlp-init"));
    for (double& p : params_) p = config_.init_scale * rng.normal();
  }
}

std::unique_ptr<Policy> MlpPolicy::clone() const { return std::make_unique<MlpPolicy>(*this); }

std::size_t MlpPolicy::w_offset() const { return vocab_.size() * config_.embed; }
std::size_t MlpPolicy::b_offset() const { return w_offset() + config_.hidden * input_width(); }
std::size_t MlpPolicy::u_offset() const { return b_offset() + config_.hidden; }
std::size_t MlpPolicy::c_offset() const { return u_offset() + vocab_.size() * config_.hidden; }

void MlpPolicy::logits(std::span<const TokenId> history, std::span<double> out) const {
  const std::size_t width = input_width();
  std::vector<double> input(width, 0.0);
  const std::size_t n = std::min(config_.order, history.size());
  for (std::size_t k = 0; k < n; ++k) {
    const TokenId t = history[history.size() - n + k];
    const std::size_t slot = config_.order - n + k;
    for (std::size_t e = 0; e < config_.embed; ++e) {
      input[slot * config_.embed + e] = params_[embedding_offset(t) + e];
    }
  }
  std::vector<double> hidden(config_.hidden);
  for (std::size_t j = 0; j < config_.hidden; ++j) {
    double acc = 0.0;
    const std::size_t row = w_offset() + j * width;
    for (std::size_t i = 0; i < width; ++i) acc += params_[row + i] * input[i];
    acc += params_[b_offset() + j];
    hidden[j] = sigmoid(acc);
  }
  for (std::size_t v = 0; v < vocab_.size(); ++v) {
    double acc = 0.0;
    const std::size_t row = u_offset() + v * config_.hidden;
    for (std::size_t j = 0; j < config_.hidden; ++j) acc += params_[row + j] * hidden[j];
    acc += params_[c_offset() + v];
    out[v] = acc;
  }
}

void MlpPolicy::logits(std::span<const TokenId> history, ParamBinding& params,
                       std::span<ad::Var> out) const {
  ad::Graph& g = params.graph();
  const std::size_t width = input_width();
  const ad::Var zero = g.leaf(0.0);
  std::vector<ad::Var> input(width, zero);
  const std::size_t n = std::min(config_.order, history.size());
  for (std::size_t k = 0; k < n; ++k) {
    const TokenId t = history[history.size() - n + k];
    const std::size_t slot = config_.order - n + k;
    for (std::size_t e = 0; e < config_.embed; ++e) {
      input[slot * config_.embed + e] = params(embedding_offset(t) + e);
    }
  }
  std::vector<ad::Var> weights(width);
  std::vector<ad::Var> hidden(config_.hidden);
  for (std::size_t j = 0; j < config_.hidden; ++j) {
    const std::size_t row = w_offset() + j * width;
    for (std::size_t i = 0; i < width; ++i) weights[i] = params(row + i);
    hidden[j] = ad::sigmoid(ad::dot(weights, input, params(b_offset() + j)));
  }
  std::vector<ad::Var> proj(config_.hidden);
  for (std::size_t v = 0; v < vocab_.size(); ++v) {
    const std::size_t row = u_offset() + v * config_.hidden;
    for (std::size_t j = 0; j < config_.hidden; ++j) proj[j] = params(row + j);
    out[v] = ad::dot(proj, hidden, params(c_offset() + v));
  }
}

void MlpPolicy::save(std::ostream& os) const {
  detail::write_header(os, kind(), vocab_);
  os << "order " << config_.order << "\nembed " << config_.embed << "\nhidden " << config_.hidden
     << "\ninit_seed " << config_.init_seed << "\ninit_scale " << detail::hexfloat(config_.init_scale)
     << "\nparams " << params_.size() << '\n';
  for (std::size_t i = 0; i < params_.size(); ++i) {
    os << detail::hexfloat(params_[i]) << ((i + 1) % 8 == 0 || i + 1 == params_.size() ? '\n' : ' ');
  }
}

std::unique_ptr<MlpPolicy> MlpPolicy::load_body(std::istream& is, Vocab vocab) {
  MlpConfig cfg;
  cfg.order = detail::read_field<std::size_t>(is, "order");
  cfg.embed = detail::read_field<std::size_t>(is, "embed");
  cfg.hidden = detail::read_field<std::size_t>(is, "hidden");
  cfg.init_seed = detail::read_field<std::uint64_t>(is, "init_seed");
  std::string key;
  if (!(is >> key) || key != "init_scale") throw std::runtime_error("checkpoint: expected 'init_scale'");
  cfg.init_scale = detail::read_hexfloat(is);
  const auto count = detail::read_field<std::size_t>(is, "params");
  auto policy = std::make_unique<MlpPolicy>(std::move(vocab), cfg);
  if (count != policy->params_.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (double& p : policy->params_) p = detail::read_hexfloat(is);
  return policy;
}

}  // namespace lpo
