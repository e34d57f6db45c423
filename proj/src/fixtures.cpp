#include "lpo/fixtures.hpp"

#include <algorithm>
#include <string>

#include "lpo/errors.hpp"
#include "lpo/rng.hpp"

namespace lpo {

namespace {

TokenId draw_content(CounterRng& rng, const Vocab& vocab) {
  return static_cast<TokenId>(rng.below(vocab.size() - 1));
}

TokenId draw_excluding(CounterRng& rng, const Vocab& vocab, const Tokens& excluded) {
  for (;;) {
    const TokenId t = draw_content(rng, vocab);
    if (std::find(excluded.begin(), excluded.end(), t) == excluded.end()) return t;
  }
}

void boost(TabularPolicy& policy, const Tokens& history, TokenId token, double bonus) {
  const TabularPolicy::ContextKey key = policy.context(history);
  std::vector<double> z(policy.vocab().size());
  policy.logits(history, z);
  z[static_cast<std::size_t>(token)] += bonus;
  policy.set_logits(key, z);
}

PreferencePair make_pair(Tokens prompt, Tokens chosen, Tokens rejected, nlohmann::ordered_json meta) {
  PreferencePair p;
  p.prompt = std::move(prompt);
  p.chosen = std::move(chosen);
  p.rejected = std::move(rejected);
  p.source = PairSource::lppc;
  p.meta = std::move(meta);
  return p;
}

}  // namespace

ToyTask make_coupled_task(const CoupledTaskConfig& config) {
  Vocab vocab = Vocab::numbered(config.vocab_size);
  if (config.prompts < 1 || config.prompts > vocab.size() - 1) {
    throw ConfigError("prompts must be in [1, vocab_size - 1]");
  }
  if (config.tail_length + 3 > vocab.size() - 1) throw ConfigError("vocabulary too small for the tail");
  const TokenId eos = vocab.eos();

  ToyTask task;
  task.reference = std::make_unique<TabularPolicy>(
      vocab, TabularConfig{2, derive_seed(config.seed, "coupled-reference"), config.init_scale});
  TabularPolicy& ref = *task.reference;

  for (std::size_t p = 0; p < config.prompts; ++p) {
    CounterRng rng(derive_seed(config.seed, "coupled-prompt", p));
    const Tokens prompt{static_cast<TokenId>(p)};
    Tokens used;
    const TokenId sa = draw_excluding(rng, vocab, used);
    used.push_back(sa);
    const TokenId sb = draw_excluding(rng, vocab, used);
    used.push_back(sb);
    Tokens tail;
    for (std::size_t k = 0; k < config.tail_length; ++k) {
      tail.push_back(draw_excluding(rng, vocab, used));
      used.push_back(tail.back());
    }

    Tokens chosen{sa, sb};
    chosen.insert(chosen.end(), tail.begin(), tail.end());
    chosen.push_back(eos);

    Tokens history = prompt;
    history.push_back(sa);
    history.push_back(sb);
    for (std::size_t k = 0; k <= tail.size(); ++k) {
      const TokenId next = k < tail.size() ? tail[k] : eos;
      boost(ref, history, next, config.peak);
      history.push_back(next);
    }

    for (std::size_t j = 0; j < config.train_pairs_per_prompt; ++j) {
      Tokens rejected{sa, sb};
      if (j % 2 == 1) rejected.push_back(draw_excluding(rng, vocab, {tail.front()}));
      rejected.push_back(eos);
      task.train.push_back(make_pair(prompt, chosen, rejected,
                                     {{"method", "coupled"}, {"prompt", p}, {"index", j}}));
    }
    for (std::size_t j = 0; j < config.eval_pairs_per_prompt; ++j) {
      const TokenId y = draw_excluding(rng, vocab, {sa});
      Tokens eval_rejected{y, draw_content(rng, vocab), eos};
      task.eval.push_back(make_pair(prompt, chosen, std::move(eval_rejected),
                                    {{"method", "coupled-heldout"}, {"prompt", p}, {"index", j}}));
    }
  }
  return task;
}

ToyTask make_addition_task(const AdditionTaskConfig& config) {
  std::vector<std::string> symbols;
  for (int d = 0; d < 10; ++d) symbols.push_back(std::to_string(d));
  symbols.insert(symbols.end(), {"+", "=", "</s>"});
  Vocab vocab(symbols);
  const TokenId plus = 10;
  const TokenId equals = 11;
  const TokenId eos = vocab.eos();

  ToyTask task;
  task.reference = std::make_unique<TabularPolicy>(
      vocab, TabularConfig{2, derive_seed(config.seed, "addition-reference"), config.init_scale});
  TabularPolicy& ref = *task.reference;

  for (std::size_t i = 0; i < config.pairs; ++i) {
    CounterRng rng(derive_seed(config.seed, "addition-pair", i));
    const auto a = static_cast<TokenId>(rng.below(10));
    const auto b = static_cast<TokenId>(rng.below(10));
    const TokenId answer = (a + b) % 10;
    TokenId wrong = static_cast<TokenId>(rng.below(9));
    if (wrong >= answer) ++wrong;
    const Tokens prompt{a, plus, b, equals};
    if (!ref.has_context(ref.context(prompt))) {
      boost(ref, prompt, answer, config.peak);
      boost(ref, {a, plus, b, equals, answer}, eos, config.peak);
    }
    task.train.push_back(make_pair(prompt, {answer, eos}, {wrong, eos},
                                   {{"method", "addition"}, {"index", i}}));
  }
  return task;
}

std::vector<Example> make_sentence_corpus(const Vocab& vocab, std::size_t count,
                                          std::size_t length, std::uint64_t seed) {
  std::vector<Example> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    CounterRng rng(derive_seed(seed, "sentence", i));
    Example e;
    e.prompt = {draw_content(rng, vocab)};
    for (std::size_t k = 0; k < length; ++k) e.response.push_back(draw_content(rng, vocab));
    e.response.push_back(vocab.eos());
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace lpo
