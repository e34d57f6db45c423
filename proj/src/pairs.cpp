#include "lpo/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>

#include "lpo/errors.hpp"
#include "lpo/rng.hpp"

namespace lpo {

using nlohmann::ordered_json;

std::string_view to_string(PairSource s) {
  return s == PairSource::lppc ? "lppc" : "perturbation";
}

std::string_view to_string(EditOp op) {
  switch (op) {
    case EditOp::insertion: return "insertion";
    case EditOp::deletion: return "deletion";
    case EditOp::repetition: return "repetition";
  }
  return "?";
}

void validate_pair(const PreferencePair& pair, const Vocab& vocab) {
  if (pair.prompt.empty()) throw std::invalid_argument("pair prompt is empty");
  for (const Tokens* r : {&pair.chosen, &pair.rejected}) {
    if (r->empty() || r->back() != vocab.eos()) {
      throw std::invalid_argument("pair response does not end with EOS");
    }
  }
  if (pair.chosen == pair.rejected) throw std::invalid_argument("pair has chosen == rejected");
  vocab.check(pair.prompt);
  vocab.check(pair.chosen);
  vocab.check(pair.rejected);
}

namespace {

void check_dataset(const std::vector<Example>& dataset, const Vocab& vocab) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Example& ex = dataset[i];
    if (ex.prompt.empty()) throw DomainError("example " + std::to_string(i) + ": empty prompt");
    if (ex.response.empty() || ex.response.back() != vocab.eos()) {
      throw DomainError("example " + std::to_string(i) + ": ground truth must end with EOS");
    }
    vocab.check(ex.prompt);
    vocab.check(ex.response);
  }
}

struct PromptOutcome {
  std::vector<PreferencePair> pairs;
  std::size_t identical = 0;
  std::size_t truncated = 0;
  std::size_t duplicate = 0;
  std::size_t edits = 0;
  std::optional<std::string> warning;
};

BuildResult collect(std::vector<PromptOutcome>& outcomes) {
  BuildResult r;
  r.stats.inputs = outcomes.size();
  std::size_t edits = 0;
  for (PromptOutcome& o : outcomes) {
    r.stats.dropped_identical += o.identical;
    r.stats.dropped_truncated += o.truncated;
    r.stats.dropped_duplicate += o.duplicate;
    edits += o.edits;
    if (o.warning) r.stats.warnings.push_back(*o.warning);
    for (PreferencePair& p : o.pairs) r.pairs.push_back(std::move(p));
  }
  r.stats.emitted = r.pairs.size();
  r.stats.mean_edits =
      outcomes.empty() ? 0.0 : static_cast<double>(edits) / static_cast<double>(outcomes.size());
  return r;
}

ordered_json sampling_meta(std::string_view method, const LppcConfig& c, std::size_t index) {
  ordered_json meta;
  meta["method"] = method;
  meta["seed"] = c.seed;
  meta["index"] = index;
  meta["temperature"] = c.sampling.temperature;
  meta["top_p"] = c.sampling.top_p;
  meta["max_len"] = c.sampling.max_len;
  return meta;
}

}  // namespace

BuildResult build_lppc(const std::vector<Example>& dataset, const Policy& sft_policy,
                       const LppcConfig& config, Execution exec) {
  config.sampling.validate();
  check_dataset(dataset, sft_policy.vocab());
  std::vector<PromptOutcome> outcomes(dataset.size());
  for_each_index(dataset.size(), exec, [&](std::size_t i) {
    const Example& ex = dataset[i];
    PromptOutcome& out = outcomes[i];
    const std::uint64_t prompt_seed = derive_seed(config.seed, "lppc", i);
    for (std::size_t attempt = 0; attempt < config.retry_budget; ++attempt) {
      const std::uint64_t sample_seed = derive_seed(prompt_seed, "attempt", attempt);
      SampleResult s = sample(sft_policy, ex.prompt, config.sampling, sample_seed);
      if (s.truncated) {
        ++out.truncated;
        continue;
      }
      if (s.tokens == ex.response) {
        ++out.identical;
        continue;
      }
      ordered_json meta = sampling_meta("lppc", config, i);
      meta["attempt"] = attempt;
      meta["sample_seed"] = sample_seed;
      out.pairs.push_back({ex.prompt, ex.response, std::move(s.tokens), PairSource::lppc, std::move(meta)});
      return;
    }
    out.warning = "prompt " + std::to_string(i) + ": no usable rejection after " +
                  std::to_string(config.retry_budget) + " attempts";
  });
  return collect(outcomes);
}

BuildResult triple_candidates(const std::vector<Example>& dataset, const Policy& sft_policy,
                              const LppcConfig& config, Execution exec) {
  config.sampling.validate();
  check_dataset(dataset, sft_policy.vocab());
  std::vector<PromptOutcome> outcomes(dataset.size());
  for_each_index(dataset.size(), exec, [&](std::size_t i) {
    const Example& ex = dataset[i];
    PromptOutcome& out = outcomes[i];
    const std::uint64_t prompt_seed = derive_seed(config.seed, "triple", i);
    std::set<Tokens> seen;
    for (std::size_t candidate = 0; candidate < 3; ++candidate) {
      const std::uint64_t sample_seed = derive_seed(prompt_seed, "candidate", candidate);
      SampleResult s = sample(sft_policy, ex.prompt, config.sampling, sample_seed);
      if (s.truncated) {
        ++out.truncated;
        continue;
      }
      if (s.tokens == ex.response) {
        ++out.identical;
        continue;
      }
      if (!seen.insert(s.tokens).second) {
        ++out.duplicate;
        continue;
      }
      ordered_json meta = sampling_meta("triple", config, i);
      meta["candidate"] = candidate;
      meta["sample_seed"] = sample_seed;
      out.pairs.push_back({ex.prompt, ex.response, std::move(s.tokens), PairSource::lppc, std::move(meta)});
    }
    if (out.pairs.empty()) {
      out.warning = "prompt " + std::to_string(i) + ": all three candidates were unusable";
    }
  });
  return collect(outcomes);
}

// ---- perturbation -------------------------------------------------------------------

void PerturbationConfig::validate() const {
  if (!(eta > 0.0) || eta > 1.0) throw ConfigError("eta must be in (0, 1]");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("operator weights must be non-negative");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("operator weights must sum to 1");
}

void apply_edit(Tokens& sentence, const Edit& edit) {
  if (sentence.empty()) throw std::out_of_range("sentence has no EOS");
  const std::size_t content = sentence.size() - 1;
  const auto at = [&sentence](std::size_t pos) {
    return sentence.begin() + static_cast<std::ptrdiff_t>(pos);
  };
  switch (edit.op) {
    case EditOp::insertion:
      if (edit.position > content) throw std::out_of_range("insertion position past EOS");
      sentence.insert(at(edit.position), edit.token);
      return;
    case EditOp::deletion:
      if (edit.position >= content) throw std::out_of_range("deletion position out of range");
      sentence.erase(at(edit.position));
      return;
    case EditOp::repetition:
      if (edit.position >= content) throw std::out_of_range("repetition position out of range");
      sentence.insert(at(edit.position + 1), sentence[edit.position]);
      return;
  }
}

std::vector<Edit> draw_edits(CounterRng& rng, std::size_t length, const PerturbationConfig& config,
                             std::size_t vocab_size) {
  std::size_t count = 0;
  for (std::size_t j = 0; j < length; ++j) count += rng.bernoulli(config.eta) ? 1 : 0;

  std::vector<Edit> edits;
  edits.reserve(count);
  std::size_t current = length;
  for (std::size_t e = 0; e < count; ++e) {
    const double u = rng.uniform();
    EditOp op = EditOp::repetition;
    if (u < config.weights[0]) {
      op = EditOp::insertion;
    } else if (u < config.weights[0] + config.weights[1]) {
      op = EditOp::deletion;
    }
    if (current == 0) op = EditOp::insertion;
    Edit edit{op, 0, 0};
    if (op == EditOp::insertion) {
      edit.position = rng.below(current + 1);
      edit.token = static_cast<TokenId>(rng.below(vocab_size - 1));
      ++current;
    } else {
      edit.position = rng.below(current);
      current += op == EditOp::repetition ? 1 : -1;
    }
    edits.push_back(edit);
  }
  return edits;
}

BuildResult build_perturbed(const std::vector<Example>& dataset, const Vocab& vocab,
                            const PerturbationConfig& config, Execution exec) {
  config.validate();
  check_dataset(dataset, vocab);
  std::vector<PromptOutcome> outcomes(dataset.size());
  for_each_index(dataset.size(), exec, [&](std::size_t i) {
    const Example& ex = dataset[i];
    PromptOutcome& out = outcomes[i];
    CounterRng rng(derive_seed(config.seed, "perturb", i));
    const std::vector<Edit> edits = draw_edits(rng, ex.response.size() - 1, config, vocab.size());
    out.edits = edits.size();
    Tokens rejected = ex.response;
    for (const Edit& e : edits) apply_edit(rejected, e);
    if (rejected == ex.response) {
      ++out.identical;
      return;
    }
    ordered_json meta;
    meta["method"] = "perturbation";
    meta["seed"] = config.seed;
    meta["index"] = i;
    meta["eta"] = config.eta;
    meta["weights"] = config.weights;
    ordered_json list = ordered_json::array();
    for (const Edit& e : edits) {
      ordered_json je;
      je["op"] = to_string(e.op);
      je["position"] = e.position;
      if (e.op == EditOp::insertion) je["token"] = e.token;
      list.push_back(std::move(je));
    }
    meta["edits"] = std::move(list);
    out.pairs.push_back({ex.prompt, ex.response, std::move(rejected), PairSource::perturbation, std::move(meta)});
  });
  return collect(outcomes);
}

// ---- JSON Lines -------------------------------------------------------------------

ordered_json to_json(const PreferencePair& pair) {
  ordered_json j;
  j["prompt"] = pair.prompt;
  j["chosen"] = pair.chosen;
  j["rejected"] = pair.rejected;
  j["source"] = to_string(pair.source);
  j["meta"] = pair.meta;
  return j;
}

PreferencePair pair_from_json(const ordered_json& j) {
  PreferencePair p;
  p.prompt = j.at("prompt").get<Tokens>();
  p.chosen = j.at("chosen").get<Tokens>();
  p.rejected = j.at("rejected").get<Tokens>();
  const std::string source = j.at("source").get<std::string>();
  if (source == "lppc") {
    p.source = PairSource::lppc;
  } else if (source == "perturbation") {
    p.source = PairSource::perturbation;
  } else {
    throw std::runtime_error("unknown pair source '" + source + "'");
  }
  if (j.contains("meta")) p.meta = j.at("meta");
  return p;
}

void write_pairs_jsonl(std::ostream& os, const std::vector<PreferencePair>& pairs) {
  for (const PreferencePair& p : pairs) os << to_json(p).dump() << '\n';
}

namespace {

template <class F>
void for_each_json_line(std::istream& is, F&& f) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(ordered_json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<PreferencePair> read_pairs_jsonl(std::istream& is) {
  std::vector<PreferencePair> out;
  for_each_json_line(is, [&out](const ordered_json& j) { out.push_back(pair_from_json(j)); });
  return out;
}

void write_examples_jsonl(std::ostream& os, const std::vector<Example>& examples) {
  for (const Example& e : examples) {
    ordered_json j;
    j["prompt"] = e.prompt;
    j["response"] = e.response;
    os << j.dump() << '\n';
  }
}

std::vector<Example> read_examples_jsonl(std::istream& is) {
  std::vector<Example> out;
  for_each_json_line(is, [&out](const ordered_json& j) {
    out.push_back({j.at("prompt").get<Tokens>(), j.at("response").get<Tokens>()});
  });
  return out;
}

}  // namespace lpo
