#include "fixture_writer.hpp"

#include <fstream>
#include <stdexcept>

#include "lpo/fixtures.hpp"
#include "lpo/pairs.hpp"
#include "lpo/tabular_policy.hpp"

namespace lpo::cli {

namespace fs = std::filesystem;

namespace {

class Writer {
 public:
  explicit Writer(fs::path root) : root_(std::move(root)) {}

  std::ofstream create(const fs::path& rel) {
    const fs::path path = root_ / rel;
    fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    written_.push_back(rel);
    return os;
  }

  void task(const fs::path& dir, const ToyTask& task) {
    {
      std::ofstream os = create(dir / "reference.ckpt");
      task.reference->save(os);
    }
    {
      std::ofstream os = create(dir / "train.jsonl");
      write_pairs_jsonl(os, task.train);
    }
    if (!task.eval.empty()) {
      std::ofstream os = create(dir / "eval.jsonl");
      write_pairs_jsonl(os, task.eval);
    }
  }

  std::vector<fs::path> written() const { return written_; }

 private:
  fs::path root_;
  std::vector<fs::path> written_;
};

}  // namespace

std::vector<fs::path> write_fixtures(const fs::path& root) {
  Writer w(root);
  w.task(fs::path("data") / "coupled", make_coupled_task({}));
  w.task(fs::path("data") / "addition", make_addition_task({}));

  const Vocab corpus_vocab = Vocab::numbered(16);
  {
    std::ofstream os = w.create(fs::path("data") / "corpus" / "sentences_10k.jsonl");
    write_examples_jsonl(os, make_sentence_corpus(corpus_vocab, 10000, 10, 7));
  }

  const Vocab lppc_vocab = Vocab::numbered(8);
  TabularPolicy sft(lppc_vocab, {2, 11, 1.5});
  const std::vector<Example> examples = make_sentence_corpus(lppc_vocab, 20, 4, 5);
  for (const Example& e : examples) sft.prepare(e.prompt, e.response);
  const fs::path lppc = fs::path("tests") / "data" / "lppc";
  {
    std::ofstream os = w.create(lppc / "sft.ckpt");
    sft.save(os);
  }
  {
    std::ofstream os = w.create(lppc / "examples.jsonl");
    write_examples_jsonl(os, examples);
  }
  LppcConfig config;
  config.seed = 2024;
  {
    std::ofstream os = w.create(lppc / "golden.jsonl");
    write_pairs_jsonl(os, build_lppc(examples, sft, config).pairs);
  }
  return w.written();
}

}  // namespace lpo::cli
