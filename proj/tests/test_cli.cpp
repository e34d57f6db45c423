#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "json.hpp"
#include "lpo/csv.hpp"
#include "lpo/digest.hpp"
#include "lpo/pairs.hpp"
#include "settings.hpp"

namespace fs = std::filesystem;
using lpo::cli::kExitFailure;
using lpo::cli::kExitOk;
using lpo::cli::kExitUsage;

namespace {

const std::string kRoot = LPO_SOURCE_DIR;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome lab(std::vector<std::string> args) {
  args.insert(args.begin(), "lpo_lab");
  std::ostringstream out;
  std::ostringstream err;
  const int code = lpo::cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("lpo_cli_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream os(dir_ / name, std::ios::binary);
    os << text;
  }

  fs::path dir_;
};

}  // namespace

TEST(ConfigParse, KeyValueLines) {
  const auto m = lpo::cli::parse_config("# comment\n a = 1 \n\nb=two words  # note\r\n", "t");
  EXPECT_EQ(m.at("a"), "1");
  EXPECT_EQ(m.at("b"), "two words");
  EXPECT_THROW(lpo::cli::parse_config("a = 1\na = 2\n", "t"), lpo::cli::UsageError);
  EXPECT_THROW(lpo::cli::parse_config("novalue\n", "t"), lpo::cli::UsageError);
  EXPECT_THROW(lpo::cli::parse_config(" = 3\n", "t"), lpo::cli::UsageError);
}

TEST_F(CliTest, GradcheckPassesAndWritesTable) {
  const Outcome r = lab({"gradcheck", "--loss", "lpo", "--points", "1000", "--tol", "1e-6",
                         "--out", path("gc.csv")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  const auto rows = lpo::parse_csv(slurp(path("gc.csv")));
  EXPECT_EQ(rows.size(), 1001u);
  EXPECT_EQ(rows[0][0], "loss");
}

TEST_F(CliTest, GradcheckRejectsZeroTolerance) {
  EXPECT_EQ(lab({"gradcheck", "--tol", "0"}).code, kExitUsage);
  EXPECT_EQ(lab({"gradcheck", "--tol", "-1"}).code, kExitUsage);
}

TEST_F(CliTest, GradcheckDpoDiagonal) {
  const Outcome r = lab({"gradcheck", "--loss", "dpo", "--diagonal", "--points", "200"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("excluded=0"), std::string::npos);
}

TEST_F(CliTest, GradcheckFailureExitsOne) {
  // A step this coarse straddles kinks far outside the exclusion margin.
  const Outcome r = lab({"gradcheck", "--loss", "lpo", "--fd-step", "0.5", "--points", "200"});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("worst"), std::string::npos);
}

TEST_F(CliTest, SimulateShippedConfigIsCase1) {
  const Outcome r = lab({"simulate", "--config", kRoot + "/configs/simulate_lpo.conf", "--out",
                         path("trace.csv")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("case1"), std::string::npos);
  EXPECT_EQ(slurp(path("trace.csv")).rfind("step,x1,x2,loss\r\n", 0), 0u);
}

TEST_F(CliTest, SimulateFlagsOnly) {
  const Outcome r = lab({"simulate", "--loss", "lpo", "--x1", "0", "--x2", "0", "--out",
                         path("t.csv")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("trend: case1"), std::string::npos);
}

TEST_F(CliTest, MissingConfigKeyNamesTheKey) {
  write("partial.conf", "loss = lpo\nbeta = 0.2\n");
  const Outcome r = lab({"simulate", "--config", path("partial.conf"), "--out", path("t.csv")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("missing config key 'lambda'"), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownConfigKeyIsUsageError) {
  std::string text = slurp(kRoot + "/configs/simulate_lpo.conf");
  write("extra.conf", text + "gamma = 3\n");
  const Outcome r = lab({"simulate", "--config", path("extra.conf"), "--out", path("t.csv")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("gamma"), std::string::npos);
}

TEST_F(CliTest, FlagsOverrideConfig) {
  const std::string conf = kRoot + "/configs/simulate_lpo.conf";
  const Outcome a = lab({"simulate", "--config", conf, "--steps", "5", "--out", path("a.csv"),
                         "--manifest", path("m.json")});
  EXPECT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(lpo::parse_csv(slurp(path("a.csv"))).size(), 7u);
  const auto m = nlohmann::json::parse(slurp(path("m.json")));
  EXPECT_EQ(m["config"]["steps"], "5");
  EXPECT_EQ(m["config"]["beta"], "0.2");
}

TEST_F(CliTest, UnknownFlagIsUsageError) {
  EXPECT_EQ(lab({"simulate", "--no-such-flag", "1"}).code, kExitUsage);
  EXPECT_EQ(lab({}).code, kExitUsage);
  EXPECT_EQ(lab({"simulate", "--steps", "abc"}).code, kExitUsage);
}

TEST_F(CliTest, HelpExitsZero) {
  const Outcome r = lab({"train", "--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("--batch-size"), std::string::npos);
}

TEST_F(CliTest, SweepWritesFourTracesAndSummary) {
  const Outcome r = lab({"sweep", "--r2", "0.1,0.4,0.8,1.0", "--out", path("sw")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  int traces = 0;
  for (const auto& e : fs::directory_iterator(path("sw"))) {
    if (e.path().filename().string().rfind("trace_r2_", 0) == 0) ++traces;
  }
  EXPECT_EQ(traces, 4);
  const auto rows = lpo::parse_csv(slurp(path("sw/summary.csv")));
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 2; i < rows.size(); ++i) {
    EXPECT_LT(std::stod(rows[i][2]), std::stod(rows[i - 1][2]));
  }
  EXPECT_TRUE(fs::exists(path("sw/manifest.json")));
}

TEST_F(CliTest, BuildPairsPerturbIsDeterministic) {
  const std::string corpus = kRoot + "/tests/data/lppc/examples.jsonl";
  const std::vector<std::string> base{"build-pairs", "--method", "perturb", "--input", corpus,
                                      "--vocab-size", "8", "--eta", "0.3", "--seed", "4"};
  auto a = base;
  a.insert(a.end(), {"--out", path("a.jsonl")});
  auto b = base;
  b.insert(b.end(), {"--out", path("b.jsonl"), "--manifest", path("m.json")});
  const Outcome ra = lab(a);
  ASSERT_EQ(ra.code, kExitOk) << ra.err;
  ASSERT_EQ(lab(b).code, kExitOk);
  EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
  EXPECT_NE(ra.out.find("mean"), std::string::npos);
  const auto m = nlohmann::json::parse(slurp(path("m.json")));
  EXPECT_EQ(m["outputs"][0]["sha256"], lpo::sha256_file(path("a.jsonl")));
}

TEST_F(CliTest, BuildPairsLppcMatchesGolden) {
  const std::string dir = kRoot + "/tests/data/lppc/";
  const Outcome r = lab({"build-pairs", "--method", "lppc", "--input", dir + "examples.jsonl",
                         "--model", dir + "sft.ckpt", "--seed", "2024", "--out", path("p.jsonl")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(slurp(path("p.jsonl")), slurp(dir + "golden.jsonl"));
}

TEST_F(CliTest, BuildPairsDegeneratePolicyWarns) {
  // Policy with huge logits on the one ground-truth path.
  std::ostringstream ckpt;
  ckpt << "lpo-policy 1\nkind tabular\nvocab 3\na\nb\n</s>\norder 1\ninit_seed 0\n"
       << "init_scale 0x0p+0\ncontexts 2\n"
       << "0 0 -0x1p+40 0x0p+0 -0x1p+40\n"
       << "0 1 -0x1p+40 -0x1p+40 0x0p+0\n";
  write("parrot.ckpt", ckpt.str());
  write("ex.jsonl", "{\"prompt\":[0],\"response\":[1,2]}\n");
  const Outcome r = lab({"build-pairs", "--method", "lppc", "--input", path("ex.jsonl"), "--model",
                         path("parrot.ckpt"), "--out", path("p.jsonl")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(slurp(path("p.jsonl")), "");
  EXPECT_NE(r.err.find("warning"), std::string::npos) << r.err;
}

TEST_F(CliTest, BuildPairsVocabMismatchExitsOne) {
  write("ex.jsonl", "{\"prompt\":[0],\"response\":[42,7]}\n");
  const Outcome r = lab({"build-pairs", "--method", "lppc", "--input", path("ex.jsonl"), "--model",
                         kRoot + "/tests/data/lppc/sft.ckpt", "--out", path("p.jsonl")});
  EXPECT_EQ(r.code, kExitFailure);
}

TEST_F(CliTest, BuildPairsNeedsInput) {
  const Outcome r = lab({"build-pairs", "--out", path("p.jsonl")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("input"), std::string::npos);
}

TEST_F(CliTest, TrainThenReport) {
  const std::string data = kRoot + "/data/coupled/";
  const std::vector<std::string> common{"--pairs", data + "train.jsonl", "--eval-pairs",
                                        data + "eval.jsonl", "--init", data + "reference.ckpt",
                                        "--lr", "20", "--epochs", "2", "--seed", "1"};
  auto lpo_args = std::vector<std::string>{"train", "--loss", "lpo", "--out", path("lpo")};
  lpo_args.insert(lpo_args.end(), common.begin(), common.end());
  auto dpo_args = std::vector<std::string>{"train", "--loss", "dpo", "--out", path("dpo")};
  dpo_args.insert(dpo_args.end(), common.begin(), common.end());
  const Outcome a = lab(lpo_args);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(lab(dpo_args).code, kExitOk);
  for (const char* f : {"policy.ckpt", "metrics.csv", "trace.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "lpo" / f)) << f;
  }
  const auto ma = nlohmann::json::parse(slurp(path("lpo/manifest.json")));
  const auto md = nlohmann::json::parse(slurp(path("dpo/manifest.json")));
  EXPECT_EQ(ma["results"]["data_order_sha256"], md["results"]["data_order_sha256"]);
  EXPECT_EQ(ma["results"]["resolved_beta"], 0.2);
  EXPECT_EQ(md["results"]["resolved_beta"], 0.1);
  std::vector<std::string> keys;
  for (auto it = ma.begin(); it != ma.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys.back(), "timing");

  const Outcome one = lab({"report", path("lpo")});
  EXPECT_EQ(one.code, kExitOk) << one.err;
  EXPECT_NE(one.out.find("pref_accuracy"), std::string::npos);
  EXPECT_EQ(one.out.find("by epoch"), std::string::npos);

  const Outcome both = lab({"report", path("lpo"), path("dpo"), "--out", path("r.md")});
  EXPECT_EQ(both.code, kExitOk) << both.err;
  const std::string md_text = slurp(path("r.md"));
  EXPECT_NE(md_text.find("## pref_accuracy by epoch"), std::string::npos);
  EXPECT_NE(md_text.find("| epoch | lpo (lpo) | dpo (dpo) |"), std::string::npos) << md_text;
  EXPECT_NE(md_text.find("\n| 2 |"), std::string::npos);
}

TEST_F(CliTest, TrainOutputsAreByteIdentical) {
  const std::string data = kRoot + "/data/coupled/";
  const auto run = [&](const std::string& out) {
    return lab({"train", "--pairs", data + "train.jsonl", "--init", data + "reference.ckpt",
                "--epochs", "1", "--out", path(out)});
  };
  ASSERT_EQ(run("a").code, kExitOk);
  ASSERT_EQ(run("b").code, kExitOk);
  for (const char* f : {"policy.ckpt", "metrics.csv", "trace.csv"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(CliTest, TrainRefusesNonEmptyOutputWithoutForce) {
  const std::string data = kRoot + "/data/coupled/";
  fs::create_directories(path("busy"));
  write("busy/keep.txt", "x");
  const std::vector<std::string> args{"train", "--pairs", data + "train.jsonl", "--init",
                                      data + "reference.ckpt", "--epochs", "1", "--out",
                                      path("busy")};
  const Outcome r = lab(args);
  EXPECT_EQ(r.code, kExitFailure);
  auto forced = args;
  forced.push_back("--force");
  EXPECT_EQ(lab(forced).code, kExitOk);
  EXPECT_TRUE(fs::exists(path("busy/metrics.csv")));
}

TEST_F(CliTest, TrainMissingPairsFileIsUsageError) {
  const Outcome r = lab({"train", "--pairs", path("nope.jsonl"), "--init",
                         kRoot + "/data/coupled/reference.ckpt", "--out", path("o")});
  EXPECT_EQ(r.code, kExitUsage);
}

TEST_F(CliTest, TrainShippedConfigRuns) {
  const std::string conf = slurp(kRoot + "/configs/train_coupled_lpo.conf");
  std::string rewritten;
  std::istringstream lines(conf);
  for (std::string line; std::getline(lines, line);) {
    for (const char* key : {"pairs", "eval_pairs", "init"}) {
      const std::string prefix = std::string(key) + " = ";
      if (line.rfind(prefix, 0) == 0) line = prefix + kRoot + "/" + line.substr(prefix.size());
    }
    if (line.rfind("out = ", 0) == 0) line = "out = " + path("run");
    rewritten += line + "\n";
  }
  write("train.conf", rewritten);
  const Outcome r = lab({"train", "--config", path("train.conf"), "--epochs", "1"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
}
