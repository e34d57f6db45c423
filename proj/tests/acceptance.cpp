// Acceptance suite: one pass/fail line per criterion, non-zero exit on any failure.
#include <algorithm>
#include <array>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lpo/autodiff.hpp"
#include "lpo/dynamics.hpp"
#include "lpo/gradcheck.hpp"
#include "lpo/loss_oracle.hpp"
#include "lpo/losses.hpp"
#include "lpo/pairs.hpp"
#include "lpo/policy.hpp"
#include "lpo/rng.hpp"
#include "lpo/sampling.hpp"
#include "lpo/tabular_policy.hpp"
#include "lpo/trainer.hpp"

using namespace lpo;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string source_path(const std::string& rel) { return std::string(LPO_SOURCE_DIR) + "/" + rel; }

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<PreferencePair> load_pairs(const std::string& rel) {
  std::ifstream is(source_path(rel));
  if (!is) throw std::runtime_error("cannot open " + rel);
  return read_pairs_jsonl(is);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), kRelErrFloor});
}

// ---------------------------------------------------------------------------

Outcome gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_at;
  std::size_t configs = 0;
  std::size_t points = 0;
  for (LossKind kind : {LossKind::dpo, LossKind::lpo, LossKind::lpo_ste}) {
    for (double beta : {0.1, 0.2, 0.5}) {
      for (double lambda : {0.0, 10.0}) {
        for (double r2 : {0.05, 0.5, 1.0, 3.0}) {
          GradcheckSettings s;
          s.kind = kind;
          s.params.beta = beta;
          s.params.lambda = lambda;
          s.params.r2 = r2;
          s.points = 1000;
          s.seed = configs;
          const GradcheckResult r = run_gradcheck(s);
          points += r.rows.size();
          ++configs;
          if (r.worst_rel > worst) {
            worst = r.worst_rel;
            worst_at = fmt("%s beta=%g lambda=%g r2=%g", std::string(to_string(kind)).c_str(),
                           beta, lambda, r2);
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && points == 72000 && secs < 10.0,
          fmt("%zu configs, %zu points, worst rel_err %.3g (%s), %.2fs", configs, points, worst,
              worst_at.c_str(), secs)};
}

// -log sigmoid(beta*log u1 - beta*log u2), written independently of the library.
double ratio_space_value(double u1, double u2, double beta) {
  const double z = beta * (std::log(u1) - std::log(u2));
  return std::log1p(std::exp(-z));
}

Outcome ratio_law() {
  const auto t0 = std::chrono::steady_clock::now();
  CounterRng rng(2);
  double worst_fd = 0.0;
  double worst_closed = 0.0;
  for (int k = 0; k < 500; ++k) {
    const double u1 = 0.01 + 0.99 * rng.uniform();
    const double u2 = 0.01 + 0.99 * rng.uniform();
    const double beta = 0.05 + 0.95 * rng.uniform();
    const std::array<double, 2> at{u1, u2};
    const auto fd = finite_difference(
        [beta](std::span<const double> u) { return ratio_space_value(u[0], u[1], beta); }, at,
        1e-6 * std::min(u1, u2));
    worst_fd = std::max(worst_fd, rel_err(std::fabs(fd[0] / fd[1]), u2 / u1));
    const RatioSpaceGradients g = dpo_ratio_space_gradients(u1, u2, beta);
    worst_closed = std::max(worst_closed, rel_err(std::fabs(g.grad_u1 / g.grad_u2), u2 / u1));
    worst_closed = std::max(worst_closed, rel_err(g.ratio, u2 / u1));
  }
  const double secs = seconds_since(t0);
  const double worst = std::max(worst_fd, worst_closed);
  return {worst <= 1e-4 && secs < 5.0,
          fmt("500 triples, worst rel_err fd %.3g, closed form %.3g, %.3fs", worst_fd,
              worst_closed, secs)};
}

Outcome gradient_ratio_constancy() {
  bool ok = true;
  std::string detail;
  CounterRng rng(3);
  for (double beta : {0.1, 0.2, 0.5}) {
    for (double lambda : {0.0, 10.0}) {
      LossParams p;
      p.beta = beta;
      p.lambda = lambda;
      const double off = p.offset();
      const double expected_neg = -(2.0 * beta + lambda) / (2.0 * beta);
      const double expected_pos_d_neg_x1 = -(2.0 * beta - lambda) / (2.0 * beta);
      for (int sd : {1, -1}) {
        for (int sx : {1, -1}) {
          double first = 0.0;
          bool same = true;
          double worst_fd = 0.0;
          int drawn = 0;
          while (drawn < 100) {
            const double x1 = sx * (0.01 + 3.0 * rng.uniform());
            const double dmag = 0.01 + 3.0 * rng.uniform();
            const double x2 = x1 - off - sd * dmag;  // d = sd * dmag
            const MarginPair m{x1, x2};
            const double ratio = lpo_gradient_ratio(m, p);
            if (drawn == 0) first = ratio;
            same = same && ratio == first;
            const auto fd = numeric_loss_gradient(LossKind::lpo, m, p, 1e-4);
            worst_fd = std::max(worst_fd, rel_err(fd.first / fd.second, ratio));
            ++drawn;
          }
          double expected = -1.0;
          if (sx < 0) expected = sd < 0 ? expected_neg : expected_pos_d_neg_x1;
          const bool region_ok = same && std::fabs(first - expected) <= 1e-12 && worst_fd <= 1e-6;
          if (!region_ok) {
            ok = false;
            detail += fmt(" [beta=%g lambda=%g sd=%d sx=%d ratio=%.17g expected=%.17g fd=%.3g]",
                          beta, lambda, sd, sx, first, expected, worst_fd);
          }
        }
      }
    }
  }
  if (ok) detail = "4 regions x 6 (beta, lambda), 100 points each, constant and on formula";
  return {ok, detail};
}

Outcome ste_isolation() {
  CounterRng rng(4);
  std::size_t nonzero_autodiff = 0;
  double min_fd = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 100; ++k) {
    LossParams p;
    p.beta = 0.2;
    p.lambda = 10.0;
    p.r2 = 0.5;
    const double x1 = -3.0 + 6.0 * rng.uniform();
    const double x2 = -3.0 + 6.0 * rng.uniform();
    if (near_kink(std::array{x1 - x2 - p.offset(), x1})) {
      --k;
      continue;
    }
    ad::Graph g;
    const ad::Var v1 = g.leaf(x1);
    const ad::Var v2 = g.leaf(x2);
    const SteNodes n = build_lpo_ste(v1, v2, p);
    g.backward(n.chosen_path);
    if (g.grad(v2) != 0.0) ++nonzero_autodiff;
    g.zero_grad();
    g.backward(n.rejected_path);
    if (g.grad(v1) != 0.0) ++nonzero_autodiff;
    // The blocked operand still moves the value.
    const std::array<double, 1> at2{x2};
    const auto d1 = finite_difference(
        [&](std::span<const double> u) {
          return lpo_ste_split_value(x1, x2, x1, u[0], p).chosen_path;
        },
        at2, 1e-4);
    const std::array<double, 1> at1{x1};
    const auto d2 = finite_difference(
        [&](std::span<const double> u) {
          return lpo_ste_split_value(x1, x2, u[0], x2, p).rejected_path;
        },
        at1, 1e-4);
    min_fd = std::min({min_fd, std::fabs(d1[0]), std::fabs(d2[0])});
  }
  return {nonzero_autodiff == 0 && min_fd > 1e-3,
          fmt("100 points, %zu nonzero blocked gradients, min |fd| of values %.4g",
              nonzero_autodiff, min_fd)};
}

Outcome reduction_identity() {
  CounterRng rng(5);
  double worst_grad = 0.0;
  std::size_t value_mismatch = 0;
  for (int k = 0; k < 1000; ++k) {
    LossParams p;
    p.beta = std::array{0.1, 0.2, 0.5}[k % 3];
    p.lambda = k % 2 == 0 ? 10.0 : 0.0;
    p.r1 = 1.0;
    p.r2 = 1.0;
    const MarginPair m{-3.0 + 6.0 * rng.uniform(), -3.0 + 6.0 * rng.uniform()};
    const LossBreakdown ste = lpo_ste_loss(m, p);
    const LossBreakdown lpo = lpo_loss(m, p);
    worst_grad = std::max({worst_grad, std::fabs(ste.grad_x1 - lpo.grad_x1),
                           std::fabs(ste.grad_x2 - lpo.grad_x2)});
    if (ste.total != 2.0 * lpo.total) ++value_mismatch;
  }
  return {worst_grad <= 1e-12 && value_mismatch == 0,
          fmt("1000 points, worst |grad diff| %.3g, %zu values differ from 2x", worst_grad,
              value_mismatch)};
}

Outcome controllability() {
  const auto t0 = std::chrono::steady_clock::now();
  SimConfig base;
  base.loss_kind = LossKind::lpo_ste;
  base.params.beta = 0.2;
  base.params.lambda = 10.0;
  base.params.r1 = 1.0;
  base.step_size = 0.01;
  base.steps = 200;
  const std::vector<double> r2{0.1, 0.4, 0.8, 1.0};
  const auto runs = r2_sweep(base, r2);
  bool ok = runs.size() == r2.size();
  std::string detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    detail += fmt("r2=%g x2=%.4f slope_x1=%.4g; ", runs[i].r2, runs[i].trace.terminal().x2,
                  runs[i].trace.slope_x1);
    if (i == 0) continue;
    ok = ok && runs[i].trace.terminal().x2 < runs[i - 1].trace.terminal().x2;
    ok = ok && runs[i].trace.slope_x1 <= runs[i - 1].trace.slope_x1;
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 1.0, detail + fmt("%.3fs", secs)};
}

Outcome gap_cap() {
  SimConfig lpo;
  lpo.loss_kind = LossKind::lpo;
  lpo.params.beta = 0.2;
  lpo.params.lambda = 10.0;
  lpo.step_size = 0.01;
  lpo.steps = 5000;
  const TracePoint end = simulate(lpo).terminal();
  const double off = lpo.params.offset();
  const double d = std::fabs(end.x1 - end.x2 - off);
  const double cap = 2.0 * lpo.step_size * 2.0 * lpo.params.beta;

  SimConfig dpo = lpo;
  dpo.loss_kind = LossKind::dpo;
  const TrajectoryTrace trace = simulate(dpo);
  std::size_t crossed = 0;
  bool found = false;
  for (const TracePoint& pt : trace.points) {
    if (pt.x1 - pt.x2 > off + 1.0) {
      crossed = pt.step;
      found = true;
      break;
    }
  }
  return {d <= cap && found,
          fmt("lpo |d| %.3g <= %.3g; dpo gap %.4f, passes %.2f at step %zu", d, cap,
              trace.terminal().x1 - trace.terminal().x2, off + 1.0, found ? crossed : 0)};
}

struct CoupledFixture {
  std::unique_ptr<Policy> reference;
  std::vector<PreferencePair> train;
  std::vector<PreferencePair> eval;

  CoupledFixture()
      : reference(load_policy_file(source_path("data/coupled/reference.ckpt"))),
        train(load_pairs("data/coupled/train.jsonl")),
        eval(load_pairs("data/coupled/eval.jsonl")) {}

  // Settings of the shipped training configs.
  static TrainConfig config(LossKind kind) {
    TrainConfig c;
    c.loss_kind = kind;
    c.params.beta = kind == LossKind::dpo ? 0.1 : 0.2;
    c.params.lambda = 10.0;
    c.lr = 20.0;
    c.batch_size = 8;
    c.epochs = 5;
    c.seed = 1;
    return c;
  }
};

Outcome coupled_case2() {
  const CoupledFixture f;
  const TrainConfig dc = CoupledFixture::config(LossKind::dpo);
  // Train-set metrics: epoch 5 is exactly 50 steps in.
  const TrainResult dpo = train(*f.reference, *f.reference, f.train, dc);
  const EpochMetrics& d0 = dpo.metrics.front();
  const EpochMetrics& d50 = dpo.metrics.at(5);
  std::vector<TracePoint> first50;
  for (const TracePoint& pt : dpo.trace.points) {
    if (pt.step <= 50) first50.push_back(pt);
  }
  const double sx1 = least_squares_slope(first50, 0, &TracePoint::x1);
  const double sx2 = least_squares_slope(first50, 0, &TracePoint::x2);
  const bool dpo_ok = dpo.steps == 50 && d50.mean_x1 < d0.mean_x1 && d50.mean_x2 < d0.mean_x2 &&
                      sx1 < 0.0 && sx2 < 0.0;

  const TrainResult lpo =
      train(*f.reference, *f.reference, f.train, CoupledFixture::config(LossKind::lpo), &f.eval);
  double min_delta = std::numeric_limits<double>::infinity();
  for (const EpochMetrics& m : lpo.metrics) min_delta = std::min(min_delta, m.chosen_logprob_delta);
  return {dpo_ok && min_delta >= -0.05,
          fmt("dpo after 50 steps: x1 %.4f -> %.4f, x2 %.4f -> %.4f, batch slopes %.3g / %.3g; "
              "lpo min chosen delta %.4f",
              d0.mean_x1, d50.mean_x1, d0.mean_x2, d50.mean_x2, sx1, sx2, min_delta)};
}

Outcome multi_epoch_ordering() {
  const CoupledFixture f;
  const TrainResult lpo =
      train(*f.reference, *f.reference, f.train, CoupledFixture::config(LossKind::lpo), &f.eval);
  const TrainResult dpo =
      train(*f.reference, *f.reference, f.train, CoupledFixture::config(LossKind::dpo), &f.eval);
  bool lpo_ok = lpo.metrics.size() == 6;
  for (std::size_t e = 2; e <= 3 && lpo_ok; ++e) {
    lpo_ok = lpo.metrics[e].pref_accuracy >= lpo.metrics[e - 1].pref_accuracy;
  }
  std::size_t best = 1;
  for (std::size_t e = 1; e < dpo.metrics.size(); ++e) {
    if (dpo.metrics[e].pref_accuracy > dpo.metrics[best].pref_accuracy) best = e;
  }
  std::string acc = "lpo";
  for (std::size_t e = 1; e < lpo.metrics.size(); ++e) acc += fmt(" %.3f", lpo.metrics[e].pref_accuracy);
  acc += "; dpo";
  for (std::size_t e = 1; e < dpo.metrics.size(); ++e) acc += fmt(" %.3f", dpo.metrics[e].pref_accuracy);
  const std::size_t final_epoch = dpo.metrics.size() - 1;
  return {lpo_ok && best < final_epoch,
          acc + fmt("; dpo best epoch %zu of %zu", best, final_epoch)};
}

Outcome pair_builders() {
  const std::string dir = "tests/data/lppc/";
  const auto sft = load_policy_file(source_path(dir + "sft.ckpt"));
  std::ifstream ex(source_path(dir + "examples.jsonl"));
  const std::vector<Example> examples = read_examples_jsonl(ex);
  const std::string golden = read_file(source_path(dir + "golden.jsonl"));
  LppcConfig lc;
  lc.seed = 2024;
  bool golden_ok = true;
  for (Execution e : {Execution::serial, Execution::parallel, Execution::parallel}) {
    std::ostringstream os;
    write_pairs_jsonl(os, build_lppc(examples, *sft, lc, e).pairs);
    golden_ok = golden_ok && os.str() == golden;
  }

  std::ifstream corpus(source_path("data/corpus/sentences_10k.jsonl"));
  const std::vector<Example> sentences = read_examples_jsonl(corpus);
  bool shape_ok = sentences.size() == 10000;
  for (const Example& s : sentences) shape_ok = shape_ok && s.response.size() == 11;
  PerturbationConfig pc;
  pc.eta = 0.1;
  const BuildResult r = build_perturbed(sentences, Vocab::numbered(16), pc);
  std::size_t same = 0;
  for (const PreferencePair& p : r.pairs) same += p.chosen == p.rejected ? 1 : 0;
  const double mean = r.stats.mean_edits;
  return {golden_ok && shape_ok && mean >= 0.9 && mean <= 1.1 && same == 0,
          fmt("lppc golden %s; %zu sentences, mean edits %.4f, %zu emitted, %zu chosen==rejected",
              golden_ok ? "identical" : "DIFFERS", sentences.size(), mean, r.pairs.size(), same)};
}

Outcome sampler_fidelity() {
  const Vocab vocab = Vocab::numbered(8);
  const TabularPolicy policy(vocab, {1, 17, 1.2});
  const Tokens prompt{3};
  std::vector<double> z(vocab.size());
  policy.logits(prompt, z);
  double norm = 0.0;
  for (double v : z) norm += std::exp(v);
  constexpr std::size_t kDraws = 100000;
  std::vector<std::size_t> counts(vocab.size(), 0);
  const SamplingParams params{1.0, 1.0, 1};
  for (std::size_t k = 0; k < kDraws; ++k) {
    ++counts[static_cast<std::size_t>(sample(policy, prompt, params, k).tokens.at(0))];
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double expected = kDraws * std::exp(z[i]) / norm;
    stat += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  const boost::math::chi_squared dist(static_cast<double>(z.size() - 1));
  const double p_value = boost::math::cdf(boost::math::complement(dist, stat));
  return {p_value > 0.01,
          fmt("%zu draws over %zu tokens, chi2 %.3f, p-value %.4f", kDraws, z.size(), stat,
              p_value)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"ratio-space gradient law", ratio_law},
      {"lpo gradient ratio constancy", gradient_ratio_constancy},
      {"straight-through isolation", ste_isolation},
      {"reduction identity", reduction_identity},
      {"r2 controllability", controllability},
      {"gap cap vs unbounded gap", gap_cap},
      {"coupled fixture case 2", coupled_case2},
      {"multi-epoch ordering", multi_epoch_ordering},
      {"pair builders", pair_builders},
      {"sampler fidelity", sampler_fidelity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
