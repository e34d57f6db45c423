#include <omp.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cli.hpp"
#include "json.hpp"
#include "lpo/csv.hpp"
#include "lpo/digest.hpp"
#include "lpo/dynamics.hpp"
#include "lpo/errors.hpp"
#include "lpo/loss_oracle.hpp"
#include "lpo/pairs.hpp"
#include "lpo/policy.hpp"
#include "lpo/trainer.hpp"
#include "settings.hpp"

namespace lpo::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using Role = Settings::Role;

namespace {

// ---- shared helpers ---------------------------------------------------------

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Stopwatch {
 public:
  Stopwatch() : started_(utc_now()), t0_(std::chrono::steady_clock::now()) {}
  ordered_json timing() const {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    return {{"started_utc", started_}, {"finished_utc", utc_now()}, {"duration_seconds", secs}};
  }

 private:
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
};

// Short traces cannot be classified; they are reported rather than rejected.
std::string trend_label(const TrajectoryTrace& trace, double eps) {
  if (trace.points.size() < 8) return "insufficient-data";
  return std::string(to_string(classify_trend(trace, eps)));
}

ordered_json file_entry(const std::string& role, const std::string& path, const std::string& shown) {
  return {{"role", role}, {"path", shown}, {"sha256", sha256_file(path)}};
}

void write_manifest(const std::string& path, const std::string& command, const Settings& s,
                    ordered_json seeds, ordered_json inputs, ordered_json outputs,
                    ordered_json results, const Stopwatch& clock) {
  ordered_json m;
  m["format"] = "lpo-lab-manifest 1";
  m["command"] = command;
  m["config"] = s.snapshot();
  m["seeds"] = std::move(seeds);
  m["inputs"] = std::move(inputs);
  m["outputs"] = std::move(outputs);
  m["results"] = std::move(results);
  m["timing"] = clock.timing();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << m.dump(2) << '\n';
}

std::ofstream open_output(const std::string& path) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  return os;
}

std::ifstream open_input(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw UsageError(what + " '" + path + "' does not exist");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot read " + what + " '" + path + "'");
  return is;
}

/// Refuses a non-empty output directory unless forced.
void prepare_output_dir(const std::string& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw std::runtime_error("output path '" + dir + "' is not a directory");
    if (!fs::is_empty(dir) && !force) {
      throw std::runtime_error("output directory '" + dir + "' is not empty (use --force to overwrite)");
    }
  }
  fs::create_directories(dir);
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

std::string sci(double v) {
  std::ostringstream ss;
  ss << std::scientific << std::setprecision(3) << v;
  return ss.str();
}

void declare_loss(Settings& s, const std::string& default_loss, bool with_r2 = true) {
  s.declare("loss", default_loss, "loss: dpo | lpo | lpo_ste");
  s.declare("beta", "auto", "beta (auto: 0.1 for dpo, 0.2 otherwise)");
  s.declare("lambda", "10", "weight of the hinge on negative chosen margins");
  s.declare("r1", "1", "chosen-path coefficient of lpo_ste");
  if (with_r2) s.declare("r2", "1", "rejected-path coefficient of lpo_ste");
  s.declare("weighting", "quadratic", "lpo_ste coefficient placement: quadratic | linear");
}

double resolve_beta(const Settings& s, LossKind kind) {
  if (s.str("beta") == "auto") return kind == LossKind::dpo ? 0.1 : 0.2;
  return s.real("beta");
}

LossKind loss_kind(const Settings& s) {
  try {
    return parse_loss_kind(s.str("loss"));
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

LossParams loss_params(const Settings& s, LossKind kind, bool with_r2 = true) {
  LossParams p;
  p.beta = resolve_beta(s, kind);
  p.lambda = s.real("lambda");
  p.r1 = s.real("r1");
  if (with_r2) p.r2 = s.real("r2");
  try {
    p.weighting = parse_ste_weighting(s.str("weighting"));
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  p.validate();
  return p;
}

// ---- gradcheck ----------------------------------------------------------------

struct GradcheckCommand {
  explicit GradcheckCommand(CLI::App* app) : s(app) {
    s.declare("loss", "all", "dpo | lpo | lpo_ste | all");
    s.declare("beta", "auto", "beta (auto: 0.1 for dpo, 0.2 otherwise)");
    s.declare("lambda", "10", "hinge weight");
    s.declare("r1", "1", "chosen-path coefficient");
    s.declare("r2", "1", "rejected-path coefficient");
    s.declare("weighting", "quadratic", "quadratic | linear");
    s.declare("points", "1000", "off-kink points per loss");
    s.declare("seed", "0", "sampling seed");
    s.declare("tol", "1e-6", "relative error tolerance (> 0)");
    s.declare("fd_step", "1e-4", "finite-difference step");
    s.declare("range", "3", "coordinates drawn from [-range, range]");
    s.declare_flag("diagonal", "sample points with x1 = x2");
    s.declare("out", "", "CSV table of every checked point", Role::path);
    s.declare("manifest", "", "run manifest path", Role::path);
  }

  int run(std::ostream& out, std::ostream& err) {
    s.resolve();
    Stopwatch clock;
    const double tol = s.real("tol");
    if (!(tol > 0.0) || !std::isfinite(tol)) throw UsageError("--tol must be a positive number");
    const double h = s.real("fd_step");
    if (!(h > 0.0)) throw UsageError("--fd-step must be positive");
    const std::size_t points = s.count("points");
    if (points < 1) throw UsageError("--points must be >= 1");

    std::vector<LossKind> kinds;
    if (s.str("loss") == "all") {
      kinds = {LossKind::dpo, LossKind::lpo, LossKind::lpo_ste};
    } else {
      kinds = {loss_kind(s)};
    }

    std::ofstream csv;
    if (s.has("out")) {
      csv = open_output(s.str("out"));
      write_csv_row(csv, {"loss", "index", "x1", "x2", "analytic_x1", "numeric_x1", "rel_err_x1",
                          "analytic_x2", "numeric_x2", "rel_err_x2"});
    }

    bool all_pass = true;
    ordered_json results = ordered_json::object();
    for (LossKind kind : kinds) {
      GradcheckSettings g;
      g.kind = kind;
      g.params = loss_params(s, kind);
      g.points = points;
      g.seed = s.u64("seed");
      g.h = h;
      g.range = s.real("range");
      g.diagonal = s.flag("diagonal");
      const GradcheckResult r = run_gradcheck(g);
      const bool pass = r.worst_rel <= tol;
      all_pass = all_pass && pass;
      out << std::left << std::setw(8) << to_string(kind) << " points=" << r.rows.size()
          << " excluded=" << r.excluded << " worst_rel_err=" << sci(r.worst_rel) << ' '
          << (pass ? "PASS" : "FAIL") << '\n';
      if (!pass) {
        const GradcheckRow& w = r.rows[r.worst_index];
        const bool x1_worse = w.x1.rel_err >= w.x2.rel_err;
        const GradReport& rep = x1_worse ? w.x1 : w.x2;
        err << "worst offender (" << to_string(kind) << "): point " << r.worst_index << " at x1="
            << format_double(w.point.x1) << " x2=" << format_double(w.point.x2) << ", d/d"
            << (x1_worse ? "x1" : "x2") << " analytic=" << format_double(rep.analytic)
            << " numeric=" << format_double(rep.numeric) << " rel_err=" << sci(rep.rel_err) << '\n';
      }
      if (csv.is_open()) {
        for (std::size_t i = 0; i < r.rows.size(); ++i) {
          const GradcheckRow& row = r.rows[i];
          write_csv_row(csv, {std::string(to_string(kind)), std::to_string(i), format_double(row.point.x1),
                              format_double(row.point.x2), format_double(row.x1.analytic),
                              format_double(row.x1.numeric), format_double(row.x1.rel_err),
                              format_double(row.x2.analytic), format_double(row.x2.numeric),
                              format_double(row.x2.rel_err)});
        }
      }
      results[std::string(to_string(kind))] = {{"points", r.rows.size()},
                                               {"excluded", r.excluded},
                                               {"worst_rel_err", r.worst_rel},
                                               {"pass", pass}};
    }
    if (csv.is_open()) csv.close();
    if (s.has("manifest")) {
      ordered_json outputs = ordered_json::array();
      if (s.has("out")) outputs.push_back(file_entry("table", s.str("out"), s.str("out")));
      write_manifest(s.str("manifest"), "gradcheck", s, {{"seed", s.u64("seed")}}, ordered_json::array(),
                     outputs, results, clock);
    }
    return all_pass ? kExitOk : kExitFailure;
  }

  Settings s;
};

// ---- simulate / sweep -------------------------------------------------------

void declare_sim(Settings& s) {
  s.declare("x1", "0", "initial x1");
  s.declare("x2", "0", "initial x2");
  s.declare("step_size", "0.01", "gradient-descent step size, in (0, 1]");
  s.declare("steps", "200", "number of steps");
  s.declare("record_every", "1", "record every n-th step");
  s.declare("eps", "1e-4", "slope dead-band for the trend classification");
}

SimConfig sim_config(const Settings& s, bool with_r2) {
  SimConfig c;
  c.loss_kind = loss_kind(s);
  c.params = loss_params(s, c.loss_kind, with_r2);
  c.x1_init = s.real("x1");
  c.x2_init = s.real("x2");
  c.step_size = s.real("step_size");
  c.steps = s.count("steps");
  c.record_every = s.count("record_every");
  c.validate();
  return c;
}

struct SimulateCommand {
  explicit SimulateCommand(CLI::App* app) : s(app) {
    declare_loss(s, "lpo");
    declare_sim(s);
    s.declare("out", "trace.csv", "trace CSV path", Role::path);
    s.declare("manifest", "", "run manifest path", Role::path);
  }

  int run(std::ostream& out, std::ostream&) {
    s.resolve();
    Stopwatch clock;
    const SimConfig c = sim_config(s, true);
    const TrajectoryTrace trace = simulate(c);
    {
      std::ofstream os = open_output(s.str("out"));
      write_trace_csv(os, trace);
    }
    const std::string trend = trend_label(trace, s.real("eps"));
    const TracePoint& t = trace.terminal();
    out << "loss: " << to_string(c.loss_kind) << '\n'
        << "terminal: step=" << t.step << " x1=" << fixed(t.x1) << " x2=" << fixed(t.x2)
        << " loss=" << fixed(t.loss) << '\n'
        << "slopes: x1=" << sci(trace.slope_x1) << " x2=" << sci(trace.slope_x2) << '\n'
        << "trend: " << trend << '\n';
    if (s.has("manifest")) {
      write_manifest(s.str("manifest"), "simulate", s, ordered_json::object(), ordered_json::array(),
                     {file_entry("trace", s.str("out"), s.str("out"))},
                     {{"trend", trend}, {"terminal_x1", t.x1}, {"terminal_x2", t.x2}}, clock);
    }
    return kExitOk;
  }

  Settings s;
};

struct SweepCommand {
  explicit SweepCommand(CLI::App* app) : s(app) {
    declare_loss(s, "lpo_ste", false);
    s.declare("r2", "0.1,0.4,0.8,1.0", "comma-separated r2 values");
    declare_sim(s);
    s.declare("out", "sweep", "output directory", Role::path);
    s.declare_flag("force", "overwrite a non-empty output directory", Role::path);
  }

  int run(std::ostream& out, std::ostream&) {
    s.resolve();
    Stopwatch clock;
    const SimConfig base = sim_config(s, false);
    const std::vector<double> r2 = s.reals("r2");
    const std::vector<SweepRun> runs = r2_sweep(base, r2);

    const std::string dir = s.str("out");
    prepare_output_dir(dir, s.flag("force"));
    ordered_json outputs = ordered_json::array();
    ordered_json per_run = ordered_json::array();
    out << "r2        terminal_x1  terminal_x2  slope_x1     slope_x2     trend\n";
    for (const SweepRun& run : runs) {
      const std::string name = "trace_r2_" + format_double(run.r2) + ".csv";
      const std::string path = (fs::path(dir) / name).string();
      {
        std::ofstream os = open_output(path);
        write_trace_csv(os, run.trace);
      }
      outputs.push_back(file_entry("trace", path, name));
      const std::string trend = trend_label(run.trace, s.real("eps"));
      const TracePoint& t = run.trace.terminal();
      out << std::left << std::setw(10) << format_double(run.r2) << std::setw(13) << fixed(t.x1)
          << std::setw(13) << fixed(t.x2) << std::setw(13) << sci(run.trace.slope_x1) << std::setw(13)
          << sci(run.trace.slope_x2) << trend << '\n';
      per_run.push_back({{"r2", run.r2}, {"trend", trend}});
    }
    const std::string summary = (fs::path(dir) / "summary.csv").string();
    {
      std::ofstream os = open_output(summary);
      write_sweep_csv(os, runs);
    }
    outputs.push_back(file_entry("summary", summary, "summary.csv"));

    bool x2_decreasing = true;
    bool slope_x1_nonincreasing = true;
    std::vector<const SweepRun*> by_r2;
    for (const SweepRun& r : runs) by_r2.push_back(&r);
    std::sort(by_r2.begin(), by_r2.end(), [](auto* a, auto* b) { return a->r2 < b->r2; });
    for (std::size_t i = 1; i < by_r2.size(); ++i) {
      x2_decreasing = x2_decreasing && by_r2[i]->trace.terminal().x2 < by_r2[i - 1]->trace.terminal().x2;
      slope_x1_nonincreasing = slope_x1_nonincreasing && by_r2[i]->trace.slope_x1 <= by_r2[i - 1]->trace.slope_x1;
    }
    out << "terminal x2 strictly decreasing in r2: " << (x2_decreasing ? "yes" : "no") << '\n'
        << "slope_x1 non-increasing in r2: " << (slope_x1_nonincreasing ? "yes" : "no") << '\n';
    write_manifest((fs::path(dir) / "manifest.json").string(), "sweep", s, ordered_json::object(),
                   ordered_json::array(), outputs,
                   {{"runs", per_run},
                    {"terminal_x2_decreasing", x2_decreasing},
                    {"slope_x1_nonincreasing", slope_x1_nonincreasing}},
                   clock);
    return kExitOk;
  }

  Settings s;
};

// ---- build-pairs --------------------------------------------------------------

struct BuildPairsCommand {
  explicit BuildPairsCommand(CLI::App* app) : s(app) {
    s.declare("method", "lppc", "lppc | perturb | triple");
    s.declare("input", std::nullopt, "examples JSONL ({\"prompt\": [...], \"response\": [...]})", Role::path);
    s.declare("model", "", "policy checkpoint (required for lppc and triple)", Role::path);
    s.declare("vocab_size", "", "vocabulary size for perturb when no model is given");
    s.declare("out", std::nullopt, "output pairs JSONL", Role::path);
    s.declare("seed", "0", "seed");
    s.declare("eta", "0.1", "per-token edit probability (perturb)");
    s.declare("weights", "1,1,1", "insertion,deletion,repetition weights (normalized)");
    s.declare("temperature", "1", "sampling temperature (lppc, triple)");
    s.declare("top_p", "1", "nucleus mass (lppc, triple)");
    s.declare("max_len", "32", "sample length cap (lppc, triple)");
    s.declare("retry_budget", "8", "attempts per prompt (lppc)");
    s.declare("manifest", "", "run manifest path", Role::path);
  }

  int run(std::ostream& out, std::ostream& err) {
    s.resolve();
    Stopwatch clock;
    const std::string method = s.str("method");
    if (method != "lppc" && method != "perturb" && method != "triple") {
      throw UsageError("--method must be lppc, perturb or triple");
    }
    std::vector<Example> examples;
    {
      std::ifstream is = open_input(s.str("input"), "input file");
      examples = read_examples_jsonl(is);
    }
    ordered_json inputs = ordered_json::array();
    inputs.push_back(file_entry("examples", s.str("input"), s.str("input")));

    std::unique_ptr<Policy> model;
    if (s.has("model")) {
      if (!fs::is_regular_file(s.str("model"))) throw UsageError("model '" + s.str("model") + "' does not exist");
      model = load_policy_file(s.str("model"));
      inputs.push_back(file_entry("model", s.str("model"), s.str("model")));
    }

    BuildResult result;
    if (method == "perturb") {
      PerturbationConfig pc;
      pc.eta = s.real("eta");
      const std::vector<double> w = s.reals("weights");
      if (w.size() != 3) throw UsageError("--weights needs three values");
      const double total = w[0] + w[1] + w[2];
      if (!(w[0] >= 0 && w[1] >= 0 && w[2] >= 0) || !(total > 0.0)) {
        throw UsageError("--weights must be non-negative with a positive sum");
      }
      pc.weights = {w[0] / total, w[1] / total, w[2] / total};
      pc.seed = s.u64("seed");
      pc.validate();
      std::optional<Vocab> vocab;
      if (model) {
        vocab = model->vocab();
      } else if (s.has("vocab_size")) {
        vocab = Vocab::numbered(s.count("vocab_size"));
      } else {
        throw UsageError("perturb needs --model or --vocab-size");
      }
      result = build_perturbed(examples, *vocab, pc);
    } else {
      if (!model) throw UsageError(method + " needs --model");
      LppcConfig lc;
      lc.seed = s.u64("seed");
      lc.sampling = {s.real("temperature"), s.real("top_p"), s.count("max_len")};
      lc.sampling.validate();
      lc.retry_budget = s.count("retry_budget");
      result = method == "lppc" ? build_lppc(examples, *model, lc) : triple_candidates(examples, *model, lc);
    }

    {
      std::ofstream os = open_output(s.str("out"));
      write_pairs_jsonl(os, result.pairs);
    }
    for (const std::string& w : result.stats.warnings) err << "warning: " << w << '\n';
    const BuildStats& st = result.stats;
    const std::string digest = sha256_file(s.str("out"));
    out << "method: " << method << '\n'
        << "inputs: " << st.inputs << '\n'
        << "pairs emitted: " << st.emitted << '\n'
        << "dropped identical: " << st.dropped_identical << '\n'
        << "dropped truncated: " << st.dropped_truncated << '\n'
        << "dropped duplicate: " << st.dropped_duplicate << '\n';
    if (method == "perturb") out << "mean edits: " << fixed(st.mean_edits, 4) << '\n';
    out << "warnings: " << st.warnings.size() << '\n' << "output sha256: " << digest << '\n';

    if (s.has("manifest")) {
      write_manifest(s.str("manifest"), "build-pairs", s, {{"seed", s.u64("seed")}}, inputs,
                     {file_entry("pairs", s.str("out"), s.str("out"))},
                     {{"inputs", st.inputs},
                      {"emitted", st.emitted},
                      {"dropped_identical", st.dropped_identical},
                      {"dropped_truncated", st.dropped_truncated},
                      {"dropped_duplicate", st.dropped_duplicate},
                      {"mean_edits", st.mean_edits}},
                     clock);
    }
    return kExitOk;
  }

  Settings s;
};

// ---- train --------------------------------------------------------------------

std::vector<PreferencePair> load_pairs(const std::string& path, const std::string& what) {
  std::ifstream is = open_input(path, what);
  return read_pairs_jsonl(is);
}

struct TrainCommand {
  explicit TrainCommand(CLI::App* app) : s(app) {
    s.declare("pairs", std::nullopt, "training pairs JSONL", Role::path);
    s.declare("eval_pairs", "", "held-out pairs JSONL for epoch metrics (default: training pairs)",
              Role::path);
    s.declare("init", std::nullopt, "initial policy checkpoint", Role::path);
    s.declare("reference", "", "reference checkpoint (default: frozen copy of --init)", Role::path);
    declare_loss(s, "lpo");
    s.declare("lr", "0.01", "learning rate");
    s.declare("batch_size", "8", "pairs per step");
    s.declare("epochs", "3", "passes over the training pairs");
    s.declare("seed", "0", "shuffle seed");
    s.declare("eval_every", "1", "steps between trajectory samples");
    s.declare("momentum", "0", "heavy-ball momentum (0 is plain SGD)");
    s.declare("out", std::nullopt, "output directory", Role::path);
    s.declare_flag("force", "overwrite a non-empty output directory", Role::path);
  }

  int run(std::ostream& out, std::ostream&) {
    s.resolve();
    Stopwatch clock;
    TrainConfig c;
    c.loss_kind = loss_kind(s);
    c.params = loss_params(s, c.loss_kind);
    c.lr = s.real("lr");
    c.batch_size = s.count("batch_size");
    c.epochs = s.count("epochs");
    c.seed = s.u64("seed");
    c.eval_every = s.count("eval_every");
    c.momentum = s.real("momentum");
    c.validate();

    const std::vector<PreferencePair> pairs = load_pairs(s.str("pairs"), "pairs file");
    std::vector<PreferencePair> eval;
    if (s.has("eval_pairs")) eval = load_pairs(s.str("eval_pairs"), "eval pairs file");
    if (!fs::is_regular_file(s.str("init"))) throw UsageError("checkpoint '" + s.str("init") + "' does not exist");
    const std::unique_ptr<Policy> init = load_policy_file(s.str("init"));
    std::unique_ptr<Policy> ref;
    if (s.has("reference")) {
      if (!fs::is_regular_file(s.str("reference"))) {
        throw UsageError("checkpoint '" + s.str("reference") + "' does not exist");
      }
      ref = load_policy_file(s.str("reference"));
    } else {
      ref = init->clone();
    }

    const std::string dir = s.str("out");
    prepare_output_dir(dir, s.flag("force"));
    const TrainResult r = train(*init, *ref, pairs, c, s.has("eval_pairs") ? &eval : nullptr);

    const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
    save_policy_file(*r.policy, path("policy.ckpt"));
    {
      std::ofstream os = open_output(path("metrics.csv"));
      write_metrics_csv(os, r.metrics);
    }
    {
      std::ofstream os = open_output(path("trace.csv"));
      write_trace_csv(os, r.trace);
    }

    out << "epoch  mean_x1     mean_x2     mean_loss   pref_acc  chosen_delta\n";
    for (const EpochMetrics& m : r.metrics) {
      out << std::left << std::setw(7) << m.epoch << std::setw(12) << fixed(m.mean_x1, 5) << std::setw(12)
          << fixed(m.mean_x2, 5) << std::setw(12) << fixed(m.mean_loss, 5) << std::setw(10)
          << fixed(m.pref_accuracy, 4) << fixed(m.chosen_logprob_delta, 5) << '\n';
    }
    out << "steps: " << r.steps << "\ndata order sha256: " << r.data_order_digest << '\n';

    ordered_json inputs = ordered_json::array();
    inputs.push_back(file_entry("pairs", s.str("pairs"), s.str("pairs")));
    if (s.has("eval_pairs")) inputs.push_back(file_entry("eval_pairs", s.str("eval_pairs"), s.str("eval_pairs")));
    inputs.push_back(file_entry("init", s.str("init"), s.str("init")));
    if (s.has("reference")) inputs.push_back(file_entry("reference", s.str("reference"), s.str("reference")));
    ordered_json outputs = ordered_json::array();
    outputs.push_back(file_entry("policy", path("policy.ckpt"), "policy.ckpt"));
    outputs.push_back(file_entry("metrics", path("metrics.csv"), "metrics.csv"));
    outputs.push_back(file_entry("trace", path("trace.csv"), "trace.csv"));
    write_manifest(path("manifest.json"), "train", s,
                   {{"seed", c.seed}, {"shuffle", "derive_seed(seed, \"shuffle\", epoch)"}}, inputs,
                   outputs,
                   {{"steps", r.steps},
                    {"data_order_sha256", r.data_order_digest},
                    {"resolved_beta", c.params.beta}},
                   clock);
    return kExitOk;
  }

  Settings s;
};

// ---- report -------------------------------------------------------------------

struct RunRecord {
  std::string dir;
  std::string label;
  ordered_json manifest;
  std::vector<EpochMetrics> metrics;
};

RunRecord load_run(const std::string& dir) {
  RunRecord r;
  r.dir = dir;
  {
    std::ifstream is = open_input((fs::path(dir) / "manifest.json").string(), "manifest");
    r.manifest = ordered_json::parse(is);
  }
  if (r.manifest.value("command", "") != "train") {
    throw UsageError("'" + dir + "' is not a train run directory");
  }
  {
    std::ifstream is = open_input((fs::path(dir) / "metrics.csv").string(), "metrics file");
    r.metrics = read_metrics_csv(is);
  }
  const ordered_json& cfg = r.manifest["config"];
  r.label = fs::path(dir).filename().string() + " (" + cfg.value("loss", "?") + ")";
  return r;
}

std::string table_row(const std::vector<std::string>& cells) {
  std::string line = "|";
  for (const std::string& c : cells) line += " " + c + " |";
  return line + "\n";
}

struct ReportCommand {
  explicit ReportCommand(CLI::App* app) {
    app->add_option("runs", runs, "train output directories")->required();
    app->add_option("--out", out_path, "Markdown output (default: stdout)");
  }

  int run(std::ostream& out, std::ostream&) {
    std::vector<RunRecord> records;
    for (const std::string& d : runs) records.push_back(load_run(d));

    std::ostringstream md;
    md << "# Training report\n\n";
    for (const RunRecord& r : records) {
      const ordered_json& cfg = r.manifest["config"];
      md << "## " << r.label << "\n\n";
      md << "loss `" << cfg.value("loss", "") << "`, beta `"
         << r.manifest["results"].value("resolved_beta", 0.0) << "`, lambda `" << cfg.value("lambda", "")
         << "`, r1 `" << cfg.value("r1", "") << "`, r2 `" << cfg.value("r2", "") << "`, lr `"
         << cfg.value("lr", "") << "`, batch `" << cfg.value("batch_size", "") << "`, epochs `"
         << cfg.value("epochs", "") << "`, seed `" << cfg.value("seed", "") << "`\n\n";
      md << table_row({"epoch", "mean_x1", "mean_x2", "mean_loss", "pref_accuracy", "chosen_logprob_delta"});
      md << table_row({"---:", "---:", "---:", "---:", "---:", "---:"});
      for (const EpochMetrics& m : r.metrics) {
        md << table_row({std::to_string(m.epoch), fixed(m.mean_x1, 4), fixed(m.mean_x2, 4),
                         fixed(m.mean_loss, 4), fixed(m.pref_accuracy, 4),
                         fixed(m.chosen_logprob_delta, 4)});
      }
      md << '\n';
    }

    const auto side_by_side = [&](const std::string& title, double EpochMetrics::*field) {
      std::map<std::size_t, std::vector<std::string>> rows;
      for (std::size_t k = 0; k < records.size(); ++k) {
        for (const EpochMetrics& m : records[k].metrics) {
          auto& row = rows[m.epoch];
          row.resize(records.size(), "n/a");
          row[k] = fixed(m.*field, 4);
        }
      }
      std::vector<std::string> header{"epoch"};
      std::vector<std::string> align{"---:"};
      for (const RunRecord& r : records) {
        header.push_back(r.label);
        align.push_back("---:");
      }
      md << "## " << title << " by epoch\n\n" << table_row(header) << table_row(align);
      for (auto& [epoch, cells] : rows) {
        cells.resize(records.size(), "n/a");
        std::vector<std::string> line{std::to_string(epoch)};
        line.insert(line.end(), cells.begin(), cells.end());
        md << table_row(line);
      }
      md << '\n';
    };
    if (records.size() > 1) {
      side_by_side("pref_accuracy", &EpochMetrics::pref_accuracy);
      side_by_side("mean_x1", &EpochMetrics::mean_x1);
      side_by_side("mean_x2", &EpochMetrics::mean_x2);
    }

    if (out_path.empty()) {
      out << md.str();
    } else {
      std::ofstream os = open_output(out_path);
      os << md.str();
    }
    return kExitOk;
  }

  std::vector<std::string> runs;
  std::string out_path;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Preference-optimization loss laboratory", "lpo_lab"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0: runtime default)");

  CLI::App* gc = app.add_subcommand("gradcheck", "check analytic loss gradients against finite differences");
  CLI::App* sim = app.add_subcommand("simulate", "gradient descent on a free margin pair");
  CLI::App* sw = app.add_subcommand("sweep", "simulate once per r2 value");
  CLI::App* bp = app.add_subcommand("build-pairs", "construct preference pairs");
  CLI::App* tr = app.add_subcommand("train", "train a policy on preference pairs");
  CLI::App* rp = app.add_subcommand("report", "Markdown tables from one or more train runs");

  GradcheckCommand gradcheck(gc);
  SimulateCommand simulate_cmd(sim);
  SweepCommand sweep(sw);
  BuildPairsCommand build_pairs(bp);
  TrainCommand train_cmd(tr);
  ReportCommand report(rp);

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (gc->parsed()) return gradcheck.run(out, err);
    if (sim->parsed()) return simulate_cmd.run(out, err);
    if (sw->parsed()) return sweep.run(out, err);
    if (bp->parsed()) return build_pairs.run(out, err);
    if (tr->parsed()) return train_cmd.run(out, err);
    if (rp->parsed()) return report.run(out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << " (last finite step " << e.last_valid_step() << ")\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace lpo::cli
