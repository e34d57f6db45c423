#include "lpo/dynamics.hpp"

#include <cmath>
#include <ostream>
#include <set>
#include <string>

#include "lpo/csv.hpp"
#include "lpo/errors.hpp"

namespace lpo {

void SimConfig::validate() const {
  params.validate();
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(step_size > 0.0) || step_size > 1.0) throw ConfigError("step_size must be in (0, 1]");
  if (record_every < 1) throw ConfigError("record_every must be >= 1");
  if (!std::isfinite(x1_init) || !std::isfinite(x2_init)) {
    throw ConfigError("initial state must be finite");
  }
}

TrajectoryTrace simulate(const SimConfig& config) {
  config.validate();
  TrajectoryTrace trace;
  MarginPair m{config.x1_init, config.x2_init};
  for (std::size_t step = 0;; ++step) {
    const LossBreakdown b = evaluate_loss(config.loss_kind, m, config.params);
    if (!std::isfinite(b.total) || !std::isfinite(b.grad_x1) || !std::isfinite(b.grad_x2)) {
      throw DivergenceError("non-finite loss at step " + std::to_string(step),
                            step == 0 ? 0 : step - 1);
    }
    if (step % config.record_every == 0 || step == config.steps) {
      trace.points.push_back({step, m.x1, m.x2, b.total});
    }
    if (step == config.steps) break;
    const MarginPair next{m.x1 - config.step_size * b.grad_x1,
                          m.x2 - config.step_size * b.grad_x2};
    if (!std::isfinite(next.x1) || !std::isfinite(next.x2)) {
      throw DivergenceError("state diverged after step " + std::to_string(step), step);
    }
    m = next;
  }
  trace.fit_terminal_slopes();
  return trace;
}

std::string_view to_string(TrendCase c) {
  switch (c) {
    case TrendCase::case1: return "case1";
    case TrendCase::case2: return "case2";
    case TrendCase::case3: return "case3";
    case TrendCase::stationary: return "stationary";
  }
  return "?";
}

TrendCase classify_slopes(double s1, double s2, double eps) {
  const int sg1 = s1 > eps ? 1 : (s1 < -eps ? -1 : 0);
  const int sg2 = s2 > eps ? 1 : (s2 < -eps ? -1 : 0);
  if (sg1 == 0 && sg2 == 0) return TrendCase::stationary;
  if (sg1 == 1 && sg2 == -1) return TrendCase::case1;
  if (sg1 == -1 && sg2 == -1 && std::fabs(s1) < std::fabs(s2)) return TrendCase::case2;
  if (sg1 == 1 && sg2 == 1 && s1 > s2) return TrendCase::case3;
  if (sg1 >= 0 && sg2 <= 0) return TrendCase::case1;
  if (sg1 <= 0 && sg2 <= 0) return TrendCase::case2;
  if (sg1 >= 0 && sg2 >= 0) return TrendCase::case3;
  return TrendCase::case2;
}

TrendCase classify_trend(const TrajectoryTrace& trace, double eps) {
  if (trace.points.size() < 8) {
    throw InsufficientDataError("trend classification needs at least 8 recorded points, got " +
                                std::to_string(trace.points.size()));
  }
  return classify_slopes(trace.slope_x1, trace.slope_x2, eps);
}

std::vector<SweepRun> r2_sweep(const SimConfig& base, std::span<const double> r2_values,
                               Execution exec) {
  std::set<double> seen;
  for (double r2 : r2_values) {
    if (!(r2 > 0.0)) throw ConfigError("r2 values must be positive");
    if (!seen.insert(r2).second) throw ConfigError("r2 values must be distinct");
  }
  std::vector<SweepRun> runs(r2_values.size());
  for_each_index(r2_values.size(), exec, [&](std::size_t i) {
    SimConfig c = base;
    c.params.r2 = r2_values[i];
    runs[i] = {r2_values[i], simulate(c)};
  });
  return runs;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRun>& runs) {
  write_csv_row(os, {"r2", "terminal_x1", "terminal_x2", "slope_x1", "slope_x2"});
  for (const SweepRun& r : runs) {
    write_csv_row(os, {format_double(r.r2), format_double(r.trace.terminal().x1),
                       format_double(r.trace.terminal().x2), format_double(r.trace.slope_x1),
                       format_double(r.trace.slope_x2)});
  }
}

}  // namespace lpo
