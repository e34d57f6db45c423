#pragma once

// Gradient descent on a free margin pair (x1, x2) under any loss in the zoo.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "lpo/losses.hpp"
#include "lpo/parallel.hpp"
#include "lpo/trace.hpp"

namespace lpo {

struct SimConfig {
  LossKind loss_kind = LossKind::lpo;
  LossParams params;
  double x1_init = 0.0;
  double x2_init = 0.0;
  double step_size = 0.01;
  std::size_t steps = 200;
  std::size_t record_every = 1;

  void validate() const;
};

/// Step 0 and every `record_every`-th step are recorded, plus the final step.
/// Each recorded loss is evaluated at the recorded state.
/// Throws DivergenceError if the state becomes non-finite.
TrajectoryTrace simulate(const SimConfig& config);

enum class TrendCase { case1, case2, case3, stationary };

std::string_view to_string(TrendCase c);

inline constexpr double kDefaultSlopeDeadband = 1e-4;

/// Case 1: x1 rising, x2 falling. Case 2: both falling, x1 more slowly.
/// Case 3: both rising, x1 faster. Stationary: both inside the dead-band.
/// Sign patterns outside that taxonomy fall back by sign: any pattern
/// compatible with case 1 (x1 not falling, x2 not rising) is case 1, then
/// both not rising is case 2, then both not falling is case 3; the remaining
/// (x1 falling, x2 rising) maps to case 2.
TrendCase classify_slopes(double slope_x1, double slope_x2,
                          double eps = kDefaultSlopeDeadband);

/// Throws InsufficientDataError for traces with fewer than 8 points.
TrendCase classify_trend(const TrajectoryTrace& trace, double eps = kDefaultSlopeDeadband);

struct SweepRun {
  double r2;
  TrajectoryTrace trace;
};

/// One simulation per r2 with everything else taken from `base`.
/// r2 values must be positive and distinct.
std::vector<SweepRun> r2_sweep(const SimConfig& base, std::span<const double> r2_values,
                               Execution exec = Execution::parallel);

/// `r2,terminal_x1,terminal_x2,slope_x1,slope_x2`
void write_sweep_csv(std::ostream& os, const std::vector<SweepRun>& runs);

}  // namespace lpo
