#pragma once

// Value-only evaluations of the loss zoo in plain double arithmetic, used as
// the finite-difference side of gradient checks. They share no code with the
// graph builders.
//
// The straight-through loss is written with its frozen (detached) operands
// as separate arguments; the straight-through gradient with respect to x1 is
// then the ordinary partial derivative in the live x1 slot with every frozen
// slot held at the current point.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lpo/gradcheck.hpp"
#include "lpo/losses.hpp"
#include "lpo/parallel.hpp"

namespace lpo {

double dpo_value(double x1, double x2, const LossParams& p);
double lpo_value(double x1, double x2, const LossParams& p);

struct StePathValues {
  double chosen_path;
  double rejected_path;
  double total;
};

StePathValues lpo_ste_split_value(double x1, double x2, double x1_frozen, double x2_frozen,
                                  const LossParams& p);

/// Finite-difference gradient (d/dx1, d/dx2) of the given loss at m, using the
/// split formulation for lpo_ste.
std::pair<double, double> numeric_loss_gradient(LossKind kind, MarginPair m,
                                                const LossParams& p, double h);

struct GradcheckSettings {
  LossKind kind = LossKind::lpo;
  LossParams params;
  std::size_t points = 1000;
  std::uint64_t seed = 0;
  double h = 1e-4;
  double range = 3.0;     // coordinates drawn uniformly from [-range, range]
  bool diagonal = false;  // draw x2 = x1
};

struct GradcheckRow {
  MarginPair point;
  GradReport x1;
  GradReport x2;
  double worst_rel() const { return x1.rel_err > x2.rel_err ? x1.rel_err : x2.rel_err; }
};

struct GradcheckResult {
  std::vector<GradcheckRow> rows;
  std::size_t excluded = 0;  // draws rejected as near-kink
  std::size_t worst_index = 0;
  double worst_rel = 0.0;
};

/// Samples `points` off-kink points (point k from its own seeded stream) and
/// compares graph gradients to finite differences.
GradcheckResult run_gradcheck(const GradcheckSettings& s,
                              Execution exec = Execution::parallel);

}  // namespace lpo
