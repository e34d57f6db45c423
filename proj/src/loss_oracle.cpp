#include "lpo/loss_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "lpo/rng.hpp"

namespace lpo {

double dpo_value(double x1, double x2, const LossParams& p) {
  const double z = p.beta * (x1 - x2);
  // softplus(-z)
  return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

double lpo_value(double x1, double x2, const LossParams& p) {
  return 2.0 * p.beta * std::fabs(x1 - x2 - 1.0 / (2.0 * p.beta)) +
         p.lambda * std::max(0.0, -x1);
}

StePathValues lpo_ste_split_value(double x1, double x2, double x1_frozen, double x2_frozen,
                                  const LossParams& p) {
  const double off = 1.0 / (2.0 * p.beta);
  const bool quad = p.weighting == SteWeighting::quadratic;
  const double w1 = quad ? p.r1 : 1.0;
  const double w2 = quad ? p.r2 : 1.0;
  const double l1 = w1 * 2.0 * p.beta * std::fabs(x1 - x2_frozen - off) +
                    p.lambda * std::max(0.0, -x1);
  const double l2 = w2 * 2.0 * p.beta * std::fabs(x1_frozen - x2 - off) +
                    p.lambda * std::max(0.0, -x1_frozen);
  return {l1, l2, 2.0 / (p.r1 + p.r2) * (p.r1 * l1 + p.r2 * l2)};
}

std::pair<double, double> numeric_loss_gradient(LossKind kind, MarginPair m,
                                                const LossParams& p, double h) {
  const std::array<double, 2> at{m.x1, m.x2};
  ScalarFunction f;
  switch (kind) {
    case LossKind::dpo:
      f = [&p](std::span<const double> x) { return dpo_value(x[0], x[1], p); };
      break;
    case LossKind::lpo:
      f = [&p](std::span<const double> x) { return lpo_value(x[0], x[1], p); };
      break;
    case LossKind::lpo_ste:
      f = [&p, m](std::span<const double> x) {
        return lpo_ste_split_value(x[0], x[1], m.x1, m.x2, p).total;
      };
      break;
  }
  const auto g = finite_difference(f, at, h);
  return {g[0], g[1]};
}

GradcheckResult run_gradcheck(const GradcheckSettings& s, Execution exec) {
  s.params.validate();
  GradcheckResult result;
  result.rows.resize(s.points);
  std::vector<std::size_t> rejected(s.points, 0);

  for_each_index(s.points, exec, [&](std::size_t k) {
    CounterRng rng(derive_seed(s.seed, "gradcheck", k));
    MarginPair m;
    for (;;) {
      m.x1 = (2.0 * rng.uniform() - 1.0) * s.range;
      m.x2 = s.diagonal ? m.x1 : (2.0 * rng.uniform() - 1.0) * s.range;
      if (!has_kinks(s.kind)) break;
      const auto [d, x1] = kink_arguments(m, s.params);
      const std::array<double, 2> args{d, x1};
      if (!near_kink(args)) break;
      ++rejected[k];
    }
    const LossBreakdown analytic = evaluate_loss(s.kind, m, s.params);
    const auto [n1, n2] = numeric_loss_gradient(s.kind, m, s.params, s.h);
    result.rows[k] = {m, make_report(analytic.grad_x1, n1), make_report(analytic.grad_x2, n2)};
  });

  for (std::size_t k = 0; k < s.points; ++k) {
    result.excluded += rejected[k];
    const double w = result.rows[k].worst_rel();
    if (k == 0 || w > result.worst_rel) {
      result.worst_rel = w;
      result.worst_index = k;
    }
  }
  return result;
}

}  // namespace lpo
