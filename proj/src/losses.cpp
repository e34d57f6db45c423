#include "lpo/losses.hpp"

#include <cmath>
#include <string>

#include "lpo/errors.hpp"
#include "lpo/scalar_math.hpp"

namespace lpo {

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::dpo: return "dpo";
    case LossKind::lpo: return "lpo";
    case LossKind::lpo_ste: return "lpo_ste";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "dpo") return LossKind::dpo;
  if (s == "lpo") return LossKind::lpo;
  if (s == "lpo_ste" || s == "lpo-ste") return LossKind::lpo_ste;
  throw ConfigError("unknown loss kind '" + std::string(s) + "'");
}

std::string_view to_string(SteWeighting w) {
  return w == SteWeighting::quadratic ? "quadratic" : "linear";
}

SteWeighting parse_ste_weighting(std::string_view s) {
  if (s == "quadratic") return SteWeighting::quadratic;
  if (s == "linear") return SteWeighting::linear;
  throw ConfigError("unknown ste weighting '" + std::string(s) + "'");
}

void LossParams::validate() const {
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(r1 > 0.0)) throw ConfigError("r1 must be > 0");
  if (!(r2 > 0.0)) throw ConfigError("r2 must be > 0");
}

MarginPair length_normalized_margins(double policy_logp_w, double ref_logp_w, long len_w,
                                     double policy_logp_l, double ref_logp_l, long len_l) {
  if (len_w <= 0 || len_l <= 0) throw DomainError("response length must be >= 1");
  return {(policy_logp_w - ref_logp_w) / static_cast<double>(len_w),
          (policy_logp_l - ref_logp_l) / static_cast<double>(len_l)};
}

// ---- graph builders ---------------------------------------------------------

LossNodes build_dpo(ad::Var x1, ad::Var x2, const LossParams& p) {
  const ad::Var z = p.beta * x1 - p.beta * x2;
  const ad::Var total = -ad::log_sigmoid(z);
  return {total, total, x1.graph().leaf(0.0)};
}

LossNodes build_lpo(ad::Var x1, ad::Var x2, const LossParams& p) {
  const double two_beta = 2.0 * p.beta;
  const ad::Var d = (x1 - x2) - p.offset();
  const ad::Var margin = two_beta * ad::abs(d);
  const ad::Var hinge = p.lambda * ad::max0(-x1);
  return {margin + hinge, margin, hinge};
}

namespace {

struct SteCoefficients {
  double outer;  // 2 / (r1 + r2)
  double k1;     // scale on |d| inside L1
  double k2;     // scale on |d| inside L2
};

SteCoefficients ste_coefficients(const LossParams& p) {
  const double two_beta = 2.0 * p.beta;
  const bool quad = p.weighting == SteWeighting::quadratic;
  return {2.0 / (p.r1 + p.r2), quad ? p.r1 * two_beta : two_beta,
          quad ? p.r2 * two_beta : two_beta};
}

}  // namespace

SteNodes build_lpo_ste(ad::Var x1, ad::Var x2, const LossParams& p) {
  const auto [c, k1, k2] = ste_coefficients(p);
  const double off = p.offset();
  const ad::Var x1_frozen = ad::detach(x1);
  const ad::Var x2_frozen = ad::detach(x2);

  const ad::Var m1 = k1 * ad::abs((x1 - x2_frozen) - off);
  const ad::Var h1 = p.lambda * ad::max0(-x1);
  const ad::Var l1 = m1 + h1;

  const ad::Var m2 = k2 * ad::abs((x1_frozen - x2) - off);
  const ad::Var h2 = p.lambda * ad::max0(-x1_frozen);
  const ad::Var l2 = m2 + h2;

  const ad::Var total = c * (p.r1 * l1 + p.r2 * l2);
  const ad::Var margin = c * (p.r1 * ad::detach(m1) + p.r2 * ad::detach(m2));
  const ad::Var hinge = c * (p.r1 * ad::detach(h1) + p.r2 * ad::detach(h2));
  return {l1, l2, total, margin, hinge};
}

ad::Var build_loss(LossKind kind, ad::Var x1, ad::Var x2, const LossParams& p) {
  switch (kind) {
    case LossKind::dpo: return build_dpo(x1, x2, p).total;
    case LossKind::lpo: return build_lpo(x1, x2, p).total;
    case LossKind::lpo_ste: return build_lpo_ste(x1, x2, p).total;
  }
  throw ConfigError("unknown loss kind");
}

// ---- evaluated losses -------------------------------------------------------

namespace {

template <class Builder>
LossBreakdown run_graph(MarginPair m, const LossParams& p, Builder build) {
  ad::Graph g;
  const ad::Var x1 = g.leaf(m.x1);
  const ad::Var x2 = g.leaf(m.x2);
  const auto nodes = build(x1, x2, p);
  g.backward(nodes.total);
  return {nodes.total.value(), nodes.margin.value(), nodes.hinge.value(), g.grad(x1),
          g.grad(x2)};
}

}  // namespace

LossBreakdown dpo_loss(MarginPair m, const LossParams& p) {
  return run_graph(m, p, build_dpo);
}

LossBreakdown lpo_loss(MarginPair m, const LossParams& p) {
  return run_graph(m, p, build_lpo);
}

LossBreakdown lpo_ste_loss(MarginPair m, const LossParams& p) {
  return run_graph(m, p, build_lpo_ste);
}

LossBreakdown evaluate_loss(LossKind kind, MarginPair m, const LossParams& p) {
  switch (kind) {
    case LossKind::dpo: return dpo_loss(m, p);
    case LossKind::lpo: return lpo_loss(m, p);
    case LossKind::lpo_ste: return lpo_ste_loss(m, p);
  }
  throw ConfigError("unknown loss kind");
}

// ---- closed forms -----------------------------------------------------------

std::pair<double, double> dpo_gradients_closed_form(MarginPair m, const LossParams& p) {
  const double z = p.beta * m.x1 - p.beta * m.x2;
  const double s = sigmoid(-z);
  return {-s * p.beta, s * p.beta};
}

std::pair<double, double> lpo_gradients_closed_form(MarginPair m, const LossParams& p) {
  const double two_beta = 2.0 * p.beta;
  const double sgn = sign_of((m.x1 - m.x2) - p.offset());
  const double hinge_active = m.x1 < 0.0 ? 1.0 : 0.0;
  const double via_margin = two_beta * sgn;
  return {via_margin + (p.lambda * hinge_active) * -1.0, via_margin * -1.0};
}

std::pair<double, double> lpo_ste_gradients_closed_form(MarginPair m, const LossParams& p) {
  const auto [c, k1, k2] = ste_coefficients(p);
  const double sgn = sign_of((m.x1 - m.x2) - p.offset());
  const double hinge_active = m.x1 < 0.0 ? 1.0 : 0.0;
  const double chosen_weight = c * p.r1;
  const double rejected_weight = c * p.r2;
  const double g1 = (chosen_weight * k1) * sgn + ((chosen_weight * p.lambda) * hinge_active) * -1.0;
  const double g2 = ((rejected_weight * k2) * sgn) * -1.0;
  return {g1, g2};
}

std::pair<double, double> closed_form_gradients(LossKind kind, MarginPair m,
                                                const LossParams& p) {
  switch (kind) {
    case LossKind::dpo: return dpo_gradients_closed_form(m, p);
    case LossKind::lpo: return lpo_gradients_closed_form(m, p);
    case LossKind::lpo_ste: return lpo_ste_gradients_closed_form(m, p);
  }
  throw ConfigError("unknown loss kind");
}

RatioSpaceGradients dpo_ratio_space_gradients(double u1, double u2, double beta) {
  if (!(u1 > 0.0) || !(u2 > 0.0)) {
    throw DomainError("ratio-space variables must be strictly positive");
  }
  ad::Graph g;
  const ad::Var a = g.leaf(u1);
  const ad::Var b = g.leaf(u2);
  const ad::Var loss = -ad::log_sigmoid(beta * ad::log(a) - beta * ad::log(b));
  g.backward(loss);
  const double g1 = g.grad(a);
  const double g2 = g.grad(b);
  return {g1, g2, std::fabs(g1 / g2)};
}

double lpo_gradient_ratio(MarginPair m, const LossParams& p) {
  if ((m.x1 - m.x2) - p.offset() == 0.0) {
    throw DomainError("gradient ratio is undefined on the kink d = 0");
  }
  const LossBreakdown b = lpo_loss(m, p);
  return b.grad_x1 / b.grad_x2;
}

double grad_x2_magnitude(const LossParams& p, int sign_d) {
  if (sign_d != 1 && sign_d != -1) throw DomainError("sign_d must be +1 or -1");
  const auto [c, k1, k2] = ste_coefficients(p);
  return std::fabs((c * p.r2) * k2);
}

std::pair<double, double> kink_arguments(MarginPair m, const LossParams& p) {
  return {(m.x1 - m.x2) - p.offset(), m.x1};
}

bool has_kinks(LossKind kind) { return kind != LossKind::dpo; }

}  // namespace lpo
