#pragma once

// DPO, LPO and LPO-ste losses over length-normalized margin pairs.
//
// Every loss exists in two forms: a graph builder (the autodiff path) and a
// closed-form gradient written from direct differentiation. The closed forms
// multiply factors in the same order the graph's reverse pass does, so the
// two agree bit-for-bit.
//
// Conventions: d = x1 - x2 - 1/(2*beta); sgn(0) = 0; the hinge indicator is
// 1[x1 < 0] (strict).

#include <string_view>
#include <utility>

#include "lpo/autodiff.hpp"

namespace lpo {

enum class LossKind { dpo, lpo, lpo_ste };

/// How r1/r2 enter the straight-through loss. `quadratic` applies them both
/// inside each path loss and in the outer combination (r^2 per path);
/// `linear` applies them once, in the outer combination only.
enum class SteWeighting { quadratic, linear };

std::string_view to_string(LossKind k);
LossKind parse_loss_kind(std::string_view s);
std::string_view to_string(SteWeighting w);
SteWeighting parse_ste_weighting(std::string_view s);

struct LossParams {
  double beta = 0.2;
  double lambda = 10.0;
  double r1 = 1.0;
  double r2 = 1.0;
  SteWeighting weighting = SteWeighting::quadratic;

  /// Throws ConfigError unless beta > 0, lambda >= 0, r1 > 0, r2 > 0.
  void validate() const;
  double offset() const { return 1.0 / (2.0 * beta); }
};

struct MarginPair {
  double x1 = 0.0;  // length-normalized chosen log-ratio
  double x2 = 0.0;  // length-normalized rejected log-ratio
};

struct LossBreakdown {
  double total = 0.0;
  double margin_term = 0.0;
  double hinge_term = 0.0;
  double grad_x1 = 0.0;
  double grad_x2 = 0.0;
};

/// x_i = (policy_logp - ref_logp) / len. Throws DomainError on zero length.
MarginPair length_normalized_margins(double policy_logp_w, double ref_logp_w, long len_w,
                                     double policy_logp_l, double ref_logp_l, long len_l);

// ---- graph builders ---------------------------------------------------------

struct LossNodes {
  ad::Var total;
  ad::Var margin;
  ad::Var hinge;
};

LossNodes build_dpo(ad::Var x1, ad::Var x2, const LossParams& p);
LossNodes build_lpo(ad::Var x1, ad::Var x2, const LossParams& p);

/// The two straight-through path losses and their weighted combination.
struct SteNodes {
  ad::Var chosen_path;    // L1: x2 enters detached
  ad::Var rejected_path;  // L2: x1 enters detached
  ad::Var total;
  ad::Var margin;
  ad::Var hinge;
};

SteNodes build_lpo_ste(ad::Var x1, ad::Var x2, const LossParams& p);

ad::Var build_loss(LossKind kind, ad::Var x1, ad::Var x2, const LossParams& p);

// ---- evaluated losses (graph forward + backward) ---------------------------

LossBreakdown dpo_loss(MarginPair m, const LossParams& p);
LossBreakdown lpo_loss(MarginPair m, const LossParams& p);
LossBreakdown lpo_ste_loss(MarginPair m, const LossParams& p);
LossBreakdown evaluate_loss(LossKind kind, MarginPair m, const LossParams& p);

// ---- closed forms -----------------------------------------------------------

std::pair<double, double> dpo_gradients_closed_form(MarginPair m, const LossParams& p);
std::pair<double, double> lpo_gradients_closed_form(MarginPair m, const LossParams& p);
std::pair<double, double> lpo_ste_gradients_closed_form(MarginPair m, const LossParams& p);
std::pair<double, double> closed_form_gradients(LossKind kind, MarginPair m,
                                                const LossParams& p);

/// Gradients of -log sigmoid(beta*log u1 - beta*log u2) with respect to the
/// probability-ratio variables u1, u2, and |grad_u1 / grad_u2| (which is u2/u1).
struct RatioSpaceGradients {
  double grad_u1;
  double grad_u2;
  double ratio;
};

/// Throws DomainError unless u1 > 0 and u2 > 0.
RatioSpaceGradients dpo_ratio_space_gradients(double u1, double u2, double beta);

/// grad_x1 / grad_x2 of the LPO loss. Throws DomainError when d = 0.
double lpo_gradient_ratio(MarginPair m, const LossParams& p);

/// Closed-form |grad_x2| of the straight-through loss off the kink.
/// `sign_d` must be +1 or -1 (the magnitude does not depend on it).
double grad_x2_magnitude(const LossParams& p, int sign_d);

/// Arguments whose zero crossings are non-differentiable points of the loss.
/// Empty for DPO; {d, x1} for the LPO family.
std::pair<double, double> kink_arguments(MarginPair m, const LossParams& p);
bool has_kinks(LossKind kind);

}  // namespace lpo
