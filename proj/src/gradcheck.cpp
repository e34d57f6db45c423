#include "lpo/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "lpo/errors.hpp"

namespace lpo {

GradReport make_report(double analytic, double numeric) {
  GradReport r;
  r.analytic = analytic;
  r.numeric = numeric;
  r.abs_err = std::fabs(analytic - numeric);
  r.rel_err = r.abs_err / std::max({std::fabs(analytic), std::fabs(numeric), kRelErrFloor});
  return r;
}

std::vector<double> finite_difference(const ScalarFunction& f,
                                      std::span<const double> point, double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    const double xp = x0 + h;
    const double xm = x0 - h;
    x[i] = xp;
    const double fp = f(x);
    x[i] = xm;
    const double fm = f(x);
    x[i] = x0;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw OracleError("non-finite function value in finite difference");
    }
    grad[i] = (fp - fm) / (xp - xm);
  }
  return grad;
}

bool near_kink(std::span<const double> kink_arguments, double margin) {
  return std::any_of(kink_arguments.begin(), kink_arguments.end(),
                     [margin](double a) { return std::fabs(a) <= margin; });
}

}  // namespace lpo
