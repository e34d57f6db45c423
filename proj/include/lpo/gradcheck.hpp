#pragma once

#include <functional>
#include <span>
#include <vector>

namespace lpo {

/// Analytic-vs-numeric comparison for one coordinate.
struct GradReport {
  double analytic = 0.0;
  double numeric = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
};

inline constexpr double kRelErrFloor = 1e-12;
/// Points whose kink arguments lie within this distance of zero are not checked.
inline constexpr double kKinkMargin = 1e-3;

GradReport make_report(double analytic, double numeric);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences per coordinate. The divisor is the step actually
/// taken, (x + h) - (x - h) as represented in floating point, which equals 2h
/// up to rounding of the shifted coordinate.
/// Throws OracleError if f is non-finite at any probe, DomainError if h <= 0.
std::vector<double> finite_difference(const ScalarFunction& f,
                                      std::span<const double> point, double h);

/// True if any kink argument is within `margin` of zero.
bool near_kink(std::span<const double> kink_arguments, double margin = kKinkMargin);

}  // namespace lpo
