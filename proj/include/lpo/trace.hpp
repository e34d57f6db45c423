#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace lpo {

struct TracePoint {
  std::size_t step = 0;
  double x1 = 0.0;
  double x2 = 0.0;
  double loss = 0.0;
};

/// Time series of the margin pair and loss, with terminal slopes fitted by
/// ordinary least squares over the final quarter of recorded points.
struct TrajectoryTrace {
  std::vector<TracePoint> points;
  double slope_x1 = 0.0;
  double slope_x2 = 0.0;

  /// Recomputes slope_x1 / slope_x2 from `points`.
  void fit_terminal_slopes();
  const TracePoint& terminal() const { return points.back(); }
};

/// OLS slope of y against step over points [first, points.size()).
double least_squares_slope(const std::vector<TracePoint>& points, std::size_t first,
                           double TracePoint::*field);

/// `step,x1,x2,loss` with CRLF line ends.
void write_trace_csv(std::ostream& os, const TrajectoryTrace& trace);

}  // namespace lpo
