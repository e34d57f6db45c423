#include "lpo/trace.hpp"

#include <ostream>

#include "lpo/csv.hpp"

namespace lpo {

double least_squares_slope(const std::vector<TracePoint>& points, std::size_t first,
                           double TracePoint::*field) {
  const std::size_t n = points.size() - first;
  if (n < 2) return 0.0;
  double mean_t = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = first; i < points.size(); ++i) {
    mean_t += static_cast<double>(points[i].step);
    mean_y += points[i].*field;
  }
  mean_t /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = first; i < points.size(); ++i) {
    const double dt = static_cast<double>(points[i].step) - mean_t;
    sxy += dt * (points[i].*field - mean_y);
    sxx += dt * dt;
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

void TrajectoryTrace::fit_terminal_slopes() {
  const std::size_t n = points.size();
  std::size_t window = (n + 3) / 4;
  if (window < 2) window = n < 2 ? n : 2;
  const std::size_t first = n - window;
  slope_x1 = least_squares_slope(points, first, &TracePoint::x1);
  slope_x2 = least_squares_slope(points, first, &TracePoint::x2);
}

void write_trace_csv(std::ostream& os, const TrajectoryTrace& trace) {
  write_csv_row(os, {"step", "x1", "x2", "loss"});
  for (const TracePoint& p : trace.points) {
    write_csv_row(os, {std::to_string(p.step), format_double(p.x1), format_double(p.x2),
                       format_double(p.loss)});
  }
}

}  // namespace lpo
