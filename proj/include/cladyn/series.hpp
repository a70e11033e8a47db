#pragma once

#include <vector>

#include "cladyn/types.hpp"

namespace cladyn {

/// Cumulative trapezoidal integral of y over the (possibly uneven) grid t.
/// Output has the same length; first entry is 0.
std::vector<double> cumulative_trapezoid(const std::vector<double>& t,
                                         const std::vector<double>& y);

/// Trapezoidal mean of y over [t.front(), T]. T must lie inside the grid;
/// the last partial interval is linearly interpolated.
double trapezoid_mean(const std::vector<double>& t, const std::vector<double>& y, double T);

/// Adds multiples of 2*pi so that successive samples differ by at most pi.
std::vector<double> unwrap_phase(const std::vector<double>& wrapped);

/// Centered moving average with window width `window` in the units of t.
/// The window is truncated at both ends of the series. Throws WindowTooWide
/// when the window exceeds half the span and InvalidArgument when it covers
/// fewer than 10 samples.
std::vector<double> window_average(const std::vector<double>& t, const std::vector<double>& y,
                                   double window);
std::vector<Complex> window_average(const std::vector<double>& t, const std::vector<Complex>& y,
                                    double window);

}  // namespace cladyn
