// analysis.hpp: time-series measurements used to characterise runs.

#pragma once

#include <span>

namespace usq {

/// Period of the strongest oscillation of y(t) with period in
/// [min_period, max_period]. The series is mean-subtracted and its discrete
/// Fourier amplitude maximised over frequency (coarse scan, then golden-section
/// refinement), so non-uniform sampling is allowed.
double dominant_period(std::span<const double> t, std::span<const double> y, double min_period, double max_period);

/// RMS of y after removing a least-squares straight line.
double detrended_rms(std::span<const double> t, std::span<const double> y);

} // namespace usq
