#pragma once

#include <string>
#include <vector>

namespace nlde {

/// Least-squares line y = a + b x with standard error of the slope and R^2.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    double r2 = 0.0;
    int npoints = 0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// A sampled (t, norm) decay curve plus its fitted power law on a log-log
/// window. `inconclusive` is set when R^2 < 0.9 or the window spans less
/// than one decade; the exponent is still reported.
struct DecaySeries {
    std::string label;
    std::vector<double> t;
    std::vector<double> value;
    double window_lo = 0.0;
    double window_hi = 0.0;
    double exponent = 0.0;
    double stderr_exponent = 0.0;
    double r2 = 0.0;
    bool inconclusive = true;
};

/// Fit |value| ~ C t^exponent on window_lo <= t <= window_hi.
/// Throws if the window contains fewer than 3 usable samples.
void fit_decay(DecaySeries& s, double window_lo, double window_hi);

/// Envelope variant for oscillatory series: splits the window into
/// `nwin` log-spaced bins, takes the max per bin, fits on bin centers.
LineFit fit_envelope_loglog(const std::vector<double>& x, const std::vector<double>& y,
                            double lo, double hi, int nwin);

}  // namespace nlde
