#include "nlde/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nlde {

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need >= 2 points");
    const int n = static_cast<int>(x.size());
    double sx = 0, sy = 0;
    for (int i = 0; i < n; ++i) { sx += x[i]; sy += y[i]; }
    double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    LineFit f;
    f.npoints = n;
    if (sxx < 1e-300) throw std::invalid_argument("fit_line: degenerate abscissa");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0;
    for (int i = 0; i < n; ++i) {
        double r = y[i] - (f.intercept + f.slope * x[i]);
        ssr += r * r;
    }
    f.r2 = (syy < 1e-300) ? 1.0 : 1.0 - ssr / syy;
    f.stderr_slope = (n > 2) ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
    return f;
}

void fit_decay(DecaySeries& s, double window_lo, double window_hi) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < s.t.size(); ++i) {
        if (s.t[i] < window_lo || s.t[i] > window_hi) continue;
        if (!(s.t[i] > 0.0) || !(std::abs(s.value[i]) > 0.0)) continue;
        lx.push_back(std::log(s.t[i]));
        ly.push_back(std::log(std::abs(s.value[i])));
    }
    if (lx.size() < 3) throw std::invalid_argument("fit_decay: fewer than 3 samples in window");
    LineFit f = fit_line(lx, ly);
    s.window_lo = window_lo;
    s.window_hi = window_hi;
    s.exponent = f.slope;
    s.stderr_exponent = f.stderr_slope;
    s.r2 = f.r2;
    double decades = std::log10(window_hi / window_lo);
    s.inconclusive = (f.r2 < 0.9) || (decades < 1.0 - 1e-9);
}

LineFit fit_envelope_loglog(const std::vector<double>& x, const std::vector<double>& y,
                            double lo, double hi, int nwin) {
    if (nwin < 2) throw std::invalid_argument("fit_envelope_loglog: nwin >= 2");
    double llo = std::log(lo), lhi = std::log(hi);
    std::vector<double> bx, by;
    for (int w = 0; w < nwin; ++w) {
        double a = llo + (lhi - llo) * w / nwin;
        double b = llo + (lhi - llo) * (w + 1) / nwin;
        double best = -1.0, bestx = 0.0;
        for (size_t i = 0; i < x.size(); ++i) {
            if (!(x[i] > 0.0)) continue;
            double l = std::log(x[i]);
            if (l < a || l >= b) continue;
            if (std::abs(y[i]) > best) {
                best = std::abs(y[i]);
                bestx = l;
            }
        }
        if (best > 0.0) {
            bx.push_back(bestx);
            by.push_back(std::log(best));
        }
    }
    if (bx.size() < 3) throw std::invalid_argument("fit_envelope_loglog: too few occupied bins");
    return fit_line(bx, by);
}

}  // namespace nlde
