#include "usq/analysis.hpp"

#include "usq/error.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace usq {

double dominant_period(std::span<const double> t, std::span<const double> y, double min_period, double max_period) {
    if (t.size() != y.size() || t.size() < 4) {
        throw InvalidArgument("dominant_period: need at least 4 matching samples");
    }
    if (!(min_period > 0.0) || !(max_period > min_period)) {
        throw InvalidArgument("dominant_period: need 0 < min_period < max_period");
    }
    double mean = 0.0;
    for (double v : y) {
        mean += v;
    }
    mean /= static_cast<double>(y.size());
    const auto power = [&](double w) {
        std::complex<double> acc{};
        for (std::size_t i = 0; i < t.size(); ++i) {
            acc += (y[i] - mean) * std::polar(1.0, -w * t[i]);
        }
        return std::norm(acc);
    };
    const double w_lo = 2.0 * std::numbers::pi / max_period;
    const double w_hi = 2.0 * std::numbers::pi / min_period;
    // Resolve a quarter of the Fourier resolution of the record.
    const double span = t.back() - t.front();
    const int points = std::max(64, static_cast<int>(std::ceil((w_hi - w_lo) * span / (0.5 * std::numbers::pi))) + 1);
    const double dw = (w_hi - w_lo) / (points - 1);
    int best = 0;
    double best_p = -1.0;
    for (int i = 0; i < points; ++i) {
        const double p = power(w_lo + i * dw);
        if (p > best_p) {
            best_p = p;
            best = i;
        }
    }
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = w_lo + std::max(0, best - 1) * dw;
    double hi = w_lo + std::min(points - 1, best + 1) * dw;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = power(x1);
    double f2 = power(x2);
    while (hi - lo > 1e-12 * w_hi) {
        if (f1 > f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = power(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = power(x2);
        }
    }
    return 2.0 * std::numbers::pi / (0.5 * (lo + hi));
}

double detrended_rms(std::span<const double> t, std::span<const double> y) {
    if (t.size() != y.size() || t.size() < 3) {
        throw InvalidArgument("detrended_rms: need at least 3 matching samples");
    }
    const auto n = static_cast<double>(t.size());
    double st = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        st += t[i];
        sy += y[i];
    }
    const double mt = st / n;
    const double my = sy / n;
    double stt = 0.0;
    double sty = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - mt) * (t[i] - mt);
        sty += (t[i] - mt) * (y[i] - my);
    }
    const double slope = stt > 0.0 ? sty / stt : 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double r = y[i] - my - slope * (t[i] - mt);
        ss += r * r;
    }
    return std::sqrt(ss / n);
}

} // namespace usq
