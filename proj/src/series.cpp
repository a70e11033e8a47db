#include "cladyn/series.hpp"

#include <algorithm>
#include <cmath>

#include "cladyn/errors.hpp"

namespace cladyn {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void require_grid(const std::vector<double>& t, std::size_t n, const char* what) {
    if (t.size() != n) throw DimensionMismatch(std::string(what) + ": grid/value size mismatch");
    if (t.size() < 2) throw InvalidArgument(std::string(what) + ": need at least two samples");
    for (std::size_t k = 1; k < t.size(); ++k)
        if (!(t[k] > t[k - 1]))
            throw InvalidArgument(std::string(what) + ": grid must be strictly increasing");
}

// Integral of the piecewise-linear interpolant from t.front() to x.
template <typename Scalar>
Scalar integral_to(const std::vector<double>& t, const std::vector<Scalar>& y,
                   const std::vector<Scalar>& cum, double x) {
    const auto it = std::upper_bound(t.begin(), t.end(), x);
    if (it == t.begin()) return Scalar(0);
    const std::size_t k = static_cast<std::size_t>(it - t.begin()) - 1;
    if (k + 1 >= t.size()) return cum.back();
    const double dt = t[k + 1] - t[k];
    const double frac = (x - t[k]) / dt;
    const Scalar y_at = y[k] + (y[k + 1] - y[k]) * frac;
    return cum[k] + (y[k] + y_at) * (0.5 * (x - t[k]));
}

template <typename Scalar>
std::vector<Scalar> cumtrapz(const std::vector<double>& t, const std::vector<Scalar>& y) {
    std::vector<Scalar> out(t.size(), Scalar(0));
    for (std::size_t k = 1; k < t.size(); ++k)
        out[k] = out[k - 1] + (y[k] + y[k - 1]) * (0.5 * (t[k] - t[k - 1]));
    return out;
}

template <typename Scalar>
std::vector<Scalar> window_average_impl(const std::vector<double>& t,
                                        const std::vector<Scalar>& y, double window) {
    require_grid(t, y.size(), "window_average");
    const double span = t.back() - t.front();
    if (window > 0.5 * span) throw WindowTooWide("window_average: window exceeds half the span");

    // Median spacing, used only for the minimum-sample precondition.
    std::vector<double> dt(t.size() - 1);
    for (std::size_t k = 0; k + 1 < t.size(); ++k) dt[k] = t[k + 1] - t[k];
    std::nth_element(dt.begin(), dt.begin() + dt.size() / 2, dt.end());
    if (window < 10.0 * dt[dt.size() / 2])
        throw InvalidArgument("window_average: window spans fewer than 10 samples");

    const std::vector<Scalar> cum = cumtrapz(t, y);
    std::vector<Scalar> out(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double lo = std::max(t.front(), t[k] - 0.5 * window);
        const double hi = std::min(t.back(), t[k] + 0.5 * window);
        out[k] = (integral_to(t, y, cum, hi) - integral_to(t, y, cum, lo)) / (hi - lo);
    }
    return out;
}

}  // namespace

std::vector<double> cumulative_trapezoid(const std::vector<double>& t,
                                         const std::vector<double>& y) {
    require_grid(t, y.size(), "cumulative_trapezoid");
    return cumtrapz(t, y);
}

double trapezoid_mean(const std::vector<double>& t, const std::vector<double>& y, double T) {
    require_grid(t, y.size(), "trapezoid_mean");
    if (T <= t.front() || T > t.back())
        throw InvalidArgument("trapezoid_mean: T outside the sampled range");
    const std::vector<double> cum = cumtrapz(t, y);
    return integral_to(t, y, cum, T) / (T - t.front());
}

std::vector<double> unwrap_phase(const std::vector<double>& wrapped) {
    std::vector<double> out(wrapped.size());
    if (wrapped.empty()) return out;
    out[0] = wrapped[0];
    for (std::size_t k = 1; k < wrapped.size(); ++k) {
        double delta = wrapped[k] - wrapped[k - 1];
        delta -= kTwoPi * std::round(delta / kTwoPi);
        out[k] = out[k - 1] + delta;
    }
    return out;
}

std::vector<double> window_average(const std::vector<double>& t, const std::vector<double>& y,
                                   double window) {
    return window_average_impl(t, y, window);
}

std::vector<Complex> window_average(const std::vector<double>& t, const std::vector<Complex>& y,
                                    double window) {
    return window_average_impl(t, y, window);
}

}  // namespace cladyn
