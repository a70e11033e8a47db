#include "cladyn/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cladyn/errors.hpp"

namespace cladyn {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0;
constexpr double c3 = 3.0 / 10.0;
constexpr double c4 = 4.0 / 5.0;
constexpr double c5 = 8.0 / 9.0;

constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;

// Difference between the 5th- and 4th-order weights.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

bool all_finite(const RVector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v(i))) return false;
    return true;
}

double error_norm(const RVector& err, const RVector& y0, const RVector& y1, double atol,
                  double rtol) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double scale = atol + rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
        const double q = err(i) / scale;
        sum += q * q;
    }
    return std::sqrt(sum / static_cast<double>(err.size()));
}

// Classic starting-step heuristic (order 5).
double initial_step_guess(const OdeRhs& rhs, double t0, const RVector& y0, const RVector& f0,
                          double span, double atol, double rtol) {
    const auto scaled_norm = [&](const RVector& v, const RVector& ref) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double scale = atol + rtol * std::abs(ref(i));
            const double q = v(i) / scale;
            sum += q * q;
        }
        return std::sqrt(sum / static_cast<double>(v.size()));
    };
    const double d0 = scaled_norm(y0, y0);
    const double d1 = scaled_norm(f0, y0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);

    RVector y1 = y0 + h0 * f0;
    RVector f1(y0.size());
    rhs(t0 + h0, y1, f1);
    const double d2 = scaled_norm(RVector(f1 - f0), y0) / h0;
    const double dmax = std::max(d1, d2);
    double h1 = (dmax <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, span});
}

}  // namespace

void integrate_dopri5(const OdeRhs& rhs, double t0, double t1, RVector y,
                      const IntegratorOptions& opts, const OdeObserver& observe) {
    if (!(t1 > t0)) throw InvalidArgument("integrate_dopri5: need t1 > t0");
    const double span = t1 - t0;
    const double stride = opts.sample_stride > 0.0 ? opts.sample_stride : span / 5000.0;
    const double hmax = opts.max_step > 0.0 ? std::min(opts.max_step, span) : span;

    const Eigen::Index n = y.size();
    RVector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), yerr(n);

    double t = t0;
    rhs(t, y, k1);
    if (!all_finite(y) || !all_finite(k1))
        throw NonFiniteState("integrate_dopri5: non-finite state at t0");
    if (observe) observe(t, y);

    double h = opts.initial_step > 0.0
                   ? std::min(opts.initial_step, hmax)
                   : initial_step_guess(rhs, t0, y, k1, hmax, opts.atol, opts.rtol);

    long sample_index = 1;
    double next_sample = t0 + stride;
    bool sample_clipped = false;

    const double safety = 0.9;
    const double beta = 0.04;
    const double alpha = 0.2 - 0.75 * beta;
    double err_old = 1e-4;

    long steps = 0;
    bool done = false;
    while (!done) {
        if (++steps > opts.max_steps) throw Error("integrate_dopri5: step budget exhausted");
        if (h < opts.min_step) {
            std::ostringstream os;
            os << "integrate_dopri5: step size " << h << " fell below min_step " << opts.min_step
               << " at t = " << t;
            throw StepSizeUnderflow(os.str());
        }

        // Clip to the next sample boundary or the end point.
        double h_use = h;
        sample_clipped = false;
        double target = std::min(next_sample, t1);
        if (t + h_use >= target - 1e-14 * std::max(1.0, std::abs(target))) {
            h_use = target - t;
            sample_clipped = true;
        }

        ytmp = y + h_use * (a21 * k1);
        rhs(t + c2 * h_use, ytmp, k2);
        ytmp = y + h_use * (a31 * k1 + a32 * k2);
        rhs(t + c3 * h_use, ytmp, k3);
        ytmp = y + h_use * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * h_use, ytmp, k4);
        ytmp = y + h_use * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * h_use, ytmp, k5);
        ytmp = y + h_use * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + h_use, ytmp, k6);
        ynew = y + h_use * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t + h_use, ynew, k7);
        yerr = h_use * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        const double err = error_norm(yerr, y, ynew, opts.atol, opts.rtol);

        if (std::isfinite(err) && err <= 1.0) {
            t += h_use;
            y.swap(ynew);
            k1.swap(k7);  // first-same-as-last
            if (!all_finite(y)) {
                std::ostringstream os;
                os << "integrate_dopri5: non-finite state at t = " << t;
                throw NonFiniteState(os.str());
            }

            if (sample_clipped) {
                if (observe) observe(t, y);
                if (t >= t1 - 1e-14 * std::max(1.0, std::abs(t1))) {
                    done = true;
                } else {
                    ++sample_index;
                    next_sample = t0 + stride * static_cast<double>(sample_index);
                }
            }

            // A step clipped to a sample boundary says nothing about the
            // natural step size, so only full steps feed the controller.
            if (!sample_clipped || h_use >= 0.999 * h) {
                const double err_clamped = std::max(err, 1e-10);
                double factor = safety * std::pow(err_clamped, -alpha) * std::pow(err_old, beta);
                factor = std::clamp(factor, 0.2, 10.0);
                err_old = err_clamped;
                h = std::min(h_use * factor, hmax);
            }
        } else {
            const double shrink = std::isfinite(err)
                                      ? std::max(0.2, safety * std::pow(err, -0.2))
                                      : 0.2;
            h = h_use * shrink;
        }
    }
}

}  // namespace cladyn
