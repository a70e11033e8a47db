#pragma once

#include <functional>
#include <vector>

#include "cladyn/types.hpp"

namespace cladyn {

/// Settings for the adaptive Dormand-Prince 5(4) integrator.
struct IntegratorOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double min_step = 1e-12;
    double max_step = 0.0;       // 0 = no cap beyond the span
    double initial_step = 0.0;   // 0 = automatic
    double sample_stride = 0.0;  // 0 = span / 5000
    long max_steps = 50'000'000;
};

using OdeRhs = std::function<void(double t, const RVector& y, RVector& dydt)>;
using OdeObserver = std::function<void(double t, const RVector& y)>;

/// Integrates dy/dt = f(t, y) from t0 to t1 with an embedded Dormand-Prince
/// 5(4) pair under PI step-size control. The observer is called at t0, at
/// every multiple of sample_stride (hit exactly by clipping the step) and at
/// t1. Throws StepSizeUnderflow and NonFiniteState.
void integrate_dopri5(const OdeRhs& rhs, double t0, double t1, RVector y,
                      const IntegratorOptions& opts, const OdeObserver& observe);

/// One classical fixed-step RK4 update y(t) -> y(t + h).
template <typename State, typename Rhs>
State rk4_step(const Rhs& rhs, double t, const State& y, double h) {
    const State k1 = rhs(t, y);
    const State k2 = rhs(t + 0.5 * h, State(y + (0.5 * h) * k1));
    const State k3 = rhs(t + 0.5 * h, State(y + (0.5 * h) * k2));
    const State k4 = rhs(t + h, State(y + h * k3));
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace cladyn
