#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "cladyn/ode.hpp"
#include "cladyn/series.hpp"
#include "cladyn/spectral.hpp"
#include "cladyn/types.hpp"

namespace cladyn {

/// F = <psi|A|psi>, the linear-in-expectation feedback law.
struct LinearInExpectation {};

/// F = F(R): a prescribed drive, no feedback.
struct OpenLoop {
    std::function<double(double)> f;
};

/// Monitoring observable plus the feedback law driving dR/dt = eps * F.
struct FeedbackSpec {
    CMatrix observable;
    double epsilon = 0.0;
    std::variant<LinearInExpectation, OpenLoop> form = LinearInExpectation{};

    /// Validates Hermiticity of the observable (1e-12) and 0 <= eps < 1.
    /// An epsilon above 0.1 is legal but flagged by adiabaticity_warning().
    static FeedbackSpec checked(CMatrix observable, double epsilon,
                                std::variant<LinearInExpectation, OpenLoop> form =
                                    LinearInExpectation{});

    bool adiabaticity_warning() const { return epsilon > 0.1; }
};

/// Sampled solution of the coupled state/control system.
struct Trajectory {
    std::vector<double> times;
    std::vector<CVector> states;
    std::vector<double> r_values;
    std::vector<double> norm_drift;  // ||psi|| - 1 per sample

    double max_norm_drift() const;
};

/// Per-level series derived from a trajectory in the instantaneous eigenbasis.
struct AdiabaticSeries {
    std::vector<double> times;
    std::vector<RVector> gamma;        // dynamical phases, one d-vector per sample
    std::vector<CVector> amplitudes;   // c_n(t)
    std::vector<RVector> populations;  // |c_n|^2
    std::vector<RVector> phases;       // unwrapped arg c_n
    std::vector<double> frame_gaps;

    int levels() const { return gamma.empty() ? 0 : static_cast<int>(gamma.front().size()); }
};

/// Real expectation value <psi|A|psi>. The imaginary residual must stay
/// below 1e-12 (scaled), otherwise NotHermitian is thrown.
double expectation(const CVector& psi, const CMatrix& a_lab);

/// Integrates i d|psi>/dt = H[R]|psi>, dR/dt = eps * F with the adaptive
/// Dormand-Prince pair. The state norm is never re-imposed; its drift is
/// recorded per sample.
Trajectory integrate_closed_loop(const HamiltonianModel& model, const FeedbackSpec& feedback,
                                 const CVector& psi0, double r0, double horizon,
                                 const IntegratorOptions& opts = {});

/// Builds gauge-aligned frames along the trajectory and extracts dynamical
/// phases (trapezoidal accumulation of -E_n), amplitudes, populations and
/// unwrapped phases. Frame errors are rethrown with the offending sample.
AdiabaticSeries extract_adiabatic_series(const Trajectory& traj, const HamiltonianModel& model,
                                         double gap_tol);

}  // namespace cladyn
