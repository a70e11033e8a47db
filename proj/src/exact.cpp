#include "cladyn/exact.hpp"

#include <cmath>
#include <sstream>

#include "cladyn/errors.hpp"

namespace cladyn {

FeedbackSpec FeedbackSpec::checked(CMatrix observable, double epsilon,
                                   std::variant<LinearInExpectation, OpenLoop> form) {
    if (observable.rows() != observable.cols())
        throw DimensionMismatch("FeedbackSpec: observable is not square");
    const double scale = std::max(1.0, observable.cwiseAbs().maxCoeff());
    if (hermiticity_residual(observable) > 1e-12 * scale)
        throw NotHermitian("FeedbackSpec: observable is not Hermitian");
    if (epsilon < 0.0 || epsilon >= 1.0)
        throw InvalidArgument("FeedbackSpec: epsilon must lie in [0, 1)");
    if (std::holds_alternative<OpenLoop>(form) && !std::get<OpenLoop>(form).f)
        throw InvalidArgument("FeedbackSpec: open-loop map must be callable");

    FeedbackSpec spec;
    spec.observable = std::move(observable);
    spec.epsilon = epsilon;
    spec.form = std::move(form);
    return spec;
}

double Trajectory::max_norm_drift() const {
    double worst = 0.0;
    for (double d : norm_drift) worst = std::max(worst, std::abs(d));
    return worst;
}

double expectation(const CVector& psi, const CMatrix& a_lab) {
    if (a_lab.rows() != psi.size() || a_lab.cols() != psi.size())
        throw DimensionMismatch("expectation: dimension mismatch");
    const Complex value = psi.dot(a_lab * psi);
    const double scale = std::max(1.0, std::abs(value.real()));
    if (std::abs(value.imag()) > 1e-12 * scale) {
        std::ostringstream os;
        os << "expectation: imaginary residual " << value.imag();
        throw NotHermitian(os.str());
    }
    return value.real();
}

namespace {

// State layout: [Re psi (d), Im psi (d), R].
void pack(const CVector& psi, double r, RVector& y) {
    const Eigen::Index d = psi.size();
    y.resize(2 * d + 1);
    y.head(d) = psi.real();
    y.segment(d, d) = psi.imag();
    y(2 * d) = r;
}

CVector unpack_psi(const RVector& y) {
    const Eigen::Index d = (y.size() - 1) / 2;
    CVector psi(d);
    psi.real() = y.head(d);
    psi.imag() = y.segment(d, d);
    return psi;
}

}  // namespace

Trajectory integrate_closed_loop(const HamiltonianModel& model, const FeedbackSpec& feedback,
                                 const CVector& psi0, double r0, double horizon,
                                 const IntegratorOptions& opts) {
    const int d = model.dim;
    if (psi0.size() != d) throw DimensionMismatch("integrate_closed_loop: psi0 has wrong size");
    if (feedback.observable.rows() != d)
        throw DimensionMismatch("integrate_closed_loop: observable has wrong size");
    if (std::abs(psi0.norm() - 1.0) > 1e-10)
        throw InvalidArgument("integrate_closed_loop: psi0 is not normalized");
    if (!(horizon > 0.0)) throw InvalidArgument("integrate_closed_loop: horizon must be positive");

    const bool linear = std::holds_alternative<LinearInExpectation>(feedback.form);
    const auto* open_loop = linear ? nullptr : &std::get<OpenLoop>(feedback.form);

    CVector psi(d), dpsi(d);
    const OdeRhs rhs = [&](double /*t*/, const RVector& y, RVector& dydt) {
        psi.real() = y.head(d);
        psi.imag() = y.segment(d, d);
        const double r = y(2 * d);
        const CMatrix h = model.hamiltonian(r);
        dpsi.noalias() = h * psi;

        dydt.resize(2 * d + 1);
        // i dpsi/dt = H psi  =>  d(Re)/dt = Im(H psi), d(Im)/dt = -Re(H psi)
        dydt.head(d) = dpsi.imag();
        dydt.segment(d, d) = -dpsi.real();

        double f;
        if (linear) {
            const Complex av = psi.dot(feedback.observable * psi);
            f = av.real();
        } else {
            f = open_loop->f(r);
        }
        dydt(2 * d) = feedback.epsilon * f;
    };

    Trajectory traj;
    const OdeObserver observe = [&](double t, const RVector& y) {
        traj.times.push_back(t);
        traj.states.push_back(unpack_psi(y));
        traj.r_values.push_back(y(2 * d));
        traj.norm_drift.push_back(traj.states.back().norm() - 1.0);
    };

    RVector y0;
    pack(psi0, r0, y0);
    integrate_dopri5(rhs, 0.0, horizon, std::move(y0), opts, observe);
    return traj;
}

AdiabaticSeries extract_adiabatic_series(const Trajectory& traj, const HamiltonianModel& model,
                                         double gap_tol) {
    if (traj.times.size() < 2)
        throw InvalidArgument("extract_adiabatic_series: need at least two samples");
    const std::size_t n = traj.times.size();
    const int d = model.dim;

    AdiabaticSeries series;
    series.times = traj.times;
    series.gamma.resize(n);
    series.amplitudes.resize(n);
    series.populations.resize(n);
    series.phases.resize(n);
    series.frame_gaps.resize(n);

    std::vector<AdiabaticFrame> frames(n);
    for (std::size_t k = 0; k < n; ++k) {
        try {
            AdiabaticFrame raw =
                eigenframe(model.hamiltonian(traj.r_values[k]), traj.r_values[k], gap_tol);
            frames[k] = (k == 0) ? std::move(raw) : gauge_align(frames[k - 1], raw);
        } catch (const Error& e) {
            std::ostringstream os;
            os << e.what() << " [sample " << k << ", t = " << traj.times[k] << "]";
            if (dynamic_cast<const FrameMismatch*>(&e)) throw FrameMismatch(os.str());
            if (dynamic_cast<const DegenerateSpectrum*>(&e)) throw DegenerateSpectrum(os.str());
            throw Error(os.str());
        }
        series.frame_gaps[k] = frames[k].min_gap;
    }

    // gamma_n(t) = -int_0^t E_n, accumulated with the trapezoid rule.
    series.gamma[0] = RVector::Zero(d);
    for (std::size_t k = 1; k < n; ++k) {
        const double dt = traj.times[k] - traj.times[k - 1];
        series.gamma[k] =
            series.gamma[k - 1] - 0.5 * dt * (frames[k].energies + frames[k - 1].energies);
    }

    std::vector<std::vector<double>> wrapped(d, std::vector<double>(n));
    for (std::size_t k = 0; k < n; ++k) {
        CVector c = frames[k].vectors.adjoint() * traj.states[k];
        for (int l = 0; l < d; ++l)
            c(l) *= std::exp(Complex(0.0, -series.gamma[k](l)));
        series.amplitudes[k] = c;
        series.populations[k] = c.cwiseAbs2();
        for (int l = 0; l < d; ++l) wrapped[l][k] = std::arg(c(l));
    }

    for (int l = 0; l < d; ++l) {
        const std::vector<double> unwrapped = unwrap_phase(wrapped[l]);
        for (std::size_t k = 0; k < n; ++k) {
            if (l == 0) series.phases[k] = RVector::Zero(d);
            series.phases[k](l) = unwrapped[k];
        }
    }
    return series;
}

}  // namespace cladyn
