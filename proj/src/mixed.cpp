#include "cladyn/mixed.hpp"

#include <cmath>
#include <sstream>

#include "cladyn/errors.hpp"

namespace cladyn {

MixedAmplitudes MixedAmplitudes::checked(CMatrix cbar, double r_bar) {
    if (cbar.rows() != cbar.cols()) throw DimensionMismatch("MixedAmplitudes: matrix not square");
    if (hermiticity_residual(cbar) > 1e-9)
        throw NotHermitian("MixedAmplitudes: cbar is not Hermitian");
    if (std::abs(cbar.trace().real() - 1.0) > 1e-9 || std::abs(cbar.trace().imag()) > 1e-9)
        throw TraceDrift("MixedAmplitudes: trace is not one");
    for (Eigen::Index l = 0; l < cbar.rows(); ++l) {
        const double pl = cbar(l, l).real();
        if (pl < -1e-9 || pl > 1.0 + 1e-9)
            throw InvalidArgument("MixedAmplitudes: diagonal entry outside [0, 1]");
    }
    MixedAmplitudes m;
    m.cbar = std::move(cbar);
    m.r_bar = r_bar;
    return m;
}

MixedScenario MixedScenario::checked(ConnectionMatrix connection, CMatrix a_ad,
                                     std::optional<RVector> energies,
                                     std::optional<RVector> energy_slopes) {
    const int d = connection.dim();
    if (a_ad.rows() != d || a_ad.cols() != d)
        throw DimensionMismatch("MixedScenario: observable dimension mismatch");
    if (hermiticity_residual(a_ad) > 1e-9)
        throw NotHermitian("MixedScenario: observable is not Hermitian");
    if (energies && energies->size() != d)
        throw DimensionMismatch("MixedScenario: energies dimension mismatch");
    if (energy_slopes && energy_slopes->size() != d)
        throw DimensionMismatch("MixedScenario: energy_slopes dimension mismatch");
    MixedScenario s;
    s.connection = std::move(connection);
    s.a_ad = std::move(a_ad);
    s.energies = std::move(energies);
    s.energy_slopes = std::move(energy_slopes);
    return s;
}

double MixedPath::max_trace_drift() const {
    double worst = 0.0;
    for (double v : trace_drift) worst = std::max(worst, v);
    return worst;
}

double MixedPath::max_hermiticity_fixup() const {
    double worst = 0.0;
    for (double v : hermiticity_fixups) worst = std::max(worst, v);
    return worst;
}

namespace {

// Velocity of cbar under the quadratic mixed flow. Every bra-derivative
// element <l'|m> is expressed through the stored connection, <l'|m> = -K(l,m).
CMatrix cbar_velocity(const CMatrix& c, const CMatrix& k, const CMatrix& a, double r_dot) {
    const int d = static_cast<int>(c.rows());
    CMatrix v = CMatrix::Zero(d, d);
    for (int n = 0; n < d; ++n) {
        for (int m = 0; m < d; ++m) {
            Complex acc(0.0, 0.0);
            for (int l = 0; l < d; ++l) {
                const Complex pair = c(n, l) * c(l, m);
                if (l != n) acc -= k(n, l) * a(l, n) * pair;
                if (l != m) acc += k(l, m) * a(m, l) * pair;
            }
            acc -= r_dot * c(n, m) * (k(n, n) - k(m, m));
            v(n, m) = acc;
        }
    }
    return v;
}

double slow_velocity(const CMatrix& c, const CMatrix& a) {
    double r_dot = 0.0;
    for (Eigen::Index l = 0; l < c.rows(); ++l) r_dot += c(l, l).real() * a(l, l).real();
    return r_dot;
}

}  // namespace

std::pair<CMatrix, double> mixed_rhs(const MixedAmplitudes& state, const MixedScenario& scenario) {
    const int d = scenario.connection.dim();
    if (state.dim() != d) throw DimensionMismatch("mixed_rhs: dimension mismatch");
    const double r_dot = slow_velocity(state.cbar, scenario.a_ad);
    return {cbar_velocity(state.cbar, scenario.connection.entries, scenario.a_ad, r_dot), r_dot};
}

MixedPath integrate_mixed(const MixedAmplitudes& initial, const MixedScenario& scenario,
                          double horizon_tau, double step, int record_stride) {
    if (!(horizon_tau > 0.0)) throw InvalidArgument("integrate_mixed: horizon must be positive");
    if (!(step > 0.0)) throw InvalidArgument("integrate_mixed: step must be positive");
    if (record_stride < 1) throw InvalidArgument("integrate_mixed: record_stride must be >= 1");
    const int d = scenario.connection.dim();
    if (initial.dim() != d) throw DimensionMismatch("integrate_mixed: dimension mismatch");

    const CMatrix& k = scenario.connection.entries;
    const CMatrix& a = scenario.a_ad;

    CMatrix c = initial.cbar;
    double r = initial.r_bar;

    MixedPath path;
    const auto record = [&](double tau, double fixup) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(c, Eigen::EigenvaluesOnly);
        path.taus.push_back(tau);
        path.cbars.push_back(c);
        path.r_bars.push_back(r);
        path.trace_drift.push_back(std::abs(c.trace().real() - 1.0));
        path.hermiticity_fixups.push_back(fixup);
        path.min_eigenvalues.push_back(es.eigenvalues().minCoeff());
    };
    record(0.0, 0.0);

    const long n_steps = static_cast<long>(std::ceil(horizon_tau / step - 1e-9));
    CMatrix k1(d, d), k2(d, d), k3(d, d), k4(d, d), work(d, d);

    for (long n = 1; n <= n_steps; ++n) {
        const double tau_prev = step * static_cast<double>(n - 1);
        const double tau = std::min(step * static_cast<double>(n), horizon_tau);
        const double h = tau - tau_prev;

        const double r1 = slow_velocity(c, a);
        k1 = cbar_velocity(c, k, a, r1);
        work = c + (0.5 * h) * k1;
        const double r2 = slow_velocity(work, a);
        k2 = cbar_velocity(work, k, a, r2);
        work = c + (0.5 * h) * k2;
        const double r3 = slow_velocity(work, a);
        k3 = cbar_velocity(work, k, a, r3);
        work = c + h * k3;
        const double r4 = slow_velocity(work, a);
        k4 = cbar_velocity(work, k, a, r4);

        c += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        r += (h / 6.0) * (r1 + 2.0 * r2 + 2.0 * r3 + r4);

        if (!is_finite(c) || !std::isfinite(r))
            throw NonFiniteState("integrate_mixed: non-finite state");

        // Hermiticity is exact for the flow; restore it against round-off and
        // keep the correction as a diagnostic.
        work = 0.5 * (c + c.adjoint());
        const double fixup = (c - work).cwiseAbs().maxCoeff();
        c.swap(work);

        const double drift = std::abs(c.trace().real() - 1.0);
        if (drift > 1e-6) {
            std::ostringstream os;
            os << "integrate_mixed: trace drift " << drift << " at tau = " << tau;
            throw TraceDrift(os.str());
        }

        if (n % record_stride == 0 || n == n_steps) record(tau, fixup);
    }
    return path;
}

CMatrix hybrid_observable(const RVector& energies, const RVector& energy_slopes,
                          const ConnectionMatrix& connection) {
    const int d = connection.dim();
    if (energies.size() != d || energy_slopes.size() != d)
        throw DimensionMismatch("hybrid_observable: dimension mismatch");

    CMatrix a = CMatrix::Zero(d, d);
    for (int n = 0; n < d; ++n) {
        a(n, n) = energy_slopes(n);
        for (int l = 0; l < d; ++l) {
            if (l == n) continue;
            a(n, l) = (energies(n) - energies(l)) * connection.entries(n, l);
        }
    }
    if (hermiticity_residual(a) > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()))
        throw NotHermitian("hybrid_observable: construction lost Hermiticity");
    return a;
}

CMatrix pseudo_pure_map(double eta, const CMatrix& a_ad) {
    if (!(eta > 0.0) || eta > 1.0)
        throw InvalidArgument("pseudo_pure_map: eta must lie in (0, 1]");
    return (eta * eta) * a_ad;
}

}  // namespace cladyn
