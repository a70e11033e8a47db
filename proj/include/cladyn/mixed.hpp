#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "cladyn/spectral.hpp"
#include "cladyn/types.hpp"

namespace cladyn {

/// Adiabatic-basis density-matrix amplitudes c_{nm} plus the slow coordinate.
struct MixedAmplitudes {
    CMatrix cbar;
    double r_bar = 0.0;

    /// Validates Hermiticity, unit trace and the diagonal range.
    static MixedAmplitudes checked(CMatrix cbar, double r_bar = 0.0);

    int dim() const { return static_cast<int>(cbar.rows()); }
};

/// Connection and adiabatic-basis observable specified directly, without a
/// parent Hamiltonian. Energies and slopes are kept for hybrid construction.
struct MixedScenario {
    ConnectionMatrix connection;
    CMatrix a_ad;
    std::optional<RVector> energies;
    std::optional<RVector> energy_slopes;

    static MixedScenario checked(ConnectionMatrix connection, CMatrix a_ad,
                                 std::optional<RVector> energies = std::nullopt,
                                 std::optional<RVector> energy_slopes = std::nullopt);
};

/// Solution samples of the mixed reduced flow plus integrator diagnostics.
struct MixedPath {
    std::vector<double> taus;
    std::vector<CMatrix> cbars;
    std::vector<double> r_bars;
    std::vector<double> trace_drift;         // |tr c - 1|
    std::vector<double> hermiticity_fixups;  // size of the per-step re-symmetrization
    std::vector<double> min_eigenvalues;     // positivity diagnostic, not asserted

    double max_trace_drift() const;
    double max_hermiticity_fixup() const;
};

/// Right-hand side of the mixed flow: returns (d cbar / d tau, d R / d tau).
/// The gauge term R' * c_{nm} (K_nn - K_mm) is folded into the velocity.
std::pair<CMatrix, double> mixed_rhs(const MixedAmplitudes& state, const MixedScenario& scenario);

/// Fixed-step RK4 advance with per-step re-symmetrization of cbar. Throws
/// TraceDrift when |tr c - 1| exceeds 1e-6 and NonFiniteState on overflow.
MixedPath integrate_mixed(const MixedAmplitudes& initial, const MixedScenario& scenario,
                          double horizon_tau, double step, int record_stride = 1);

/// Observable of the overdamped hybrid coupling, A = -dH/dR in the adiabatic
/// basis: off-diagonals (E_n - E_l) K(n,l), diagonal the given energy slopes.
CMatrix hybrid_observable(const RVector& energies, const RVector& energy_slopes,
                          const ConnectionMatrix& connection);

/// Observable rescaling for pseudo-pure ensembles (uniform eta^2 factor).
CMatrix pseudo_pure_map(double eta, const CMatrix& a_ad);

}  // namespace cladyn
