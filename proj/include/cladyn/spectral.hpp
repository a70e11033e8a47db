#pragma once

#include <functional>
#include <vector>

#include "cladyn/types.hpp"

namespace cladyn {

/// Parametric Hermitian matrix family H[R] together with its analytic
/// derivative dH/dR. Both maps must return d x d Hermitian matrices for
/// every queried R.
struct HamiltonianModel {
    int dim = 0;
    std::function<CMatrix(double)> hamiltonian;
    std::function<CMatrix(double)> derivative;

    /// Builds a model and spot-checks it: Hermiticity of H(R) to 1e-12 and
    /// agreement of the analytic derivative with a central finite difference
    /// (step 1e-5, relative tolerance 1e-6) at the given sample points.
    static HamiltonianModel checked(int dim,
                                    std::function<CMatrix(double)> hamiltonian,
                                    std::function<CMatrix(double)> derivative,
                                    const std::vector<double>& sample_points = {-0.5, 0.0, 0.5});
};

/// Instantaneous eigenbasis of H[R] at one value of R, in the deterministic
/// raw gauge (largest-magnitude component of each column real positive).
struct AdiabaticFrame {
    double r_value = 0.0;
    RVector energies;   // ascending
    CMatrix vectors;    // columns are normalized eigenvectors
    double min_gap = 0.0;

    int dim() const { return static_cast<int>(energies.size()); }
};

/// Matrix of derivative couplings, entry (l, n) = <l | d/dR n>.
/// Anti-Hermitian; the diagonal is purely imaginary.
struct ConnectionMatrix {
    CMatrix entries;

    int dim() const { return static_cast<int>(entries.rows()); }

    /// Validates anti-Hermiticity (anti_herm_tol) and the imaginary-diagonal
    /// property (diag_tol) before accepting the entries.
    static ConnectionMatrix checked(CMatrix entries, double anti_herm_tol = 1e-9,
                                    double diag_tol = 1e-9);
};

/// Replicator game data: a is the antisymmetric payoff matrix driving the
/// populations, b the symmetric matrix driving the feedback phases. Both
/// have zero diagonal.
struct PayoffMatrices {
    RMatrix a;
    RMatrix b;
};

/// Diagonalizes a Hermitian matrix and applies the raw gauge.
/// Throws NotHermitian or DegenerateSpectrum (adjacent gap <= gap_tol).
AdiabaticFrame eigenframe(const CMatrix& h, double r_value, double gap_tol);

/// Multiplies each column of target by a unit phase so that the overlap with
/// the corresponding reference column is real and positive. Throws
/// FrameMismatch when any overlap magnitude drops below 0.5.
AdiabaticFrame gauge_align(const AdiabaticFrame& reference, const AdiabaticFrame& target);

/// Connection via the off-diagonal identity <l|dH|n> / (E_n - E_l).
/// The diagonal is set to zero (parallel-transport gauge).
ConnectionMatrix connection_analytic(const AdiabaticFrame& frame, const CMatrix& dh,
                                     double gap_tol = 1e-8);

/// Central finite-difference connection: frames at r +- step/2 are aligned
/// to the frame at r and differenced column by column. The diagonal is kept
/// as the discrete gauge produces it and only checked to be small (< step).
ConnectionMatrix connection_fd(const HamiltonianModel& model, double r_value, double step,
                               double gap_tol = 1e-8);

/// Conjugates a lab-basis Hermitian operator into the adiabatic basis,
/// U^H A U with U the frame's eigenvector matrix.
CMatrix adiabatic_matrix(const CMatrix& a_lab, const AdiabaticFrame& frame);

/// Builds the replicator payoffs from the connection and the adiabatic-basis
/// observable: a(l,n) = -2 Re{K(l,n) A(n,l)}, b(l,n) = Im{K(l,n) A(n,l)}.
/// a is antisymmetrized and b symmetrized exactly by mirroring the upper
/// triangle; diagonals are zero.
PayoffMatrices payoff_matrices(const ConnectionMatrix& connection, const CMatrix& a_ad);

}  // namespace cladyn
