#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "cladyn/spectral.hpp"
#include "cladyn/types.hpp"

namespace cladyn {

/// Point of the reduced flow: level populations on the simplex, feedback
/// phases and the slow coordinate.
struct SimplexState {
    RVector p;
    RVector phi;
    double r_bar = 0.0;

    /// Validates p >= 0 and sum p = 1 within 1e-9.
    static SimplexState checked(RVector p, RVector phi, double r_bar = 0.0);
};

/// Fixed payoff data: antisymmetric a, symmetric b and the diagonal
/// observable elements that drive the slow coordinate.
struct ConstantPayoffs {
    RMatrix a;
    RMatrix b;
    RVector adiag;
};

/// Payoffs rebuilt from the eigenframe at the current R each evaluation.
struct FrameDependentPayoffs {
    HamiltonianModel model;
    CMatrix observable_lab;
    double gap_tol = 1e-8;
};

using PayoffSource = std::variant<ConstantPayoffs, FrameDependentPayoffs>;

/// Solution of the reduced flow sampled on the fixed-step grid.
struct ReducedPath {
    std::vector<double> taus;
    std::vector<SimplexState> states;
    std::vector<RVector> running_average;  // trapezoidal mean of p over [0, tau]

    const SimplexState& front() const { return states.front(); }
    const SimplexState& back() const { return states.back(); }
};

/// Long-time behaviour of the constant-payoff replicator flow.
struct Classification {
    enum class Kind { Conservative, Extinction };
    Kind kind = Kind::Conservative;
    RVector point;                  // interior fixed point or extinction limit
    RVector certificate_residuals;  // (a * point)_k for every k
    std::vector<int> extinct_indices;
    std::vector<int> strict_indices;  // extinct indices with strictly negative residual
};

/// Replicator velocity v_l = p_l * sum_n a(l,n) p_n.
RVector replicator_rhs(const RVector& p, const RMatrix& a);

/// Fixed-step RK4 integration of populations, phases and the slow coordinate.
/// Tiny negative populations (above -1e-12) are clamped to zero and the
/// simplex renormalized; larger violations raise SimplexViolation. Every
/// record_stride-th step is stored.
ReducedPath integrate_reduced(const SimplexState& initial, const PayoffSource& payoffs,
                              double horizon_tau, double step, int record_stride = 1);

/// Trapezoidal mean of p over [0, T] along the recorded path.
RVector time_average_path(const ReducedPath& path, double T);

/// Largest residual of the averaging identity
/// (1/T) ln(p_l(T)/p_l(0)) - sum_n a(l,n) pbar_n(T) over the recorded grid.
/// Components that start or arrive at zero population are skipped.
double tamo_residual_max(const ReducedPath& path, const RMatrix& a);

/// Strictly positive simplex vector in the null space of a, when one exists.
/// d = 3 uses the closed form (a23, -a13, a12)/a12 up to normalization; other
/// dimensions use singular-value thresholding plus a vertex search of the
/// null-space/simplex intersection.
std::optional<RVector> interior_fixed_point(const RMatrix& a);

/// Relative entropy S[q|p] = sum q_l ln(q_l / p_l), with 0 ln 0 = 0.
/// Throws SupportViolation when q_l > 0 while p_l <= 0.
double relative_entropy(const RVector& q, const RVector& p);

/// Conservative (interior fixed point exists on the support of p0) versus
/// extinction, with the equilibrium limit and the certificate inequalities.
Classification classify_longtime(const RMatrix& a, const RVector& p0);

/// Closed-form two-level solution: logistic population transfer plus the
/// accumulated feedback phases. The a12 -> 0 limit is evaluated analytically.
struct TwoLevelValues {
    double p1 = 0.0;
    double phi1 = 0.0;
    double phi2 = 0.0;
};
TwoLevelValues two_level_closed_form(double p1_0, double a12, double b12, double tau);

}  // namespace cladyn
