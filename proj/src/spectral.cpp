#include "cladyn/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cladyn/errors.hpp"

namespace cladyn {

double hermiticity_residual(const CMatrix& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

double anti_hermiticity_residual(const CMatrix& m) {
    return (m + m.adjoint()).cwiseAbs().maxCoeff();
}

bool is_finite(const CMatrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
    return true;
}

bool is_finite(const RVector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v(i))) return false;
    return true;
}

namespace {

void require_square(const CMatrix& m, const char* what) {
    if (m.rows() != m.cols())
        throw DimensionMismatch(std::string(what) + ": matrix is not square");
}

void require_hermitian(const CMatrix& m, const char* what, double tol) {
    require_square(m, what);
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double res = hermiticity_residual(m);
    if (res > tol * scale) {
        std::ostringstream os;
        os << what << ": Hermiticity residual " << res << " exceeds " << tol * scale;
        throw NotHermitian(os.str());
    }
}

// Unit phase that makes the largest-magnitude component of v real positive.
// Ties are broken by the lowest index.
Complex raw_gauge_factor(const CVector& v) {
    Eigen::Index pivot = 0;
    double best = std::abs(v(0));
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        const double mag = std::abs(v(i));
        if (mag > best) {
            best = mag;
            pivot = i;
        }
    }
    if (best == 0.0) return Complex(1.0, 0.0);
    return std::conj(v(pivot)) / best;
}

}  // namespace

HamiltonianModel HamiltonianModel::checked(int dim, std::function<CMatrix(double)> hamiltonian,
                                           std::function<CMatrix(double)> derivative,
                                           const std::vector<double>& sample_points) {
    if (dim < 2) throw InvalidArgument("HamiltonianModel: dim must be >= 2");
    if (!hamiltonian || !derivative)
        throw InvalidArgument("HamiltonianModel: both maps must be callable");

    const double fd_step = 1e-5;
    for (double r : sample_points) {
        const CMatrix h = hamiltonian(r);
        if (h.rows() != dim || h.cols() != dim)
            throw DimensionMismatch("HamiltonianModel: hamiltonian(R) has wrong shape");
        require_hermitian(h, "HamiltonianModel::hamiltonian", 1e-12);
        const CMatrix dh = derivative(r);
        if (dh.rows() != dim || dh.cols() != dim)
            throw DimensionMismatch("HamiltonianModel: derivative(R) has wrong shape");
        require_hermitian(dh, "HamiltonianModel::derivative", 1e-12);

        const CMatrix fd = (hamiltonian(r + fd_step / 2) - hamiltonian(r - fd_step / 2)) / fd_step;
        const double scale = std::max(1.0, dh.cwiseAbs().maxCoeff());
        const double mismatch = (dh - fd).cwiseAbs().maxCoeff() / scale;
        if (mismatch > 1e-6) {
            std::ostringstream os;
            os << "HamiltonianModel: analytic derivative deviates from finite difference by "
               << mismatch << " (relative) at R = " << r;
            throw ValueError(os.str());
        }
    }

    HamiltonianModel model;
    model.dim = dim;
    model.hamiltonian = std::move(hamiltonian);
    model.derivative = std::move(derivative);
    return model;
}

ConnectionMatrix ConnectionMatrix::checked(CMatrix entries, double anti_herm_tol,
                                           double diag_tol) {
    if (entries.rows() != entries.cols())
        throw DimensionMismatch("ConnectionMatrix: matrix is not square");
    const double res = anti_hermiticity_residual(entries);
    if (res > anti_herm_tol) {
        std::ostringstream os;
        os << "ConnectionMatrix: anti-Hermiticity residual " << res << " exceeds " << anti_herm_tol;
        throw ValueError(os.str());
    }
    for (Eigen::Index i = 0; i < entries.rows(); ++i) {
        if (std::abs(entries(i, i).real()) > diag_tol) {
            std::ostringstream os;
            os << "ConnectionMatrix: diagonal entry " << i << " has real part "
               << entries(i, i).real() << " (tolerance " << diag_tol << ")";
            throw ValueError(os.str());
        }
    }
    ConnectionMatrix c;
    c.entries = std::move(entries);
    return c;
}

AdiabaticFrame eigenframe(const CMatrix& h, double r_value, double gap_tol) {
    if (gap_tol <= 0.0) throw InvalidArgument("eigenframe: gap_tol must be positive");
    require_hermitian(h, "eigenframe", 1e-12);

    Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (h + h.adjoint()));
    if (solver.info() != Eigen::Success) throw Error("eigenframe: eigensolver failed");

    AdiabaticFrame frame;
    frame.r_value = r_value;
    frame.energies = solver.eigenvalues();
    frame.vectors = solver.eigenvectors();

    const int d = frame.dim();
    frame.min_gap = std::numeric_limits<double>::infinity();
    for (int n = 0; n + 1 < d; ++n)
        frame.min_gap = std::min(frame.min_gap, frame.energies(n + 1) - frame.energies(n));
    if (frame.min_gap <= gap_tol) {
        std::ostringstream os;
        os << "eigenframe: adjacent gap " << frame.min_gap << " <= gap_tol " << gap_tol
           << " at R = " << r_value;
        throw DegenerateSpectrum(os.str());
    }

    for (int n = 0; n < d; ++n) frame.vectors.col(n) *= raw_gauge_factor(frame.vectors.col(n));
    return frame;
}

AdiabaticFrame gauge_align(const AdiabaticFrame& reference, const AdiabaticFrame& target) {
    if (reference.dim() != target.dim())
        throw DimensionMismatch("gauge_align: frame dimensions differ");

    AdiabaticFrame aligned = target;
    for (int n = 0; n < target.dim(); ++n) {
        const Complex overlap = reference.vectors.col(n).dot(target.vectors.col(n));
        const double mag = std::abs(overlap);
        if (mag < 0.5) {
            std::ostringstream os;
            os << "gauge_align: overlap magnitude " << mag << " for level " << n
               << " is below 0.5 (frames too far apart or level crossing)";
            throw FrameMismatch(os.str());
        }
        aligned.vectors.col(n) *= std::conj(overlap) / mag;
    }
    return aligned;
}

ConnectionMatrix connection_analytic(const AdiabaticFrame& frame, const CMatrix& dh,
                                     double gap_tol) {
    if (dh.rows() != frame.dim() || dh.cols() != frame.dim())
        throw DimensionMismatch("connection_analytic: dimension mismatch");
    require_hermitian(dh, "connection_analytic", 1e-12);

    const int d = frame.dim();
    const CMatrix dh_ad = frame.vectors.adjoint() * dh * frame.vectors;
    CMatrix k = CMatrix::Zero(d, d);
    for (int l = 0; l < d; ++l) {
        for (int n = 0; n < d; ++n) {
            if (l == n) continue;
            const double denom = frame.energies(n) - frame.energies(l);
            if (std::abs(denom) < gap_tol) {
                std::ostringstream os;
                os << "connection_analytic: levels " << l << " and " << n
                   << " are closer than gap_tol";
                throw DegenerateSpectrum(os.str());
            }
            k(l, n) = dh_ad(l, n) / denom;
        }
    }
    return ConnectionMatrix::checked(std::move(k));
}

ConnectionMatrix connection_fd(const HamiltonianModel& model, double r_value, double step,
                               double gap_tol) {
    if (step <= 0.0) throw InvalidArgument("connection_fd: step must be positive");

    const AdiabaticFrame center = eigenframe(model.hamiltonian(r_value), r_value, gap_tol);
    const AdiabaticFrame plus = gauge_align(
        center, eigenframe(model.hamiltonian(r_value + step / 2), r_value + step / 2, gap_tol));
    const AdiabaticFrame minus = gauge_align(
        center, eigenframe(model.hamiltonian(r_value - step / 2), r_value - step / 2, gap_tol));

    const CMatrix k = center.vectors.adjoint() * ((plus.vectors - minus.vectors) / step);
    return ConnectionMatrix::checked(k, std::max(1e-9, 10.0 * step * step), step);
}

CMatrix adiabatic_matrix(const CMatrix& a_lab, const AdiabaticFrame& frame) {
    if (a_lab.rows() != frame.dim() || a_lab.cols() != frame.dim())
        throw DimensionMismatch("adiabatic_matrix: dimension mismatch");
    require_hermitian(a_lab, "adiabatic_matrix", 1e-12);
    CMatrix out = frame.vectors.adjoint() * a_lab * frame.vectors;
    if (hermiticity_residual(out) > 1e-10)
        throw NotHermitian("adiabatic_matrix: result lost Hermiticity");
    return out;
}

PayoffMatrices payoff_matrices(const ConnectionMatrix& connection, const CMatrix& a_ad) {
    const int d = connection.dim();
    if (a_ad.rows() != d || a_ad.cols() != d)
        throw DimensionMismatch("payoff_matrices: dimension mismatch");

    PayoffMatrices p;
    p.a = RMatrix::Zero(d, d);
    p.b = RMatrix::Zero(d, d);
    // Compute the upper triangle and mirror so that the symmetries hold
    // bit-exactly.
    for (int l = 0; l < d; ++l) {
        for (int n = l + 1; n < d; ++n) {
            const Complex prod = connection.entries(l, n) * a_ad(n, l);
            p.a(l, n) = -2.0 * prod.real();
            p.a(n, l) = -p.a(l, n);
            p.b(l, n) = prod.imag();
            p.b(n, l) = p.b(l, n);
        }
    }
    return p;
}

}  // namespace cladyn
