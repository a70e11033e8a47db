#include "cladyn/reduced.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cladyn/errors.hpp"
#include "cladyn/ode.hpp"
#include "cladyn/series.hpp"

namespace cladyn {

namespace {

void require_antisymmetric(const RMatrix& a, const char* what) {
    if (a.rows() != a.cols()) throw DimensionMismatch(std::string(what) + ": matrix not square");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a + a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw InvalidArgument(std::string(what) + ": payoff matrix is not antisymmetric");
}

double payoff_scale(const RMatrix& a) { return std::max(1.0, a.cwiseAbs().maxCoeff()); }

// ln((1 - p) + p * e^x), stable for large |x|.
double ln_mix(double p, double x) {
    if (x > 0.0) return x + std::log1p((1.0 - p) * std::expm1(-x));
    return std::log1p(p * std::expm1(x));
}

struct ReducedDerivative {
    RMatrix a;
    RMatrix b;
    RVector adiag;
    const FrameDependentPayoffs* frame_source = nullptr;
    RVector berry;  // -Im K(l,l), zero in the parallel-transport gauge

    void refresh(double r_bar) {
        if (!frame_source) return;
        const AdiabaticFrame frame = eigenframe(frame_source->model.hamiltonian(r_bar), r_bar,
                                                frame_source->gap_tol);
        const ConnectionMatrix k = connection_analytic(
            frame, frame_source->model.derivative(r_bar), frame_source->gap_tol);
        const CMatrix a_ad = adiabatic_matrix(frame_source->observable_lab, frame);
        const PayoffMatrices payoffs = payoff_matrices(k, a_ad);
        a = payoffs.a;
        b = payoffs.b;
        adiag = a_ad.diagonal().real();
        for (int l = 0; l < k.dim(); ++l) berry(l) = -k.entries(l, l).imag();
    }
};

}  // namespace

SimplexState SimplexState::checked(RVector p, RVector phi, double r_bar) {
    if (p.size() != phi.size()) throw DimensionMismatch("SimplexState: p/phi size mismatch");
    if (p.size() < 1) throw InvalidArgument("SimplexState: empty state");
    for (Eigen::Index l = 0; l < p.size(); ++l)
        if (p(l) < 0.0) throw SimplexViolation("SimplexState: negative population");
    if (std::abs(p.sum() - 1.0) > 1e-9)
        throw SimplexViolation("SimplexState: populations do not sum to one");
    SimplexState s;
    s.p = std::move(p);
    s.phi = std::move(phi);
    s.r_bar = r_bar;
    return s;
}

RVector replicator_rhs(const RVector& p, const RMatrix& a) {
    if (a.rows() != p.size()) throw DimensionMismatch("replicator_rhs: dimension mismatch");
    return p.cwiseProduct(a * p);
}

ReducedPath integrate_reduced(const SimplexState& initial, const PayoffSource& payoffs,
                              double horizon_tau, double step, int record_stride) {
    if (!(horizon_tau > 0.0)) throw InvalidArgument("integrate_reduced: horizon must be positive");
    if (!(step > 0.0)) throw InvalidArgument("integrate_reduced: step must be positive");
    if (record_stride < 1) throw InvalidArgument("integrate_reduced: record_stride must be >= 1");

    const int d = static_cast<int>(initial.p.size());
    ReducedDerivative deriv;
    deriv.berry = RVector::Zero(d);
    if (const auto* constant = std::get_if<ConstantPayoffs>(&payoffs)) {
        require_antisymmetric(constant->a, "integrate_reduced");
        if (constant->a.rows() != d || constant->b.rows() != d || constant->adiag.size() != d)
            throw DimensionMismatch("integrate_reduced: payoff dimensions do not match state");
        deriv.a = constant->a;
        deriv.b = constant->b;
        deriv.adiag = constant->adiag;
    } else {
        deriv.frame_source = &std::get<FrameDependentPayoffs>(payoffs);
        if (deriv.frame_source->model.dim != d)
            throw DimensionMismatch("integrate_reduced: model dimension does not match state");
    }

    // State layout: [p(d), phi(d), r_bar].
    const auto rhs = [&](double /*tau*/, const RVector& y) -> RVector {
        deriv.refresh(y(2 * d));
        RVector dy(2 * d + 1);
        const RVector p = y.head(d);
        const double r_dot = deriv.adiag.dot(p);
        dy.head(d) = p.cwiseProduct(deriv.a * p);
        dy.segment(d, d) = -(deriv.b * p) + r_dot * deriv.berry;
        dy(2 * d) = r_dot;
        return dy;
    };

    RVector y(2 * d + 1);
    y.head(d) = initial.p;
    y.segment(d, d) = initial.phi;
    y(2 * d) = initial.r_bar;

    const long n_steps = static_cast<long>(std::ceil(horizon_tau / step - 1e-9));

    ReducedPath path;
    path.taus.reserve(static_cast<std::size_t>(n_steps / record_stride) + 2);
    path.taus.push_back(0.0);
    path.states.push_back(initial);
    path.running_average.push_back(initial.p);

    RVector average_acc = RVector::Zero(d);  // integral of p over [0, tau]
    RVector p_prev = initial.p;

    for (long k = 1; k <= n_steps; ++k) {
        const double tau_prev = step * static_cast<double>(k - 1);
        const double tau = std::min(step * static_cast<double>(k), horizon_tau);
        const double h = tau - tau_prev;
        y = rk4_step(rhs, tau_prev, y, h);

        if (!is_finite(y)) throw NonFiniteState("integrate_reduced: non-finite state");

        // Clamp round-off negatives; anything beyond tolerance is a failure.
        double worst = 0.0;
        for (int l = 0; l < d; ++l) worst = std::min(worst, y(l));
        if (worst < -1e-9) {
            std::ostringstream os;
            os << "integrate_reduced: population " << worst << " at tau = " << tau;
            throw SimplexViolation(os.str());
        }
        if (worst < 0.0) {
            for (int l = 0; l < d; ++l) y(l) = std::max(y(l), 0.0);
            y.head(d) /= y.head(d).sum();
        }
        if (std::abs(y.head(d).sum() - 1.0) > 1e-9)
            throw SimplexViolation("integrate_reduced: populations left the simplex");

        average_acc += 0.5 * h * (p_prev + y.head(d));
        p_prev = y.head(d);

        if (k % record_stride == 0 || k == n_steps) {
            SimplexState s;
            s.p = y.head(d);
            s.phi = y.segment(d, d);
            s.r_bar = y(2 * d);
            path.taus.push_back(tau);
            path.states.push_back(std::move(s));
            path.running_average.push_back(average_acc / tau);
        }
    }
    return path;
}

RVector time_average_path(const ReducedPath& path, double T) {
    if (path.taus.size() < 2) throw InvalidArgument("time_average_path: path too short");
    if (T <= path.taus.front() || T > path.taus.back() + 1e-12)
        throw InvalidArgument("time_average_path: T outside the recorded range");
    T = std::min(T, path.taus.back());

    const int d = static_cast<int>(path.states.front().p.size());
    RVector mean(d);
    std::vector<double> series(path.taus.size());
    for (int l = 0; l < d; ++l) {
        for (std::size_t k = 0; k < path.taus.size(); ++k) series[k] = path.states[k].p(l);
        mean(l) = trapezoid_mean(path.taus, series, T);
    }
    return mean;
}

double tamo_residual_max(const ReducedPath& path, const RMatrix& a) {
    require_antisymmetric(a, "tamo_residual_max");
    const int d = static_cast<int>(a.rows());
    const RVector& p0 = path.states.front().p;

    double worst = 0.0;
    for (std::size_t k = 1; k < path.taus.size(); ++k) {
        const double T = path.taus[k];
        const RVector rhs = a * path.running_average[k];
        for (int l = 0; l < d; ++l) {
            const double pT = path.states[k].p(l);
            if (p0(l) <= 0.0 || pT <= 0.0) continue;
            const double lhs = std::log(pT / p0(l)) / T;
            worst = std::max(worst, std::abs(lhs - rhs(l)));
        }
    }
    return worst;
}

namespace {

// Vertices of {x >= 0, sum x = 1, B x = 0} via basic solutions of the
// equality system, then the centroid as an interior representative.
std::optional<RVector> positive_null_vector(const RMatrix& a) {
    const int d = static_cast<int>(a.rows());
    const Eigen::JacobiSVD<RMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sigma_max = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    const double sigma_tol = 1e-10 * std::max(sigma_max, 1e-300);

    int rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > sigma_tol) ++rank;
    if (rank == d) return std::nullopt;  // trivial null space

    const int m = rank + 1;  // row-space constraints plus the simplex sum
    RMatrix constraints(m, d);
    for (int i = 0; i < rank; ++i) constraints.row(i) = svd.matrixV().col(i).transpose();
    constraints.row(rank).setOnes();
    RVector rhs = RVector::Zero(m);
    rhs(rank) = 1.0;

    if (m > d) return std::nullopt;

    std::vector<int> pick(m);
    std::iota(pick.begin(), pick.end(), 0);
    std::vector<RVector> vertices;

    const auto try_support = [&](const std::vector<int>& support) {
        RMatrix sub(m, m);
        for (int j = 0; j < m; ++j) sub.col(j) = constraints.col(support[j]);
        const Eigen::FullPivLU<RMatrix> lu(sub);
        if (lu.rank() < m) return;
        const RVector xs = lu.solve(rhs);
        if ((sub * xs - rhs).cwiseAbs().maxCoeff() > 1e-9) return;
        RVector x = RVector::Zero(d);
        for (int j = 0; j < m; ++j) x(support[j]) = xs(j);
        if (x.minCoeff() < -1e-10) return;
        x = x.cwiseMax(0.0);
        x /= x.sum();
        vertices.push_back(std::move(x));
    };

    // All supports of size m, in lexicographic order.
    while (true) {
        try_support(pick);
        int i = m - 1;
        while (i >= 0 && pick[i] == d - m + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < m; ++j) pick[j] = pick[j - 1] + 1;
    }

    if (vertices.empty()) return std::nullopt;
    RVector centroid = RVector::Zero(d);
    for (const RVector& v : vertices) centroid += v;
    centroid /= static_cast<double>(vertices.size());
    if (centroid.minCoeff() <= 1e-12) return std::nullopt;
    return centroid / centroid.sum();
}

}  // namespace

std::optional<RVector> interior_fixed_point(const RMatrix& a) {
    require_antisymmetric(a, "interior_fixed_point");
    const int d = static_cast<int>(a.rows());

    if (d == 1) return RVector::Ones(1);

    if (d == 3) {
        const double scale = payoff_scale(a);
        if (std::abs(a(0, 1)) > 1e-12 * scale) {
            RVector v(3);
            v << a(1, 2), -a(0, 2), a(0, 1);
            double s = v.sum();
            if (s < 0.0) {
                v = -v;
                s = -s;
            }
            if (s <= 0.0) return std::nullopt;
            v /= s;
            if (v.minCoeff() <= 1e-12) return std::nullopt;
            return v;
        }
    }
    return positive_null_vector(a);
}

double relative_entropy(const RVector& q, const RVector& p) {
    if (q.size() != p.size()) throw DimensionMismatch("relative_entropy: size mismatch");
    double s = 0.0;
    for (Eigen::Index l = 0; l < q.size(); ++l) {
        if (q(l) < -1e-12) throw InvalidArgument("relative_entropy: negative entry in q");
        if (q(l) <= 0.0) continue;
        if (p(l) <= 0.0) throw SupportViolation("relative_entropy: q is supported where p vanishes");
        s += q(l) * std::log(q(l) / p(l));
    }
    return s;
}

Classification classify_longtime(const RMatrix& a, const RVector& p0) {
    require_antisymmetric(a, "classify_longtime");
    const int d = static_cast<int>(a.rows());
    if (p0.size() != d) throw DimensionMismatch("classify_longtime: p0 size mismatch");

    std::vector<int> support;
    for (int l = 0; l < d; ++l)
        if (p0(l) > 0.0) support.push_back(l);
    if (support.empty()) throw InvalidArgument("classify_longtime: p0 is identically zero");
    const int s0 = static_cast<int>(support.size());
    const double tol = 1e-10 * payoff_scale(a);

    // All non-empty subsets of the initial support, largest first.
    std::vector<unsigned> masks;
    for (unsigned mask = 1; mask < (1u << s0); ++mask) masks.push_back(mask);
    std::stable_sort(masks.begin(), masks.end(), [](unsigned x, unsigned y) {
        const int px = __builtin_popcount(x), py = __builtin_popcount(y);
        return px != py ? px > py : x < y;
    });

    for (unsigned mask : masks) {
        std::vector<int> members;
        for (int i = 0; i < s0; ++i)
            if (mask & (1u << i)) members.push_back(support[i]);
        const int s = static_cast<int>(members.size());

        RMatrix sub(s, s);
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < s; ++j) sub(i, j) = a(members[i], members[j]);
        const std::optional<RVector> qs = interior_fixed_point(sub);
        if (!qs) continue;

        RVector q = RVector::Zero(d);
        for (int i = 0; i < s; ++i) q(members[i]) = (*qs)(i);
        const RVector residuals = a * q;

        bool equilibrium = true;
        for (int l : support)
            if (q(l) == 0.0 && residuals(l) > tol) equilibrium = false;
        if (!equilibrium) continue;

        Classification out;
        out.kind = (s == s0) ? Classification::Kind::Conservative
                             : Classification::Kind::Extinction;
        out.point = q;
        out.certificate_residuals = residuals;
        for (int l : support) {
            if (q(l) > 0.0) continue;
            out.extinct_indices.push_back(l);
            if (residuals(l) < -tol) out.strict_indices.push_back(l);
        }
        return out;
    }
    throw Error("classify_longtime: no equilibrium found (should not happen)");
}

TwoLevelValues two_level_closed_form(double p1_0, double a12, double b12, double tau) {
    if (p1_0 < 0.0 || p1_0 > 1.0)
        throw InvalidArgument("two_level_closed_form: p1_0 must lie in [0, 1]");

    TwoLevelValues v;
    if (a12 == 0.0) {
        v.p1 = p1_0;
        v.phi1 = -b12 * (1.0 - p1_0) * tau;
        v.phi2 = -b12 * p1_0 * tau;
        return v;
    }

    const double x = a12 * tau;
    if (x > 0.0) {
        v.p1 = p1_0 / (p1_0 + (1.0 - p1_0) * std::exp(-x));
    } else {
        const double ex = std::exp(x);
        v.p1 = p1_0 * ex / ((1.0 - p1_0) + p1_0 * ex);
    }
    // Integrated phase equation; the level-2 branch matches the logistic
    // integral of p1, the level-1 branch that of p2 = 1 - p1.
    v.phi1 = (b12 / a12) * ln_mix(1.0 - p1_0, -x);
    v.phi2 = -(b12 / a12) * ln_mix(p1_0, x);
    return v;
}

}  // namespace cladyn
