#pragma once

#include "dgreen/dichotomy.hpp"
#include "dgreen/green.hpp"
#include "dgreen/propagator.hpp"
#include "dgreen/sources.hpp"
#include "dgreen/types.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dgreen {

struct BvpResult {
    Trajectory trajectory;
    double boundary_residual = 0.0;
    /// |A x - b| of the least-squares solve; large when the system is inconsistent.
    double consistency_residual = 0.0;
    /// |R_11| / |R_rr| from the rank-revealing factorization.
    double condition_number = 0.0;
};

/// Bounded solution approximated on [-T, T] by a one-shot linear system.
///
/// Unknowns are x(t_k) on a uniform grid with t = 0 on it. Rows: the step
/// relations x_{k+1} - U(t_{k+1},t_k) x_k = int U(t_{k+1},tau) f(tau) (Simpson),
/// P-(-T) x(-T) = 0, (I - P+(T)) x(T) = 0 and, if `pin` is given,
/// P_N(D) x(0) = P_N(D) pin. Solved in the least-squares sense.
inline BvpResult bvp_solve(const EvolutionFamily& family, const HalfLineDichotomy& plus,
                           const HalfLineDichotomy& minus, const Forcing& f, double T, double h,
                           const std::optional<Vector>& pin = std::nullopt, double tol_rank = 1e-10) {
    const Eigen::Index n = family.dim();
    if (!(T > 0.0) || !(h > 0.0)) throw InputError("bvp_solve: need T > 0 and h > 0");
    const double half_steps = T / h;
    const auto m = static_cast<long>(std::llround(half_steps));
    if (m < 2 || std::abs(half_steps - static_cast<double>(m)) > 1e-9 * half_steps)
        throw InputError("bvp_solve: T / h must be an integer >= 2");
    if (!family.contains(-T) || !family.contains(T))
        throw InputError("bvp_solve: T = " + std::to_string(T) + " exceeds the family grid");
    if (f.dim() != n) throw InputError("bvp_solve: forcing dimension " + std::to_string(f.dim()) + " vs " + std::to_string(n));

    const std::size_t N = static_cast<std::size_t>(2 * m);
    std::vector<double> t(N + 1);
    for (std::size_t k = 0; k <= N; ++k) t[k] = (static_cast<double>(k) - static_cast<double>(m)) * h;
    t[static_cast<std::size_t>(m)] = 0.0;

    const Operator D = build_gluing(plus.P0, minus.P0);
    const PseudoInverseResult pd = moore_penrose(D, tol_rank);
    const Eigen::Index unknowns = n * static_cast<Eigen::Index>(N + 1);
    const Eigen::Index rows = n * static_cast<Eigen::Index>(N) + 2 * n + (pin ? n : 0);
    Operator A = Operator::Zero(rows, unknowns);
    Vector b = Vector::Zero(rows);

    for (std::size_t k = 0; k < N; ++k) {
        const Eigen::Index r = n * static_cast<Eigen::Index>(k);
        const Operator step = family.propagator(t[k + 1], t[k]);
        A.block(r, r + n, n, n) = identity(n);
        A.block(r, r, n, n) = -step;
        const double mid = 0.5 * (t[k] + t[k + 1]);
        const Vector f_lo = f(t[k]);
        const Vector f_hi = t[k + 1] == 0.0 ? f.left(0.0) : f(t[k + 1]);
        b.segment(r, n) = h / 6.0 * (step * f_lo + 4.0 * family.apply(t[k + 1], mid, f(mid)) + f_hi);
    }
    const Operator p_minus = minus.projector(-T);
    const Operator q_plus = identity(n) - plus.projector(T);
    Eigen::Index r = n * static_cast<Eigen::Index>(N);
    A.block(r, 0, n, n) = p_minus;
    r += n;
    A.block(r, unknowns - n, n, n) = q_plus;
    r += n;
    if (pin) {
        if (pin->size() != n) throw InputError("bvp_solve: pin has dimension " + std::to_string(pin->size()));
        A.block(r, n * m, n, n) = pd.kernel_proj;
        b.segment(r, n) = pd.kernel_proj * *pin;
    }

    Eigen::CompleteOrthogonalDecomposition<Operator> cod;
    cod.setThreshold(tol_rank);
    cod.compute(A);
    if (cod.rank() < unknowns)
        throw MathError("bvp_solve: singular system, deficiency " + std::to_string(unknowns - cod.rank()) +
                        (pin ? "" : " (supply a kernel pin when D is singular)"));
    const Vector x = cod.solve(b);

    BvpResult out;
    out.consistency_residual = (A * x - b).norm();
    out.boundary_residual = (p_minus * x.head(n)).norm() + (q_plus * x.tail(n)).norm();
    const auto rd = cod.matrixQTZ().diagonal().cwiseAbs();
    out.condition_number = rd(0) / rd(cod.rank() - 1);
    out.trajectory.times = t;
    out.trajectory.values.reserve(N + 1);
    for (std::size_t k = 0; k <= N; ++k) out.trajectory.values.push_back(x.segment(n * static_cast<Eigen::Index>(k), n));
    out.trajectory.meta.residual_norm = out.consistency_residual;
    return out;
}

/// Bounded solution of the scalar equation x' = a x + f (component `component` of f).
/// a < 0: int_{-inf}^t e^{a(t-tau)} f dtau; a > 0: -int_t^inf e^{a(t-tau)} f dtau.
inline cplx convolution_scalar(double a, const Forcing& f, double t, Eigen::Index component = 0) {
    if (a == 0.0 || !std::isfinite(a)) throw InputError("convolution_scalar: need a finite nonzero a");
    if (component < 0 || component >= f.dim()) throw InputError("convolution_scalar: component out of range");
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double inf = std::numeric_limits<double>::infinity();
    auto piece = [&](double lo, double hi) {
        auto re = [&](double tau) { return (std::exp(a * (t - tau)) * f(tau)(component)).real(); };
        auto im = [&](double tau) { return (std::exp(a * (t - tau)) * f(tau)(component)).imag(); };
        return cplx(GK::integrate(re, lo, hi, 15, 1e-12), GK::integrate(im, lo, hi, 15, 1e-12));
    };
    // Split at 0 (kinks in |t| forcings) and at t.
    if (a < 0.0) {
        if (t <= 0.0) return piece(-inf, t);
        return piece(-inf, 0.0) + piece(0.0, t);
    }
    if (t >= 0.0) return -piece(t, inf);
    return -(piece(t, 0.0) + piece(0.0, inf));
}

struct CompareResult {
    double max_err = 0.0;
    double at_t = 0.0;
};

namespace detail {

inline Vector interp_linear(const Trajectory& tr, double t) {
    const auto it = std::lower_bound(tr.times.begin(), tr.times.end(), t);
    if (it == tr.times.end()) return tr.values.back();
    const auto i = static_cast<std::size_t>(it - tr.times.begin());
    if (*it == t || i == 0) return tr.values[i];
    const double w = (t - tr.times[i - 1]) / (tr.times[i] - tr.times[i - 1]);
    return (1.0 - w) * tr.values[i - 1] + w * tr.values[i];
}

}  // namespace detail

/// Sup-norm difference over the overlap, sampled at the finer trajectory's
/// times with linear interpolation of the coarser one. Restricted to
/// [lo, hi] when given.
inline CompareResult compare(const Trajectory& a, const Trajectory& b, double lo = -std::numeric_limits<double>::infinity(),
                             double hi = std::numeric_limits<double>::infinity()) {
    if (a.times.empty() || b.times.empty()) throw InputError("compare: empty trajectory");
    const double start = std::max({a.times.front(), b.times.front(), lo});
    const double stop = std::min({a.times.back(), b.times.back(), hi});
    if (!(start <= stop)) throw InputError("compare: trajectories do not overlap");
    const auto density = [](const Trajectory& tr) {
        const double span = tr.times.back() - tr.times.front();
        return span > 0.0 ? static_cast<double>(tr.times.size()) / span : 0.0;
    };
    const bool a_fine = density(a) >= density(b);
    const Trajectory& fine = a_fine ? a : b;
    const Trajectory& coarse = a_fine ? b : a;
    CompareResult out;
    bool any = false;
    for (std::size_t i = 0; i < fine.times.size(); ++i) {
        const double t = fine.times[i];
        if (t < start || t > stop) continue;
        any = true;
        const double e = (fine.values[i] - detail::interp_linear(coarse, t)).norm();
        if (e > out.max_err) {
            out.max_err = e;
            out.at_t = t;
        }
    }
    if (!any) throw InputError("compare: no sample falls in the overlap");
    return out;
}

}  // namespace dgreen
