#pragma once

#include "dgreen/propagator.hpp"
#include "dgreen/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <utility>
#include <vector>

namespace dgreen {

enum class Side { Plus, Minus };

inline const char* to_string(Side s) { return s == Side::Plus ? "plus" : "minus"; }

/// Stable spectral projector of an autonomous generator: the projector onto
/// generalized eigenvectors with Re(lambda) < 0 along those with Re(lambda) > 0.
///
/// Computed as (I - sign(A)) / 2 with a scaled Newton iteration for the matrix
/// sign function, which handles defective A.
inline Operator spectral_projector(const Operator& a, double gap_tol = 1e-8) {
    if (a.rows() != a.cols()) throw InputError("spectral_projector: A must be square, got " + dims(a));
    const Eigen::Index n = a.rows();
    Eigen::ComplexEigenSolver<Operator> es(a, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const cplx lam = es.eigenvalues()(i);
        if (std::abs(lam.real()) < gap_tol) {
            std::ostringstream msg;
            msg << "no dichotomy: eigenvalue " << lam.real() << (lam.imag() < 0 ? " - " : " + ")
                << std::abs(lam.imag()) << "i lies within " << gap_tol << " of the imaginary axis";
            throw NoDichotomyError(msg.str());
        }
    }
    Operator x = a;
    for (int it = 0; it < 100; ++it) {
        Eigen::PartialPivLU<Operator> lu(x);
        const double det_abs = std::abs(lu.determinant());
        const double scale = det_abs > 0.0 && std::isfinite(det_abs) ? std::pow(det_abs, -1.0 / static_cast<double>(n))
                                                                       : 1.0;
        Operator next = 0.5 * (scale * x + lu.inverse() / scale);
        const double delta = (next - x).norm();
        x = std::move(next);
        if (delta <= 1e-14 * x.norm()) break;
    }
    return 0.5 * (identity(n) - x);
}

namespace detail {

// Orthonormal basis of the range of a projector (its nonzero singular values are >= 1).
inline Operator projector_range_basis(const Operator& p) {
    Eigen::JacobiSVD<Operator> svd(p, Eigen::ComputeFullU);
    Eigen::Index r = 0;
    while (r < svd.singularValues().size() && svd.singularValues()(r) > 0.5) ++r;
    return svd.matrixU().leftCols(r);
}

inline Operator orthonormalize(const Operator& b) {
    if (b.cols() == 0) return b;
    Eigen::HouseholderQR<Operator> qr(b);
    return qr.householderQ() * Operator::Identity(b.rows(), b.cols());
}

// Projector with the given range and kernel bases.
inline Operator projector_from_bases(const Operator& range, const Operator& kernel) {
    const Eigen::Index n = range.rows();
    if (range.cols() == 0) return Operator::Zero(n, n);
    if (kernel.cols() == 0) return identity(n);
    Operator b(n, n);
    b << range, kernel;
    Operator binv = b.partialPivLu().inverse();
    return range * binv.topRows(range.cols());
}

}  // namespace detail

/// Projector-valued function P(t) = U(t,0) P0 U(0,t) on one half-line.
///
/// The subspace that the flow expands outward from 0 (Ker P on the plus side,
/// Range P on the minus side) is transported from P0 directly. The other one
/// is unique on the half-line, so it is recovered by sweeping inward from the
/// far end of the grid, seeded with the orthogonal complement of the first;
/// transport in that direction contracts the seed error. Long-span products
/// U(t,0), U(0,t) are never formed. Accuracy degrades within a few 1/alpha of
/// the grid end, so the family should extend past the range that is queried.
class ProjectorField {
public:
    ProjectorField(std::shared_ptr<const EvolutionFamily> family, Operator p0, Side side)
        : family_(std::move(family)), p0_(std::move(p0)), side_(side) {
        const auto& fam = *family_;
        const Eigen::Index n = p0_.rows();
        if (p0_.cols() != n || n != fam.dim())
            throw InputError("projector field: P0 is " + dims(p0_) + " but the family has dimension " +
                             std::to_string(fam.dim()));
        const double h = fam.step();
        const double extent = side_ == Side::Plus ? fam.t_max() : -fam.t_min();
        nsteps_ = static_cast<std::size_t>(std::llround(extent / h));
        stride_ = std::max<std::size_t>(1, (nsteps_ + 4095) / 4096);
        const std::size_t stored = nsteps_ / stride_ + 1;

        Operator range0 = detail::projector_range_basis(p0_);
        Operator kernel0 = detail::projector_range_basis(identity(n) - p0_);
        const bool plus = side_ == Side::Plus;
        // "Outward" basis: kernel on the plus side, range on the minus side.
        Operator out = plus ? kernel0 : range0;
        std::vector<Operator> outward(stored), inward(stored);
        outward[0] = out;
        for (std::size_t i = 1; i <= nsteps_; ++i) {
            out = detail::orthonormalize(fam.apply(time(i), time(i - 1), out));
            if (i % stride_ == 0) outward[i / stride_] = out;
        }
        // Seed the far end with the orthogonal complement of the outward subspace.
        Operator in;
        {
            Eigen::HouseholderQR<Operator> qr(out);
            Operator q = qr.householderQ();
            in = q.rightCols(n - out.cols());
        }
        const std::size_t last = (nsteps_ / stride_) * stride_;
        for (std::size_t i = nsteps_; i > last; --i) in = detail::orthonormalize(fam.apply(time(i - 1), time(i), in));
        inward[last / stride_] = in;
        for (std::size_t i = last; i > 0; --i) {
            in = detail::orthonormalize(fam.apply(time(i - 1), time(i), in));
            if ((i - 1) % stride_ == 0) inward[(i - 1) / stride_] = in;
        }
        // Mismatch between P0 and the subspace the dynamics singles out.
        const Operator& given = plus ? range0 : kernel0;
        if (given.cols() > 0)
            consistency_err_ = ((identity(n) - given * given.adjoint()) * inward[0]).norm();
        inward[0] = given;

        ranges_.resize(stored);
        kernels_.resize(stored);
        for (std::size_t k = 0; k < stored; ++k) {
            ranges_[k] = plus ? inward[k] : outward[k];
            kernels_[k] = plus ? outward[k] : inward[k];
        }
    }

    Operator at(double t) const {
        const double h = family_->step();
        const double u = side_ == Side::Plus ? t : -t;
        if (u < -1e-9 * h || u > static_cast<double>(nsteps_) * h * (1.0 + 1e-12) + 1e-9 * h)
            throw InputError(std::string("projector field: t = ") + std::to_string(t) + " is off the " +
                             to_string(side_) + " half-line grid");
        if (u <= 0.0) return p0_;
        auto k = static_cast<std::size_t>(std::llround(u / (h * static_cast<double>(stride_))));
        k = std::min(k, ranges_.size() - 1);
        const double tk = time(k * stride_);
        if (std::abs(t - tk) <= 1e-12 * std::max(1.0, std::abs(t)))
            return detail::projector_from_bases(ranges_[k], kernels_[k]);
        return detail::projector_from_bases(detail::orthonormalize(family_->apply(t, tk, ranges_[k])),
                                            detail::orthonormalize(family_->apply(t, tk, kernels_[k])));
    }

    Side side() const { return side_; }
    const Operator& p0() const { return p0_; }
    const EvolutionFamily& family() const { return *family_; }
    /// Distance between Range/Kernel of P0 and the subspace recovered from the far end.
    double consistency_err() const { return consistency_err_; }

private:
    double time(std::size_t i) const {
        const double t = static_cast<double>(i) * family_->step();
        return side_ == Side::Plus ? t : -t;
    }

    std::shared_ptr<const EvolutionFamily> family_;
    Operator p0_;
    Side side_;
    std::size_t nsteps_ = 0;
    std::size_t stride_ = 1;
    std::vector<Operator> ranges_, kernels_;
    double consistency_err_ = 0.0;
};

struct DichotomyReport {
    bool ok = false;
    double M_est = 0.0;
    double alpha_est = 0.0;
    std::pair<double, double> worst_pair{0.0, 0.0};
    double idempotency_err = 0.0;
    double invariance_err = 0.0;
    std::string reason;
};

/// Exponential dichotomy of a family on one half-line, split at t = 0.
struct HalfLineDichotomy {
    Side side = Side::Plus;
    Operator P0;
    double M = 1.0;
    double alpha = 1.0;
    std::shared_ptr<const ProjectorField> field;

    Operator projector(double t) const { return field->at(t); }
    const EvolutionFamily& family() const { return field->family(); }
};

namespace detail {

inline std::shared_ptr<const EvolutionFamily> borrow(const EvolutionFamily& f) {
    return std::shared_ptr<const EvolutionFamily>(&f, [](const EvolutionFamily*) {});
}

}  // namespace detail

/// Samples pairs t >= s on the half-line and fits the tightest (M, alpha)
/// with a log-linear envelope over the far half of the separations.
///
/// span = 0 samples the inner half of the family's extent on that side.
inline DichotomyReport verify_dichotomy(const ProjectorField& field, int samples, double span = 0.0) {
    const EvolutionFamily& family = field.family();
    const Side side = field.side();
    const Operator& p0 = field.p0();
    if (samples < 10) throw InputError("verify_dichotomy: need at least 10 samples");
    const double extent = side == Side::Plus ? family.t_max() : -family.t_min();
    if (span <= 0.0) span = 0.5 * extent;
    if (span > extent * (1.0 + 1e-12) || span <= 0.0)
        throw InputError("verify_dichotomy: family does not cover the sampled half-line");
    const double sign = side == Side::Plus ? 1.0 : -1.0;
    const Eigen::Index n = p0.rows();
    const auto m = static_cast<std::size_t>(samples);

    // Outward from 0, then flip to ascending time order for the pair loops.
    std::vector<double> outward(m);
    for (std::size_t i = 0; i < m; ++i) outward[i] = sign * span * static_cast<double>(i) / static_cast<double>(m - 1);
    std::vector<Operator> proj;
    proj.reserve(m);
    for (double t : outward) proj.push_back(field.at(t));
    std::vector<double> ts = outward;
    if (side == Side::Minus) {
        std::reverse(ts.begin(), ts.end());
        std::reverse(proj.begin(), proj.end());
    }

    DichotomyReport rep;
    for (const auto& p : proj)
        rep.idempotency_err = std::max(rep.idempotency_err, (p * p - p).norm() / std::max(1.0, p.norm()));

    struct Sample {
        double d, value;
        double t, s;
    };
    std::vector<Sample> stable, unstable;
    std::pair<double, double> inv_pair{0.0, 0.0};
    for (std::size_t i = 0; i < m; ++i) {
        Operator fwd = proj[i];                      // U(t,s) P(s), s = ts[i]
        const Operator q_i = identity(n) - proj[i];  // I - P(t), t = ts[i]
        for (std::size_t j = i; j < m; ++j) {
            if (j > i) {
                fwd = proj[j] * family.apply(ts[j], ts[j - 1], fwd);
                const Operator u = family.propagator(ts[j], ts[i]);
                const double inv = (proj[j] * u - u * proj[i]).norm() / std::max(1.0, u.norm());
                if (inv > rep.invariance_err) {
                    rep.invariance_err = inv;
                    inv_pair = {ts[j], ts[i]};
                }
            }
            stable.push_back({ts[j] - ts[i], fwd.norm() > 0 ? op_norm(fwd) : 0.0, ts[j], ts[i]});
        }
        Operator bwd = q_i;  // U(s,t)(I - P(t)), t = ts[i], s running down
        for (std::size_t j = i + 1; j-- > 0;) {
            if (j < i) bwd = (identity(n) - proj[j]) * family.apply(ts[j], ts[j + 1], bwd);
            unstable.push_back({ts[i] - ts[j], bwd.norm() > 0 ? op_norm(bwd) : 0.0, ts[i], ts[j]});
        }
    }

    // Negative log-slope over the far half of the separations.
    auto tail_rate = [&](const std::vector<Sample>& pts, bool& present) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (const auto& p : pts) {
            if (p.d < 0.5 * span - 1e-12 || p.value <= 0.0) continue;
            const double y = std::log(p.value);
            sx += p.d;
            sy += y;
            sxx += p.d * p.d;
            sxy += p.d * y;
            ++cnt;
        }
        present = cnt >= 2;
        if (!present) return std::numeric_limits<double>::infinity();
        const double denom = cnt * sxx - sx * sx;
        if (denom <= 0.0) return std::numeric_limits<double>::infinity();
        return -(cnt * sxy - sx * sy) / denom;
    };
    bool has_s = false, has_u = false;
    const double a_s = tail_rate(stable, has_s);
    const double a_u = tail_rate(unstable, has_u);
    rep.alpha_est = std::min(has_s ? a_s : std::numeric_limits<double>::infinity(),
                             has_u ? a_u : std::numeric_limits<double>::infinity());
    if (!std::isfinite(rep.alpha_est)) rep.alpha_est = std::numeric_limits<double>::infinity();

    const double alpha_for_m = std::isfinite(rep.alpha_est) ? rep.alpha_est : 0.0;
    rep.M_est = 1.0;
    for (const auto* set : {&stable, &unstable})
        for (const auto& p : *set) {
            const double mm = p.value * std::exp(alpha_for_m * p.d);
            if (mm > rep.M_est) {
                rep.M_est = mm;
                rep.worst_pair = {p.t, p.s};
            }
        }

    constexpr double alpha_floor = 1e-3;
    rep.invariance_err = std::max(rep.invariance_err, field.consistency_err());
    if (rep.idempotency_err > 1e-8) {
        rep.reason = "P(t) is not a projector (idempotency error " + num(rep.idempotency_err) + ")";
    } else if (rep.invariance_err > 1e-8) {
        rep.reason = "invariance P(t)U(t,s) = U(t,s)P(s) fails (error " + num(rep.invariance_err) + ")";
        rep.worst_pair = inv_pair;
    } else if (!(rep.alpha_est > alpha_floor)) {
        rep.reason = "no exponential decay: fitted rate " + num(rep.alpha_est) + " at pair (" +
                     num(rep.worst_pair.first) + ", " + num(rep.worst_pair.second) + ")";
    } else {
        rep.ok = true;
    }
    return rep;
}

inline DichotomyReport verify_dichotomy(const EvolutionFamily& family, const Operator& p0, Side side, int samples,
                                        double span = 0.0) {
    return verify_dichotomy(ProjectorField(detail::borrow(family), p0, side), samples, span);
}

/// D = P+(0) - (I - P-(0)).
inline Operator build_gluing(const Operator& p_plus0, const Operator& p_minus0) {
    if (p_plus0.rows() != p_minus0.rows() || p_plus0.cols() != p_minus0.cols())
        throw InputError("build_gluing: P+(0) is " + dims(p_plus0) + " but P-(0) is " + dims(p_minus0));
    for (const Operator* p : {&p_plus0, &p_minus0})
        if ((*p * *p - *p).norm() > 1e-10 * std::max(1.0, p->norm()))
            throw InputError("build_gluing: input is not a projector");
    return p_plus0 - (identity(p_plus0.rows()) - p_minus0);
}

/// Verifies P0 and packages the fitted constants; throws NoDichotomyError on failure.
inline HalfLineDichotomy make_dichotomy(std::shared_ptr<const EvolutionFamily> family, Operator p0, Side side,
                                        int samples = 21, double span = 0.0) {
    auto field = std::make_shared<const ProjectorField>(std::move(family), p0, side);
    const DichotomyReport rep = verify_dichotomy(*field, samples, span);
    if (!rep.ok) throw NoDichotomyError(std::string("no dichotomy on the ") + to_string(side) + " half-line: " + rep.reason);
    HalfLineDichotomy d;
    d.side = side;
    d.P0 = std::move(p0);
    d.M = rep.M_est;
    d.alpha = std::isfinite(rep.alpha_est) ? rep.alpha_est : 1e3;
    d.field = std::move(field);
    return d;
}

}  // namespace dgreen
