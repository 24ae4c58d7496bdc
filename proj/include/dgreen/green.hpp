#pragma once

#include "dgreen/dichotomy.hpp"
#include "dgreen/operator_core.hpp"
#include "dgreen/parallel.hpp"
#include "dgreen/propagator.hpp"
#include "dgreen/sources.hpp"
#include "dgreen/types.hpp"

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dgreen {

/// Truncation and quadrature of the improper integrals over the half-lines.
///
/// The grid spacing is 1/nodes_per_unit; the number of intervals per
/// half-line is rounded up to an even count for composite Simpson, so the
/// effective cut can exceed t_cut by at most two spacings.
struct QuadratureConfig {
    double t_cut = 20.0;
    int nodes_per_unit = 32;
    double tail_tol = 1e-9;
};

struct TrajectoryMeta {
    std::string problem_hash;
    std::string regime = "Classical";
    double residual_norm = 0.0;
    std::map<std::string, double> tolerances;
};

/// Sampled solution: values[i] = x(times[i]).
struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> values;
    TrajectoryMeta meta;

    double max_norm() const {
        double m = 0.0;
        for (const auto& v : values) m = std::max(m, v.norm());
        return m;
    }
};

/// Everything the generalized Green operator needs, with s = 0.
///
/// Precomputes, on the quadrature grid of each half-line, the dichotomy
/// projectors, one-interval transfer operators, the solvability kernel
/// K(t) = P_N(D*) P-(0) U(0,t) and the bounded homogeneous family
/// U(t,0) P+(0) P_N(D). Immutable once built.
class GreenContext {
public:
    struct HalfLine {
        Side side = Side::Plus;
        std::vector<double> t;           // outward: 0, +-delta, +-2 delta, ...
        std::vector<Operator> proj;      // P+(t) or P-(t)
        std::vector<Operator> comp;      // I - proj
        std::vector<Operator> out_step;  // U(t_{j+1}, t_j)
        std::vector<Operator> in_step;   // U(t_j, t_{j+1})
        std::vector<Operator> kernel;    // K(t_j)
        std::vector<Operator> homog;     // U(t_j,0) P+(0) P_N(D)

        std::size_t intervals() const { return t.size() - 1; }
        // Subspace holding the outward running integral (and the homogeneous part).
        const std::vector<Operator>& outward_proj() const { return side == Side::Plus ? proj : comp; }
        const std::vector<Operator>& inward_proj() const { return side == Side::Plus ? comp : proj; }
    };

    GreenContext(HalfLineDichotomy plus, HalfLineDichotomy minus, QuadratureConfig quad, double tol_rank = 1e-10)
        : plus_(std::move(plus)), minus_(std::move(minus)), quad_(quad) {
        if (plus_.side != Side::Plus || minus_.side != Side::Minus)
            throw InputError("green context: dichotomies must be given as (plus, minus)");
        if (&plus_.family() != &minus_.family())
            throw InputError("green context: both dichotomies must share one evolution family");
        if (quad_.nodes_per_unit < 4) throw InputError("green context: nodes_per_unit must be >= 4");
        if (!(quad_.t_cut > 0.0) || !(quad_.tail_tol > 0.0))
            throw InputError("green context: t_cut and tail_tol must be positive");

        D_ = build_gluing(plus_.P0, minus_.P0);
        pinv_ = moore_penrose(D_, tol_rank);

        delta_ = 1.0 / quad_.nodes_per_unit;
        auto intervals = static_cast<std::size_t>(std::ceil(quad_.t_cut / delta_ - 1e-9));
        intervals = std::max<std::size_t>(intervals + intervals % 2, 4);
        t_cut_ = static_cast<double>(intervals) * delta_;
        const auto& fam = family();
        if (!fam.contains(t_cut_) || !fam.contains(-t_cut_))
            throw InputError("green context: evolution family [" + std::to_string(fam.t_min()) + ", " +
                             std::to_string(fam.t_max()) + "] does not cover +-" + std::to_string(t_cut_));

        build_half(halves_[0], plus_, intervals);
        build_half(halves_[1], minus_, intervals);
    }

    const EvolutionFamily& family() const { return plus_.family(); }
    const HalfLineDichotomy& dich_plus() const { return plus_; }
    const HalfLineDichotomy& dich_minus() const { return minus_; }
    const Operator& D() const { return D_; }
    const PseudoInverseResult& pinv() const { return pinv_; }
    const QuadratureConfig& quad() const { return quad_; }
    Eigen::Index dim() const { return D_.rows(); }
    double delta() const { return delta_; }
    /// Effective truncation (t_cut rounded up to an even number of intervals).
    double t_cut() const { return t_cut_; }
    const HalfLine& half(Side s) const { return halves_[s == Side::Plus ? 0 : 1]; }
    const HalfLineDichotomy& dichotomy(Side s) const { return s == Side::Plus ? plus_ : minus_; }

    /// M e^{-alpha t_cut} |||f||| / alpha, maximized over both half-lines.
    double tail_bound(double sup_f) const {
        double b = 0.0;
        for (const auto* d : {&plus_, &minus_}) b = std::max(b, d->M * std::exp(-d->alpha * t_cut_) * sup_f / d->alpha);
        return b;
    }

    /// Solvability kernel K(t); off-grid times are reached by one short transfer.
    Operator kernel(double t) const {
        const auto [side, j, r] = locate(t, t >= 0.0 ? Side::Plus : Side::Minus);
        const HalfLine& h = half(side);
        if (r == 0.0) return h.kernel[j];
        const Operator p = dichotomy(side).projector(t);
        const Operator proj = side == Side::Plus ? Operator(identity(dim()) - p) : p;
        return h.kernel[j] * family().propagator(h.t[j], t) * proj;
    }

    /// Outward index j and remainder r >= 0 with |t| = j*delta + r; throws beyond the cut.
    std::tuple<Side, std::size_t, double> locate(double t, Side side) const {
        const double u = std::abs(t);
        if (u > t_cut_ * (1.0 + 1e-12) + 1e-12)
            throw InputError("green: |t| = " + std::to_string(u) + " exceeds the truncation " + std::to_string(t_cut_));
        const std::size_t last = half(side).intervals();
        auto j = static_cast<std::size_t>(std::floor(u / delta_ + 1e-9));
        j = std::min(j, last);
        double r = u - static_cast<double>(j) * delta_;
        if (std::abs(r) <= 1e-12 * std::max(1.0, u)) r = 0.0;
        return {side, j, std::max(r, 0.0)};
    }

    /// U(t_to, t_from) v between grid points of one half-line (short spans only).
    Vector transport(const HalfLine& h, Vector v, std::size_t from, std::size_t to) const {
        while (from < to) v = h.out_step[from++] * v;
        while (from > to) v = h.in_step[--from] * v;
        return v;
    }

private:
    void build_half(HalfLine& h, const HalfLineDichotomy& d, std::size_t intervals) {
        const Eigen::Index n = dim();
        const double sign = d.side == Side::Plus ? 1.0 : -1.0;
        h.side = d.side;
        h.t.resize(intervals + 1);
        for (std::size_t j = 0; j <= intervals; ++j) h.t[j] = sign * static_cast<double>(j) * delta_;
        h.proj.resize(intervals + 1);
        h.comp.resize(intervals + 1);
        for (std::size_t j = 0; j <= intervals; ++j) {
            h.proj[j] = j == 0 ? d.P0 : d.projector(h.t[j]);
            h.comp[j] = identity(n) - h.proj[j];
        }
        h.out_step.resize(intervals);
        h.in_step.resize(intervals);
        for (std::size_t j = 0; j < intervals; ++j) {
            h.out_step[j] = family().propagator(h.t[j + 1], h.t[j]);
            h.in_step[j] = family().propagator(h.t[j], h.t[j + 1]);
        }
        // K(0) = P_N(D*) P-(0) = P_N(D*) (I - P+(0)) since P_N(D*) D = 0.
        const auto& kproj = h.inward_proj();
        h.kernel.resize(intervals + 1);
        h.kernel[0] = pinv_.cokernel_proj * (d.side == Side::Plus ? Operator(identity(n) - d.P0) : minus_.P0);
        for (std::size_t j = 0; j < intervals; ++j) h.kernel[j + 1] = h.kernel[j] * h.in_step[j] * kproj[j + 1];

        // U(t,0) P+(0) P_N(D) = U(t,0) (I - P-(0)) P_N(D) on N(D).
        const auto& hproj = h.outward_proj();
        h.homog.resize(intervals + 1);
        h.homog[0] = hproj[0] * pinv_.kernel_proj;
        for (std::size_t j = 0; j < intervals; ++j) h.homog[j + 1] = hproj[j + 1] * h.out_step[j] * h.homog[j];
    }

    HalfLineDichotomy plus_, minus_;
    QuadratureConfig quad_;
    Operator D_;
    PseudoInverseResult pinv_;
    double delta_ = 0.0;
    double t_cut_ = 0.0;
    std::array<HalfLine, 2> halves_;
};

namespace detail {

// Cubic-interpolation weights for one interval: interior stencil (j-1..j+2)
// and the one-sided stencil used next to either end of a half-line.
inline constexpr std::array<double, 4> interior_w{-1.0 / 24, 13.0 / 24, 13.0 / 24, -1.0 / 24};
inline constexpr std::array<double, 4> onesided_w{9.0 / 24, 19.0 / 24, -5.0 / 24, 1.0 / 24};

// Integral over the interval between grid points j and j+1 of
// U(t_target, tau) F(tau), F given at grid points.
inline Vector interval_integral(const GreenContext& ctx, const GreenContext::HalfLine& h, const std::vector<Vector>& f,
                                std::size_t j, std::size_t target) {
    const std::size_t last = h.intervals();
    std::array<std::size_t, 4> pts;
    const std::array<double, 4>* w;
    if (j >= 1 && j + 2 <= last) {
        pts = {j - 1, j, j + 1, j + 2};
        w = &interior_w;
    } else if (j == 0) {
        pts = {0, 1, 2, 3};
        w = &onesided_w;
    } else {
        pts = {last, last - 1, last - 2, last - 3};
        w = &onesided_w;
    }
    Vector acc = Vector::Zero(ctx.dim());
    for (std::size_t k = 0; k < 4; ++k) acc += (*w)[k] * ctx.transport(h, f[pts[k]], pts[k], target);
    return ctx.delta() * acc;
}

// Composite Simpson over one half-line of K(t_j) f_j.
inline Vector simpson_half(const GreenContext& ctx, const GreenContext::HalfLine& h, const std::vector<Vector>& f) {
    const std::size_t last = h.intervals();
    Vector acc = Vector::Zero(h.kernel[0].rows());
    for (std::size_t j = 0; j <= last; ++j) {
        const double w = (j == 0 || j == last) ? 1.0 : (j % 2 ? 4.0 : 2.0);
        acc += w * (h.kernel[j] * f[j]);
    }
    return ctx.delta() / 3.0 * acc;
}

}  // namespace detail

/// Solvability residual r = int K(t) f(t) dt (composite Simpson on both halves).
struct SolvabilityResidual {
    Vector r;
    double norm = 0.0;
    bool satisfied = false;
};

/// G[f](t,0) for one forcing, with every running integral precomputed on the
/// quadrature grid. Grid values are exact table lookups; off-grid times take
/// one Simpson panel from the grid point below.
class GreenSolution {
public:
    GreenSolution(std::shared_ptr<const GreenContext> ctx, Forcing f) : ctx_(std::move(ctx)), f_(std::move(f)) {
        if (f_.dim() != ctx_->dim())
            throw InputError("green: forcing dimension " + std::to_string(f_.dim()) + " vs problem dimension " +
                             std::to_string(ctx_->dim()));
        for (int s = 0; s < 2; ++s) solve_half(s == 0 ? Side::Plus : Side::Minus);
        const auto& hp = ctx_->half(Side::Plus);
        const auto& hm = ctx_->half(Side::Minus);
        a_ = inward_[0][0];   // int_0^inf U(0,tau)(I - P+) f
        b_ = inward_[1][0];   // int_-inf^0 U(0,tau) P- f
        g_ = a_ + b_;
        xi_ = ctx_->pinv().pinv * g_;
        for (int s = 0; s < 2; ++s) {
            const auto& h = s == 0 ? hp : hm;
            const auto& hproj = h.outward_proj();
            auto& hom = homog_[s];
            hom.resize(h.t.size());
            hom[0] = hproj[0] * xi_;
            for (std::size_t j = 0; j + 1 < h.t.size(); ++j) hom[j + 1] = hproj[j + 1] * (h.out_step[j] * hom[j]);
        }
        residual_.r = detail::simpson_half(*ctx_, hp, samples_[0]) + detail::simpson_half(*ctx_, hm, samples_[1]);
        residual_.norm = residual_.r.norm();
    }

    const GreenContext& context() const { return *ctx_; }
    std::shared_ptr<const GreenContext> context_ptr() const { return ctx_; }
    const Forcing& forcing() const { return f_; }

    /// Right-hand side g of D xi = g.
    const Vector& g() const { return g_; }
    const Vector& xi() const { return xi_; }
    const SolvabilityResidual& residual() const { return residual_; }

    /// Branch value at grid index j (j = 0 gives the one-sided limit at 0).
    Vector grid_value(Side side, std::size_t j) const {
        const int s = side == Side::Plus ? 0 : 1;
        return side == Side::Plus ? Vector(outward_[s][j] - inward_[s][j] + homog_[s][j])
                                  : Vector(inward_[s][j] - outward_[s][j] + homog_[s][j]);
    }

    /// The t >= 0 or t <= 0 branch of G[f](t,0).
    Vector branch(double t, Side side) const {
        if ((side == Side::Plus && t < 0.0) || (side == Side::Minus && t > 0.0))
            throw InputError("green: t = " + std::to_string(t) + " is not on the requested branch");
        const auto [s, j, r] = ctx_->locate(t, side);
        if (r == 0.0) return grid_value(side, j);
        return off_grid(side, j, t);
    }

    Vector operator()(double t) const { return branch(t, t >= 0.0 ? Side::Plus : Side::Minus); }

    /// Values of f sampled on one half-line grid (branch-correct at 0).
    const std::vector<Vector>& samples(Side side) const { return samples_[side == Side::Plus ? 0 : 1]; }

private:
    void solve_half(Side side) {
        const int s = side == Side::Plus ? 0 : 1;
        const auto& h = ctx_->half(side);
        const std::size_t npts = h.t.size();
        auto& fs = samples_[s];
        fs.resize(npts);
        for (std::size_t j = 0; j < npts; ++j) fs[j] = side == Side::Plus ? f_(h.t[j]) : f_.left(h.t[j]);

        const auto& oproj = h.outward_proj();
        const auto& iproj = h.inward_proj();
        std::vector<Vector> fo(npts), fi(npts);
        for (std::size_t j = 0; j < npts; ++j) {
            fo[j] = oproj[j] * fs[j];
            fi[j] = iproj[j] * fs[j];
        }
        auto& out = outward_[s];
        auto& in = inward_[s];
        out.assign(npts, Vector::Zero(ctx_->dim()));
        in.assign(npts, Vector::Zero(ctx_->dim()));
        for (std::size_t j = 0; j + 1 < npts; ++j)
            out[j + 1] = oproj[j + 1] * (h.out_step[j] * out[j] + detail::interval_integral(*ctx_, h, fo, j, j + 1));
        for (std::size_t j = npts - 1; j-- > 0;)
            in[j] = iproj[j] * (h.in_step[j] * in[j + 1] + detail::interval_integral(*ctx_, h, fi, j, j));
    }

    Vector f_at(double t, Side side) const { return side == Side::Plus ? f_(t) : f_.left(t); }

    Vector off_grid(Side side, std::size_t j, double t) const {
        const int s = side == Side::Plus ? 0 : 1;
        const auto& h = ctx_->half(side);
        const auto& fam = ctx_->family();
        const auto& dich = ctx_->dichotomy(side);
        const Eigen::Index n = ctx_->dim();
        const bool plus = side == Side::Plus;
        const double tj = h.t[j];
        const double tn = h.t[j + 1];
        const double mid_o = 0.5 * (tj + t);
        const double mid_i = 0.5 * (t + tn);

        auto oproj_at = [&](double x) -> Operator {
            const Operator p = dich.projector(x);
            return plus ? p : Operator(identity(n) - p);
        };
        auto iproj_at = [&](double x) -> Operator {
            const Operator p = dich.projector(x);
            return plus ? Operator(identity(n) - p) : p;
        };
        const Operator po_t = oproj_at(t);
        const Operator pi_t = identity(n) - po_t;

        // Outward piece: from t_j to t.
        const double wo = std::abs(t - tj);
        Vector o = fam.apply(t, tj, Vector(outward_[s][j]));
        o += wo / 6.0 *
             (fam.apply(t, tj, Vector(h.outward_proj()[j] * samples_[s][j])) +
              4.0 * fam.apply(t, mid_o, Vector(oproj_at(mid_o) * f_at(mid_o, side))) + po_t * f_at(t, side));
        o = po_t * o;

        // Inward piece: from t_{j+1} to t.
        const double wi = std::abs(tn - t);
        Vector in = fam.apply(t, tn, Vector(inward_[s][j + 1]));
        in += wi / 6.0 *
              (fam.apply(t, tn, Vector(h.inward_proj()[j + 1] * samples_[s][j + 1])) +
               4.0 * fam.apply(t, mid_i, Vector(iproj_at(mid_i) * f_at(mid_i, side))) + pi_t * f_at(t, side));
        in = pi_t * in;

        const Vector hom = po_t * fam.apply(t, tj, Vector(homog_[s][j]));
        return plus ? Vector(o - in + hom) : Vector(in - o + hom);
    }

    std::shared_ptr<const GreenContext> ctx_;
    Forcing f_;
    std::array<std::vector<Vector>, 2> samples_;
    std::array<std::vector<Vector>, 2> outward_, inward_, homog_;
    Vector a_, b_, g_, xi_;
    SolvabilityResidual residual_;
};

// --- operations -------------------------------------------------------------

inline Operator solvability_kernel(const GreenContext& ctx, double t) { return ctx.kernel(t); }

/// The solvability condition holds iff norm <= tol_solve + tail_tol.
inline SolvabilityResidual solvability_residual(std::shared_ptr<const GreenContext> ctx, const Forcing& f,
                                                double tol_solve = 1e-8) {
    const double tail = ctx->quad().tail_tol;
    // Direct Simpson sum of K(t_j) f(t_j); independent of the running integrals.
    SolvabilityResidual out;
    out.r = Vector::Zero(ctx->dim());
    for (Side side : {Side::Plus, Side::Minus}) {
        const auto& h = ctx->half(side);
        std::vector<Vector> fs(h.t.size());
        for (std::size_t j = 0; j < h.t.size(); ++j) fs[j] = side == Side::Plus ? f(h.t[j]) : f.left(h.t[j]);
        out.r += detail::simpson_half(*ctx, h, fs);
    }
    out.norm = out.r.norm();
    out.satisfied = out.norm <= tol_solve + tail;
    return out;
}

inline Vector rhs_g(std::shared_ptr<const GreenContext> ctx, const Forcing& f) {
    return GreenSolution(std::move(ctx), f).g();
}

inline Vector green_apply(std::shared_ptr<const GreenContext> ctx, const Forcing& f, double t) {
    return GreenSolution(std::move(ctx), f)(t);
}

struct JumpCheck {
    Vector jump;
    Vector expected;
    double err = 0.0;
};

/// G(0+) - G(0-) against -int K f.
inline JumpCheck jump_check(const GreenSolution& sol) {
    JumpCheck out;
    out.jump = sol.grid_value(Side::Plus, 0) - sol.grid_value(Side::Minus, 0);
    out.expected = -sol.residual().r;
    out.err = (out.jump - out.expected).norm();
    return out;
}

inline JumpCheck jump_check(std::shared_ptr<const GreenContext> ctx, const Forcing& f) {
    return jump_check(GreenSolution(std::move(ctx), f));
}

/// U(t,0) P+(0) P_N(D) c + G[f](t,0).
inline Vector bounded_family(const GreenSolution& sol, const Vector& c, double t, Side side) {
    const GreenContext& ctx = sol.context();
    if (c.size() != ctx.dim()) throw InputError("bounded_family: c has dimension " + std::to_string(c.size()));
    const auto [s, j, r] = ctx.locate(t, side);
    const auto& h = ctx.half(side);
    Vector hom = h.homog[j] * c;
    if (r > 0.0) {
        const Operator p = ctx.dichotomy(side).projector(t);
        const Operator proj = side == Side::Plus ? p : Operator(identity(ctx.dim()) - p);
        hom = proj * ctx.family().apply(t, h.t[j], hom);
    }
    return hom + sol.branch(t, side);
}

inline Vector bounded_family(const GreenSolution& sol, const Vector& c, double t) {
    return bounded_family(sol, c, t, t >= 0.0 ? Side::Plus : Side::Minus);
}

inline Vector bounded_family(std::shared_ptr<const GreenContext> ctx, const Forcing& f, const Vector& c, double t) {
    return bounded_family(GreenSolution(std::move(ctx), f), c, t);
}

/// max over sample of |x'(t) - A(t) x(t) - f(t)| with a central difference of
/// half-width fd_step, where x = U(t,0)P+(0)P_N(D)c + G[f](t,0).
inline double diff_residual(const GreenSolution& sol, std::span<const double> sample, double fd_step = 1e-3,
                            const Vector* c = nullptr) {
    const GreenContext& ctx = sol.context();
    const Vector c0 = c ? *c : Vector::Zero(ctx.dim());
    const auto& gen = ctx.family().generator();
    double worst = 0.0;
    for (double t : sample) {
        if (t == 0.0 || (t - fd_step < 0.0 && t + fd_step > 0.0))
            throw InputError("diff_residual: stencil at t = " + std::to_string(t) + " straddles the jump at 0");
        const Side side = t > 0.0 ? Side::Plus : Side::Minus;
        const Vector x = bounded_family(sol, c0, t, side);
        const Vector d =
            (bounded_family(sol, c0, t + fd_step, side) - bounded_family(sol, c0, t - fd_step, side)) / (2.0 * fd_step);
        const Vector f = side == Side::Plus ? sol.forcing()(t) : sol.forcing().left(t);
        worst = std::max(worst, (d - gen(t) * x - f).norm());
    }
    return worst;
}

inline double diff_residual(std::shared_ptr<const GreenContext> ctx, const Forcing& f, std::span<const double> sample,
                            double fd_step = 1e-3) {
    return diff_residual(GreenSolution(std::move(ctx), f), sample, fd_step);
}

/// Explicit dichotomy bound (2M/alpha + |D^+| 2M^2/alpha) |||f||| on sup |G[f]|.
inline double green_bound(const GreenContext& ctx, double sup_f) {
    const double m = std::max(ctx.dich_plus().M, ctx.dich_minus().M);
    const double a = std::min(ctx.dich_plus().alpha, ctx.dich_minus().alpha);
    const double pinv_norm = ctx.pinv().rank ? 1.0 / ctx.pinv().singular_values(ctx.pinv().rank - 1) : 0.0;
    return (2.0 * m / a + pinv_norm * 2.0 * m / a * m) * sup_f;
}

/// Quadrature grid of the context from -t_cut to t_cut; t = 0 appears once (plus branch).
inline std::vector<double> grid_times(const GreenContext& ctx, std::size_t stride = 1) {
    const auto& hp = ctx.half(Side::Plus);
    const auto& hm = ctx.half(Side::Minus);
    std::vector<double> ts;
    for (std::size_t j = hm.intervals(); j >= stride; j -= stride) ts.push_back(hm.t[j]);
    for (std::size_t j = 0; j <= hp.intervals(); j += stride) ts.push_back(hp.t[j]);
    return ts;
}

namespace detail {

// Cubic Lagrange interpolation of grid samples along one half-line.
inline Vector interp_half(const GreenContext& ctx, const std::vector<Vector>& vals, double t, Side side) {
    const auto [s, j, r] = ctx.locate(t, side);
    if (r == 0.0) return vals[j];
    const std::size_t last = vals.size() - 1;
    std::size_t lo = j == 0 ? 0 : j - 1;
    if (lo + 3 > last) lo = last - 3;
    const double u = std::abs(t) / ctx.delta();
    Vector out = Vector::Zero(vals[0].size());
    for (std::size_t a = lo; a < lo + 4; ++a) {
        double w = 1.0;
        for (std::size_t b = lo; b < lo + 4; ++b)
            if (b != a) w *= (u - static_cast<double>(b)) / (static_cast<double>(a) - static_cast<double>(b));
        out += w * vals[a];
    }
    return out;
}

}  // namespace detail

/// Two-sided forcing from values on the quadrature grid of each half-line;
/// cubic interpolation in between, the minus samples define the left branch.
inline Forcing sampled_forcing(std::shared_ptr<const GreenContext> ctx, std::vector<Vector> plus,
                               std::vector<Vector> minus, std::string id = "sampled") {
    const auto& hp = ctx->half(Side::Plus);
    const auto& hm = ctx->half(Side::Minus);
    if (plus.size() != hp.t.size() || minus.size() != hm.t.size())
        throw InputError("sampled_forcing: sample count does not match the quadrature grid");
    double sup = 0.0;
    for (const auto* vs : {&plus, &minus})
        for (const auto& v : *vs) sup = std::max(sup, v.norm());
    auto pp = std::make_shared<const std::vector<Vector>>(std::move(plus));
    auto mm = std::make_shared<const std::vector<Vector>>(std::move(minus));
    const GreenContext* raw = ctx.get();
    auto right = [ctx, pp, mm, raw](double t) -> Vector {
        return t >= 0.0 ? detail::interp_half(*raw, *pp, t, Side::Plus) : detail::interp_half(*raw, *mm, t, Side::Minus);
    };
    auto left = [ctx, pp, mm, raw](double t) -> Vector {
        return t > 0.0 ? detail::interp_half(*raw, *pp, t, Side::Plus) : detail::interp_half(*raw, *mm, t, Side::Minus);
    };
    return Forcing::two_sided(std::move(id), ctx->dim(), sup, right, left);
}

/// Samples x0(t,c) at the given times; time evaluations run on `workers` threads.
inline Trajectory sample_trajectory(const GreenSolution& sol, const Vector& c, std::span<const double> times,
                                    unsigned workers = 1) {
    Trajectory tr;
    tr.times.assign(times.begin(), times.end());
    tr.values.resize(times.size());
    parallel_for(times.size(), workers, [&](std::size_t i) { tr.values[i] = bounded_family(sol, c, tr.times[i]); });
    tr.meta.residual_norm = sol.residual().norm;
    return tr;
}

}  // namespace dgreen
