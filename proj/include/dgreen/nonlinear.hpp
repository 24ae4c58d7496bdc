#pragma once

#include "dgreen/green.hpp"
#include "dgreen/operator_core.hpp"
#include "dgreen/types.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dgreen {

/// coeff * eps^eps_power * prod_i x_i^exponents[i], contributing to output `component`.
struct Monomial {
    Eigen::Index component = 0;
    cplx coeff{1.0, 0.0};
    std::vector<int> exponents;
    int eps_power = 0;

    int degree() const {
        int d = 0;
        for (int e : exponents) d += e;
        return d;
    }
};

/// Z(x, t, eps): a polynomial (degree <= 3) or linear map, analytic in x.
///
/// Without the analytic derivative, A1 = Z'(x) comes from central differences
/// with step 1e-6 (1 + |x|), checked against the half step.
class Nonlinearity {
public:
    Nonlinearity() = default;

    static Nonlinearity polynomial(Eigen::Index n, std::vector<Monomial> terms, bool analytic = true) {
        if (n < 1) throw InputError("polynomial nonlinearity: dimension must be positive");
        for (const auto& m : terms) {
            if (m.component < 0 || m.component >= n)
                throw InputError("polynomial nonlinearity: component " + std::to_string(m.component) +
                                 " out of range for dimension " + std::to_string(n));
            if (static_cast<Eigen::Index>(m.exponents.size()) != n)
                throw InputError("polynomial nonlinearity: exponent list has length " +
                                 std::to_string(m.exponents.size()) + ", expected " + std::to_string(n));
            for (int e : m.exponents)
                if (e < 0) throw InputError("polynomial nonlinearity: negative exponent");
            if (m.degree() > 3) throw InputError("polynomial nonlinearity: degree " + std::to_string(m.degree()) + " > 3");
            if (m.eps_power < 0) throw InputError("polynomial nonlinearity: negative eps power");
        }
        Nonlinearity z;
        z.id_ = "polynomial";
        z.dim_ = n;
        z.terms_ = std::move(terms);
        z.analytic_ = analytic;
        return z;
    }

    static Nonlinearity linear(Operator w, bool analytic = true) {
        if (w.rows() != w.cols()) throw InputError("linear nonlinearity: matrix must be square, got " + dims(w));
        Nonlinearity z;
        z.id_ = "linear";
        z.dim_ = w.rows();
        z.linear_ = std::move(w);
        z.analytic_ = analytic;
        return z;
    }

    Vector operator()(const Vector& x, double /*t*/, double eps) const {
        check_dim(x);
        if (linear_) return *linear_ * x;
        Vector out = Vector::Zero(dim_);
        for (const auto& m : terms_) {
            cplx v = m.coeff * std::pow(eps, m.eps_power);
            for (Eigen::Index i = 0; i < dim_; ++i)
                for (int e = 0; e < m.exponents[i]; ++e) v *= x(i);
            out(m.component) += v;
        }
        return out;
    }

    /// Frechet derivative with respect to x.
    Operator derivative(const Vector& x, double t, double eps) const {
        if (!analytic_) {
            const Operator j = fd_derivative(x, t, eps, 1e-6 * (1.0 + x.norm()));
            const Operator j2 = fd_derivative(x, t, eps, 0.5e-6 * (1.0 + x.norm()));
            const double mismatch = (j - j2).norm();
            if (mismatch > 1e-6 * (1.0 + j.norm()))
                throw MathError("finite-difference derivative of " + id_ + " is not self-consistent (step mismatch " +
                                num(mismatch) + ")");
            return j2;
        }
        check_dim(x);
        if (linear_) return *linear_;
        Operator out = Operator::Zero(dim_, dim_);
        for (const auto& m : terms_) {
            const cplx base = m.coeff * std::pow(eps, m.eps_power);
            for (Eigen::Index k = 0; k < dim_; ++k) {
                if (m.exponents[k] == 0) continue;
                cplx v = base * static_cast<double>(m.exponents[k]);
                for (Eigen::Index i = 0; i < dim_; ++i) {
                    const int e = m.exponents[i] - (i == k ? 1 : 0);
                    for (int r = 0; r < e; ++r) v *= x(i);
                }
                out(m.component, k) += v;
            }
        }
        return out;
    }

    Operator fd_derivative(const Vector& x, double t, double eps, double step) const {
        Operator out(dim_, dim_);
        for (Eigen::Index k = 0; k < dim_; ++k) {
            Vector e = Vector::Zero(dim_);
            e(k) = step;
            out.col(k) = ((*this)(x + e, t, eps) - (*this)(x - e, t, eps)) / (2.0 * step);
        }
        return out;
    }

    const std::string& id() const { return id_; }
    Eigen::Index dim() const { return dim_; }
    bool analytic() const { return analytic_; }
    /// Radius q of the ball around x0 on which Z is declared bounded.
    double radius() const { return radius_; }
    void set_radius(double q) {
        if (!(q > 0.0)) throw InputError("nonlinearity: radius q must be positive");
        radius_ = q;
    }

private:
    void check_dim(const Vector& x) const {
        if (x.size() != dim_)
            throw InputError("nonlinearity: argument dimension " + std::to_string(x.size()) + " vs " +
                             std::to_string(dim_));
    }

    std::string id_;
    Eigen::Index dim_ = 0;
    std::vector<Monomial> terms_;
    std::optional<Operator> linear_;
    bool analytic_ = true;
    double radius_ = std::numeric_limits<double>::infinity();
};

inline const std::vector<std::string>& nonlinearity_registry_ids() {
    static const std::vector<std::string> ids{"polynomial", "linear"};
    return ids;
}

using GridField = std::array<std::vector<Vector>, 2>;  // [plus, minus] samples on the quadrature grid

inline int half_index(Side s) { return s == Side::Plus ? 0 : 1; }
inline Side half_side(int s) { return s == 0 ? Side::Plus : Side::Minus; }

/// The linear problem (context + forcing) together with Z; caches G[f] on the grid.
class GeneratingSystem {
public:
    GeneratingSystem(std::shared_ptr<const GreenContext> ctx, Nonlinearity z, Forcing f)
        : ctx_(std::move(ctx)), z_(std::move(z)), f_(std::move(f)), base_(ctx_, f_) {
        if (z_.dim() != ctx_->dim())
            throw InputError("nonlinearity dimension " + std::to_string(z_.dim()) + " vs problem dimension " +
                             std::to_string(ctx_->dim()));
    }

    const GreenContext& ctx() const { return *ctx_; }
    std::shared_ptr<const GreenContext> ctx_ptr() const { return ctx_; }
    const Nonlinearity& Z() const { return z_; }
    const Forcing& f() const { return f_; }
    const GreenSolution& base() const { return base_; }

    /// phi0(t_j, c) on both half-line grids.
    GridField phi0(const Vector& c) const {
        GridField out;
        for (int s = 0; s < 2; ++s) {
            const auto& h = ctx_->half(half_side(s));
            out[s].resize(h.t.size());
            for (std::size_t j = 0; j < h.t.size(); ++j) out[s][j] = h.homog[j] * c + base_.grid_value(half_side(s), j);
        }
        return out;
    }

    /// Composite Simpson of K(t_j) v_j over both halves.
    Vector integrate_kernel(const GridField& v) const {
        return detail::simpson_half(*ctx_, ctx_->half(Side::Plus), v[0]) +
               detail::simpson_half(*ctx_, ctx_->half(Side::Minus), v[1]);
    }

private:
    std::shared_ptr<const GreenContext> ctx_;
    Nonlinearity z_;
    Forcing f_;
    GreenSolution base_;
};

/// F(c) = int K(t) Z(phi0(t,c), t, 0) dt.
inline Vector generating_F(const GeneratingSystem& sys, const Vector& c) {
    if (c.size() != sys.ctx().dim()) throw InputError("generating_F: c has dimension " + std::to_string(c.size()));
    GridField phi = sys.phi0(c);
    for (int s = 0; s < 2; ++s) {
        const auto& h = sys.ctx().half(half_side(s));
        for (std::size_t j = 0; j < phi[s].size(); ++j) phi[s][j] = sys.Z()(phi[s][j], h.t[j], 0.0);
    }
    return sys.integrate_kernel(phi);
}

/// B0 = int K(t) A1(t) U(t,0) P+(0) P_N(D) dt with A1 = Z'(phi0(t,c), t, 0).
inline Operator build_B0(const GeneratingSystem& sys, const Vector& c) {
    const GreenContext& ctx = sys.ctx();
    const GridField phi = sys.phi0(c);
    Operator out = Operator::Zero(ctx.dim(), ctx.dim());
    for (int s = 0; s < 2; ++s) {
        const auto& h = ctx.half(half_side(s));
        const std::size_t last = h.intervals();
        for (std::size_t j = 0; j <= last; ++j) {
            const double w = (j == 0 || j == last) ? 1.0 : (j % 2 ? 4.0 : 2.0);
            out += w * (h.kernel[j] * sys.Z().derivative(phi[s][j], h.t[j], 0.0) * h.homog[j]);
        }
    }
    return ctx.delta() / 3.0 * out;
}

/// Central-difference Jacobian of F (F is complex-analytic in c).
inline Operator generating_F_prime_fd(const GeneratingSystem& sys, const Vector& c, double fd_step = 1e-5) {
    const Eigen::Index n = sys.ctx().dim();
    Operator out(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        Vector e = Vector::Zero(n);
        e(k) = fd_step;
        out.col(k) = (generating_F(sys, c + e) - generating_F(sys, c - e)) / (2.0 * fd_step);
    }
    return out;
}

/// |(B0 - F'_fd(c)) P_N(D)|.
inline double corollary_compare(const GeneratingSystem& sys, const Vector& c, double fd_step = 1e-5) {
    const Operator& pn = sys.ctx().pinv().kernel_proj;
    return op_norm(Operator((build_B0(sys, c) - generating_F_prime_fd(sys, c, fd_step)) * pn));
}

/// |P_N(B0*) P_N(D*) P-(0)| <= tol_suff.
/// B0 with |B0| <= tol_degenerate counts as the zero operator.
inline bool sufficient_check(const Operator& b0, const GreenContext& ctx, double tol_suff = 1e-8,
                             double tol_rank = 1e-10, double* value = nullptr, double tol_degenerate = 1e-8) {
    const Operator cok = op_norm(b0) <= tol_degenerate ? identity(b0.rows()) : moore_penrose(b0, tol_rank).cokernel_proj;
    const double v = op_norm(Operator(cok * ctx.pinv().cokernel_proj * ctx.dich_minus().P0));
    if (value) *value = v;
    return v <= tol_suff;
}

struct GeneratingRoot {
    Vector c0;
    double F_norm_at_root = 0.0;
    Operator B0;
    int B0_rank = 0;
    bool sufficient_ok = false;
    double sufficient_value = 0.0;
    double frechet_match_err = 0.0;
    bool F_identically_zero = false;
    int newton_iterations = 0;
};

struct NewtonConfig {
    double tol_root = 1e-10;
    int max_iter = 100;
    double tol_rank = 1e-10;
    double tol_suff = 1e-8;
    double fd_step = 1e-5;
    double tol_degenerate = 1e-8;
};

inline GeneratingRoot describe_root(const GeneratingSystem& sys, Vector c, const NewtonConfig& cfg) {
    GeneratingRoot r;
    r.c0 = std::move(c);
    r.F_norm_at_root = generating_F(sys, r.c0).norm();
    r.B0 = build_B0(sys, r.c0);
    r.B0_rank = op_norm(r.B0) <= cfg.tol_degenerate ? 0 : moore_penrose(r.B0, cfg.tol_rank).rank;
    r.sufficient_ok =
        sufficient_check(r.B0, sys.ctx(), cfg.tol_suff, cfg.tol_rank, &r.sufficient_value, cfg.tol_degenerate);
    r.frechet_match_err = corollary_compare(sys, r.c0, cfg.fd_step);
    return r;
}

/// Damped Newton for F(c) = 0 on Range P_N(D), with the pseudoinverse step -B0^+ F.
inline GeneratingRoot solve_generating(const GeneratingSystem& sys, const Vector& c_init, const NewtonConfig& cfg = {}) {
    const GreenContext& ctx = sys.ctx();
    if (c_init.size() != ctx.dim())
        throw InputError("solve_generating: c_init has dimension " + std::to_string(c_init.size()));
    if (ctx.pinv().rank == ctx.dim()) {
        GeneratingRoot r = describe_root(sys, c_init, cfg);
        r.F_identically_zero = true;
        return r;
    }
    const Operator& pn = ctx.pinv().kernel_proj;
    Vector c = pn * c_init;
    Vector F = generating_F(sys, c);
    int it = 0;
    for (;; ++it) {
        if (F.norm() == 0.0) break;
        if (it >= cfg.max_iter) {
            if (F.norm() <= cfg.tol_root) break;
            throw NoRootError("generating equation: Newton stagnated after " + std::to_string(it) +
                              " iterations, |F| = " + num(F.norm()));
        }
        const PseudoInverseResult pj = moore_penrose(build_B0(sys, c), cfg.tol_rank);
        if (pj.rank == 0) {
            if (F.norm() <= cfg.tol_root) break;
            throw BifurcationError("generating equation: Jacobian vanishes at a point with |F| = " +
                                   num(F.norm()));
        }
        const Vector step = -(pn * (pj.pinv * F));
        double lambda = 1.0;
        Vector trial = c + step;
        Vector Ft = generating_F(sys, trial);
        while (Ft.norm() > F.norm() && lambda > 1e-6) {
            lambda *= 0.5;
            trial = c + lambda * step;
            Ft = generating_F(sys, trial);
        }
        if (Ft.norm() > F.norm()) {
            if (F.norm() <= cfg.tol_root) break;
            throw NoRootError("generating equation: no descent along the Newton direction, |F| = " +
                              num(F.norm()) + " (a real start cannot reach complex roots)");
        }
        c = trial;
        F = Ft;
        if (F.norm() <= cfg.tol_root && lambda * step.norm() <= 1e-12 * (1.0 + c.norm())) break;
    }
    GeneratingRoot r = describe_root(sys, c, cfg);
    r.newton_iterations = it;
    return r;
}

enum class IterationScheme {
    Lagged,   // c_k built from ybar_k (the displayed process)
    Updated,  // c_k built from ybar_{k+1}; same fixed point
};

struct IterationConfig {
    double eps = 0.01;
    int max_iter = 200;
    double tol_fix = 1e-12;
    double eps_max = 0.1;
    double tol_jump = 1e-7;
    double tol_rank = 1e-10;
    IterationScheme scheme = IterationScheme::Lagged;
    unsigned workers = 1;
};

struct IterationState {
    int k = 0;
    Trajectory y_k;
    Trajectory ybar_k;
    Vector c_k;
    double correction_norm = 0.0;
};

/// Bounded solution x(t, eps) = x0(t, c0) + y(t, eps) of the perturbed problem.
struct IterationResult {
    std::vector<IterationState> history;
    Vector c_total;  // c0 + c_last
    double eps = 0.0;
    double solvability_norm = 0.0;
    double asymptotic_ratio = 0.0;
    Trajectory trajectory;
    std::shared_ptr<const GreenSolution> final_solution;  // G[f + eps Z(x)] with the last sampled Z

    Vector operator()(double t) const { return bounded_family(*final_solution, c_total, t); }
    Vector branch(double t, Side side) const { return bounded_family(*final_solution, c_total, t, side); }
    int iterations() const { return static_cast<int>(history.size()); }
};

namespace detail {

inline Trajectory grid_trajectory(const GreenContext& ctx, const GridField& v) {
    Trajectory tr;
    const auto& hm = ctx.half(Side::Minus);
    const auto& hp = ctx.half(Side::Plus);
    for (std::size_t j = hm.intervals(); j >= 1; --j) {
        tr.times.push_back(hm.t[j]);
        tr.values.push_back(v[1][j]);
    }
    for (std::size_t j = 0; j <= hp.intervals(); ++j) {
        tr.times.push_back(hp.t[j]);
        tr.values.push_back(v[0][j]);
    }
    return tr;
}

// Geometric mean of consecutive correction ratios above the roundoff floor.
// Green operators of causal type are quasi-nilpotent, so single ratios keep
// drifting down; the mean is the stable contraction figure.
inline double asymptotic_ratio(const std::vector<IterationState>& hist, double floor) {
    double log_sum = 0.0;
    int count = 0;
    for (std::size_t k = 1; k < hist.size(); ++k) {
        const double a = hist[k - 1].correction_norm;
        const double b = hist[k].correction_norm;
        if (a > floor && b > floor) {
            log_sum += std::log(b / a);
            ++count;
        }
    }
    return count ? std::exp(log_sum / count) : 0.0;
}

}  // namespace detail

/// The iterative process for a bounded solution near the generating solution x0(t, c0).
///
/// Throws DivergenceError when the correction grows three times in a row and
/// NoRootError when the limit violates the solvability condition (c0 is not a
/// root of F).
inline IterationResult iterate_solution(const GeneratingSystem& sys, const GeneratingRoot& root,
                                        const IterationConfig& cfg) {
    const GreenContext& ctx = sys.ctx();
    const Eigen::Index n = ctx.dim();
    if (!(cfg.eps >= 0.0) || cfg.eps > cfg.eps_max)
        throw InputError("iterate_solution: eps = " + std::to_string(cfg.eps) + " outside [0, " +
                         std::to_string(cfg.eps_max) + "]");
    if (cfg.max_iter < 1 || !(cfg.tol_fix > 0.0)) throw InputError("iterate_solution: need max_iter >= 1 and tol_fix > 0");
    if (!root.sufficient_ok)
        throw MathError("iterate_solution: sufficiency condition fails (|P_N(B0*) P_N(D*) P-(0)| = " +
                        num(root.sufficient_value) + ")");
    const double tol_f = 1e-8 + ctx.quad().tail_tol;
    if (sys.base().residual().norm > tol_f)
        throw MathError("iterate_solution: forcing violates the solvability condition, |r| = " +
                        num(sys.base().residual().norm));

    const GridField phi = sys.phi0(root.c0);
    std::array<std::vector<Operator>, 2> a1;
    GridField z0, y, ybar;
    for (int s = 0; s < 2; ++s) {
        const auto& h = ctx.half(half_side(s));
        const std::size_t m = h.t.size();
        a1[s].resize(m);
        z0[s].resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            a1[s][j] = sys.Z().derivative(phi[s][j], h.t[j], 0.0);
            z0[s][j] = sys.Z()(phi[s][j], h.t[j], 0.0);
        }
        y[s].assign(m, Vector::Zero(n));
        ybar[s].assign(m, Vector::Zero(n));
    }
    const Operator b0_pinv = moore_penrose(root.B0, cfg.tol_rank).pinv;

    IterationResult res;
    res.eps = cfg.eps;
    Vector c_last = Vector::Zero(n);
    GridField z_last;
    int increases = 0;
    bool converged = false;
    for (int k = 0; k < cfg.max_iter; ++k) {
        GridField z, ybar_next, integrand, y_next;
        for (int s = 0; s < 2; ++s) {
            const auto& h = ctx.half(half_side(s));
            z[s].resize(h.t.size());
            parallel_for(h.t.size(), cfg.workers,
                         [&](std::size_t j) { z[s][j] = sys.Z()(Vector(phi[s][j] + y[s][j]), h.t[j], cfg.eps); });
        }
        const GreenSolution gz(sys.ctx_ptr(), sampled_forcing(sys.ctx_ptr(), z[0], z[1], "Z"));
        for (int s = 0; s < 2; ++s) {
            const std::size_t m = z[s].size();
            ybar_next[s].resize(m);
            integrand[s].resize(m);
            for (std::size_t j = 0; j < m; ++j) {
                ybar_next[s][j] = cfg.eps * gz.grid_value(half_side(s), j);
                const Vector& yb = cfg.scheme == IterationScheme::Lagged ? ybar[s][j] : ybar_next[s][j];
                const Vector rem = z[s][j] - z0[s][j] - a1[s][j] * y[s][j];
                integrand[s][j] = a1[s][j] * yb + rem;
            }
        }
        const Vector ck = -(b0_pinv * sys.integrate_kernel(integrand));
        double corr = 0.0, ysup = 0.0;
        for (int s = 0; s < 2; ++s) {
            const auto& h = ctx.half(half_side(s));
            y_next[s].resize(h.t.size());
            for (std::size_t j = 0; j < h.t.size(); ++j) {
                y_next[s][j] = h.homog[j] * ck + ybar_next[s][j];
                corr = std::max(corr, (y_next[s][j] - y[s][j]).norm());
                ysup = std::max(ysup, y_next[s][j].norm());
            }
        }
        IterationState st;
        st.k = k + 1;
        st.c_k = ck;
        st.correction_norm = corr;
        st.y_k = detail::grid_trajectory(ctx, y_next);
        st.ybar_k = detail::grid_trajectory(ctx, ybar_next);
        if (!res.history.empty() && corr > res.history.back().correction_norm) ++increases;
        else increases = 0;
        res.history.push_back(std::move(st));
        y = std::move(y_next);
        ybar = std::move(ybar_next);
        c_last = ck;
        z_last = std::move(z);

        if (!std::isfinite(corr) || ysup > sys.Z().radius())
            throw DivergenceError("iteration left the admissible ball at k = " + std::to_string(k + 1) +
                                  "; try a smaller eps");
        if (increases >= 3)
            throw DivergenceError("correction grew three times in a row (k = " + std::to_string(k + 1) +
                                  ", |dy| = " + num(corr) + "); try a smaller eps");
        if (corr <= cfg.tol_fix) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw MathError("iteration did not converge in " + std::to_string(cfg.max_iter) + " steps, last correction " +
                        num(res.history.back().correction_norm));

    for (int s = 0; s < 2; ++s)
        for (auto& v : z_last[s]) v *= cfg.eps;
    const Forcing total = sys.f() + sampled_forcing(sys.ctx_ptr(), z_last[0], z_last[1], "eps*Z");
    res.final_solution = std::make_shared<const GreenSolution>(sys.ctx_ptr(), total);
    res.c_total = root.c0 + c_last;
    res.solvability_norm = res.final_solution->residual().norm;
    if (res.solvability_norm > cfg.tol_jump)
        throw NoRootError("iteration limit is not a bounded solution: solvability residual " +
                          num(res.solvability_norm) + " exceeds " + num(cfg.tol_jump) +
                          "; c0 does not solve the generating equation");

    double scale = 1.0;
    for (const auto& st : res.history)
        for (const auto& v : st.y_k.values) scale = std::max(scale, v.norm());
    res.asymptotic_ratio = detail::asymptotic_ratio(res.history, 1e-10 * scale);

    const std::vector<double> times = grid_times(ctx);
    res.trajectory = sample_trajectory(*res.final_solution, res.c_total, times, cfg.workers);
    res.trajectory.meta.residual_norm = res.solvability_norm;
    return res;
}

/// max over sample of |x' - A x - f - eps Z(x)| for the converged solution.
inline double ode_residual(const GeneratingSystem& sys, const IterationResult& res, std::span<const double> sample,
                           double fd_step = 1e-3) {
    const auto& gen = sys.ctx().family().generator();
    double worst = 0.0;
    for (double t : sample) {
        if (t - fd_step < 0.0 && t + fd_step > 0.0)
            throw InputError("ode_residual: stencil at t = " + std::to_string(t) + " straddles 0");
        const Side side = t > 0.0 ? Side::Plus : Side::Minus;
        const Vector x = res.branch(t, side);
        const Vector d = (res.branch(t + fd_step, side) - res.branch(t - fd_step, side)) / (2.0 * fd_step);
        const Vector f = side == Side::Plus ? sys.f()(t) : sys.f().left(t);
        worst = std::max(worst, (d - gen(t) * x - f - res.eps * sys.Z()(x, t, res.eps)).norm());
    }
    return worst;
}

}  // namespace dgreen
