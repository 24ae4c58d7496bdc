#pragma once

#include "dgreen/sources.hpp"
#include "dgreen/types.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dgreen {

/// Right-hand side generator of dx/dt = A(t) x.
///
/// In Schrodinger mode A(t) = -i (H0 + V(t)) with H0 self-adjoint; in General
/// mode A(t) is supplied directly.
class Generator {
public:
    enum class Mode { Schrodinger, General };

    static Generator general(TimeOperator a) {
        Generator g;
        g.mode_ = Mode::General;
        g.a_ = std::move(a);
        g.dim_ = g.a_.dim();
        return g;
    }

    static Generator schrodinger(Operator h0, TimeOperator v) {
        if (h0.rows() != h0.cols()) throw InputError("schrodinger: H0 must be square, got " + dims(h0));
        const double scale = std::max(1.0, h0.norm());
        if ((h0 - h0.adjoint()).norm() > 1e-12 * scale) throw InputError("schrodinger: H0 is not self-adjoint");
        if (v.dim() != h0.rows())
            throw InputError("schrodinger: H0 is " + dims(h0) + " but V has dimension " + std::to_string(v.dim()));
        Generator g;
        g.mode_ = Mode::Schrodinger;
        g.h0_ = std::move(h0);
        g.v_ = std::move(v);
        g.dim_ = g.h0_.rows();
        return g;
    }

    Operator operator()(double t) const {
        if (mode_ == Mode::General) return a_(t);
        return cplx(0.0, -1.0) * (h0_ + v_(t));
    }

    Mode mode() const { return mode_; }
    Eigen::Index dim() const { return dim_; }
    const Operator& h0() const { return h0_; }
    const TimeOperator& v() const { return v_; }
    const TimeOperator& a() const { return a_; }

private:
    Generator() = default;

    Mode mode_ = Mode::General;
    Eigen::Index dim_ = 0;
    Operator h0_;
    TimeOperator v_;
    TimeOperator a_;
};

namespace detail {

inline Operator expm_checked(const Operator& m) {
    // L1 operator norm; beyond this the scaled Pade step loses the 1e-13 target.
    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    if (!(norm1 < 40.0))
        throw MathError("matrix exponential: |h A| = " + std::to_string(norm1) + " is too large; use a smaller step h");
    Operator e = m.exp();
    if (!e.allFinite()) throw MathError("matrix exponential overflowed; use a smaller step h");
    return e;
}

}  // namespace detail

/// Grid-cached evolution family U(t,s) for a Generator.
///
/// Nodes are k*h for integer k, so t = 0 is always a node. Each step uses the
/// midpoint exponential exp(h A(t_k + h/2)); off-node times take one partial
/// midpoint step from the node below. After construction the family is
/// immutable; the node-pair memo is mutex-guarded.
class EvolutionFamily {
public:
    EvolutionFamily(Generator gen, double t_min, double t_max, double h, std::size_t cache_budget = 256)
        : gen_(std::move(gen)), h_(h), cache_budget_(cache_budget) {
        if (!(t_min < t_max)) throw InputError("build_family: need t_min < t_max");
        if (!(h > 0.0) || h > (t_max - t_min) / 4.0 * (1.0 + 1e-12))
            throw InputError("build_family: step h must satisfy 0 < h <= (t_max - t_min)/4");
        k_min_ = static_cast<long>(std::floor(t_min / h + 1e-9));
        const long k_max = static_cast<long>(std::ceil(t_max / h - 1e-9));
        const auto steps = static_cast<std::size_t>(k_max - k_min_);
        fwd_.reserve(steps);
        bwd_.reserve(steps);
        for (std::size_t i = 0; i < steps; ++i) {
            const double mid = node(i) + 0.5 * h_;
            const Operator a = gen_(mid);
            fwd_.push_back(detail::expm_checked(h_ * a));
            bwd_.push_back(detail::expm_checked(-h_ * a));
        }
    }

    EvolutionFamily(const EvolutionFamily& o)
        : gen_(o.gen_), h_(o.h_), k_min_(o.k_min_), cache_budget_(o.cache_budget_), fwd_(o.fwd_), bwd_(o.bwd_) {}

    double step() const { return h_; }
    double t_min() const { return static_cast<double>(k_min_) * h_; }
    double t_max() const { return node(fwd_.size()); }
    std::size_t node_count() const { return fwd_.size() + 1; }
    double node(std::size_t i) const { return static_cast<double>(k_min_ + static_cast<long>(i)) * h_; }
    const Generator& generator() const { return gen_; }
    Eigen::Index dim() const { return gen_.dim(); }

    bool contains(double t) const {
        const double slack = 1e-9 * h_;
        return t >= t_min() - slack && t <= t_max() + slack;
    }

    /// U(t,s) as a dense operator.
    Operator propagator(double t, double s) const {
        check_range(t, s);
        const auto [kt, rt] = locate(t);
        const auto [ks, rs] = locate(s);
        Operator out = node_span(kt, ks);
        if (rs > 0.0) out = out * partial(ks, rs, true);
        if (rt > 0.0) out = partial(kt, rt, false) * out;
        return out;
    }

    /// U(t,s) x without forming the full operator.
    Vector apply(double t, double s, const Vector& x) const {
        check_range(t, s);
        if (x.size() != dim()) throw InputError("apply: vector dimension " + std::to_string(x.size()) +
                                                " vs family dimension " + std::to_string(dim()));
        const auto [kt, rt] = locate(t);
        const auto [ks, rs] = locate(s);
        Vector y = x;
        if (rs > 0.0) y = partial(ks, rs, true) * y;
        if (kt >= ks)
            for (std::size_t i = ks; i < kt; ++i) y = fwd_[i] * y;
        else
            for (std::size_t i = ks; i > kt; --i) y = bwd_[i - 1] * y;
        if (rt > 0.0) y = partial(kt, rt, false) * y;
        return y;
    }

    /// Same as apply() but for a block of columns.
    Operator apply(double t, double s, const Operator& x) const {
        check_range(t, s);
        const auto [kt, rt] = locate(t);
        const auto [ks, rs] = locate(s);
        Operator y = x;
        if (rs > 0.0) y = partial(ks, rs, true) * y;
        if (kt >= ks)
            for (std::size_t i = ks; i < kt; ++i) y = fwd_[i] * y;
        else
            for (std::size_t i = ks; i > kt; --i) y = bwd_[i - 1] * y;
        if (rt > 0.0) y = partial(kt, rt, false) * y;
        return y;
    }

private:
    std::pair<std::size_t, double> locate(double t) const {
        const double x = t / h_ - static_cast<double>(k_min_);
        auto k = static_cast<long>(std::floor(x + 1e-9));
        k = std::clamp(k, 0L, static_cast<long>(fwd_.size()));
        double r = t - node(static_cast<std::size_t>(k));
        if (std::abs(r) <= 1e-12 * std::max(1.0, std::abs(t))) r = 0.0;
        return {static_cast<std::size_t>(k), std::max(r, 0.0)};
    }

    void check_range(double t, double s) const {
        if (!contains(t) || !contains(s))
            throw InputError("evolution family: time outside grid [" + std::to_string(t_min()) + ", " +
                             std::to_string(t_max()) + "] (t=" + std::to_string(t) + ", s=" + std::to_string(s) + ")");
    }

    // U(t_k + r, t_k), or its inverse.
    Operator partial(std::size_t k, double r, bool inverse) const {
        const Operator a = gen_(node(k) + 0.5 * r);
        return detail::expm_checked((inverse ? -r : r) * a);
    }

    Operator node_span(std::size_t i, std::size_t j) const {
        if (i == j) return identity(dim());
        {
            std::lock_guard<std::mutex> lock(mu_);
            if (auto it = memo_.find({i, j}); it != memo_.end()) return it->second;
        }
        Operator out = identity(dim());
        if (i > j)
            for (std::size_t k = j; k < i; ++k) out = fwd_[k] * out;
        else
            for (std::size_t k = j; k > i; --k) out = bwd_[k - 1] * out;
        std::lock_guard<std::mutex> lock(mu_);
        if (memo_.size() < cache_budget_) memo_.emplace(std::make_pair(i, j), out);
        return out;
    }

    Generator gen_;
    double h_;
    long k_min_ = 0;
    std::size_t cache_budget_;
    std::vector<Operator> fwd_;
    std::vector<Operator> bwd_;
    mutable std::mutex mu_;
    mutable std::map<std::pair<std::size_t, std::size_t>, Operator> memo_;
};

inline EvolutionFamily build_family(const Generator& gen, double t_min, double t_max, double h) {
    return EvolutionFamily(gen, t_min, t_max, h);
}

/// e^{itH0} V(t) e^{-itH0}, computed in the eigenbasis of H0.
inline Operator interaction_picture_V(const Operator& h0, const TimeOperator& v, double t) {
    const double scale = std::max(1.0, h0.norm());
    if ((h0 - h0.adjoint()).norm() > 1e-12 * scale) throw InputError("interaction_picture_V: H0 is not self-adjoint");
    Eigen::SelfAdjointEigenSolver<Operator> es(h0);
    const Operator& q = es.eigenvectors();
    const Eigen::VectorXd& lam = es.eigenvalues();
    Operator vq = q.adjoint() * v(t) * q;
    for (Eigen::Index j = 0; j < vq.rows(); ++j)
        for (Eigen::Index k = 0; k < vq.cols(); ++k) vq(j, k) *= std::exp(cplx(0.0, t * (lam(j) - lam(k))));
    return q * vq * q.adjoint();
}

/// Interaction-picture generator -i V~(t), for building U~(t,s).
inline Generator interaction_generator(const Operator& h0, const TimeOperator& v) {
    return Generator::general(TimeOperator::custom("interaction", h0.rows(), [h0, v](double t) -> Operator {
        return cplx(0.0, -1.0) * interaction_picture_V(h0, v, t);
    }));
}

/// max over sample of |d/dt (eta, psi(t)) + i (H0 eta, psi(t)) + i (V(t) eta, psi(t))|
/// with psi(t) = U(t,s) psi0 and a central difference of width 2h (h = family step).
inline double weak_residual(const EvolutionFamily& family, const Vector& eta, const Vector& psi0, double s,
                            std::span<const double> sample) {
    const Generator& gen = family.generator();
    if (gen.mode() != Generator::Mode::Schrodinger) throw InputError("weak_residual: family is not in Schrodinger mode");
    if (eta.norm() == 0.0) throw InputError("weak_residual: eta must be nonzero");
    const double h = family.step();
    const cplx i(0.0, 1.0);
    double worst = 0.0;
    for (double t : sample) {
        const Vector psi = family.apply(t, s, psi0);
        const cplx d = (eta.dot(family.apply(t + h, s, psi0)) - eta.dot(family.apply(t - h, s, psi0))) / (2.0 * h);
        const cplx r = d + i * (gen.h0() * eta).dot(psi) + i * (gen.v()(t) * eta).dot(psi);
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

}  // namespace dgreen
