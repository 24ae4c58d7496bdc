#pragma once

#include "dgreen/dichotomy.hpp"
#include "dgreen/green.hpp"
#include "dgreen/nonlinear.hpp"
#include "dgreen/pipeline.hpp"
#include "dgreen/propagator.hpp"
#include "dgreen/sources.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>

namespace dgreen::testing {

inline std::string problem_path(const std::string& name) { return std::string(DGREEN_PROBLEMS_DIR) + "/" + name + ".json"; }

inline LinearSetup load_linear(const std::string& name) { return build_linear(parse_problem(problem_path(name))); }

inline Operator diag(std::initializer_list<double> d) {
    Operator m = Operator::Zero(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
    Eigen::Index i = 0;
    for (double v : d) m(i, i) = v, ++i;
    return m;
}

inline Vector vec(std::initializer_list<cplx> d) {
    Vector v(static_cast<Eigen::Index>(d.size()));
    Eigen::Index i = 0;
    for (cplx x : d) v(i++) = x;
    return v;
}

inline Operator scalar(double a) { return Operator::Constant(1, 1, a); }

// Family, dichotomies and context for a generator with known projectors at 0.
struct Setup {
    std::shared_ptr<const EvolutionFamily> family;
    std::shared_ptr<const GreenContext> ctx;
};

inline Setup make_setup(TimeOperator a, const Operator& p_plus, const Operator& p_minus, QuadratureConfig q = {},
                        double h = 0.05) {
    Setup s;
    const double extent = 2.25 * q.t_cut;
    s.family = std::make_shared<const EvolutionFamily>(Generator::general(std::move(a)), -extent, extent, h);
    s.ctx = std::make_shared<const GreenContext>(make_dichotomy(s.family, p_plus, Side::Plus),
                                                 make_dichotomy(s.family, p_minus, Side::Minus), q);
    return s;
}

// x' = -x + f
inline Setup scalar_stable(QuadratureConfig q = {}) {
    return make_setup(TimeOperator::constant(scalar(-1.0)), scalar(1.0), scalar(1.0), q);
}

// x' = sgn(t) x + f: no bounded homogeneous solution, one solvability condition.
inline Setup growout(QuadratureConfig q = {}) {
    return make_setup(TimeOperator::piecewise_sign(scalar(-1.0), scalar(1.0)), scalar(0.0), scalar(1.0), q);
}

// x' = -sgn(t) x + f: bounded homogeneous solution e^{-|t|}.
inline Setup homoclinic(QuadratureConfig q = {}) {
    return make_setup(TimeOperator::piecewise_sign(scalar(1.0), scalar(-1.0)), scalar(1.0), scalar(0.0), q);
}

// x' = diag(-1,1) x + f
inline Setup saddle(QuadratureConfig q = {}) {
    return make_setup(TimeOperator::constant(diag({-1.0, 1.0})), diag({1.0, 0.0}), diag({1.0, 0.0}), q);
}

// diag(-1,1) for t >= 0, diag(1,-1) for t < 0: D = 0 and one bounded direction.
inline Setup coupled_2d(QuadratureConfig q = {}) {
    return make_setup(TimeOperator::piecewise_sign(diag({1.0, -1.0}), diag({-1.0, 1.0})), diag({1.0, 0.0}),
                      diag({0.0, 1.0}), q);
}

inline Nonlinearity quadratic_second_component() {
    Monomial m;
    m.component = 1;
    m.exponents = {2, 0};
    return Nonlinearity::polynomial(2, {m});
}

// Adaptive Gauss-Kronrod on [lo, hi] (infinite ends allowed).
template <class F>
double integrate(F&& f, double lo, double hi) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    return GK::integrate(f, lo, hi, 15, 1e-13);
}

// Scalar stable closed form for f = e^{-|t|}.
inline double stable_exp_closed(double t) { return t >= 0.0 ? (t + 0.5) * std::exp(-t) : 0.5 * std::exp(t); }

// Bounded solution of x' = -sgn(t) x + e^{-t^2} with x(0) = 0:
// for t >= 0, e^{-t} int_0^t e^{tau - tau^2}; odd in t.
inline double homoclinic_gauss_particular(double t) {
    const double u = std::abs(t);
    const double v = std::exp(-u) * std::exp(0.25) * std::sqrt(M_PI) / 2.0 * (std::erf(u - 0.5) + std::erf(0.5));
    return t >= 0.0 ? v : -v;
}

// Generating function of the coupled 2-D problem with Z = (0, x1^2) and
// f = (e^{-t^2}, 0): F(c) = (0, a c1^2 + b c1 + c0). The kernel and the
// bounded homogeneous direction are both e^{-|t|}.
struct Quadratic {
    double a, b, c0;
};

inline Quadratic quadratic_oracle() {
    const double inf = std::numeric_limits<double>::infinity();
    Quadratic q;
    q.a = 2.0 * integrate([](double t) { return std::exp(-3.0 * t); }, 0.0, inf);
    q.b = integrate([](double t) { return 2.0 * std::exp(-2.0 * t) * homoclinic_gauss_particular(t); }, 0.0, inf) +
          integrate([](double t) { return 2.0 * std::exp(2.0 * t) * homoclinic_gauss_particular(t); }, -inf, 0.0);
    q.c0 = 2.0 * integrate([](double t) { return std::exp(-t) * std::pow(homoclinic_gauss_particular(t), 2); }, 0.0, inf);
    return q;
}

inline Operator random_complex(std::mt19937& rng, Eigen::Index m, Eigen::Index n) {
    std::normal_distribution<double> g;
    Operator a(m, n);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
    return a;
}

// Penrose conditions and the two projector identities, relative to sigma_max.
struct PenroseErrors {
    double axioms = 0.0;
    double projectors = 0.0;
};

inline PenroseErrors penrose_errors(const Operator& a, const PseudoInverseResult& pr) {
    const Operator& p = pr.pinv;
    const double s = std::max(pr.sigma_max(), std::numeric_limits<double>::min());
    PenroseErrors e;
    e.axioms = std::max({(a * p * a - a).norm() / s, (p * a * p - p).norm() * s, (a * p - (a * p).adjoint()).norm(),
                         (p * a - (p * a).adjoint()).norm()});
    const Operator pn = pr.kernel_proj;
    const Operator pc = pr.cokernel_proj;
    e.projectors = std::max({(pn - (identity(a.cols()) - p * a)).norm(), (pc - (identity(a.rows()) - a * p)).norm(),
                             (a * pn).norm() / s, (pc * a).norm() / s, (pn * pn - pn).norm(), (pc * pc - pc).norm()});
    return e;
}

}  // namespace dgreen::testing
