#pragma once

#include "dgreen/types.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <string>

namespace dgreen {

/// SVD-based Moore-Penrose data for an operator D.
///
/// kernel_proj is the orthoprojector onto N(D), cokernel_proj the one onto
/// N(D*) = R(D)^perp. ill_posedness_margin is the smallest singular value above
/// the roundoff floor max(m,n)*eps*sigma_max, whether or not it survived the
/// rank cut; zero when no such value exists.
struct PseudoInverseResult {
    Operator pinv;
    int rank = 0;
    Eigen::VectorXd singular_values;
    Operator kernel_proj;
    Operator cokernel_proj;
    double ill_posedness_margin = 0.0;

    double sigma_max() const { return singular_values.size() ? singular_values(0) : 0.0; }
};

/// Singular values below tol_rank * sigma_max count as zero.
inline PseudoInverseResult moore_penrose(const Operator& a, double tol_rank = 1e-10) {
    if (!(tol_rank > 0.0 && tol_rank < 1.0))
        throw InputError("moore_penrose: tol_rank must lie in (0,1), got " + std::to_string(tol_rank));
    if (!all_finite(a))
        throw InputError("moore_penrose: non-finite entries in " + dims(a) + " operator");

    Eigen::JacobiSVD<Operator> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success)
        throw MathError("moore_penrose: SVD did not converge for " + dims(a) + " operator");

    PseudoInverseResult out;
    out.singular_values = svd.singularValues();
    const Eigen::Index k = out.singular_values.size();
    const double cut = k ? tol_rank * out.singular_values(0) : 0.0;

    int r = 0;
    while (r < k && out.singular_values(r) > cut && out.singular_values(r) > 0.0) ++r;
    out.rank = r;
    const double floor = static_cast<double>(std::max(a.rows(), a.cols())) *
                         std::numeric_limits<double>::epsilon() * (k ? out.singular_values(0) : 0.0);
    for (Eigen::Index i = 0; i < k; ++i)
        if (out.singular_values(i) > floor) out.ill_posedness_margin = out.singular_values(i);

    const Operator& u = svd.matrixU();
    const Operator& v = svd.matrixV();
    Eigen::VectorXd inv_s = out.singular_values.head(r).cwiseInverse();
    out.pinv = v.leftCols(r) * inv_s.asDiagonal() * u.leftCols(r).adjoint();

    out.kernel_proj = identity(a.cols()) - out.pinv * a;
    out.cokernel_proj = identity(a.rows()) - a * out.pinv;
    if (!all_finite(out.pinv))
        throw MathError("moore_penrose: pseudoinverse overflowed for " + dims(a) + " operator");
    return out;
}

/// xi = D^+ g + P_N(D) c. With c = 0 this is the minimal-norm least-squares solution.
inline Vector pseudo_solve(const PseudoInverseResult& pr, const Vector& g, const Vector& c) {
    if (g.size() != pr.pinv.cols() || c.size() != pr.pinv.rows())
        throw InputError("pseudo_solve: dimension mismatch (pinv " + dims(pr.pinv) + ", g " +
                         std::to_string(g.size()) + ", c " + std::to_string(c.size()) + ")");
    return pr.pinv * g + pr.kernel_proj * c;
}

inline Vector pseudo_solve(const Operator& d, const Vector& g, const Vector& c, double tol_rank = 1e-10) {
    if (g.size() != d.rows() || c.size() != d.cols())
        throw InputError("pseudo_solve: dimension mismatch (D " + dims(d) + ", g " + std::to_string(g.size()) +
                         ", c " + std::to_string(c.size()) + ")");
    return pseudo_solve(moore_penrose(d, tol_rank), g, c);
}

/// Which of the three solvability cases of D xi = g applies.
///
/// A finite truncation always has closed range, so the "strong generalized"
/// case is reported through ill_posed_margin on top of the Classical verdict.
struct Regime {
    enum class Tag { Classical, Pseudosolution };

    Tag tag = Tag::Classical;
    double residual_norm = 0.0;
    bool ill_posed_margin = false;
    double margin = 0.0;

    /// 1, 2 or 3 following the classical / strong generalized / pseudosolution split.
    int case_number() const {
        if (tag == Tag::Pseudosolution) return 3;
        return ill_posed_margin ? 2 : 1;
    }
};

inline const char* to_string(Regime::Tag t) {
    return t == Regime::Tag::Classical ? "Classical" : "Pseudosolution";
}

inline Regime regime_classify(const PseudoInverseResult& pr, const Vector& g, double tol_solve = 1e-8,
                              double tol_margin = 1e-6) {
    if (!(tol_solve > 0.0) || !(tol_margin > 0.0))
        throw InputError("regime_classify: tolerances must be positive");
    if (g.size() != pr.cokernel_proj.cols())
        throw InputError("regime_classify: g has dimension " + std::to_string(g.size()) + ", expected " +
                         std::to_string(pr.cokernel_proj.cols()));
    Regime r;
    r.residual_norm = (pr.cokernel_proj * g).norm();
    r.tag = r.residual_norm <= tol_solve ? Regime::Tag::Classical : Regime::Tag::Pseudosolution;
    r.margin = pr.ill_posedness_margin;
    r.ill_posed_margin = r.margin > 0.0 && r.margin < tol_margin;
    return r;
}

}  // namespace dgreen
