#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace dgreen {

using cplx = std::complex<double>;

/// Dense complex operator on the n-dimensional truncation of the state space.
using Operator = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Bad input: malformed problem, dimension mismatch, out-of-range query.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The numbers say no: missing dichotomy, no root, divergence.
class MathError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoDichotomyError : public MathError {
public:
    using MathError::MathError;
};

class NoRootError : public MathError {
public:
    using MathError::MathError;
};

class BifurcationError : public MathError {
public:
    using MathError::MathError;
};

class DivergenceError : public MathError {
public:
    using MathError::MathError;
};

inline Operator identity(Eigen::Index n) { return Operator::Identity(n, n); }

inline bool all_finite(const Operator& a) { return a.allFinite(); }

/// Spectral norm (largest singular value).
inline double op_norm(const Operator& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Operator> svd(a);
    return svd.singularValues()(0);
}

/// Compact %.3g rendering for diagnostics.
inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string dims(const Operator& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

}  // namespace dgreen
