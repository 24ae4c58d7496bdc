#pragma once

#include "dgreen/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace dgreen {

/// Time-dependent operator t -> M(t) from the closed registry
/// {constant, sinusoidal, piecewise_sign, table}.
class TimeOperator {
public:
    TimeOperator() = default;

    static TimeOperator constant(Operator m) {
        const auto n = m.rows();
        return TimeOperator("constant", n, [m = std::move(m)](double) { return m; });
    }

    /// M(t) = base + amplitude * sin(omega t + phase).
    static TimeOperator sinusoidal(Operator base, Operator amplitude, double omega, double phase = 0.0) {
        if (base.rows() != amplitude.rows() || base.cols() != amplitude.cols())
            throw InputError("sinusoidal: base " + dims(base) + " vs amplitude " + dims(amplitude));
        const auto n = base.rows();
        return TimeOperator("sinusoidal", n, [=](double t) -> Operator {
            return base + std::sin(omega * t + phase) * amplitude;
        });
    }

    /// negative for t < 0, positive for t >= 0. Breakpoint sits on every grid.
    static TimeOperator piecewise_sign(Operator negative, Operator positive) {
        if (negative.rows() != positive.rows() || negative.cols() != positive.cols())
            throw InputError("piecewise_sign: negative " + dims(negative) + " vs positive " + dims(positive));
        const auto n = negative.rows();
        return TimeOperator("piecewise_sign", n, [=](double t) -> Operator { return t < 0.0 ? negative : positive; });
    }

    /// Piecewise-linear interpolation between sampled matrices, held constant outside.
    static TimeOperator table(std::vector<double> times, std::vector<Operator> values) {
        if (times.empty() || times.size() != values.size())
            throw InputError("table: need matching non-empty times and matrices");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1])) throw InputError("table: times must be strictly increasing");
        const auto n = values.front().rows();
        for (const auto& v : values)
            if (v.rows() != n || v.cols() != n) throw InputError("table: matrix " + dims(v) + " in a dimension-" +
                                                                 std::to_string(n) + " table");
        return TimeOperator("table", n, [times = std::move(times), values = std::move(values)](double t) -> Operator {
            if (t <= times.front()) return values.front();
            if (t >= times.back()) return values.back();
            const auto it = std::upper_bound(times.begin(), times.end(), t);
            const auto i = static_cast<std::size_t>(it - times.begin());
            const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
            return (1.0 - w) * values[i - 1] + w * values[i];
        });
    }

    /// Library-internal sources (interaction picture, linearizations); not reachable from problem files.
    static TimeOperator custom(std::string id, Eigen::Index n, std::function<Operator(double)> fn) {
        return TimeOperator(std::move(id), n, std::move(fn));
    }

    Operator operator()(double t) const { return fn_(t); }
    const std::string& id() const { return id_; }
    Eigen::Index dim() const { return dim_; }
    explicit operator bool() const { return static_cast<bool>(fn_); }

private:
    TimeOperator(std::string id, Eigen::Index n, std::function<Operator(double)> fn)
        : id_(std::move(id)), dim_(n), fn_(std::move(fn)) {}

    std::string id_;
    Eigen::Index dim_ = 0;
    std::function<Operator(double)> fn_;
};

inline const std::vector<std::string>& operator_registry_ids() {
    static const std::vector<std::string> ids{"constant", "sinusoidal", "piecewise_sign", "table"};
    return ids;
}

/// Bounded continuous forcing f in BC(R, H) with a known sup-norm bound |||f|||.
class Forcing {
public:
    Forcing() = default;

    Forcing(std::string id, Eigen::Index n, double sup_norm, std::function<Vector(double)> fn)
        : id_(std::move(id)), dim_(n), sup_norm_(sup_norm), fn_(std::move(fn)) {}

    static Forcing zero(Eigen::Index n) {
        return Forcing("zero", n, 0.0, [n](double) { return Vector::Zero(n); });
    }

    /// v * exp(-rate |t|)
    static Forcing exp_abs(Vector v, double rate = 1.0) {
        const double s = v.norm();
        const auto n = v.size();
        return Forcing("exp", n, s, [v = std::move(v), rate](double t) -> Vector {
            return std::exp(-rate * std::abs(t)) * v;
        });
    }

    /// v * exp(-rate t^2)
    static Forcing gaussian(Vector v, double rate = 1.0) {
        const double s = v.norm();
        const auto n = v.size();
        return Forcing("gaussian", n, s, [v = std::move(v), rate](double t) -> Vector {
            return std::exp(-rate * t * t) * v;
        });
    }

    /// v * t * exp(-rate t^2); odd in t.
    static Forcing odd_gaussian(Vector v, double rate = 1.0) {
        const double s = v.norm() / std::sqrt(2.0 * rate * std::exp(1.0));
        const auto n = v.size();
        return Forcing("odd_gaussian", n, s, [v = std::move(v), rate](double t) -> Vector {
            return t * std::exp(-rate * t * t) * v;
        });
    }

    /// v * sin(omega t + phase)
    static Forcing sinusoidal(Vector v, double omega, double phase = 0.0) {
        const double s = v.norm();
        const auto n = v.size();
        return Forcing("sinusoidal", n, s, [v = std::move(v), omega, phase](double t) -> Vector {
            return std::sin(omega * t + phase) * v;
        });
    }

    /// Piecewise-linear in t through sampled vectors, held constant outside.
    static Forcing table(std::vector<double> times, std::vector<Vector> values) {
        if (times.empty() || times.size() != values.size())
            throw InputError("forcing table: need matching non-empty times and vectors");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1])) throw InputError("forcing table: times must be strictly increasing");
        const auto n = values.front().size();
        double s = 0.0;
        for (const auto& v : values) {
            if (v.size() != n) throw InputError("forcing table: inconsistent vector dimensions");
            s = std::max(s, v.norm());
        }
        return Forcing("table", n, s, [times = std::move(times), values = std::move(values)](double t) -> Vector {
            if (t <= times.front()) return values.front();
            if (t >= times.back()) return values.back();
            const auto i = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
            const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
            return (1.0 - w) * values[i - 1] + w * values[i];
        });
    }

    /// Forcing that is two-valued at t = 0: `right` is used for t >= 0, `left` for the t <= 0 branch.
    static Forcing two_sided(std::string id, Eigen::Index n, double sup_norm, std::function<Vector(double)> right,
                             std::function<Vector(double)> left) {
        Forcing f(std::move(id), n, sup_norm, std::move(right));
        f.left_ = std::move(left);
        return f;
    }

    Vector operator()(double t) const { return fn_(t); }
    /// Value on the t <= 0 branch; differs from operator() only at a jump at 0.
    Vector left(double t) const { return left_ ? left_(t) : fn_(t); }
    const std::string& id() const { return id_; }
    Eigen::Index dim() const { return dim_; }
    double sup_norm() const { return sup_norm_; }

    Forcing operator+(const Forcing& other) const {
        if (dim_ != other.dim_) throw InputError("forcing sum: dimension mismatch");
        auto a = *this;
        auto b = other;
        return two_sided(
            id_ + "+" + other.id_, dim_, sup_norm_ + other.sup_norm_,
            [a, b](double t) -> Vector { return a(t) + b(t); },
            [a, b](double t) -> Vector { return a.left(t) + b.left(t); });
    }

private:
    std::string id_;
    Eigen::Index dim_ = 0;
    double sup_norm_ = 0.0;
    std::function<Vector(double)> fn_;
    std::function<Vector(double)> left_;
};

inline const std::vector<std::string>& forcing_registry_ids() {
    static const std::vector<std::string> ids{"zero", "exp", "gaussian", "odd_gaussian", "sinusoidal", "table"};
    return ids;
}

}  // namespace dgreen
