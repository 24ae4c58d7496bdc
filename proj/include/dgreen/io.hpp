#pragma once

#include "dgreen/green.hpp"
#include "dgreen/types.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

namespace dgreen {

using json = nlohmann::ordered_json;

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(to_json(v(i)));
    return a;
}

inline json to_json(const Operator& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(to_json(m(i, j)));
        rows.push_back(r);
    }
    return rows;
}

inline json to_json(const TrajectoryMeta& m) {
    json tol = json::object();
    for (const auto& [k, v] : m.tolerances) tol[k] = v;
    return json{{"problem_hash", m.problem_hash}, {"regime", m.regime}, {"residual_norm", m.residual_norm},
                {"tolerances", tol}};
}

/// Columns t, Re x_1..n, Im x_1..n; fixed %.17g formatting so reruns are bit-identical.
inline void write_csv(std::ostream& os, const Trajectory& tr) {
    const Eigen::Index n = tr.values.empty() ? 0 : tr.values.front().size();
    os << "t";
    for (Eigen::Index i = 1; i <= n; ++i) os << ",re_x" << i;
    for (Eigen::Index i = 1; i <= n; ++i) os << ",im_x" << i;
    os << '\n';
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        os << fmt17(tr.times[k]);
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << fmt17(tr.values[k](i).real());
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << fmt17(tr.values[k](i).imag());
        os << '\n';
    }
}

inline json trajectory_json(const Trajectory& tr) {
    json vals = json::array();
    for (const auto& v : tr.values) vals.push_back(to_json(v));
    return json{{"meta", to_json(tr.meta)}, {"times", tr.times}, {"values", vals}};
}

inline void write_trajectory(const std::string& path, const Trajectory& tr, const std::string& format) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    if (format == "csv")
        write_csv(os, tr);
    else if (format == "json")
        os << trajectory_json(tr).dump(2) << '\n';
    else
        throw InputError("unknown output format \"" + format + "\"; valid: csv, json");
}

}  // namespace dgreen
