#pragma once

#include "dgreen/green.hpp"
#include "dgreen/io.hpp"
#include "dgreen/nonlinear.hpp"
#include "dgreen/propagator.hpp"
#include "dgreen/sources.hpp"
#include "dgreen/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace dgreen {

struct ProjectorSource {
    std::string kind = "spectral";  // spectral | piecewise_spectral | explicit
    Operator matrix;                 // explicit only
    double at = 0.0;                 // spectral only: A is evaluated here
};

struct Tolerances {
    double tol_rank = 1e-10;
    double tol_solve = 1e-8;
    double tail_tol = 1e-9;
    double tol_fix = 1e-12;
    double tol_suff = 1e-8;
    double tol_margin = 1e-6;
    double tol_root = 1e-10;
    double tol_jump = 1e-7;

    std::map<std::string, double> as_map() const {
        return {{"tol_rank", tol_rank}, {"tol_solve", tol_solve}, {"tail_tol", tail_tol}, {"tol_fix", tol_fix},
                {"tol_suff", tol_suff}, {"tol_margin", tol_margin}, {"tol_root", tol_root}, {"tol_jump", tol_jump}};
    }
};

struct GridSpec {
    double t_cut = 20.0;
    double h = 0.05;
    int nodes_per_unit = 32;
};

struct NonlinearSpec {
    Nonlinearity Z;
    double eps = 0.01;
    double eps_max = 0.1;
    int max_iter = 200;
    Vector c_init;
    std::string scheme = "lagged";
};

struct ProblemSpec {
    std::string name;
    Eigen::Index n = 0;
    Generator generator = Generator::general(TimeOperator::constant(Operator::Zero(1, 1)));
    Forcing forcing;
    ProjectorSource plus, minus;
    std::optional<NonlinearSpec> nonlinear;
    Vector c;  // member of the bounded family to report
    Tolerances tol;
    GridSpec grid;
    std::string out_dir;
    std::string format = "csv";
    std::string hash;
};

namespace detail {

// JSON cursor that remembers where it is for error messages.
class Node {
public:
    Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const json& raw() const { return *j_; }
    bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

    Node at(const std::string& key) const {
        if (!j_->is_object()) fail("expected an object");
        if (!j_->contains(key)) throw InputError("schema violation at " + child(key) + ": missing required field");
        return Node((*j_)[key], child(key));
    }
    Node at(std::size_t i) const { return Node((*j_)[i], path_ + "[" + std::to_string(i) + "]"); }
    std::size_t size() const {
        if (!j_->is_array()) fail("expected an array");
        return j_->size();
    }

    double number() const {
        if (!j_->is_number()) fail("expected a number");
        const double v = j_->get<double>();
        if (!std::isfinite(v)) fail("expected a finite number");
        return v;
    }
    double positive() const {
        const double v = number();
        if (!(v > 0.0)) fail("must be positive, got " + num(v));
        return v;
    }
    long integer() const {
        if (!j_->is_number_integer()) fail("expected an integer");
        return j_->get<long>();
    }
    bool boolean() const {
        if (!j_->is_boolean()) fail("expected true or false");
        return j_->get<bool>();
    }
    std::string string() const {
        if (!j_->is_string()) fail("expected a string");
        return j_->get<std::string>();
    }
    cplx complex() const {
        if (j_->is_number()) return {number(), 0.0};
        if (!j_->is_array() || j_->size() != 2 || !(*j_)[0].is_number() || !(*j_)[1].is_number())
            fail("expected a complex number [re, im]");
        return {(*j_)[0].get<double>(), (*j_)[1].get<double>()};
    }
    Vector vector() const {
        const std::size_t m = size();
        Vector v(static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) v(static_cast<Eigen::Index>(i)) = at(i).complex();
        return v;
    }
    Operator matrix() const {
        const std::size_t r = size();
        if (r == 0) fail("empty matrix");
        const std::size_t c = at(0).size();
        Operator m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        for (std::size_t i = 0; i < r; ++i) {
            const Node row = at(i);
            if (row.size() != c) row.fail("ragged matrix row");
            for (std::size_t j = 0; j < c; ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row.at(j).complex();
        }
        return m;
    }
    std::vector<double> reals() const {
        std::vector<double> out;
        for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).number());
        return out;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw InputError("schema violation at " + (path_.empty() ? std::string("<root>") : path_) + ": " + what);
    }

private:
    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* j_;
    std::string path_;
};

inline std::string join(const std::vector<std::string>& ids) {
    std::string s;
    for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
    return s;
}

inline std::string registry_id(const Node& node, const std::vector<std::string>& valid) {
    const std::string id = node.string();
    if (std::find(valid.begin(), valid.end(), id) == valid.end())
        throw InputError("unknown registry id \"" + id + "\" at " + node.path() + "; valid ids: " + join(valid));
    return id;
}

// Where the problem dimension came from, for mismatch messages.
inline std::string& dim_source() {
    thread_local std::string s;
    return s;
}

inline void expect_square(const Operator& m, Eigen::Index n, const Node& where) {
    if (m.rows() != n || m.cols() != n)
        throw InputError("dimension mismatch: " + where.path() + " is " + dims(m) + " but " + dim_source() +
                         " (dimension " + std::to_string(n) + ")");
}

inline void expect_len(const Vector& v, Eigen::Index n, const Node& where) {
    if (v.size() != n)
        throw InputError("dimension mismatch: " + where.path() + " has dimension " + std::to_string(v.size()) +
                         " but " + dim_source() + " (dimension " + std::to_string(n) + ")");
}

inline TimeOperator parse_operator(const Node& node, Eigen::Index n) {
    const std::string id = registry_id(node.at("type"), operator_registry_ids());
    if (id == "constant") {
        const Operator m = node.at("matrix").matrix();
        expect_square(m, n, node.at("matrix"));
        return TimeOperator::constant(m);
    }
    if (id == "sinusoidal") {
        const Operator base = node.at("base").matrix();
        const Operator amp = node.at("amplitude").matrix();
        expect_square(base, n, node.at("base"));
        expect_square(amp, n, node.at("amplitude"));
        const double phase = node.has("phase") ? node.at("phase").number() : 0.0;
        return TimeOperator::sinusoidal(base, amp, node.at("omega").number(), phase);
    }
    if (id == "piecewise_sign") {
        const Operator neg = node.at("negative").matrix();
        const Operator pos = node.at("positive").matrix();
        expect_square(neg, n, node.at("negative"));
        expect_square(pos, n, node.at("positive"));
        return TimeOperator::piecewise_sign(neg, pos);
    }
    const std::vector<double> times = node.at("times").reals();
    const Node mats = node.at("matrices");
    std::vector<Operator> ms;
    for (std::size_t i = 0; i < mats.size(); ++i) {
        ms.push_back(mats.at(i).matrix());
        expect_square(ms.back(), n, mats.at(i));
    }
    return TimeOperator::table(times, ms);
}

inline Forcing parse_forcing(const Node& node, Eigen::Index n) {
    const std::string id = registry_id(node.at("type"), forcing_registry_ids());
    if (id == "zero") return Forcing::zero(n);
    if (id == "table") {
        const std::vector<double> times = node.at("times").reals();
        const Node vals = node.at("values");
        std::vector<Vector> vs;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            vs.push_back(vals.at(i).vector());
            expect_len(vs.back(), n, vals.at(i));
        }
        return Forcing::table(times, vs);
    }
    const Vector v = node.at("vector").vector();
    expect_len(v, n, node.at("vector"));
    if (id == "sinusoidal") {
        const double phase = node.has("phase") ? node.at("phase").number() : 0.0;
        return Forcing::sinusoidal(v, node.at("omega").number(), phase);
    }
    const double rate = node.has("rate") ? node.at("rate").positive() : 1.0;
    if (id == "exp") return Forcing::exp_abs(v, rate);
    if (id == "gaussian") return Forcing::gaussian(v, rate);
    return Forcing::odd_gaussian(v, rate);
}

inline ProjectorSource parse_projector(const Node& node, Eigen::Index n) {
    static const std::vector<std::string> kinds{"spectral", "piecewise_spectral", "explicit"};
    ProjectorSource p;
    p.kind = registry_id(node.at("source"), kinds);
    if (p.kind == "explicit") {
        p.matrix = node.at("matrix").matrix();
        expect_square(p.matrix, n, node.at("matrix"));
    }
    if (node.has("at")) p.at = node.at("at").number();
    return p;
}

inline Nonlinearity parse_nonlinearity(const Node& node, Eigen::Index n) {
    const std::string id = registry_id(node.at("type"), nonlinearity_registry_ids());
    const bool analytic = node.has("analytic_derivative") ? node.at("analytic_derivative").boolean() : true;
    Nonlinearity z;
    if (id == "linear") {
        const Operator w = node.at("matrix").matrix();
        expect_square(w, n, node.at("matrix"));
        z = Nonlinearity::linear(w, analytic);
    } else {
        const Node terms = node.at("terms");
        std::vector<Monomial> ms;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const Node t = terms.at(i);
            Monomial m;
            m.component = t.at("component").integer();
            m.coeff = t.has("coeff") ? t.at("coeff").complex() : cplx(1.0, 0.0);
            const Node ex = t.at("exponents");
            for (std::size_t k = 0; k < ex.size(); ++k) m.exponents.push_back(static_cast<int>(ex.at(k).integer()));
            if (t.has("eps_power")) m.eps_power = static_cast<int>(t.at("eps_power").integer());
            if (static_cast<Eigen::Index>(m.exponents.size()) != n)
                throw InputError("dimension mismatch: " + ex.path() + " has " + std::to_string(m.exponents.size()) +
                                 " entries but the problem dimension is " + std::to_string(n));
            ms.push_back(std::move(m));
        }
        z = Nonlinearity::polynomial(n, std::move(ms), analytic);
    }
    if (node.has("radius")) z.set_radius(node.at("radius").positive());
    return z;
}

// FNV-1a over the canonical serialization.
inline std::string problem_hash(const json& j) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace detail

/// Validates a problem document. Errors name the offending field path.
inline ProblemSpec parse_problem_json(const json& doc) {
    using detail::Node;
    const Node root(doc, "");
    if (!doc.is_object()) root.fail("expected a JSON object");
    const long schema = root.at("schema").integer();
    if (schema != 1) root.at("schema").fail("unsupported schema version " + std::to_string(schema) + " (supported: 1)");

    ProblemSpec p;
    p.name = root.has("name") ? root.at("name").string() : "problem";
    const Node gen = root.at("generator");
    static const std::vector<std::string> modes{"general", "schrodinger"};
    const std::string mode = detail::registry_id(gen.at("mode"), modes);
    if (root.has("dimension")) {
        const long n = root.at("dimension").integer();
        if (n < 1 || n > 64) root.at("dimension").fail("must lie in [1, 64]");
        p.n = n;
        detail::dim_source() = "dimension is " + std::to_string(n);
    } else if (mode == "schrodinger") {
        const Operator h0 = gen.at("H0").matrix();
        p.n = h0.rows();
        detail::dim_source() = "generator.H0 is " + dims(h0);
    } else {
        root.at("dimension");  // required for general mode
    }
    if (mode == "general") {
        p.generator = Generator::general(detail::parse_operator(gen.at("A"), p.n));
    } else {
        const Operator h0 = gen.at("H0").matrix();
        detail::expect_square(h0, p.n, gen.at("H0"));
        p.generator = Generator::schrodinger(h0, detail::parse_operator(gen.at("V"), p.n));
    }

    p.forcing = root.has("forcing") ? detail::parse_forcing(root.at("forcing"), p.n) : Forcing::zero(p.n);
    const Node proj = root.at("projectors");
    p.plus = detail::parse_projector(proj.at("plus"), p.n);
    p.minus = detail::parse_projector(proj.at("minus"), p.n);

    p.c = Vector::Zero(p.n);
    if (root.has("c")) {
        p.c = root.at("c").vector();
        detail::expect_len(p.c, p.n, root.at("c"));
    }

    if (root.has("tolerances")) {
        const Node t = root.at("tolerances");
        for (const auto& [key, val] : t.raw().items()) {
            const Node v = t.at(key);
            auto& tol = p.tol;
            std::map<std::string, double*> fields{{"tol_rank", &tol.tol_rank}, {"tol_solve", &tol.tol_solve},
                                                  {"tail_tol", &tol.tail_tol}, {"tol_fix", &tol.tol_fix},
                                                  {"tol_suff", &tol.tol_suff}, {"tol_margin", &tol.tol_margin},
                                                  {"tol_root", &tol.tol_root}, {"tol_jump", &tol.tol_jump}};
            const auto it = fields.find(key);
            if (it == fields.end()) v.fail("unknown tolerance");
            *it->second = v.positive();
        }
        if (p.tol.tol_rank >= 1.0) t.at("tol_rank").fail("must be < 1");
    }
    if (root.has("grid")) {
        const Node g = root.at("grid");
        if (g.has("t_cut")) p.grid.t_cut = g.at("t_cut").positive();
        if (g.has("h")) p.grid.h = g.at("h").positive();
        if (g.has("nodes_per_unit")) {
            p.grid.nodes_per_unit = static_cast<int>(g.at("nodes_per_unit").integer());
            if (p.grid.nodes_per_unit < 4) g.at("nodes_per_unit").fail("must be >= 4");
        }
    }

    if (root.has("nonlinearity")) {
        const Node nl = root.at("nonlinearity");
        NonlinearSpec s;
        s.Z = detail::parse_nonlinearity(nl, p.n);
        if (nl.has("eps")) s.eps = nl.at("eps").number();
        if (nl.has("eps_max")) s.eps_max = nl.at("eps_max").positive();
        if (nl.has("max_iter")) s.max_iter = static_cast<int>(nl.at("max_iter").integer());
        if (s.eps < 0.0 || s.eps > s.eps_max) nl.at("eps").fail("must lie in [0, eps_max]");
        s.c_init = Vector::Zero(p.n);
        if (nl.has("c_init")) {
            s.c_init = nl.at("c_init").vector();
            detail::expect_len(s.c_init, p.n, nl.at("c_init"));
        }
        if (nl.has("scheme")) {
            static const std::vector<std::string> schemes{"lagged", "updated"};
            s.scheme = detail::registry_id(nl.at("scheme"), schemes);
        }
        p.nonlinear = std::move(s);
    }

    if (root.has("output")) {
        const Node o = root.at("output");
        if (o.has("dir")) p.out_dir = o.at("dir").string();
        if (o.has("format")) {
            static const std::vector<std::string> formats{"csv", "json"};
            p.format = detail::registry_id(o.at("format"), formats);
        }
    }
    p.hash = detail::problem_hash(doc);
    return p;
}

inline ProblemSpec parse_problem(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open problem file " + path);
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::parse_error& e) {
        throw InputError("problem file " + path + " is not valid JSON: " + e.what());
    }
    return parse_problem_json(doc);
}

}  // namespace dgreen
