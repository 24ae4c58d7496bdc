#include "common.hpp"

#include "dgreen/io.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace dgreen;
using namespace dgreen::testing;

namespace {

json minimal() {
    return json::parse(R"({
      "schema": 1,
      "dimension": 1,
      "generator": {"mode": "general", "A": {"type": "constant", "matrix": [[-1]]}},
      "forcing": {"type": "exp", "vector": [1]},
      "projectors": {"plus": {"source": "spectral"}, "minus": {"source": "spectral"}}
    })");
}

std::string error_of(const json& doc) {
    try {
        parse_problem_json(doc);
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST(ParseProblem, Minimal) {
    const ProblemSpec p = parse_problem_json(minimal());
    EXPECT_EQ(p.n, 1);
    EXPECT_EQ(p.forcing.id(), "exp");
    EXPECT_EQ(p.plus.kind, "spectral");
    EXPECT_FALSE(p.nonlinear.has_value());
    EXPECT_DOUBLE_EQ(p.tol.tol_rank, 1e-10);
    EXPECT_EQ(p.hash.size(), 16u);
}

TEST(ParseProblem, ShippedProblemsParse) {
    for (const char* name : {"scalar_stable", "saddle_2d", "homoclinic_scalar", "growout_gaussian", "growout_odd",
                             "unitary_schrodinger", "nonlinear_2d", "nonlinear_scalar"}) {
        EXPECT_NO_THROW(parse_problem(problem_path(name))) << name;
    }
    const ProblemSpec s = parse_problem(problem_path("saddle_2d"));
    EXPECT_LT((s.generator(0.0) - diag({-1.0, 1.0})).norm(), 1e-15);
    const ProblemSpec u = parse_problem(problem_path("unitary_schrodinger"));
    EXPECT_EQ(u.n, 2);
    EXPECT_EQ(u.generator.mode(), Generator::Mode::Schrodinger);
}

TEST(ParseProblem, ComplexEntries) {
    json doc = minimal();
    doc["forcing"]["vector"] = json::parse("[[0.5, -2]]");
    const ProblemSpec p = parse_problem_json(doc);
    EXPECT_EQ(p.forcing(0.0)(0), cplx(0.5, -2.0));
}

TEST(ParseProblem, UnknownRegistryIdListsValid) {
    json doc = minimal();
    doc["forcing"]["type"] = "expp";
    const std::string e = error_of(doc);
    EXPECT_TRUE(contains(e, "\"expp\"")) << e;
    EXPECT_TRUE(contains(e, "forcing.type")) << e;
    EXPECT_TRUE(contains(e, "gaussian")) << e;
}

TEST(ParseProblem, DimensionMismatchNamesBoth) {
    const json doc = json::parse(R"({
      "schema": 1,
      "generator": {"mode": "schrodinger", "H0": [[1, 0], [0, 2]], "V": {"type": "constant", "matrix": [[0, 0], [0, 0]]}},
      "forcing": {"type": "gaussian", "vector": [1, 0, 0]},
      "projectors": {"plus": {"source": "spectral"}, "minus": {"source": "spectral"}}
    })");
    const std::string e = error_of(doc);
    EXPECT_TRUE(contains(e, "3")) << e;
    EXPECT_TRUE(contains(e, "2x2")) << e;
    EXPECT_TRUE(contains(e, "forcing.vector")) << e;
}

TEST(ParseProblem, SchemaViolationsCarryPaths) {
    json doc = minimal();
    doc.erase("projectors");
    EXPECT_TRUE(contains(error_of(doc), "projectors"));
    doc = minimal();
    doc["schema"] = 2;
    EXPECT_TRUE(contains(error_of(doc), "schema"));
    doc = minimal();
    doc["tolerances"] = json::parse(R"({"tol_rank": -1})");
    EXPECT_TRUE(contains(error_of(doc), "tolerances.tol_rank"));
    doc = minimal();
    doc["tolerances"] = json::parse(R"({"tol_bogus": 1})");
    EXPECT_TRUE(contains(error_of(doc), "tol_bogus"));
    doc = minimal();
    doc["generator"]["A"]["matrix"] = json::parse("[[1, 2], [3]]");
    EXPECT_FALSE(error_of(doc).empty());
    doc = minimal();
    doc["grid"] = json::parse(R"({"nodes_per_unit": 2})");
    EXPECT_TRUE(contains(error_of(doc), "grid.nodes_per_unit"));
    EXPECT_THROW(parse_problem("/nonexistent/problem.json"), InputError);
}

TEST(ParseProblem, Nonlinearity) {
    json doc = minimal();
    doc["nonlinearity"] = json::parse(R"({"type": "polynomial",
        "terms": [{"component": 0, "coeff": [2, 0], "exponents": [3]}], "eps": 0.02})");
    const ProblemSpec p = parse_problem_json(doc);
    ASSERT_TRUE(p.nonlinear.has_value());
    EXPECT_DOUBLE_EQ(p.nonlinear->eps, 0.02);
    EXPECT_NEAR(std::abs(p.nonlinear->Z(vec({2.0}), 0.0, 0.0)(0) - 16.0), 0.0, 1e-14);
    doc["nonlinearity"]["eps"] = 0.5;
    EXPECT_TRUE(contains(error_of(doc), "nonlinearity.eps"));
    doc["nonlinearity"]["eps"] = 0.01;
    doc["nonlinearity"]["type"] = "cubic";
    EXPECT_TRUE(contains(error_of(doc), "polynomial"));
}

TEST(ParseProblem, HashTracksContent) {
    json doc = minimal();
    const std::string h1 = parse_problem_json(doc).hash;
    EXPECT_EQ(h1, parse_problem_json(doc).hash);
    doc["forcing"]["rate"] = 2.0;
    EXPECT_NE(h1, parse_problem_json(doc).hash);
}

TEST(Pipeline, SolveLinearReport) {
    const Report rep = run("solve-linear", parse_problem(problem_path("scalar_stable")));
    EXPECT_EQ(rep.exit_code, 0);
    EXPECT_LE(rep.doc["jump_err"].get<double>(), 1e-6);
    EXPECT_LE(rep.doc["diff_residual"].get<double>(), 1e-4);
    EXPECT_EQ(rep.doc["regime"], "Classical");
}

TEST(Pipeline, SolvabilityVerdicts) {
    const Report bad = run("solvability", parse_problem(problem_path("growout_gaussian")));
    EXPECT_EQ(bad.exit_code, 0);
    EXPECT_EQ(bad.doc["verdict"], "Pseudosolution");
    EXPECT_GT(bad.doc["residual_norm"].get<double>(), 0.5);
    const Report good = run("solvability", parse_problem(problem_path("growout_odd")));
    EXPECT_EQ(good.doc["verdict"], "Classical");
}

TEST(Pipeline, UnitaryHasNoDichotomy) {
    const Report rep = run("check-dichotomy", parse_problem(problem_path("unitary_schrodinger")));
    EXPECT_EQ(rep.exit_code, 2);
    bool named = false;
    for (const auto& l : rep.lines) named = named || contains(l, "no exponential decay");
    EXPECT_TRUE(named);
}

TEST(Pipeline, Overrides) {
    const ProblemSpec spec = parse_problem(problem_path("scalar_stable"));
    RunOptions opt;
    opt.eps = 0.01;
    EXPECT_THROW(run("solve-linear", spec, opt), InputError);
    RunOptions bad_cut;
    bad_cut.t_cut = -1.0;
    EXPECT_THROW(run("solve-linear", spec, bad_cut), InputError);
    EXPECT_THROW(run("integrate", spec), InputError);
}

TEST(Output, CsvIsDeterministic) {
    const auto s = saddle();
    const GreenSolution sol(s.ctx, Forcing::exp_abs(vec({1.0, cplx(0.0, 1.0)})));
    const auto times = grid_times(*s.ctx, 16);
    std::ostringstream a, b;
    write_csv(a, sample_trajectory(sol, Vector::Zero(2), times, 1));
    write_csv(b, sample_trajectory(sol, Vector::Zero(2), times, 3));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "t,re_x1,re_x2,im_x1,im_x2");
}

TEST(Output, JsonTrajectoryCarriesMeta) {
    Trajectory tr;
    tr.times = {0.0, 1.0};
    tr.values = {vec({1.0}), vec({cplx(0.0, 2.0)})};
    tr.meta.problem_hash = "abc";
    tr.meta.tolerances = {{"tol_rank", 1e-10}};
    const json j = trajectory_json(tr);
    EXPECT_EQ(j["meta"]["problem_hash"], "abc");
    EXPECT_EQ(j["values"][1][0][1].get<double>(), 2.0);
    EXPECT_THROW(write_trajectory("/tmp/x.out", tr, "xml"), InputError);
}
