// Batch front end: dgreen <command> --problem <file> [options]

#include "dgreen/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Bounded solutions of linear and weakly nonlinear evolution equations on the whole line"};
    std::string command, problem;
    dgreen::RunOptions opt;
    double t_cut = 0.0, step = 0.0, eps = -1.0;
    int max_iter = 0;
    app.add_option("command", command, "check-dichotomy | solvability | solve-linear | solve-nonlinear | oracle-compare | regime")
        ->required();
    app.add_option("--problem", problem, "problem file (JSON, schema 1)")->required();
    app.add_option("--out", opt.out_dir, "directory for trajectories and the JSON report");
    app.add_option("--t-cut", t_cut, "half-line truncation");
    app.add_option("--step", step, "propagator step h");
    app.add_option("--eps", eps, "perturbation parameter");
    app.add_option("--max-iter", max_iter, "iteration cap for solve-nonlinear");
    app.add_option("--workers", opt.workers, "threads for time sampling")->check(CLI::PositiveNumber);
    app.add_option("--format", opt.format, "trajectory format")->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    if (app.count("--t-cut")) opt.t_cut = t_cut;
    if (app.count("--step")) opt.step = step;
    if (app.count("--eps")) opt.eps = eps;
    if (app.count("--max-iter")) opt.max_iter = max_iter;

    try {
        dgreen::ProblemSpec spec = dgreen::parse_problem(problem);
        const dgreen::Report rep = dgreen::run(command, spec, opt);
        for (const auto& l : rep.lines) std::cout << l << '\n';
        const std::string out = opt.out_dir.empty() ? spec.out_dir : opt.out_dir;
        if (!out.empty()) {
            std::filesystem::create_directories(out);
            const auto path = std::filesystem::path(out) / (spec.name + "_" + command + ".json");
            std::ofstream(path) << rep.doc.dump(2) << '\n';
        }
        return rep.exit_code;
    } catch (const dgreen::InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const dgreen::MathError& e) {
        std::cerr << "math failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
