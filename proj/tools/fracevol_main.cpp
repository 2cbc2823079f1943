#include "CLI11.hpp"

#include "fracevol/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mild solutions of impulsive fractional evolution systems"};
    app.require_subcommand(1);

    fracevol::cli::RunConfig cfg;
    auto add_common = [&](CLI::App* sub, bool needs_problem) {
        if (needs_problem)
            sub->add_option("--problem", cfg.problem_path, "problem document (JSON)");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--tol", cfg.tol, "Picard stopping tolerance");
        sub->add_option("--max-iter", cfg.max_iter, "Picard iteration cap");
        sub->add_option("--mesh-nodes", cfg.mesh_nodes, "nodes per solve interval");
        sub->add_option("--grading", cfg.grading, "mesh grading exponent");
        sub->add_option("--modes", cfg.modes, "spectral mode count override");
        sub->add_option("--physical-grid", cfg.physical_grid,
                        "emit point values on a grid over (0, pi) instead of coefficients");
    };

    add_common(app.add_subcommand("solve", "solve a problem and write artifacts"), true);
    add_common(app.add_subcommand("check", "evaluate the contraction certificate"), true);
    add_common(app.add_subcommand("verify-identities",
                                  "run the closed-form identity suite"), false);
    add_common(app.add_subcommand("reproduce-example",
                                  "run the built-in example end to end"), false);

    CLI11_PARSE(app, argc, argv);
    cfg.command = app.get_subcommands().front()->get_name();
    return fracevol::cli::run(cfg);
}
