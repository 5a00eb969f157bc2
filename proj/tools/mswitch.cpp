#include "mswitch/commands.hpp"
#include "mswitch/config.hpp"

#include "CLI11.hpp"

#include <iostream>

using namespace mswitch;

int main(int argc, char** argv)
{
    CLI::App app{"Finite-horizon optimal switching: validate, solve, simulate, report"};
    app.require_subcommand(1);

    std::string config_path;
    std::string engine;
    std::string strategy = "optimal";
    std::string value_path;
    Overrides o;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    double tol = 0.0;
    std::string out;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "Output directory (overrides [output] directory)");
    };

    auto* validate = app.add_subcommand("validate", "Check the cost-structure assumptions");
    add_common(validate);

    auto* solve = app.add_subcommand("solve", "Compute value fields");
    add_common(solve);
    solve->add_option("--engine", engine, "lattice, pde or both")->check(CLI::IsMember({"lattice", "pde", "both"}));
    solve->add_option("--tol", tol, "Fixed-point tolerance");
    solve->add_flag("--force", o.force, "Run even when validation fails");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation of a strategy");
    add_common(simulate);
    simulate->add_option("--paths", paths, "Number of paths");
    simulate->add_option("--seed", seed, "RNG seed");
    simulate->add_option("--strategy", strategy, "optimal, random:N, never, timed:..., threshold:...");
    simulate->add_option("--value", value_path, "Value field file (default: from the output directory)");
    simulate->add_flag("--force", o.force, "Run even when validation fails");

    auto* echo = app.add_subcommand("echo", "Print the canonical form of a configuration");
    add_common(echo);

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Summarise a run directory");
    report->add_option("dir", report_dir, "Run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (report->parsed()) {
            return cmd_report(report_dir, std::cout);
        }
        RunConfig c = load_config(config_path);
        if (!out.empty()) o.out = out;
        if (!engine.empty()) o.engine = parse_engine(engine);
        if (simulate->count("--paths")) o.paths = paths;
        if (simulate->count("--seed")) o.seed = seed;
        if (solve->count("--tol")) o.tol = tol;
        apply(o, c);

        if (echo->parsed()) {
            std::cout << c.to_text();
            return exit_code::ok;
        }
        if (validate->parsed()) {
            return cmd_validate(c, std::cout);
        }
        if (solve->parsed()) {
            return cmd_solve(c, o.force, std::cout);
        }
        return cmd_simulate(c, o.force, strategy, value_path, std::cout);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return exit_code::error;
    }
}
