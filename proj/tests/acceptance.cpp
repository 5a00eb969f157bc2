// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "oracle.hpp"

#include "mswitch/commands.hpp"
#include "mswitch/config.hpp"
#include "mswitch/lattice.hpp"
#include "mswitch/pde.hpp"
#include "mswitch/strategy.hpp"
#include "mswitch/tabulated.hpp"
#include "mswitch/text.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

using namespace mswitch;
namespace fs = std::filesystem;

namespace {

const fs::path config_dir = MSWITCH_CONFIG_DIR;

RunConfig config(const std::string& name)
{
    return load_config((config_dir / (name + ".ini")).string());
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "mswitch_acceptance" / name;
    fs::remove_all(dir);
    return dir;
}

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what)
    {
        if (!cond) {
            ok = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

std::string fmt(double v) { return format_double(v); }

double sup_abs_minus(const ValueField& v, std::size_t mode, std::size_t n, double want)
{
    double worst = 0.0;
    for (double x : v.slice(mode, n)) {
        worst = std::max(worst, std::abs(x - want));
    }
    return worst;
}

// Solved benchmark shared by A2..A5.
struct Benchmark {
    RunConfig cfg = config("benchmark");
    TabulatedProblem tab{cfg.problem, cfg.grid};
    ValueField lattice;
    ValueField pde;
    double lattice_x0 = 0.0;
    double pde_x0 = 0.0;
    double complementarity = 0.0;

    Benchmark()
    {
        const auto& p = cfg.problem;
        lattice = solve_fixed_point(build_chain(p, cfg.grid), p, tab).field;
        const auto gen = assemble(p, cfg.grid);
        pde = solve_system(p, gen, tab).field;
        complementarity = complementarity_residual(gen, tab, pde);
        lattice_x0 = lattice.interpolate(0, 0, p.x0);
        pde_x0 = pde.interpolate(0, 0, p.x0);
    }
};

void a1(Outcome& o)
{
    const auto c = config("benchmark");
    const auto& p = c.problem;
    const TabulatedProblem tab(p, c.grid);
    const auto res = solve_n_switch(build_chain(p, c.grid), p, tab, 50);
    double worst_drop = 0.0;
    std::size_t settled = 0;
    double last = INFINITY;
    for (std::size_t l = 1; l < res.levels.size(); ++l) {
        double sup = 0.0;
        for (std::size_t i = 0; i < p.mode_count; ++i) {
            for (std::size_t n = 0; n <= c.grid.steps; ++n) {
                const auto a = res.levels[l - 1].slice(i, n);
                const auto b = res.levels[l].slice(i, n);
                for (std::size_t k = 0; k < a.size(); ++k) {
                    worst_drop = std::min(worst_drop, b[k] - a[k]);
                    sup = std::max(sup, std::abs(b[k] - a[k]));
                }
            }
        }
        last = sup;
        if (sup < 1e-8) {
            settled = l;
            break;
        }
    }
    o.require(worst_drop >= -1e-12, "levels non-decreasing within 1e-12");
    o.require(settled > 0 && settled <= 50, "sup increment below 1e-8 within 50 levels");
    o.detail << "levels=" << settled << " last_sup_increment=" << fmt(last) << " min_increment=" << fmt(worst_drop);
}

void a2(Outcome& o, const Benchmark& b)
{
    const double lv = obstacle_violation(b.lattice, b.tab);
    const double pv = obstacle_violation(b.pde, b.tab);
    o.require(lv <= 1e-9, "lattice obstacle within 1e-9");
    o.require(pv <= 1e-8, "PDE obstacle within 1e-8");
    o.require(terminal_sup(b.lattice) == 0.0 && terminal_sup(b.pde) == 0.0, "terminal slice exactly 0");
    o.detail << "lattice_violation=" << fmt(lv) << " pde_violation=" << fmt(pv)
             << " pde_complementarity=" << fmt(b.complementarity);
}

void a3(Outcome& o, const Benchmark& b)
{
    const double base = std::abs(b.lattice_x0 - b.pde_x0) / std::abs(b.lattice_x0);
    auto c = b.cfg;
    c.grid.steps *= 2;
    c.grid.axes[0].nodes = 2 * c.grid.axes[0].nodes - 1;
    const auto& p = c.problem;
    const TabulatedProblem tab(p, c.grid);
    const double lat = solve_fixed_point(build_chain(p, c.grid), p, tab).field.interpolate(0, 0, p.x0);
    const double pde = solve_system(p, assemble(p, c.grid), tab).field.interpolate(0, 0, p.x0);
    const double halved = std::abs(lat - pde) / std::abs(lat);
    o.require(base <= 0.01, "base grid within 1%");
    o.require(halved <= 0.005, "halved grid within 0.5%");
    o.detail << "base: lattice=" << fmt(b.lattice_x0) << " pde=" << fmt(b.pde_x0) << " rel=" << fmt(base)
             << "; halved: lattice=" << fmt(lat) << " pde=" << fmt(pde) << " rel=" << fmt(halved);
}

StrategyStats a4(Outcome& o, const Benchmark& b)
{
    const auto pol = extract_policy(b.lattice, b.tab, b.cfg.solver.policy_tol);
    const auto st = simulate(b.cfg.problem, pol, {.path_count = 100000, .seed = b.cfg.simulate.seed});
    const double gap = std::abs(st.mean_J - b.lattice_x0);
    o.require(st.completed == 100000, "every path completed");
    o.require(gap <= 3.0 * st.std_error, "|mean J - v| <= 3 SE");
    o.detail << "value=" << fmt(b.lattice_x0) << " mean_J=" << fmt(st.mean_J) << " SE=" << fmt(st.std_error)
             << " z=" << fmt((st.mean_J - b.lattice_x0) / st.std_error);
    return st;
}

void a5(Outcome& o, const Benchmark& b)
{
    const auto& p = b.cfg.problem;
    const std::uint64_t seed = b.cfg.simulate.seed;
    const auto strategies = random_threshold_strategies(p, b.cfg.grid, 100, seed);
    std::size_t within = 0;
    double worst_z = -INFINITY;
    double best_mean = -INFINITY;
    for (std::size_t k = 0; k < strategies.size(); ++k) {
        const SimulationOptions so{.path_count = 10000, .seed = path_seed(seed, 1000003 + k)};
        const auto st = simulate(p, b.cfg.grid, strategies[k], so);
        if (st.mean_J <= b.lattice_x0 + 3.0 * st.std_error) {
            ++within;
        }
        best_mean = std::max(best_mean, st.mean_J);
        worst_z = std::max(worst_z, (st.mean_J - b.lattice_x0) / st.std_error);
    }
    o.require(within == strategies.size(), "every strategy within v + 3 SE");
    o.detail << within << "/" << strategies.size() << " within bound, best mean_J=" << fmt(best_mean)
             << " worst z=" << fmt(worst_z);
}

void a6(Outcome& o)
{
    {
        const auto c = config("constant");
        const auto& p = c.problem;
        const TabulatedProblem tab(p, c.grid);
        const double want = 1.5 * p.horizon;
        const double lat = sup_abs_minus(solve_fixed_point(build_chain(p, c.grid), p, tab).field, 0, 0, want);
        const double pde = sup_abs_minus(solve_system(p, assemble(p, c.grid), tab).field, 0, 0, want);
        o.require(lat <= 1e-8 && pde <= 1e-8, "m=1 constant profit gives cT");
        o.detail << "cT: lattice_err=" << fmt(lat) << " pde_err=" << fmt(pde) << "; ";
    }
    {
        const auto c = config("no_switch");
        const auto& p = c.problem;
        const TabulatedProblem tab(p, c.grid);
        const auto lat = solve_fixed_point(build_chain(p, c.grid), p, tab).field;
        const auto pde = solve_system(p, assemble(p, c.grid), tab).field;
        double err = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            const double want = static_cast<double>(i + 1) * p.horizon;
            err = std::max({err, sup_abs_minus(lat, i, 0, want), sup_abs_minus(pde, i, 0, want)});
        }
        // exhaustive enumeration on a coarse lattice of the same problem
        auto coarse = c.grid;
        coarse.steps = 6;
        coarse.axes[0].nodes = 9;
        const auto chain = build_chain(p, coarse);
        const oracle::TreeEnumeration enumeration(chain, p);
        double oracle_err = 0.0;
        for (std::size_t node = 0; node < coarse.node_count(); ++node) {
            oracle_err = std::max({oracle_err, std::abs(enumeration.value(0, node, 0) - 1.0),
                                   std::abs(enumeration.value(0, node, 1) - 2.0)});
        }
        o.require(err <= 1e-8, "psi=1,2 with g=10 gives v=1,2 on both engines");
        o.require(oracle_err <= 1e-8, "enumeration oracle gives 1,2");
        o.detail << "no-switch: engine_err=" << fmt(err) << " oracle_err=" << fmt(oracle_err);
    }
}

void a7(Outcome& o)
{
    const auto c = config("symmetric");
    const auto& p = c.problem;
    const TabulatedProblem tab(p, c.grid);
    const auto lat = solve_fixed_point(build_chain(p, c.grid), p, tab).field;
    const auto pde = solve_system(p, assemble(p, c.grid), tab).field;
    double dl = 0.0;
    double dp = 0.0;
    for (std::size_t n = 0; n <= c.grid.steps; ++n) {
        for (std::size_t k = 0; k < c.grid.node_count(); ++k) {
            dl = std::max(dl, std::abs(lat.at(0, n, k) - lat.at(1, n, k)));
            dp = std::max(dp, std::abs(pde.at(0, n, k) - pde.at(1, n, k)));
        }
    }
    o.require(dl <= 1e-12, "lattice modes equal to 1e-12");
    o.require(dp <= c.solver.tol, "PDE modes equal to solver tolerance");
    o.detail << "lattice_sup_diff=" << fmt(dl) << " pde_sup_diff=" << fmt(dp) << " (tol " << fmt(c.solver.tol) << ")";
}

int validate_exit(const std::string& name)
{
    auto c = config(name);
    c.output.directory = scratch("validate_" + name).string();
    std::ostringstream log;
    return cmd_validate(c, log);
}

void a8(Outcome& o)
{
    const int cycle = validate_exit("zero_cycle");
    const int pair = validate_exit("zero_pair");
    const int negative = validate_exit("negative_cost");
    const auto neg = config("negative_cost");
    const double g12_at_T = neg.problem.switch_cost(1, 2, neg.problem.horizon, neg.problem.x0);
    o.require(cycle == exit_code::validation, "zero-sum 3-cycle rejected with exit 2");
    o.require(pair == exit_code::validation, "g12 + g21 = 0 rejected with exit 2");
    o.require(negative == exit_code::ok, "negative cost vanishing at T accepted");
    o.require(g12_at_T == 0.0, "negative cost is 0 at T");
    o.detail << "zero_cycle exit=" << cycle << " zero_pair exit=" << pair << " negative_cost exit=" << negative;
}

void a9(Outcome& o)
{
    auto c = config("negative_cost");
    const auto& p = c.problem;
    double engine_err = 0.0;
    {
        const TabulatedProblem tab(p, c.grid);
        const auto lat = solve_fixed_point(build_chain(p, c.grid), p, tab).field;
        const auto pde = solve_system(p, assemble(p, c.grid), tab).field;
        engine_err = std::max({sup_abs_minus(lat, 0, 0, 0.5), sup_abs_minus(lat, 1, 0, 0.0),
                               sup_abs_minus(pde, 0, 0, 0.5), sup_abs_minus(pde, 1, 0, 0.0)});

        const auto pol = extract_policy(lat, tab, c.solver.policy_tol);
        bool starts = true;
        for (std::size_t k = 0; k < c.grid.node_count(); ++k) {
            starts = starts && pol.decision(0, k, 1) == 2;
        }
        const auto strat = PolicyStrategy(pol);
        bool once = true;
        for (std::size_t idx = 0; idx < 2000; ++idx) {
            const auto rec = simulate_path(p, c.grid, strat, c.simulate.seed, idx, 1, false);
            once = once && rec.switches.size() == 1 && rec.switches[0].time == 0.0 && rec.switches[0].from == 1 &&
                   rec.switches[0].to == 2;
        }
        o.require(starts, "policy switches 1->2 at t=0 on every node");
        o.require(once, "simulated paths switch exactly once, 1->2 at t=0");
    }
    auto coarse = c.grid;
    coarse.steps = 6;
    coarse.axes[0].nodes = 7;
    const auto chain = build_chain(p, coarse);
    const TabulatedProblem ctab(p, coarse);
    const auto small = solve_fixed_point(chain, p, ctab).field;
    const oracle::TreeEnumeration enumeration(chain, p);
    double oracle_err = 0.0;
    for (std::size_t node = 0; node < coarse.node_count(); ++node) {
        const double o1 = enumeration.value(0, node, 0);
        const double o2 = enumeration.value(0, node, 1);
        oracle_err = std::max({oracle_err, std::abs(o1 - 0.5), std::abs(o2),
                               std::abs(small.at(0, 0, node) - o1), std::abs(small.at(1, 0, node) - o2)});
    }
    o.require(engine_err <= 1e-8, "v1=0.5, v2=0 on both engines");
    o.require(oracle_err <= 1e-8, "lattice matches the enumeration oracle");
    o.detail << "engine_err=" << fmt(engine_err) << " oracle_err=" << fmt(oracle_err);
}

void a10(Outcome& o, const StrategyStats& benchmark_stats)
{
    std::size_t trips = benchmark_stats.guard_trips;
    std::size_t paths = benchmark_stats.path_count;
    for (const char* name : {"constant", "no_switch", "symmetric", "negative_cost"}) {
        const auto c = config(name);
        const auto& p = c.problem;
        o.require(validate(p, grid_samples(c.grid)).passed(), std::string(name) + " passes validation");
        const TabulatedProblem tab(p, c.grid);
        const auto v = solve_fixed_point(build_chain(p, c.grid), p, tab).field;
        const auto st = simulate(p, extract_policy(v, tab, c.solver.policy_tol),
                                 {.path_count = 100000, .seed = c.simulate.seed});
        trips += st.guard_trips;
        paths += st.path_count;
    }
    o.require(trips == 0, "no guard trips on passing configs");

    auto bad = config("loop");
    bad.output.directory = scratch("loop").string();
    std::ostringstream log;
    const int unforced = cmd_solve(bad, false, log);
    const int solved = cmd_solve(bad, true, log);
    const int simulated = cmd_simulate(bad, true, "optimal", "", log);
    const auto partial = ValueField::load((fs::path(bad.output.directory) / "value_lattice.csv").string());
    o.require(unforced == exit_code::validation, "corrupted config refused without --force");
    o.require(simulated == exit_code::guard, "forced corrupted config trips the guard");
    o.detail << "passing configs: " << paths << " paths, " << trips << " trips; forced loop config: solve exit="
             << solved << " (" << partial.scheme() << ") simulate exit=" << simulated;
}

}  // namespace

int main()
{
    int failures = 0;
    auto run = [&](const std::string& id, const std::function<void(Outcome&)>& body) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            body(o);
        } catch (const std::exception& ex) {
            o.ok = false;
            o.detail << "[exception: " << ex.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << id << (o.ok ? " PASS " : " FAIL ") << o.detail.str() << " (" << fmt(std::round(secs * 10) / 10)
                  << " s)" << std::endl;
        failures += o.ok ? 0 : 1;
    };

    std::unique_ptr<Benchmark> bench;
    StrategyStats a4_stats;
    try {
        bench = std::make_unique<Benchmark>();
    } catch (const std::exception& ex) {
        std::cout << "benchmark solve failed: " << ex.what() << std::endl;
    }
    auto with_bench = [&](auto f) {
        return [&, f](Outcome& o) {
            if (!bench) throw std::runtime_error("benchmark not solved");
            f(o, *bench);
        };
    };

    run("A1", a1);
    run("A2", with_bench([](Outcome& o, const Benchmark& b) { a2(o, b); }));
    run("A3", with_bench([](Outcome& o, const Benchmark& b) { a3(o, b); }));
    run("A4", with_bench([&](Outcome& o, const Benchmark& b) { a4_stats = a4(o, b); }));
    run("A5", with_bench([](Outcome& o, const Benchmark& b) { a5(o, b); }));
    run("A6", a6);
    run("A7", a7);
    run("A8", a8);
    run("A9", a9);
    run("A10", [&](Outcome& o) {
        if (a4_stats.path_count == 0) throw std::runtime_error("A4 simulation did not run");
        a10(o, a4_stats);
    });
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
