#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mswitch/commands.hpp"
#include "mswitch/config.hpp"
#include "mswitch/grid.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mswitch;
namespace fs = std::filesystem;

namespace {

const fs::path config_dir = MSWITCH_CONFIG_DIR;

// Empty scratch directory under the system temp dir.
fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "mswitch_test_config" / name;
    fs::remove_all(dir);
    return dir;
}

RunConfig load(const std::string& name, const fs::path& out)
{
    RunConfig c = load_config((config_dir / (name + ".ini")).string());
    c.output.directory = out.string();
    return c;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::size_t error_line(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    FAIL("expected a config error");
    return 0;
}

const char* minimal = R"([problem]
horizon = 1
state_dim = 1
modes = 2
vol.1.1 = "0.3"
profit.1 = "x1"
profit.2 = "0"
cost.1.2 = "0.5"
cost.2.1 = "0.5"
x0 = 0

[grid]
steps = 10
x_lo = -1
x_hi = 1
nodes = 11
)";

}  // namespace

TEST_CASE("every shipped config survives a print and re-parse round trip")
{
    std::size_t seen = 0;
    for (const auto& entry : fs::directory_iterator(config_dir)) {
        if (entry.path().extension() != ".ini") continue;
        ++seen;
        const RunConfig a = load_config(entry.path().string());
        const RunConfig b = parse_config(a.to_text());
        CHECK_MESSAGE(a.to_text() == b.to_text(), entry.path().filename().string());
        CHECK(a.problem.hash() == b.problem.hash());
    }
    CHECK(seen >= 8);
}

TEST_CASE("defaults fill in what the file leaves out")
{
    const RunConfig c = parse_config(minimal);
    CHECK(c.problem.brownian_dim == 1);
    CHECK(c.problem.initial_mode == 1);
    CHECK(c.problem.neg_cost_bound == 0);
    CHECK(c.problem.drift[0].to_string() == "0");
    CHECK(c.grid.horizon == 1.0);
    CHECK(c.solver.engine == Engine::Lattice);
    CHECK(c.solver.tol == 1e-8);
    CHECK(c.solver.max_outer == 50);
    CHECK(c.simulate.paths == 10000);
    CHECK(c.output.directory == "out");
}

TEST_CASE("trailing comments are stripped outside quotes")
{
    std::string text = minimal;
    text.replace(text.find("horizon = 1"), 11, "horizon = 2   # years");
    text.replace(text.find("\"x1\""), 4, "\"x1\" ; per unit time");
    text += "[output]\ndirectory = \"a #b;c\"\n";
    const RunConfig c = parse_config(text);
    CHECK(c.problem.horizon == 2.0);
    CHECK(c.problem.profit[0].to_string() == "x1");
    CHECK(c.output.directory == "a #b;c");
}

TEST_CASE("config errors carry the offending line")
{
    const std::string base = minimal;
    CHECK(error_line(base + "bogus = 1\n") == 17);
    CHECK(error_line("[problem]\nhorizon = 1\nhorizon = 2\n") == 3);
    CHECK(error_line("# comment\n[nowhere]\n") == 2);
    CHECK(error_line("horizon = 1\n") == 1);
    CHECK(error_line("[problem\n") == 1);
    CHECK(error_line("[problem]\nhorizon\n") == 2);
    CHECK(error_line("[problem]\nhorizon = \"1\n") == 2);
    std::string bad_expr = base;
    bad_expr.replace(bad_expr.find("\"x1\""), 4, "\"x1 +\"");
    CHECK(error_line(bad_expr) == 6);
    std::string bad_nodes = base;
    bad_nodes.replace(bad_nodes.find("nodes = 11"), 10, "nodes = 2");
    CHECK(error_line(bad_nodes) == 16);
    // a missing required key is not tied to a line
    std::string no_cost = base;
    no_cost.erase(no_cost.find("cost.2.1"), std::string("cost.2.1 = \"0.5\"\n").size());
    CHECK(error_line(no_cost) == 0);
    CHECK_THROWS_WITH_AS(parse_config(base + "[solver]\nengine = magic\n"), doctest::Contains("line 18"),
                         ConfigError);
}

TEST_CASE("validate exit codes follow the cost assumptions")
{
    std::ostringstream log;
    CHECK(cmd_validate(load("benchmark", scratch("v_bench")), log) == exit_code::ok);
    CHECK(cmd_validate(load("negative_cost", scratch("v_neg")), log) == exit_code::ok);
    CHECK(cmd_validate(load("zero_pair", scratch("v_pair")), log) == exit_code::validation);
    const auto cycle_dir = scratch("v_cycle");
    CHECK(cmd_validate(load("zero_cycle", cycle_dir), log) == exit_code::validation);
    CHECK(cmd_validate(load("loop", scratch("v_loop")), log) == exit_code::validation);
    CHECK(fs::exists(cycle_dir / "validation.txt"));
    CHECK(log.str().find("no_free_loop") != std::string::npos);
}

TEST_CASE("solving the constant problem writes c T on both engines")
{
    const auto dir = scratch("constant");
    const auto c = load("constant", dir);
    std::ostringstream log;
    REQUIRE(cmd_solve(c, false, log) == exit_code::ok);
    for (const char* engine : {"lattice", "pde"}) {
        const auto v = ValueField::load((dir / (std::string("value_") + engine + ".csv")).string());
        CHECK(v.problem_hash() == c.problem.hash());
        for (std::size_t node = 0; node < v.node_count(); ++node) {
            CHECK(std::abs(v.at(0, 0, node) - 3.0) <= 1e-8);
        }
    }
    CHECK(fs::exists(dir / "discrepancy.txt"));
    CHECK(fs::exists(dir / "regions_lattice_mode1.csv"));
    CHECK(fs::exists(dir / "surface_pde_mode1.csv"));
}

TEST_CASE("negative-cost region map switches out of mode 1 before the horizon")
{
    const auto dir = scratch("negative");
    std::ostringstream log;
    REQUIRE(cmd_solve(load("negative_cost", dir), false, log) == exit_code::ok);
    CHECK_FALSE(fs::exists(dir / "surface_lattice_mode1.csv"));
    for (const char* engine : {"lattice", "pde"}) {
        std::ifstream in(dir / (std::string("regions_") + engine + "_mode1.csv"));
        std::string line;
        std::vector<std::string> rows;
        while (std::getline(in, line)) {
            if (line[0] != '#') rows.push_back(line);
        }
        REQUIRE(rows.size() == 21);
        CHECK(rows.front() == "2,2,2,2,2,2,2,2,2,2,2");
        CHECK(rows.back() == "0,0,0,0,0,0,0,0,0,0,0");
    }
}

TEST_CASE("simulate refuses a value field from another problem")
{
    const auto dir = scratch("mismatch");
    auto c = load("constant", dir);
    std::ostringstream log;
    REQUIRE(cmd_solve(c, false, log) == exit_code::ok);
    c.problem.profit[0] = Expr::parse("1.6", 1);
    CHECK(cmd_simulate(c, false, "optimal", "", log) == exit_code::error);
    CHECK(log.str().find("was computed for problem") != std::string::npos);
    CHECK(cmd_simulate(load("constant", scratch("empty")), false, "optimal", "", log) == exit_code::error);
}

TEST_CASE("a fixed seed reproduces stats byte for byte")
{
    std::ostringstream log;
    std::string first;
    for (const char* name : {"seed_a", "seed_b"}) {
        const auto dir = scratch(name);
        auto c = load("symmetric", dir);
        c.simulate.paths = 500;
        c.output.formats.push_back("paths");
        REQUIRE(cmd_solve(c, false, log) == exit_code::ok);
        REQUIRE(cmd_simulate(c, false, "optimal", "", log) == exit_code::ok);
        const auto text = slurp(dir / "stats.txt") + slurp(dir / "paths.csv");
        if (first.empty()) {
            first = text;
        } else {
            CHECK(text == first);
        }
    }
}

TEST_CASE("report on an empty directory lists the expected artifacts")
{
    const auto dir = scratch("nothing");
    fs::create_directories(dir);
    std::ostringstream log;
    CHECK(cmd_report(dir.string(), log) == exit_code::error);
    CHECK(log.str().find("trace_lattice.txt") != std::string::npos);
    CHECK(log.str().find("dominance.txt") != std::string::npos);
}

TEST_CASE("a complete run passes every criterion the report can judge")
{
    const auto dir = scratch("full");
    auto c = load("symmetric", dir);
    c.simulate.paths = 2000;
    std::ostringstream log;
    REQUIRE(cmd_solve(c, false, log) == exit_code::ok);
    REQUIRE(cmd_simulate(c, false, "optimal", "", log) == exit_code::ok);
    c.simulate.paths = 500;
    REQUIRE(cmd_simulate(c, false, "random:5", "", log) == exit_code::ok);
    REQUIRE(cmd_report(dir.string(), log) == exit_code::ok);
    const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(j["hash_consistent"] == true);
    CHECK(j["problem_hash"] == c.problem.hash());
    for (const char* id : {"A1", "A2", "A3", "A4", "A5", "A10"}) {
        CHECK_MESSAGE(j["criteria"][id]["status"] == "pass", id);
    }
    for (const char* id : {"A6", "A7", "A8", "A9"}) {
        CHECK(j["criteria"][id]["status"] == "not-run");
    }
}

TEST_CASE("a forced run on a looping problem stops with the loop and guard codes")
{
    const auto dir = scratch("loop");
    const auto c = load("loop", dir);
    std::ostringstream log;
    CHECK(cmd_solve(c, false, log) == exit_code::validation);
    CHECK(cmd_solve(c, true, log) == exit_code::nonconvergence);
    CHECK(log.str().find("WARNING") != std::string::npos);
    CHECK(ValueField::load((dir / "value_lattice.csv").string()).scheme() == "lattice-partial");
    CHECK(cmd_simulate(c, true, "optimal", "", log) == exit_code::guard);
    CHECK(cmd_report(dir.string(), log) == exit_code::ok);
    const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(j["criteria"]["A1"]["status"] == "fail");
    CHECK(j["criteria"]["A3"]["status"] == "not-run");
    CHECK(j["criteria"]["A10"]["status"] == "pass");
}

TEST_CASE("report flags artifacts from different problems")
{
    const auto dir = scratch("mixed");
    std::ostringstream log;
    REQUIRE(cmd_solve(load("constant", dir), false, log) == exit_code::ok);
    auto other = load("negative_cost", dir);
    other.solver.engine = Engine::Lattice;
    REQUIRE(cmd_validate(other, log) == exit_code::ok);
    CHECK(cmd_report(dir.string(), log) == exit_code::error);
    CHECK(nlohmann::json::parse(slurp(dir / "summary.json"))["hash_consistent"] == false);
}

TEST_CASE("overrides replace config values and reject nonsense")
{
    RunConfig c = parse_config(minimal);
    Overrides o;
    o.out = "elsewhere";
    o.engine = Engine::Both;
    o.paths = 5;
    o.seed = 9;
    o.tol = 1e-6;
    apply(o, c);
    CHECK(c.output.directory == "elsewhere");
    CHECK(c.solver.engine == Engine::Both);
    CHECK(c.simulate.paths == 5);
    CHECK(c.simulate.seed == 9);
    CHECK(c.solver.tol == 1e-6);
    Overrides zero;
    zero.paths = 0;
    CHECK_THROWS(apply(zero, c));
    CHECK(parse_engine("pde") == Engine::Pde);
    CHECK_THROWS(parse_engine("fem"));
}
