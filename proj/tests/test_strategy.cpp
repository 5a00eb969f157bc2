#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"

#include "mswitch/lattice.hpp"
#include "mswitch/strategy.hpp"
#include "mswitch/tabulated.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

using namespace mswitch;
using fixtures::grid_1d;
using fixtures::problem_1d;

namespace {

SwitchingPolicy policy_for(const SwitchingProblem& p, const GridSpec& g)
{
    const TabulatedProblem tab(p, g);
    const auto v = solve_fixed_point(build_chain(p, g), p, tab).field;
    return extract_policy(v, tab, 1e-9);
}

SwitchingProblem negative_cost()
{
    return problem_1d(1.0, "0", "0.3", {"0", "0"}, {{"", "-0.5*(1 - t)"}, {"2", ""}}, 0.0, 1);
}

SwitchingProblem loop_problem()
{
    return problem_1d(1.0, "0", "0.3", {"x1", "-x1", "0"},
                      {{"", "1 - t", "3"}, {"1", "", "1 - t"}, {"-2.5*(1 - t)", "1", ""}}, 0.0, 1);
}

}  // namespace

TEST_CASE("prohibitive costs give a policy that never switches")
{
    const auto p = problem_1d(1.0, "0", "0.3", {"1", "2"}, {{"", "10"}, {"10", ""}}, 0.0);
    const auto g = grid_1d(20, 1.0, -1.0, 1.0, 11);
    const auto pol = policy_for(p, g);
    CHECK(pol.switch_count(1) == 0);
    CHECK(pol.switch_count(2) == 0);
}

TEST_CASE("negative-cost policy leaves mode 1 everywhere before the horizon and stays in mode 2")
{
    const auto p = negative_cost();
    const auto g = grid_1d(20, 1.0, -1.0, 1.0, 11);
    const auto pol = policy_for(p, g);
    for (std::size_t n = 0; n < g.steps; ++n) {
        for (std::size_t node = 0; node < g.node_count(); ++node) {
            CHECK(pol.decision(n, node, 1) == 2);
            CHECK(pol.decision(n, node, 2) == 0);
        }
    }
    for (std::size_t node = 0; node < g.node_count(); ++node) {
        CHECK(pol.decision(g.steps, node, 1) == 0);
    }
    const auto st = simulate(p, pol, {.path_count = 500, .seed = 7});
    CHECK(st.guard_trips == 0);
    CHECK(st.switch_histogram.size() == 1);
    CHECK(st.switch_histogram.at(1) == 500);
    CHECK(st.negative_switch_histogram.at(1) == 500);
    CHECK(st.mean_J == 0.5);
    CHECK(st.std_error == 0.0);
}

TEST_CASE("symmetric modes produce mirrored switch regions")
{
    const auto p = problem_1d(1.0, "0", "0.4", {"x1", "-x1"}, {{"", "0.1"}, {"0.1", ""}}, 0.0);
    const auto g = grid_1d(40, 1.0, -2.0, 2.0, 41);
    const auto pol = policy_for(p, g);
    CHECK(pol.switch_count(1) > 0);
    CHECK(pol.switch_count(1) == pol.switch_count(2));
    for (std::size_t n = 0; n <= g.steps; ++n) {
        for (std::size_t node = 0; node < g.node_count(); ++node) {
            const Mode a = pol.decision(n, node, 1);
            const Mode b = pol.decision(n, g.node_count() - 1 - node, 2);
            CHECK(a == (b == 0 ? 0 : 2));
        }
    }
}

TEST_CASE("constant profit gives c T with zero standard error")
{
    const auto p = problem_1d(2.0, "0.1*x1", "0.3*x1", {"1.5"}, {{""}}, 1.0);
    const auto g = grid_1d(50, 2.0, 0.2, 3.0, 57);
    const auto st = simulate(p, g, *parse_strategy("never", p), {.path_count = 300, .seed = 5});
    CHECK(std::abs(st.mean_J - 3.0) <= 1e-12);
    CHECK(st.std_error <= 1e-14);
    CHECK(st.completed == 300);
}

TEST_CASE("identical seeds give bitwise identical statistics")
{
    const auto p = fixtures::benchmark();
    const auto g = fixtures::benchmark_grid();
    const auto pol = policy_for(p, g);
    const auto a = simulate(p, pol, {.path_count = 400, .seed = 42});
    const auto b = simulate(p, pol, {.path_count = 400, .seed = 42});
    const auto c = simulate(p, pol, {.path_count = 400, .seed = 43});
    CHECK(std::memcmp(&a.mean_J, &b.mean_J, sizeof(double)) == 0);
    CHECK(a.to_text() == b.to_text());
    CHECK(a.paths_csv() == b.paths_csv());
    CHECK(a.mean_J != c.mean_J);
}

TEST_CASE("path payoff equals profit minus costs recomputed from the recorded path")
{
    const auto p = fixtures::benchmark();
    const auto g = fixtures::benchmark_grid();
    const auto pol = policy_for(p, g);
    const PolicyStrategy strat(pol);
    const double dt = g.dt();
    std::size_t switched = 0;
    for (std::size_t idx = 0; idx < 50; ++idx) {
        const auto rec = simulate_path(p, g, strat, 9, idx, 1, true);
        REQUIRE(rec.states.size() == g.steps + 1);
        // replay the mode sequence from the switch log
        double profit = 0.0;
        double costs = 0.0;
        Mode mode = p.initial_mode;
        std::size_t next = 0;
        for (std::size_t n = 0; n < g.steps; ++n) {
            const double t = g.time(n);
            while (next < rec.switches.size() && rec.switches[next].time == t) {
                CHECK(rec.switches[next].from == mode);
                costs += p.cost[mode - 1][rec.switches[next].to - 1].eval(t, rec.states[n]);
                mode = rec.switches[next].to;
                ++next;
            }
            profit += p.profit[mode - 1].eval(t, rec.states[n]) * dt;
        }
        CHECK(next == rec.switches.size());
        CHECK(std::abs(rec.profit - profit) <= 1e-12);
        CHECK(std::abs(rec.costs - costs) <= 1e-12);
        CHECK(std::abs(rec.J - (profit - costs)) <= 1e-12);
        switched += rec.switches.empty() ? 0 : 1;
    }
    CHECK(switched > 0);
}

TEST_CASE("deterministic dynamics follow the Euler recursion exactly")
{
    const auto p = problem_1d(1.0, "1", "0", {"x1"}, {{""}}, 2.0);
    const auto g = grid_1d(10, 1.0, 0.0, 5.0, 11);
    const auto rec = simulate_path(p, g, *parse_strategy("never", p), 1, 0, 1, true);
    double want = 0.0;
    for (std::size_t n = 0; n < 10; ++n) {
        want += (2.0 + 0.1 * static_cast<double>(n)) * 0.1;
    }
    CHECK(rec.J == doctest::Approx(want).epsilon(1e-14));
    CHECK(rec.states.back()[0] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("a profitable switching cycle trips the guard")
{
    const auto p = loop_problem();
    const auto g = grid_1d(20, 1.0, -1.0, 1.0, 21);
    const TabulatedProblem tab(p, g);
    try {
        solve_fixed_point(build_chain(p, g), p, tab);
        FAIL("expected a switching loop");
    } catch (const SwitchingLoopError& e) {
        const auto pol = extract_policy(e.field(), tab, 1e-9);
        const auto st = simulate(p, pol, {.path_count = 100, .seed = 11});
        CHECK(st.guard_trips == 100);
        CHECK(st.assumption_suspect);
        CHECK(std::isnan(st.mean_J));
        CHECK(std::isnan(st.per_path.front().second));
    }
}

TEST_CASE("fixed strategies")
{
    const auto p = problem_1d(1.0, "0", "0.3", {"1", "2"}, {{"", "10"}, {"10", ""}}, 0.0);
    const auto g = grid_1d(20, 1.0, -1.0, 1.0, 11);
    const auto never = simulate(p, g, *parse_strategy("never", p), {.path_count = 50, .seed = 1});
    CHECK(never.mean_J == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(never.switch_histogram.at(0) == 50);

    // switching at t = 0 costs 10 and earns 1 extra
    const auto timed = simulate(p, g, *parse_strategy("timed:0>2", p), {.path_count = 50, .seed = 1});
    CHECK(timed.mean_J == doctest::Approx(2.0 - 10.0).epsilon(1e-12));
    CHECK(timed.mean_J < never.mean_J);

    // one switch per decision time: 0>2 then 0.5>1 fires at the first grid time >= 0.5
    const auto rec = simulate_path(p, g, *parse_strategy("timed:0>2,0.5>1", p), 1, 0, 1, false);
    REQUIRE(rec.switches.size() == 2);
    CHECK(rec.switches[1].time == doctest::Approx(0.5));
    CHECK(rec.profit == doctest::Approx(0.5 * 2.0 + 0.5 * 1.0).epsilon(1e-12));

    const auto thr = parse_strategy("threshold:budget=1;1>2@x1>0.2", p);
    const auto r2 = simulate_path(p, g, *thr, 3, 0, 1, true);
    CHECK(r2.switches.size() <= 1);
    for (std::size_t n = 0; n < g.steps; ++n) {
        const bool crossed = r2.states[n][0] > 0.2;
        if (crossed) {
            REQUIRE(r2.switches.size() == 1);
            CHECK(r2.switches[0].time <= g.time(n) + 1e-12);
            break;
        }
    }
}

TEST_CASE("strategy strings are checked")
{
    const auto p = fixtures::benchmark();
    CHECK_THROWS_AS(parse_strategy("sometimes", p), StrategyFormatError);
    CHECK_THROWS_AS(parse_strategy("timed:0.5", p), StrategyFormatError);
    CHECK_THROWS_AS(parse_strategy("timed:0.5>3", p), StrategyFormatError);
    CHECK_THROWS_AS(parse_strategy("threshold:1>2@x1<3", p), StrategyFormatError);
    CHECK_THROWS_AS(parse_strategy("threshold:budget=2;1>1@x1<3", p), StrategyFormatError);
    CHECK_THROWS_AS(parse_strategy("threshold:budget=2;1>2@x2<3", p), StrategyFormatError);
    CHECK_THROWS_AS(parse_strategy("threshold:budget=1.5;1>2@x1<3", p), StrategyFormatError);
    const auto s = parse_strategy("threshold:budget=5;1>2@x1<3.5;2>1@x1>4.5", p);
    const auto* t = dynamic_cast<const ThresholdStrategy*>(s.get());
    REQUIRE(t);
    CHECK(t->budget() == 5);
    REQUIRE(t->rules().size() == 2);
    CHECK_FALSE(t->rules()[0].above);
    CHECK(t->rules()[1].level == 4.5);
}

TEST_CASE("random threshold strategies stay inside the grid and the budget range")
{
    const auto p = fixtures::benchmark();
    const auto g = fixtures::benchmark_grid();
    const auto a = random_threshold_strategies(p, g, 200, 17);
    const auto b = random_threshold_strategies(p, g, 200, 17);
    REQUIRE(a.size() == 200);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].describe() == b[k].describe());
        CHECK(a[k].budget() >= 1);
        CHECK(a[k].budget() <= 5);
        REQUIRE(a[k].rules().size() == 2);
        for (const auto& r : a[k].rules()) {
            CHECK(r.from != r.to);
            CHECK(r.level >= 0.995);
            CHECK(r.level <= 8.955);
        }
    }
}

TEST_CASE("pairwise summation")
{
    std::vector<double> xs(1000);
    std::iota(xs.begin(), xs.end(), 1.0);
    CHECK(pairwise_sum(xs) == 500500.0);
    CHECK(pairwise_sum(std::span<const double>{}) == 0.0);
    // 1 followed by many tiny terms: naive left-to-right loses them all
    std::vector<double> ys(1 << 16, 1e-17);
    ys[0] = 1.0;
    double naive = 0.0;
    for (double y : ys) naive += y;
    CHECK(naive == 1.0);
    CHECK(pairwise_sum(ys) > 1.0);
}

TEST_CASE("per-path CSV lists switch counts and payoffs")
{
    const auto p = negative_cost();
    const auto g = grid_1d(20, 1.0, -1.0, 1.0, 11);
    const auto st = simulate(p, policy_for(p, g), {.path_count = 3, .seed = 2});
    CHECK(st.paths_csv() == "path,switches,J\n0,1,0.5\n1,1,0.5\n2,1,0.5\n");
}
