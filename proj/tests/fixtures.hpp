#ifndef MSWITCH_TEST_FIXTURES_HPP
#define MSWITCH_TEST_FIXTURES_HPP

#include "mswitch/grid.hpp"
#include "mswitch/problem.hpp"

#include <string>
#include <vector>

namespace fixtures {

using mswitch::Expr;

/// One-dimensional problem; costs given as an m x m matrix of expressions,
/// an empty string meaning 0.
inline mswitch::SwitchingProblem problem_1d(double horizon, const std::string& drift, const std::string& vol,
                                            const std::vector<std::string>& profit,
                                            const std::vector<std::vector<std::string>>& cost, double x0,
                                            int neg_cost_bound = 0)
{
    mswitch::SwitchingProblem p;
    p.horizon = horizon;
    p.state_dim = 1;
    p.brownian_dim = 1;
    p.mode_count = profit.size();
    p.drift = {Expr::parse(drift, 1)};
    p.vol = {{Expr::parse(vol, 1)}};
    for (const auto& s : profit) {
        p.profit.push_back(Expr::parse(s, 1));
    }
    p.cost.assign(p.mode_count, std::vector<Expr>(p.mode_count, Expr()));
    for (std::size_t i = 0; i < cost.size(); ++i) {
        for (std::size_t j = 0; j < cost[i].size(); ++j) {
            if (!cost[i][j].empty()) {
                p.cost[i][j] = Expr::parse(cost[i][j], 1);
            }
        }
    }
    p.x0 = {x0};
    p.neg_cost_bound = neg_cost_bound;
    p.check_shape();
    return p;
}

inline mswitch::GridSpec grid_1d(std::size_t steps, double horizon, double lo, double hi, std::size_t nodes)
{
    mswitch::GridSpec g;
    g.steps = steps;
    g.horizon = horizon;
    g.axes = {{lo, hi, nodes}};
    g.check();
    return g;
}

/// The two-mode geometric Brownian motion problem used throughout.
inline mswitch::SwitchingProblem benchmark()
{
    return problem_1d(1.0, "0.05*x1", "0.2*x1", {"x1 - 4", "2 - 0.5*x1"}, {{"", "0.3"}, {"0.3", ""}}, 4.0);
}

/// [0, 9.95] with 200 nodes puts x0 = 4 on node 80.
inline mswitch::GridSpec benchmark_grid() { return grid_1d(200, 1.0, 0.0, 9.95, 200); }

/// Both spacings halved; x0 on node 160.
inline mswitch::GridSpec benchmark_grid_halved() { return grid_1d(400, 1.0, 0.0, 9.95, 399); }

}  // namespace fixtures

#endif  // MSWITCH_TEST_FIXTURES_HPP
