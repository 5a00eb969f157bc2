#include "mswitch/tabulated.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mswitch {

TabulatedProblem::TabulatedProblem(const SwitchingProblem& p, const GridSpec& grid)
    : grid_(grid), modes_(p.mode_count), steps_(grid.steps), nodes_(grid.node_count())
{
    p.check_shape();
    grid.check();
    if (grid.dim() != p.state_dim) {
        throw std::invalid_argument("grid dimension " + std::to_string(grid.dim()) +
                                    " does not match state_dim " + std::to_string(p.state_dim));
    }
    if (grid.horizon != p.horizon) {
        throw std::invalid_argument("grid horizon does not match problem horizon");
    }
    profit_.resize(modes_ * (steps_ + 1) * nodes_);
    cost_.assign(modes_ * modes_ * (steps_ + 1) * nodes_, 0.0);
    for (std::size_t node = 0; node < nodes_; ++node) {
        const auto x = grid.coords(node);
        for (std::size_t n = 0; n <= steps_; ++n) {
            const double t = grid.time(n);
            for (std::size_t i = 0; i < modes_; ++i) {
                const double psi = p.profit[i].eval(t, x);
                profit_[(i * (steps_ + 1) + n) * nodes_ + node] = psi;
                profit_sup_ = std::max(profit_sup_, std::abs(psi));
                for (std::size_t j = 0; j < modes_; ++j) {
                    if (i != j) {
                        cost_[((i * modes_ + j) * (steps_ + 1) + n) * nodes_ + node] = p.cost[i][j].eval(t, x);
                    }
                }
            }
        }
    }
}

std::vector<SamplePoint> grid_samples(const GridSpec& grid)
{
    std::vector<SamplePoint> out;
    out.reserve((grid.steps + 1) * grid.node_count());
    for (std::size_t n = 0; n <= grid.steps; ++n) {
        for (std::size_t node = 0; node < grid.node_count(); ++node) {
            out.push_back({grid.time(n), grid.coords(node)});
        }
    }
    return out;
}

double obstacle_violation(const ValueField& v, const TabulatedProblem& tab)
{
    const std::size_t m = v.mode_count();
    double worst = 0.0;
    for (std::size_t n = 0; n < v.grid().steps; ++n) {
        for (std::size_t node = 0; node < v.node_count(); ++node) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    if (i == j) {
                        continue;
                    }
                    const double gap = (-tab.cost(i, j, n, node) + v.at(j, n, node)) - v.at(i, n, node);
                    worst = std::max(worst, gap);
                }
            }
        }
    }
    return worst;
}

double terminal_sup(const ValueField& v)
{
    double s = 0.0;
    for (std::size_t i = 0; i < v.mode_count(); ++i) {
        for (double x : v.slice(i, v.grid().steps)) {
            s = std::max(s, std::abs(x));
        }
    }
    return s;
}

}  // namespace mswitch
