#ifndef MSWITCH_TABULATED_HPP
#define MSWITCH_TABULATED_HPP

#include "mswitch/grid.hpp"
#include "mswitch/problem.hpp"

#include <cstddef>
#include <vector>

namespace mswitch {

/// psi_i and g_ij evaluated once at every grid (t_n, x_node). Both solvers and
/// the policy extractor read from here so they see bitwise-identical data.
class TabulatedProblem {
public:
    TabulatedProblem(const SwitchingProblem& p, const GridSpec& grid);

    double profit(std::size_t mode, std::size_t n, std::size_t node) const
    {
        return profit_[(mode * (steps_ + 1) + n) * nodes_ + node];
    }
    /// Zero on the diagonal.
    double cost(std::size_t from, std::size_t to, std::size_t n, std::size_t node) const
    {
        return cost_[((from * modes_ + to) * (steps_ + 1) + n) * nodes_ + node];
    }

    std::size_t mode_count() const { return modes_; }
    const GridSpec& grid() const { return grid_; }
    /// max |psi_i| over the grid.
    double profit_sup() const { return profit_sup_; }

private:
    GridSpec grid_;
    std::size_t modes_;
    std::size_t steps_;
    std::size_t nodes_;
    std::vector<double> profit_;
    std::vector<double> cost_;
    double profit_sup_ = 0.0;
};

/// Every (t_n, x_node) of the grid, terminal slice included.
std::vector<SamplePoint> grid_samples(const GridSpec& grid);

/// Largest violation of v_i >= max_{j != i}(-g_ij + v_j) over modes, nodes and
/// t < T. Zero when the inequality holds everywhere.
double obstacle_violation(const ValueField& v, const TabulatedProblem& tab);

/// max |v_i(T, .)|.
double terminal_sup(const ValueField& v);

}  // namespace mswitch

#endif  // MSWITCH_TABULATED_HPP
