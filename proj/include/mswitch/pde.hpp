#ifndef MSWITCH_PDE_HPP
#define MSWITCH_PDE_HPP

#include "mswitch/grid.hpp"
#include "mswitch/problem.hpp"
#include "mswitch/tabulated.hpp"

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mswitch {

struct GeneratorEntry {
    std::size_t column = 0;
    double coeff = 0.0;
};

/// Discretised generator  A v = 1/2 tr(sigma sigma^T D^2 v) + <b, Dv>  on the
/// grid: central second differences; central first differences where the
/// diffusion keeps both neighbour weights non-negative, upwind elsewhere; a
/// zero-curvature closure on the boundary (diffusion dropped there, drift kept
/// one-sided only when it points into the domain).
class DiscreteGenerator {
public:
    const GridSpec& grid() const { return grid_; }

    /// Off-diagonal entries of row `node` for the step starting at t_n.
    std::span<const GeneratorEntry> off_diagonal(std::size_t n, std::size_t node) const;
    double diagonal(std::size_t n, std::size_t node) const;

    /// (A v)(node) at time index n.
    double apply(std::size_t n, std::size_t node, std::span<const double> v) const;

    /// Smallest off-diagonal coefficient seen at assembly (>= 0 for a monotone scheme).
    double min_off_diagonal() const { return min_off_; }
    /// Largest diagonal coefficient seen at assembly (<= 0 for a monotone scheme).
    double max_diagonal() const { return max_diag_; }
    /// Largest spacing for which every drift row could be differenced centrally
    /// (min over nodes of a_dd / |b_d|); infinity without drift.
    double max_central_dx() const { return max_central_dx_; }
    std::size_t central_rows() const { return central_rows_; }
    std::size_t upwind_rows() const { return upwind_rows_; }

private:
    friend DiscreteGenerator assemble(const SwitchingProblem&, const GridSpec&);

    std::size_t slice_of(std::size_t n) const { return slices_ == 1 ? 0 : n; }

    GridSpec grid_;
    std::size_t slices_ = 0;
    std::size_t nodes_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<GeneratorEntry> entries_;
    std::vector<double> diag_;
    double min_off_ = 0.0;
    double max_diag_ = 0.0;
    double max_central_dx_ = 0.0;
    std::size_t central_rows_ = 0;
    std::size_t upwind_rows_ = 0;
};

/// Raised when a 2-D cross-diffusion term cannot be discretised monotonically
/// on the grid.
class MonotonicityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

DiscreteGenerator assemble(const SwitchingProblem& p, const GridSpec& grid);

struct PdeOptions {
    /// 0 means m * node_count.
    std::size_t max_howard_iterations = 0;
    /// CONTINUE is kept when no switch residual beats it by more than this.
    double tie_tol = 1e-12;
};

struct PdeResult {
    ValueField field;
    /// Howard iterations per time index (terminal slice is 0).
    std::vector<std::size_t> howard_iterations;

    std::string howard_log() const;
};

class PdeSolverError : public std::runtime_error {
public:
    PdeSolverError(const std::string& what, std::size_t time_index)
        : std::runtime_error(what), time_index_(time_index)
    {}
    std::size_t time_index() const { return time_index_; }

private:
    std::size_t time_index_;
};

/// Backward implicit Euler for the coupled obstacle system
///
///   min( v_i - max_{j != i}(-g_ij + v_j),  (v_i - v_i^{n+1})/dt - A v_i - s_i ) = 0,
///   s_i = psi_i - (dt/2) A psi_i
///
/// with all modes solved monolithically at each slice by policy iteration.
/// The source correction makes the running-profit quadrature second order.
PdeResult solve_system(const SwitchingProblem& p, const DiscreteGenerator& gen, const TabulatedProblem& tab,
                       const PdeOptions& opts = {});

/// max over modes, nodes and t < T of min(obstacle gap, |scaled PDE residual|).
/// Near zero for a solution of the discrete complementarity system.
double complementarity_residual(const DiscreteGenerator& gen, const TabulatedProblem& tab, const ValueField& v);

}  // namespace mswitch

#endif  // MSWITCH_PDE_HPP
