#ifndef MSWITCH_LATTICE_HPP
#define MSWITCH_LATTICE_HPP

#include "mswitch/grid.hpp"
#include "mswitch/problem.hpp"
#include "mswitch/tabulated.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mswitch {

struct Transition {
    std::size_t target = 0;
    double prob = 0.0;
};

enum class StencilKind : std::uint8_t {
    Exact,   // mean and covariance match b dt and sigma sigma^T dt
    Upwind,  // mean matches; covariance carries numerical diffusion H |b| dt
    Folded,  // some mass was folded back onto a boundary node
};

struct ChainOptions {
    /// Let a node jump k > 1 grid spacings when one spacing is too fine for
    /// the local variance. When false the build fails with a suggested dt.
    bool allow_wide_stencil = true;
    double consistency_tol = 1e-10;
};

class ChainBuildError : public std::runtime_error {
public:
    ChainBuildError(const std::string& what, std::size_t time_index, std::size_t node, double suggested_dt)
        : std::runtime_error(what), time_index_(time_index), node_(node), suggested_dt_(suggested_dt)
    {}
    std::size_t time_index() const { return time_index_; }
    std::size_t node() const { return node_; }
    /// Largest dt that would make a nearest-neighbour stencil valid at the node, 0 if none.
    double suggested_dt() const { return suggested_dt_; }

private:
    std::size_t time_index_;
    std::size_t node_;
    double suggested_dt_;
};

/// Controlled-free Markov chain on the grid, locally consistent with
/// dX = b dt + sigma dB. One stencil per (time index, node); when b and sigma
/// do not depend on t all time indices share a single slice.
class MarkovChainApprox {
public:
    const GridSpec& grid() const { return grid_; }

    std::span<const Transition> stencil(std::size_t n, std::size_t node) const;
    StencilKind kind(std::size_t n, std::size_t node) const;

    /// out[node] = sum_k p_k next[target_k], for the step t_n -> t_{n+1}.
    void expectation(std::size_t n, std::span<const double> next, std::span<double> out) const;

    bool time_homogeneous() const { return slices_ == 1; }
    std::size_t max_stride() const { return max_stride_; }
    std::size_t count(StencilKind k) const;

private:
    friend MarkovChainApprox build_chain(const SwitchingProblem&, const GridSpec&, const ChainOptions&);

    std::size_t slice_of(std::size_t n) const { return slices_ == 1 ? 0 : n; }

    GridSpec grid_;
    std::size_t slices_ = 0;
    std::size_t nodes_ = 0;
    std::vector<std::size_t> offsets_;  // slices_ * nodes_ + 1
    std::vector<Transition> entries_;
    std::vector<StencilKind> kinds_;
    std::size_t max_stride_ = 1;
};

/// Builds the chain and audits every stencil: probabilities in [0,1], sums to
/// one within 1e-12, mean (and covariance for Exact stencils) within
/// consistency_tol * dt.
MarkovChainApprox build_chain(const SwitchingProblem& p, const GridSpec& grid, const ChainOptions& opts = {});

struct LevelRecord {
    std::size_t level = 0;
    double sup_increment = 0.0;
    /// Most negative node-wise increment; >= -1e-12 when monotone.
    double min_increment = 0.0;
    std::size_t sweeps = 0;
    double seconds = 0.0;
};

struct ConvergenceTrace {
    std::vector<LevelRecord> levels;
    /// Same-slice sweep counts of the coupled sweep, indexed by time index.
    std::vector<std::size_t> slice_sweeps;
    bool converged = false;
    double tolerance = 0.0;

    std::size_t max_slice_sweeps() const;
    std::string to_text() const;
};

/// Value with no switching allowed: v_i(t_n) = psi_i(t_n) dt + E[v_i(t_{n+1})].
ValueField solve_zero_switch(const MarkovChainApprox& chain, const SwitchingProblem& p, const TabulatedProblem& tab);

struct NSwitchResult {
    std::vector<ValueField> levels;  // levels[l] allows at most l switches
    ConvergenceTrace trace;
};

/// Level l: max of the obstacle built from level l-1 and the continuation of
/// level l itself. The terminal slice carries no obstacle.
NSwitchResult solve_n_switch(const MarkovChainApprox& chain, const SwitchingProblem& p, const TabulatedProblem& tab,
                             std::size_t n_max);

struct FixedPointOptions {
    /// Relative to 1 + sup|psi| T.
    double tol = 1e-8;
    std::size_t max_outer = 50;
    /// Also iterate n-switch levels and require agreement with the coupled sweep.
    bool verify_with_levels = false;
};

struct FixedPointResult {
    ValueField field;
    ConvergenceTrace trace;
    /// Only set when verify_with_levels: sup-node distance between the two routes.
    std::optional<double> level_discrepancy;
};

class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what, ConvergenceTrace trace)
        : std::runtime_error(what), trace_(std::move(trace))
    {}
    const ConvergenceTrace& trace() const { return trace_; }

private:
    ConvergenceTrace trace_;
};

/// A time slice needed more than m-1 improving sweeps: some cycle of switches
/// is free or profitable. The field is completed with sweeps capped at m and
/// returned for diagnostics.
class SwitchingLoopError : public std::runtime_error {
public:
    SwitchingLoopError(const std::string& what, ValueField field, ConvergenceTrace trace, std::size_t time_index)
        : std::runtime_error(what), field_(std::move(field)), trace_(std::move(trace)), time_index_(time_index)
    {}
    const ValueField& field() const { return field_; }
    const ConvergenceTrace& trace() const { return trace_; }
    /// Latest (largest) time index where the loop was detected.
    std::size_t time_index() const { return time_index_; }

private:
    ValueField field_;
    ConvergenceTrace trace_;
    std::size_t time_index_;
};

/// Coupled backward sweep for the fixed point of the switching system.
FixedPointResult solve_fixed_point(const MarkovChainApprox& chain, const SwitchingProblem& p,
                                   const TabulatedProblem& tab, const FixedPointOptions& opts = {});

/// Iterates n-switch levels until the normalised sup increment drops below tol.
/// Throws NonConvergenceError after max_outer levels.
FixedPointResult solve_fixed_point_by_levels(const MarkovChainApprox& chain, const SwitchingProblem& p,
                                             const TabulatedProblem& tab, const FixedPointOptions& opts = {});

/// E[int_0^T max_i |psi_i| ds] on the chain plus K times the largest sampled
/// |g_ij| among negative costs, per node at t = 0.
std::vector<double> value_upper_bound(const MarkovChainApprox& chain, const SwitchingProblem& p,
                                      const TabulatedProblem& tab);

}  // namespace mswitch

#endif  // MSWITCH_LATTICE_HPP
