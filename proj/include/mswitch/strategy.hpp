#ifndef MSWITCH_STRATEGY_HPP
#define MSWITCH_STRATEGY_HPP

#include "mswitch/grid.hpp"
#include "mswitch/problem.hpp"
#include "mswitch/tabulated.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mswitch {

/// Feedback switching rule on the grid: for every (time index, node, mode)
/// either CONTINUE (0) or SWITCH-TO(j) with j the 1-based target mode.
class SwitchingPolicy {
public:
    SwitchingPolicy() = default;
    SwitchingPolicy(GridSpec grid, std::size_t mode_count, double tol, std::string problem_hash, std::string source);

    Mode decision(std::size_t n, std::size_t node, Mode current) const
    {
        return target_[(n * modes_ + static_cast<std::size_t>(current - 1)) * nodes_ + node];
    }
    void set(std::size_t n, std::size_t node, Mode current, Mode target)
    {
        target_[(n * modes_ + static_cast<std::size_t>(current - 1)) * nodes_ + node] = target;
    }

    const GridSpec& grid() const { return grid_; }
    std::size_t mode_count() const { return modes_; }
    double tolerance() const { return tol_; }
    const std::string& problem_hash() const { return problem_hash_; }
    const std::string& source() const { return source_; }

    /// Number of (n, node) with a SWITCH decision in mode `current`.
    std::size_t switch_count(Mode current) const;

    /// CSV matrix: one row per time index, one column per node, entries 0 or
    /// the target mode. Header comment carries the grid description.
    std::string region_csv(Mode current) const;

private:
    GridSpec grid_;
    std::size_t modes_ = 0;
    std::size_t nodes_ = 0;
    double tol_ = 0.0;
    std::string problem_hash_;
    std::string source_;
    std::vector<Mode> target_;
};

/// SWITCH-TO(argmax_j -g_ij + V_j) where V_i <= that max + tol, ties to the
/// smallest j; CONTINUE otherwise and always at the terminal slice.
SwitchingPolicy extract_policy(const ValueField& v, const TabulatedProblem& tab, double tol);
SwitchingPolicy extract_policy(const ValueField& v, const SwitchingProblem& p, double tol);

struct SwitchEvent {
    double time = 0.0;
    Mode from = 1;
    Mode to = 1;
    double cost = 0.0;
};

struct PathRecord {
    std::vector<std::vector<double>> states;  // only when requested
    std::vector<SwitchEvent> switches;
    double profit = 0.0;
    double costs = 0.0;
    double J = 0.0;  // profit - costs
    bool aborted = false;
    std::size_t negative_cost_switches = 0;
};

struct SimulationOptions {
    std::size_t path_count = 1;
    std::uint64_t seed = 0;
    /// Euler substeps per grid interval; decisions stay on grid times.
    std::size_t substeps = 1;
    bool keep_states = false;
};

struct StrategyStats {
    std::size_t path_count = 0;
    std::size_t completed = 0;
    double mean_J = 0.0;
    double std_error = 0.0;
    double sample_std = 0.0;
    double mean_profit = 0.0;
    double mean_cost = 0.0;
    std::map<std::size_t, std::size_t> switch_histogram;
    std::map<std::size_t, std::size_t> negative_switch_histogram;
    std::size_t guard_trips = 0;
    bool assumption_suspect = false;
    std::string label;
    /// Per-path (switch count, J); NaN J for aborted paths.
    std::vector<std::pair<std::size_t, double>> per_path;

    std::string to_text() const;
    std::string paths_csv() const;
};

/// Something that decides at grid time index n. Returns 0 to continue or the
/// 1-based target mode. `switches` is the number of switches so far on the path.
class Strategy {
public:
    virtual ~Strategy() = default;
    virtual Mode decide(std::size_t n, double t, std::span<const double> x, Mode current,
                        std::size_t switches) const = 0;
    /// Whether several switches may follow one another at a single decision time.
    virtual bool chains() const { return false; }
    virtual std::string describe() const = 0;
};

/// Nearest-node lookup into an extracted policy.
class PolicyStrategy final : public Strategy {
public:
    explicit PolicyStrategy(const SwitchingPolicy& policy) : policy_(policy) {}
    Mode decide(std::size_t n, double t, std::span<const double> x, Mode current, std::size_t switches) const override;
    bool chains() const override { return true; }
    std::string describe() const override { return "optimal:" + policy_.source(); }

private:
    const SwitchingPolicy& policy_;
};

struct TimedRule {
    double time = 0.0;
    Mode to = 1;
};

/// Switch to `to` at the first grid time >= `time`, rules taken in order.
class TimedStrategy final : public Strategy {
public:
    explicit TimedStrategy(std::vector<TimedRule> rules);
    Mode decide(std::size_t n, double t, std::span<const double> x, Mode current, std::size_t switches) const override;
    std::string describe() const override;
    const std::vector<TimedRule>& rules() const { return rules_; }

private:
    std::vector<TimedRule> rules_;
};

struct ThresholdRule {
    Mode from = 1;
    Mode to = 2;
    std::size_t axis = 0;  // 0-based state component
    bool above = true;     // fire when x[axis] > level (else when x[axis] < level)
    double level = 0.0;
};

/// First matching rule fires while the switch budget lasts.
class ThresholdStrategy final : public Strategy {
public:
    ThresholdStrategy(std::vector<ThresholdRule> rules, std::size_t budget);
    Mode decide(std::size_t n, double t, std::span<const double> x, Mode current, std::size_t switches) const override;
    std::string describe() const override;
    const std::vector<ThresholdRule>& rules() const { return rules_; }
    std::size_t budget() const { return budget_; }

private:
    std::vector<ThresholdRule> rules_;
    std::size_t budget_;
};

class StrategyFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// `never`, `timed:0>2,0.5>1` or `threshold:budget=5;1>2@x1<3.5;2>1@x1>4.5`.
std::unique_ptr<Strategy> parse_strategy(const std::string& text, const SwitchingProblem& p);

/// Threshold strategies with one rule per mode, uniform levels over the
/// central 80% of the grid and budgets in 1..5.
std::vector<ThresholdStrategy> random_threshold_strategies(const SwitchingProblem& p, const GridSpec& grid,
                                                           std::size_t count, std::uint64_t seed);

/// Runs one Euler-Maruyama path. Decisions at grid times, costs charged at the
/// simulated state before the next increment.
PathRecord simulate_path(const SwitchingProblem& p, const GridSpec& grid, const Strategy& strategy,
                         std::uint64_t seed, std::size_t path_index, std::size_t substeps, bool keep_states);

StrategyStats simulate(const SwitchingProblem& p, const GridSpec& grid, const Strategy& strategy,
                       const SimulationOptions& opts);

inline StrategyStats simulate(const SwitchingProblem& p, const SwitchingPolicy& policy, const SimulationOptions& opts)
{
    return simulate(p, policy.grid(), PolicyStrategy(policy), opts);
}

inline StrategyStats evaluate_fixed_strategy(const SwitchingProblem& p, const GridSpec& grid,
                                             const Strategy& strategy, const SimulationOptions& opts)
{
    return simulate(p, grid, strategy, opts);
}

/// Seed for path `index` of a run seeded with `seed`.
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index);

/// Pairwise summation in a fixed tree order.
double pairwise_sum(std::span<const double> xs);

}  // namespace mswitch

#endif  // MSWITCH_STRATEGY_HPP
