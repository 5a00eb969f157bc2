#ifndef MSWITCH_PROBLEM_HPP
#define MSWITCH_PROBLEM_HPP

#include "mswitch/expr.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mswitch {

/// Modes are 1-based in every public interface, matching the configuration
/// file and the report formats. Internally arrays are indexed 0..m-1.
using Mode = int;

/// Finite-horizon m-mode switching problem.
///
///   dX = b(t,X) dt + sigma(t,X) dB,   X_0 = x0,  B d-dimensional
///   J  = E[ int_0^T psi_{u_s}(s,X_s) ds - sum_n g_{u_{n-1} u_n}(tau_n, X_{tau_n}) ]
///
/// The diffusion does not depend on the mode. Costs may be negative as long as
/// validate() accepts them.
struct SwitchingProblem {
    double horizon = 1.0;
    std::size_t state_dim = 1;
    std::size_t brownian_dim = 1;
    std::size_t mode_count = 1;
    std::vector<Expr> drift;                 // k
    std::vector<std::vector<Expr>> vol;      // k x d
    std::vector<Expr> profit;                // m
    std::vector<std::vector<Expr>> cost;     // m x m; diagonal checked by validate()
    Mode initial_mode = 1;
    std::vector<double> x0;
    int neg_cost_bound = 0;

    /// Throws std::invalid_argument on shape errors (sizes, mode range, x0 dim).
    void check_shape() const;

    double profit_rate(Mode i, double t, std::span<const double> x) const;
    /// Zero on the diagonal without evaluating the expression.
    double switch_cost(Mode i, Mode j, double t, std::span<const double> x) const;

    /// sigma sigma^T at (t, x), row-major k x k.
    std::vector<double> covariance(double t, std::span<const double> x) const;
    std::vector<double> drift_at(double t, std::span<const double> x) const;

    /// Stable 64-bit FNV-1a hash of the canonical problem text, as 16 hex digits.
    std::string hash() const;
    std::string canonical_text() const;
};

struct SamplePoint {
    double t = 0.0;
    std::vector<double> x;
};

struct CheckResult {
    std::string name;
    bool passed = true;
    /// Tightest observed value of the checked quantity (meaning depends on the check).
    double margin = 0.0;
    /// Empty when passed.
    std::string witness;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    std::size_t sample_count = 0;
    std::size_t terminal_sample_count = 0;
    double min_pair_sum = 0.0;        // min over samples, i != j, of g_ij + g_ji
    double min_cycle_sum = 0.0;       // min over samples and simple cycles
    std::vector<int> min_cycle;       // 1-based modes of the tightest cycle
    std::size_t negative_pair_count = 0;

    bool passed() const;
    const CheckResult* find(const std::string& name) const;
    /// Flat `key = value` text including the sampled-scope statement.
    std::string to_text() const;
};

/// Checks the cost-structure assumptions on a finite sample of (t, x):
///   diagonal     g_ii == 0
///   pair_sum     g_ij + g_ji > 0
///   no_free_loop every simple cycle has positive total cost
///   terminal_zero  a pair that is ever negative vanishes at t == T
///   neg_pair_bound number of ever-negative pairs <= K
/// Assumptions can only fail on sampled points; growth conditions are not checked.
ValidationReport validate(const SwitchingProblem& p, std::span<const SamplePoint> samples);

/// Every simple cycle over distinct modes, each listed once starting from its
/// smallest index (0-based). Length >= 2.
std::vector<std::vector<std::size_t>> simple_cycles(std::size_t mode_count);

}  // namespace mswitch

#endif  // MSWITCH_PROBLEM_HPP
