#include "mswitch/problem.hpp"

#include "mswitch/text.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mswitch {

void SwitchingProblem::check_shape() const
{
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        fail("horizon must be positive and finite");
    }
    if (state_dim == 0 || brownian_dim == 0 || mode_count == 0) {
        fail("state_dim, brownian_dim and mode_count must be positive");
    }
    if (drift.size() != state_dim) {
        fail("drift needs " + std::to_string(state_dim) + " components");
    }
    if (vol.size() != state_dim ||
        std::any_of(vol.begin(), vol.end(), [&](const auto& row) { return row.size() != brownian_dim; })) {
        fail("vol must be " + std::to_string(state_dim) + " x " + std::to_string(brownian_dim));
    }
    if (profit.size() != mode_count) {
        fail("profit needs " + std::to_string(mode_count) + " entries");
    }
    if (cost.size() != mode_count ||
        std::any_of(cost.begin(), cost.end(), [&](const auto& row) { return row.size() != mode_count; })) {
        fail("cost must be " + std::to_string(mode_count) + " x " + std::to_string(mode_count));
    }
    if (initial_mode < 1 || initial_mode > static_cast<Mode>(mode_count)) {
        fail("initial_mode out of range [1, " + std::to_string(mode_count) + "]");
    }
    if (x0.size() != state_dim) {
        fail("x0 has dimension " + std::to_string(x0.size()) + ", expected " + std::to_string(state_dim));
    }
    if (neg_cost_bound < 0) {
        fail("neg_cost_bound must be non-negative");
    }
}

double SwitchingProblem::profit_rate(Mode i, double t, std::span<const double> x) const
{
    return profit.at(static_cast<std::size_t>(i - 1)).eval(t, x);
}

double SwitchingProblem::switch_cost(Mode i, Mode j, double t, std::span<const double> x) const
{
    if (i == j) {
        return 0.0;
    }
    return cost.at(static_cast<std::size_t>(i - 1)).at(static_cast<std::size_t>(j - 1)).eval(t, x);
}

std::vector<double> SwitchingProblem::covariance(double t, std::span<const double> x) const
{
    const std::size_t k = state_dim;
    std::vector<double> s(k * brownian_dim);
    for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c < brownian_dim; ++c) {
            s[r * brownian_dim + c] = vol[r][c].eval(t, x);
        }
    }
    std::vector<double> a(k * k, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t l = 0; l < brownian_dim; ++l) {
                acc += s[r * brownian_dim + l] * s[c * brownian_dim + l];
            }
            a[r * k + c] = acc;
        }
    }
    return a;
}

std::vector<double> SwitchingProblem::drift_at(double t, std::span<const double> x) const
{
    std::vector<double> b(state_dim);
    for (std::size_t r = 0; r < state_dim; ++r) {
        b[r] = drift[r].eval(t, x);
    }
    return b;
}

std::string SwitchingProblem::canonical_text() const
{
    std::ostringstream os;
    os << "horizon=" << format_double(horizon) << '\n'
       << "state_dim=" << state_dim << '\n'
       << "brownian_dim=" << brownian_dim << '\n'
       << "modes=" << mode_count << '\n';
    for (std::size_t r = 0; r < drift.size(); ++r) {
        os << "drift." << r + 1 << '=' << drift[r].to_string() << '\n';
    }
    for (std::size_t r = 0; r < vol.size(); ++r) {
        for (std::size_t c = 0; c < vol[r].size(); ++c) {
            os << "vol." << r + 1 << '.' << c + 1 << '=' << vol[r][c].to_string() << '\n';
        }
    }
    for (std::size_t i = 0; i < profit.size(); ++i) {
        os << "profit." << i + 1 << '=' << profit[i].to_string() << '\n';
    }
    for (std::size_t i = 0; i < cost.size(); ++i) {
        for (std::size_t j = 0; j < cost[i].size(); ++j) {
            os << "cost." << i + 1 << '.' << j + 1 << '=' << cost[i][j].to_string() << '\n';
        }
    }
    os << "initial_mode=" << initial_mode << '\n'
       << "x0=" << join_doubles(x0) << '\n'
       << "neg_cost_bound=" << neg_cost_bound << '\n';
    return os.str();
}

std::string SwitchingProblem::hash() const
{
    return hex64(fnv1a64(canonical_text()));
}

std::vector<std::vector<std::size_t>> simple_cycles(std::size_t mode_count)
{
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> path;
    std::vector<bool> used(mode_count, false);
    std::function<void(std::size_t)> extend = [&](std::size_t start) {
        if (path.size() >= 2) {
            out.push_back(path);
        }
        for (std::size_t next = start + 1; next < mode_count; ++next) {
            if (used[next]) {
                continue;
            }
            used[next] = true;
            path.push_back(next);
            extend(start);
            path.pop_back();
            used[next] = false;
        }
    };
    for (std::size_t s = 0; s < mode_count; ++s) {
        path = {s};
        used.assign(mode_count, false);
        used[s] = true;
        extend(s);
    }
    return out;
}

namespace {

std::string describe_point(const SamplePoint& sp)
{
    return "t=" + format_double(sp.t) + " x=(" + join_doubles(sp.x) + ")";
}

std::string describe_cycle(const std::vector<std::size_t>& cyc)
{
    std::string s;
    for (std::size_t m : cyc) {
        s += std::to_string(m + 1) + "->";
    }
    return s + std::to_string(cyc.front() + 1);
}

}  // namespace

ValidationReport validate(const SwitchingProblem& p, std::span<const SamplePoint> samples)
{
    p.check_shape();
    if (samples.empty()) {
        throw std::invalid_argument("validate: sample set is empty");
    }
    for (const auto& sp : samples) {
        if (sp.x.size() != p.state_dim) {
            throw std::invalid_argument("validate: sample point " + describe_point(sp) + " has dimension " +
                                        std::to_string(sp.x.size()) + ", expected " +
                                        std::to_string(p.state_dim));
        }
    }

    const std::size_t m = p.mode_count;
    const auto cycles = simple_cycles(m);
    constexpr double inf = std::numeric_limits<double>::infinity();

    ValidationReport rep;
    rep.sample_count = samples.size();
    rep.min_pair_sum = inf;
    rep.min_cycle_sum = inf;

    CheckResult diag{"diagonal", true, 0.0, {}};
    CheckResult pair{"pair_sum", true, inf, {}};
    CheckResult loop{"no_free_loop", true, inf, {}};
    CheckResult term{"terminal_zero", true, 0.0, {}};
    CheckResult bound{"neg_pair_bound", true, 0.0, {}};

    std::vector<double> g(m * m);
    std::vector<bool> ever_negative(m * m, false);
    std::vector<std::string> negative_where(m * m);

    for (const auto& sp : samples) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                g[i * m + j] = p.cost[i][j].eval(sp.t, sp.x);
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            const double gii = g[i * m + i];
            if (std::abs(gii) > diag.margin) {
                diag.margin = std::abs(gii);
            }
            if (gii != 0.0 && diag.passed) {
                diag.passed = false;
                diag.witness = describe_point(sp) + " g_" + std::to_string(i + 1) + std::to_string(i + 1) +
                               "=" + format_double(gii);
            }
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j) {
                    continue;
                }
                if (g[i * m + j] < 0.0 && !ever_negative[i * m + j]) {
                    ever_negative[i * m + j] = true;
                    negative_where[i * m + j] = describe_point(sp);
                }
                if (j > i) {
                    const double s = g[i * m + j] + g[j * m + i];
                    if (s < pair.margin) {
                        pair.margin = s;
                        if (!(s > 0.0)) {
                            pair.passed = false;
                            pair.witness = describe_point(sp) + " pair " + std::to_string(i + 1) + "," +
                                           std::to_string(j + 1) + " sum=" + format_double(s);
                        }
                    }
                }
            }
        }
        for (const auto& cyc : cycles) {
            double s = 0.0;
            for (std::size_t a = 0; a < cyc.size(); ++a) {
                s += g[cyc[a] * m + cyc[(a + 1) % cyc.size()]];
            }
            if (s < loop.margin) {
                loop.margin = s;
                rep.min_cycle.clear();
                for (std::size_t v : cyc) {
                    rep.min_cycle.push_back(static_cast<int>(v) + 1);
                }
                if (!(s > 0.0)) {
                    loop.passed = false;
                    loop.witness = describe_point(sp) + " cycle " + describe_cycle(cyc) + " sum=" + format_double(s);
                }
            }
        }
    }

    for (const auto& sp : samples) {
        if (sp.t != p.horizon) {
            continue;
        }
        ++rep.terminal_sample_count;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j || !ever_negative[i * m + j]) {
                    continue;
                }
                const double v = p.cost[i][j].eval(sp.t, sp.x);
                term.margin = std::max(term.margin, std::abs(v));
                if (v != 0.0 && term.passed) {
                    term.passed = false;
                    term.witness = describe_point(sp) + " g_" + std::to_string(i + 1) + std::to_string(j + 1) +
                                   "=" + format_double(v) + " (negative at " + negative_where[i * m + j] + ")";
                }
            }
        }
    }
    if (rep.terminal_sample_count == 0) {
        throw std::invalid_argument("validate: sample set contains no terminal (t == T) points");
    }

    rep.negative_pair_count =
        static_cast<std::size_t>(std::count(ever_negative.begin(), ever_negative.end(), true));
    bound.margin = static_cast<double>(rep.negative_pair_count);
    if (rep.negative_pair_count > static_cast<std::size_t>(p.neg_cost_bound)) {
        bound.passed = false;
        std::string pairs;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (ever_negative[i * m + j]) {
                    pairs += (pairs.empty() ? "" : " ") + std::to_string(i + 1) + "->" + std::to_string(j + 1);
                }
            }
        }
        bound.witness = std::to_string(rep.negative_pair_count) + " negative pairs (" + pairs + ") > K=" +
                        std::to_string(p.neg_cost_bound);
    }

    rep.min_pair_sum = pair.margin;
    rep.min_cycle_sum = loop.margin;
    rep.checks = {diag, pair, loop, term, bound};
    return rep;
}

bool ValidationReport::passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const CheckResult* ValidationReport::find(const std::string& name) const
{
    for (const auto& c : checks) {
        if (c.name == name) {
            return &c;
        }
    }
    return nullptr;
}

std::string ValidationReport::to_text() const
{
    std::ostringstream os;
    os << "scope = sampled points only (" << sample_count << " samples, " << terminal_sample_count
       << " terminal); polynomial growth not checked\n";
    os << "passed = " << (passed() ? "true" : "false") << '\n';
    for (const auto& c : checks) {
        os << "check." << c.name << " = " << (c.passed ? "pass" : "fail") << '\n';
        os << "check." << c.name << ".margin = " << format_double(c.margin) << '\n';
        if (!c.witness.empty()) {
            os << "check." << c.name << ".witness = " << c.witness << '\n';
        }
    }
    os << "min_pair_sum = " << format_double(min_pair_sum) << '\n';
    os << "min_cycle_sum = " << format_double(min_cycle_sum) << '\n';
    if (!min_cycle.empty()) {
        os << "min_cycle = ";
        for (int v : min_cycle) {
            os << v << "->";
        }
        os << min_cycle.front() << '\n';
    }
    os << "negative_pair_count = " << negative_pair_count << '\n';
    return os.str();
}

}  // namespace mswitch
